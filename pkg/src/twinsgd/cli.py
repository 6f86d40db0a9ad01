"""``twinsgd`` command line: gen, train, predict, cv, compare, stability, bench."""

from __future__ import annotations

import argparse
import csv
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import model as model_io
from .data import (
    SamplingKind,
    SamplingMask,
    SamplingPolicy,
    gen_cross_planes,
    gen_gaussian_1d,
    load_dataset,
    minmax_scale,
    write_dataset,
)
from .experiments import (
    COMPARE_HEADER,
    ModelParams,
    bench,
    compare,
    cross_validate,
    derive_seed,
    fit,
    grid_search,
    stability,
)
from .kernel import KernelSpec, select_reference
from .oracle import DEFAULT_MAX_SAMPLES, OracleConfig
from .sgtsvm import TrainConfig

DEFAULT_MASK = "-1:0"


class CLIError(Exception):
    pass


def _positive_float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {s}")
    return v


def _positive_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {s}")
    return v


def _seed(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _interval(s: str) -> tuple[float, float]:
    lo, sep, hi = s.partition(":")
    try:
        lo_f, hi_f = float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {s!r}") from None
    if not sep or lo_f > hi_f:
        raise argparse.ArgumentTypeError(f"expected lo:hi with lo <= hi, got {s!r}")
    return lo_f, hi_f


def _tol_list(s: str) -> list[float]:
    return [_positive_float(x) for x in s.split(",") if x.strip()]


def _input_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CLIError(f"input file not found: {path}")
    return p


def _output_file(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.parent.exists():
        raise CLIError(f"output directory does not exist: {p.parent}")
    return p


def _mask(args) -> SamplingMask | None:
    if getattr(args, "mask", None) is None:
        return None
    lo, hi = args.mask
    return SamplingMask.interval(lo, hi, 1 if args.mask_class == "pos" else -1)


def _write_csv(path: Path | None, header, rows) -> None:
    fh = sys.stdout if path is None else path.open("w", encoding="utf-8", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    finally:
        if path is not None:
            fh.close()


def _load(args):
    data = load_dataset(_input_file(args.data), args.format, args.label_column)
    if getattr(args, "scale", False):
        (data,) = minmax_scale(data)
    return data


def _params(args) -> ModelParams:
    return ModelParams(
        algo=args.algo,
        c1=args.c1, c2=args.c2, c3=args.c3, c4=args.c4, c=args.c,
        kernel=args.kernel, mu=args.mu, reduced_size=args.reduced_size,
        tol=args.tol, max_iter=args.max_iter, sampling=args.sampling,
        with_bias=args.with_bias,
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    out = _output_file(args.out)
    if args.kind == "gaussian":
        data = gen_gaussian_1d(args.m_per_class, args.mean_sep, args.seed)
    else:
        data = gen_cross_planes(args.m_per_class, args.noise, args.seed, args.spread)
    write_dataset(data, out, args.format)
    print(f"wrote {data.m} samples (n={data.n}) to {out}")
    return 0


def cmd_train(args) -> int:
    out = _output_file(args.out)
    trace_path = _output_file(args.trace)
    data = _load(args)
    params = _params(args)
    mask = _mask(args)
    t0 = time.perf_counter()
    if params.algo == "sgtsvm":
        from .sgtsvm import train

        kernel = None
        if params.kernel == "gaussian":
            r = min(params.reduced_size, data.m)
            kernel = KernelSpec.gaussian(params.mu, select_reference(data, r, derive_seed(args.seed, 1)))
        cfg = TrainConfig(
            params.c1, params.c2, params.c3, params.c4, params.tol, params.max_iter,
            SamplingPolicy(SamplingKind(params.sampling), args.seed),
        )
        model, trace = train(data, cfg, kernel, mask=mask, trace_objectives=args.trace_objectives)
        converged = list(model.converged)
    else:
        from .pegasos import PegasosConfig, pegasos_train

        if params.kernel != "none":
            raise CLIError("the PEGASOS baseline is linear only")
        cfg = PegasosConfig(
            params.c, params.tol, params.max_iter, params.with_bias,
            SamplingPolicy(SamplingKind(params.sampling), args.seed),
        )
        model, trace = pegasos_train(data, cfg, mask=mask, trace_objectives=args.trace_objectives)
        converged = [model.converged]
    wall = time.perf_counter() - t0
    model_io.save(model, out)
    if trace_path is not None:
        trace.to_csv(trace_path)
    print(f"converged: {converged}")
    print(f"iterations: {model.meta['iterations']}")
    print(f"wall time: {wall:.3f} s")
    print(f"model written to {out}")
    return 0


def cmd_predict(args) -> int:
    m = model_io.load(_input_file(args.model))
    out = _output_file(args.out)
    data = _load(args)
    pred = m.predict(data.X)
    rows = [(i, int(y), int(p)) for i, (y, p) in enumerate(zip(data.y, pred))]
    if out is not None:
        _write_csv(out, ("index", "label", "prediction"), rows)
    met = model_io.evaluate(m, data)
    print(f"accuracy: {met.accuracy:.6f} (tp={met.tp} fn={met.fn} fp={met.fp} tn={met.tn})")
    return 0


def cmd_cv(args) -> int:
    out = _output_file(args.out)
    data = _load(args)
    params = _params(args)
    if args.grid:
        mu_grid = args.mu_grid or [2.0 ** i for i in range(-10, 0)]
        c_grid = args.c_grid or [2.0 ** i for i in range(-8, 2)]
        results = grid_search(data, args.folds, params, c_grid, mu_grid, args.seed)
        header = ("c1", "c2", "c3", "c4", "c", "mu", "mean", "std")
        rows = [
            (r.params.c1, r.params.c2, r.params.c3, r.params.c4, r.params.c, r.params.mu, r.mean, r.std)
            for r in results
        ]
        best = results[0]
        p = best.params
        if p.algo == "pegasos":
            print(f"best: c={p.c!r}")
        else:
            print(f"best: c1=c3={p.c1!r} c2=c4={p.c2!r}" + (f" mu={p.mu!r}" if p.kernel == "gaussian" else ""))
        print(f"accuracy: {100 * best.mean:.2f} +- {100 * best.std:.2f}")
    else:
        res = cross_validate(data, args.folds, params, args.seed)
        for i, a in enumerate(res.fold_accuracies):
            print(f"fold {i + 1}: {100 * a:.2f}")
        print(f"accuracy: {100 * res.mean:.2f} +- {100 * res.std:.2f}")
        header = ("fold", "accuracy")
        rows = [(i + 1, a) for i, a in enumerate(res.fold_accuracies)]
    if out is not None:
        _write_csv(out, header, rows)
    return 0


def cmd_compare(args) -> int:
    out = _output_file(args.out)
    data = _load(args)
    if data.m > args.oracle_max_samples:
        raise CLIError(
            f"{data.m} samples exceeds the oracle guard of {args.oracle_max_samples}; "
            "pass --oracle-max-samples to override"
        )
    kernel = None
    if args.kernel == "gaussian":
        r = min(args.reduced_size, data.m)
        kernel = KernelSpec.gaussian(args.mu, select_reference(data, r, derive_seed(args.seed, 1)))
    cfg = TrainConfig(
        args.c1, args.c2, args.c3, args.c4, args.tol, args.max_iter,
        SamplingPolicy(SamplingKind(args.sampling), args.seed),
    )
    rows = compare(data, cfg, kernel, OracleConfig(max_samples=args.oracle_max_samples))
    _write_csv(out, COMPARE_HEADER, rows)
    if out is not None:
        last = rows[-1]
        print(f"iterations: {last[0]}  f1={last[1]:.6g} (f1*={last[3]:.6g})  f2={last[2]:.6g} (f2*={last[4]:.6g})")
    return 0


def cmd_stability(args) -> int:
    out = _output_file(args.out)
    algos = ("sgtsvm", "pegasos") if args.algo == "both" else (args.algo,)
    records, summary = stability(
        runs=args.runs, m_per_class=args.m_per_class, test_per_class=args.test_per_class,
        mean_sep=args.mean_sep, iterations=args.iterations, algos=algos, c=args.c,
        mask=_mask(args), seed=args.seed, sampling=args.sampling, same_data=args.same_data,
    )
    for s in summary.values():
        print(
            f"{s.algo}: boundary {s.boundary_mean:+.4f} +- {s.boundary_std:.4f}; "
            f"accuracy mean {100 * s.accuracy_mean:.2f} in [{100 * s.accuracy_min:.2f}, {100 * s.accuracy_max:.2f}]"
        )
    if out is not None:
        _write_csv(out, ("run", "algo", "boundary", "accuracy"),
                   [(r.run, r.algo, r.boundary, r.accuracy) for r in records])
    return 0


def cmd_bench(args) -> int:
    out = _output_file(args.out)
    if args.data:
        data = _load(args)
    else:
        data = gen_gaussian_1d(args.m_per_class, args.mean_sep, args.seed)
    algos = ("sgtsvm", "pegasos") if args.algo == "both" else (args.algo,)
    recs = bench(data, args.tols, args.trials, algos, args.c, args.max_iter, args.seed, args.sampling)
    for tol in args.tols:
        parts = []
        for a in algos:
            sel = [r for r in recs if r.tol == tol and r.algo == a]
            parts.append(
                f"{a} iters {np.mean([r.iterations for r in sel]):.1f} time {np.mean([r.seconds for r in sel]):.4f}s"
            )
        print(f"tol {tol:g}: " + "; ".join(parts))
    if out is not None:
        _write_csv(out, ("trial", "tol", "algo", "iterations", "converged", "seconds"),
                   [(r.trial, r.tol, r.algo, r.iterations, int(r.converged), r.seconds) for r in recs])
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_data(p, required=True):
    p.add_argument("--data", required=required, help="dataset file (.csv or LIBSVM text)")
    p.add_argument("--format", choices=("auto", "csv", "libsvm"), default="auto")
    p.add_argument("--label-column", type=int, default=-1, help="CSV label column (default: last)")
    p.add_argument("--scale", action="store_true", help="min-max scale features to [0, 1]")


def _add_model(p):
    p.add_argument("--algo", choices=("sgtsvm", "pegasos"), default="sgtsvm")
    for name in ("c1", "c2", "c3", "c4"):
        p.add_argument(f"--{name}", type=_positive_float, default=0.1)
    p.add_argument("--c", type=_positive_float, default=0.1, help="PEGASOS penalty")
    p.add_argument("--with-bias", action="store_true", help="PEGASOS with a bias term")
    p.add_argument("--kernel", choices=("none", "gaussian"), default="none")
    p.add_argument("--mu", type=_positive_float, default=0.1, help="Gaussian kernel width")
    p.add_argument("--reduced-size", type=_positive_int, default=100)
    _add_train(p)


def _add_train(p):
    p.add_argument("--tol", type=_positive_float, default=1e-3)
    p.add_argument("--max-iter", type=_positive_int, default=1_000_000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--sampling", choices=("iid", "epoch", "lcm"), default="iid")


def _add_mask(p):
    p.add_argument("--mask", nargs="?", const=DEFAULT_MASK, type=_interval,
                   help=f"hide samples with feature 1 in lo:hi from the sampler (default {DEFAULT_MASK})")
    p.add_argument("--mask-class", choices=("pos", "neg"), default="neg")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twinsgd", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--kind", choices=("gaussian", "cross-planes"), default="gaussian")
    p.add_argument("--m-per-class", type=_positive_int, default=5000)
    p.add_argument("--mean-sep", type=float, default=2.0)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--spread", type=_positive_float, default=10.0)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--format", choices=("auto", "csv", "libsvm"), default="auto")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model")
    _add_data(p)
    _add_model(p)
    _add_mask(p)
    p.add_argument("--trace", help="write the per-iteration trace CSV here")
    p.add_argument("--trace-objectives", action="store_true", help="also trace full objectives (slow)")
    p.add_argument("--out", required=True, help="model file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict with a saved model")
    _add_data(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="predictions CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="k-fold cross-validation, optionally over a grid")
    _add_data(p)
    _add_model(p)
    p.add_argument("--folds", type=_positive_int, default=10)
    p.add_argument("--grid", action="store_true", help="grid search with c1=c3, c2=c4")
    p.add_argument("--c-grid", type=_tol_list, help="comma-separated penalty grid")
    p.add_argument("--mu-grid", type=_tol_list, help="comma-separated kernel width grid")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("compare", help="traced SGTSVM objectives vs the batch oracle")
    _add_data(p)
    for name in ("c1", "c2", "c3", "c4"):
        p.add_argument(f"--{name}", type=_positive_float, default=0.1)
    p.add_argument("--kernel", choices=("none", "gaussian"), default="none")
    p.add_argument("--mu", type=_positive_float, default=0.1)
    p.add_argument("--reduced-size", type=_positive_int, default=100)
    p.add_argument("--tol", type=_positive_float, default=1e-3)
    p.add_argument("--max-iter", type=_positive_int, default=1_000_000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--sampling", choices=("iid", "epoch", "lcm"), default="lcm")
    p.add_argument("--oracle-max-samples", type=_positive_int, default=DEFAULT_MAX_SAMPLES)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("stability", help="repeated 1-D Gaussian runs: boundary and accuracy spread")
    p.add_argument("--algo", choices=("sgtsvm", "pegasos", "both"), default="both")
    p.add_argument("--runs", type=_positive_int, default=100)
    p.add_argument("--m-per-class", type=_positive_int, default=5000)
    p.add_argument("--test-per-class", type=_positive_int, default=5000)
    p.add_argument("--mean-sep", type=float, default=2.0)
    p.add_argument("--iterations", type=_positive_int, default=200)
    p.add_argument("--c", type=_positive_float, default=0.1)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--sampling", choices=("iid", "epoch", "lcm"), default="iid")
    p.add_argument("--same-data", action="store_true", help="reuse one dataset across runs")
    _add_mask(p)
    p.add_argument("--out", help="per-run CSV")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("bench", help="iterations and time to reach each tolerance")
    _add_data(p, required=False)
    p.add_argument("--algo", choices=("sgtsvm", "pegasos", "both"), default="both")
    p.add_argument("--tols", type=_tol_list, default=[10.0 ** -i for i in range(1, 7)])
    p.add_argument("--trials", type=_positive_int, default=100)
    p.add_argument("--m-per-class", type=_positive_int, default=10000)
    p.add_argument("--mean-sep", type=float, default=2.0)
    p.add_argument("--c", type=_positive_float, default=0.1)
    p.add_argument("--max-iter", type=_positive_int, default=1_000_000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--sampling", choices=("iid", "epoch", "lcm"), default="iid")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return ap


_INTERVAL_ARG = re.compile(r"^-?[0-9.eE+-]*:-?[0-9.eE+-]*$")


def _join_mask_values(argv: list[str]) -> list[str]:
    # "--mask -1:0" would otherwise read -1:0 as an option
    out = []
    it = iter(argv)
    for a in it:
        if a == "--mask":
            nxt = next(it, None)
            if nxt is not None and _INTERVAL_ARG.match(nxt):
                out.append(f"--mask={nxt}")
                continue
            out.append(a)
            if nxt is not None:
                out.append(nxt)
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_join_mask_values(argv))
    try:
        return args.func(args)
    except (CLIError, ValueError, OSError, FloatingPointError) as e:
        print(f"twinsgd {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
