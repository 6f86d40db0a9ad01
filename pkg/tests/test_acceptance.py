"""Acceptance suite: one printed PASS/FAIL line per criterion.

Every tolerance used below is pinned as a module constant. Runtime bounds
exclude one-off JIT compilation, which the ``warm_jit`` fixture absorbs.
"""

import math
import time

import numpy as np
import pytest

from twinsgd import _loops
from twinsgd.cli import main
from twinsgd.data import (
    Dataset,
    PairSampler,
    SamplingKind,
    SamplingMask,
    SamplingPolicy,
    gen_cross_planes,
    gen_gaussian_1d,
)
from twinsgd.experiments import ModelParams, bench, cross_validate, stability
from twinsgd.kernel import KernelSpec, kernel_eval, map_dataset, select_reference
from twinsgd.oracle import batch_subgrad, solve
from twinsgd.pegasos import pegasos_subgrad, pegasos_train
from twinsgd.sgtsvm import (
    HalfState,
    TrainConfig,
    augment,
    instant_f1,
    instant_f2,
    objective_f1,
    objective_f2,
    step,
    subgrad_f1,
    subgrad_f2,
    train,
)

# criterion 1
FD_POINTS = 1000
FD_RTOL = 1e-6
FD_STEP = 1e-6
KINK_MARGIN = 1e-3
C1_SECONDS = 5.0
# criterion 2
CLOSED_FORM_STATES = 100
C2_SECONDS = 1.0
# criterion 3
CONV_SEEDS = 20
CONV_TOL = 1e-3
CONV_MAX_ITER = 1_000_000
C3_SECONDS = 30.0
# criterion 4
OBJ_SEEDS = 20
OBJ_FROM_ITER = 150
OBJ_TO_ITER = 300
OBJ_REL_GAP = 0.10
OBJ_MIN_SEEDS = 18
C4_SECONDS = 60.0
# criteria 5-7
STAB_RUNS = 100
STAB_M = 5000
STAB_ITERS = 200
STAB_C = 0.1
ACC_THRESHOLD = 0.985
ACC_MIN_RUNS = 95
C5_SECONDS = 120.0
BOUNDARY_MEAN_TOL = 0.05
MASK_INTERVAL = (-1.0, 0.0)
# criterion 8
SPEED_M = 10_000
SPEED_TRIALS = 100
SPEED_TOLS = (1e-4, 1e-5, 1e-6)
SPEED_MIN_WINS = 90
# criterion 9
CV_M = 500
CV_FOLDS = 10
CV_MIN_ACC = 0.94
CV_MU = 0.1
CV_R = 100
# criterion 10
KERNEL_M = 10
KERNEL_TOL = 1e-12
# criterion 12
SCALING_NS = (10, 100, 1000, 10000)
SCALING_WORK = 2e7
SLOPE_RANGE = (0.8, 1.2)


@pytest.fixture
def report(capsys):
    def emit(num, title, passed, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {num:>2}: {title}: {detail}")
        return passed

    return emit


@pytest.fixture(scope="module", autouse=True)
def warm_jit():
    ds = gen_gaussian_1d(5, seed=0)
    train(ds, TrainConfig(max_iter=3))
    train(ds, TrainConfig(max_iter=3), trace_objectives=True)
    pegasos_train(ds)


def _rel_err(g, fd):
    return float(np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-300))


def _central(f, u, h):
    out = np.empty_like(u)
    for i in range(len(u)):
        e = np.zeros_like(u)
        e[i] = h
        out[i] = (f(u + e) - f(u - e)) / (2 * h)
    return out


# ---------------------------------------------------------------------------


def test_c01_gradient_oracles(report):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = {"subgrad_f1": 0.0, "subgrad_f2": 0.0, "pegasos_subgrad": 0.0, "batch_subgrad": 0.0}
    counts = dict.fromkeys(worst, 0)

    def far(v, x):
        # away from the kink even after the finite-difference perturbation
        return abs(v) > KINK_MARGIN + FD_STEP * (np.abs(x).sum() + 1)

    while min(counts.values()) < FD_POINTS:
        n = int(rng.integers(1, 6))
        w, x, xh = rng.normal(size=(3, n)) * 2
        b = float(rng.normal())
        c_a, c_b = rng.uniform(0.01, 3, size=2)
        u = np.append(w, b)
        if counts["subgrad_f1"] < FD_POINTS and far(1 + w @ xh + b, xh):
            g = np.append(*subgrad_f1(HalfState(w, b), x, xh, c_a, c_b))
            fd = _central(lambda v: instant_f1(v, x, xh, c_a, c_b), u, FD_STEP)
            worst["subgrad_f1"] = max(worst["subgrad_f1"], _rel_err(g, fd))
            counts["subgrad_f1"] += 1
        if counts["subgrad_f2"] < FD_POINTS and far(1 - w @ x - b, x):
            g = np.append(*subgrad_f2(HalfState(w, b), x, xh, c_a, c_b))
            fd = _central(lambda v: instant_f2(v, x, xh, c_a, c_b), u, FD_STEP)
            worst["subgrad_f2"] = max(worst["subgrad_f2"], _rel_err(g, fd))
            counts["subgrad_f2"] += 1
        y = 1 if rng.random() < 0.5 else -1
        if counts["pegasos_subgrad"] < FD_POINTS and far(1 - y * (w @ x), x):
            g = pegasos_subgrad(w, x, y, c_a)
            fd = _central(lambda v: 0.5 * v @ v + c_a * max(0.0, 1 - y * (v @ x)), w, FD_STEP)
            worst["pegasos_subgrad"] = max(worst["pegasos_subgrad"], _rel_err(g, fd))
            counts["pegasos_subgrad"] += 1
        if counts["batch_subgrad"] < FD_POINTS:
            ds = Dataset(rng.normal(size=(3, n)), rng.normal(size=(4, n)))
            Z2 = augment(ds.X2)
            if all(far(v, z) for v, z in zip(1 + Z2 @ u, Z2)):
                g = batch_subgrad(u, ds, c_a, c_b)
                fd = _central(lambda v: objective_f1(v, ds, c_a, c_b), u, FD_STEP)
                worst["batch_subgrad"] = max(worst["batch_subgrad"], _rel_err(g, fd))
                counts["batch_subgrad"] += 1
    elapsed = time.perf_counter() - t0
    ok = all(v <= FD_RTOL for v in worst.values()) and elapsed < C1_SECONDS
    detail = ", ".join(f"{k} max rel err {v:.1e}" for k, v in worst.items())
    assert report(1, "gradient oracles", ok, f"{detail}; {elapsed:.2f}s (< {C1_SECONDS}s)")


def closed_form_half1(u, t, z, zh, c1, c2):
    ind = 1.0 if 1.0 + u @ zh > 0.0 else 0.0
    return (1.0 - 1.0 / t) * u - (c1 / t) * z * (z @ u) - (c2 / t) * zh * ind


def closed_form_half2(u, t, z, zh, c3, c4):
    ind = 1.0 if 1.0 - u @ z > 0.0 else 0.0
    return (1.0 - 1.0 / t) * u - (c3 / t) * zh * (zh @ u) + (c4 / t) * z * ind


def test_c02_closed_form_equivalence(report):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    exact = 0

    def dyadic(size, bits=6):
        return rng.integers(-(2**bits), 2**bits + 1, size=size) / 2.0**bits * 2

    for _ in range(CLOSED_FORM_STATES):
        n = int(rng.integers(1, 6))
        w, x, xh = dyadic(n), dyadic(n), dyadic(n)
        b = float(dyadic(1)[0])
        t = 2 ** int(rng.integers(0, 7))
        c_a, c_b = (int(rng.integers(1, 33)) / 16 for _ in range(2))
        s = HalfState(w, b, t)
        s1 = step(s, subgrad_f1(s, x, xh, c_a, c_b), 1.0 / t)
        s2 = step(s, subgrad_f2(s, x, xh, c_a, c_b), 1.0 / t)
        u, z, zh = np.append(w, b), augment(x), augment(xh)
        same = np.array_equal(np.append(s1.w, s1.b), closed_form_half1(u, t, z, zh, c_a, c_b))
        same &= np.array_equal(np.append(s2.w, s2.b), closed_form_half2(u, t, z, zh, c_a, c_b))
        exact += bool(same)
    # on arbitrary floats the two expressions round differently; measure how far apart they land
    worst_ulps = 0.0
    for _ in range(CLOSED_FORM_STATES):
        n = int(rng.integers(1, 6))
        w, x, xh = rng.normal(size=(3, n))
        b, t = float(rng.normal()), int(rng.integers(1, 10**6))
        s = HalfState(w, b, t)
        got = np.append(*(lambda q: (q.w, q.b))(step(s, subgrad_f1(s, x, xh, 0.1, 0.1), 1.0 / t)))
        ref = closed_form_half1(np.append(w, b), t, augment(x), augment(xh), 0.1, 0.1)
        worst_ulps = max(worst_ulps, float(np.max(np.abs(got - ref) / np.spacing(np.abs(ref) + 1.0))))
    elapsed = time.perf_counter() - t0
    ok = exact == CLOSED_FORM_STATES and elapsed < C2_SECONDS
    detail = (
        f"{exact}/{CLOSED_FORM_STATES} exactly representable states bit-identical (both halves); "
        f"arbitrary floats differ by <= {worst_ulps:.0f} ulp (rounding order); {elapsed:.2f}s (< {C2_SECONDS}s)"
    )
    assert report(2, "closed-form update", ok, detail)


def _toy10():
    r = np.random.default_rng(10)
    return Dataset(r.normal((1.0, 1.0), 0.6, size=(5, 2)), r.normal((-1.0, -1.0), 0.6, size=(5, 2)))


def test_c03_convergence(report):
    sets = {
        "cross-planes 500/class": gen_cross_planes(500, seed=0),
        "N(+-2,1) 10000/class": gen_gaussian_1d(10_000, 2.0, seed=0),
        "10-sample toy": _toy10(),
    }
    t0 = time.perf_counter()
    failures, worst_iter = [], 0
    for name, ds in sets.items():
        for seed in range(CONV_SEEDS):
            cfg = TrainConfig(tol=CONV_TOL, max_iter=CONV_MAX_ITER, policy=SamplingPolicy(SamplingKind.IID, seed))
            m, tr = train(ds, cfg)
            t1, t2 = m.meta["converged_at"]
            ok = (
                all(m.converged)
                and tr.delta1[t1 - 1] < CONV_TOL
                and tr.delta2[t2 - 1] < CONV_TOL
                and tr.delta1[-1] < CONV_TOL
                and tr.delta2[-1] < CONV_TOL
            )
            worst_iter = max(worst_iter, m.meta["iterations"])
            if not ok:
                failures.append((name, seed))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < C3_SECONDS
    detail = (
        f"{3 * CONV_SEEDS - len(failures)}/{3 * CONV_SEEDS} runs stopped at tol={CONV_TOL} "
        f"(max {worst_iter} iterations); {elapsed:.2f}s (< {C3_SECONDS}s)"
    )
    assert report(3, "convergence", ok, detail)


def test_c04_objective_approximation(report):
    ds = gen_cross_planes(500, seed=0)
    t0 = time.perf_counter()
    res = solve(ds, 0.1, 0.1, 0.1, 0.1)
    good, worst = 0, []
    for seed in range(OBJ_SEEDS):
        cfg = TrainConfig(
            0.1, 0.1, 0.1, 0.1, max_iter=OBJ_TO_ITER, early_stop=False,
            policy=SamplingPolicy(SamplingKind.LCM, seed),
        )
        _, tr = train(ds, cfg, trace_objectives=True)
        f1 = tr.f1[OBJ_FROM_ITER - 1:]
        f2 = tr.f2[OBJ_FROM_ITER - 1:]
        g = max(np.max(np.abs(f1 - res.f1_star)) / res.f1_star, np.max(np.abs(f2 - res.f2_star)) / res.f2_star)
        worst.append(g)
        good += g <= OBJ_REL_GAP
    elapsed = time.perf_counter() - t0
    ok = good >= OBJ_MIN_SEEDS and elapsed < C4_SECONDS and all(res.converged)
    detail = (
        f"{good}/{OBJ_SEEDS} seeds within {OBJ_REL_GAP:.0%} of (f1*, f2*) = ({res.f1_star:.5f}, {res.f2_star:.5f}) "
        f"at every iteration {OBJ_FROM_ITER}..{OBJ_TO_ITER} (worst gap {max(worst):.2%}); {elapsed:.2f}s (< {C4_SECONDS}s)"
    )
    assert report(4, "objective approximation", ok, detail)


@pytest.fixture(scope="module")
def stab():
    t0 = time.perf_counter()
    recs, summ = stability(
        runs=STAB_RUNS, m_per_class=STAB_M, test_per_class=STAB_M, mean_sep=2.0,
        iterations=STAB_ITERS, c=STAB_C, seed=0,
    )
    return recs, summ, time.perf_counter() - t0


def test_c05_accuracy_reproduction(report, stab):
    recs, summ, elapsed = stab
    acc = np.array([r.accuracy for r in recs if r.algo == "sgtsvm"])
    above = int(np.sum(acc >= ACC_THRESHOLD))
    s, p = summ["sgtsvm"], summ["pegasos"]
    spread_ok = p.accuracy_spread > s.accuracy_spread
    ok = above >= ACC_MIN_RUNS and spread_ok and elapsed < C5_SECONDS
    bayes = 0.5 * (1 + math.erf(2.0 / math.sqrt(2)))
    detail = (
        f"SGTSVM >= {ACC_THRESHOLD:.1%} in {above}/{STAB_RUNS} runs (need {ACC_MIN_RUNS}; "
        f"accuracies in [{s.accuracy_min:.4f}, {s.accuracy_max:.4f}], Bayes rate {bayes:.5f}); "
        f"spread PEGASOS {p.accuracy_spread:.4f} vs SGTSVM {s.accuracy_spread:.4f}; {elapsed:.1f}s (< {C5_SECONDS}s)"
    )
    assert report(5, "synthetic accuracy", ok, detail)


def test_c06_stability(report, stab):
    _, summ, _ = stab
    s, p = summ["sgtsvm"], summ["pegasos"]
    ok = s.boundary_std < p.boundary_std and abs(s.boundary_mean) < BOUNDARY_MEAN_TOL
    detail = (
        f"boundary std SGTSVM {s.boundary_std:.4f} < PEGASOS {p.boundary_std:.4f}; "
        f"SGTSVM mean {s.boundary_mean:+.4f} (|.| < {BOUNDARY_MEAN_TOL})"
    )
    assert report(6, "boundary stability", ok, detail)


def test_c07_restricted_sampling(report):
    mask = SamplingMask.interval(*MASK_INTERVAL, label=-1)
    _, summ = stability(
        runs=STAB_RUNS, m_per_class=STAB_M, test_per_class=STAB_M, iterations=STAB_ITERS,
        c=STAB_C, mask=mask, seed=0,
    )
    s, p = summ["sgtsvm"], summ["pegasos"]
    ok = s.boundary_std < p.boundary_std
    detail = (
        f"negatives in {list(MASK_INTERVAL)} hidden; boundary std SGTSVM {s.boundary_std:.4f} "
        f"< PEGASOS {p.boundary_std:.4f} (means {s.boundary_mean:+.4f} / {p.boundary_mean:+.4f})"
    )
    assert report(7, "restricted sampling", ok, detail)


def test_c08_convergence_speed(report):
    ds = gen_gaussian_1d(SPEED_M, 2.0, seed=0)
    recs = bench(ds, tols=SPEED_TOLS, trials=SPEED_TRIALS, seed=0)
    parts, ok = [], True
    for tol in SPEED_TOLS:
        sg = {r.trial: r.iterations for r in recs if r.tol == tol and r.algo == "sgtsvm"}
        pg = {r.trial: r.iterations for r in recs if r.tol == tol and r.algo == "pegasos"}
        wins = sum(pg[t] > sg[t] for t in sg)
        ratio = np.median([pg[t] / sg[t] for t in sg])
        ok &= wins >= SPEED_MIN_WINS
        parts.append(f"tol {tol:g}: {wins}/{SPEED_TRIALS} (median ratio {ratio:.1f}x)")
    assert report(8, "convergence speed", ok, "PEGASOS needs more iterations in " + "; ".join(parts))


def test_c09_cross_planes_cv(report):
    ds = gen_cross_planes(CV_M, seed=0)
    lin = cross_validate(ds, CV_FOLDS, ModelParams(), seed=0)
    ker = cross_validate(
        ds, CV_FOLDS, ModelParams(kernel="gaussian", mu=CV_MU, reduced_size=CV_R), seed=0
    )
    ok = lin.mean >= CV_MIN_ACC and ker.mean >= CV_MIN_ACC
    detail = (
        f"linear {100 * lin.mean:.2f} +- {100 * lin.std:.2f}, Gaussian(mu={CV_MU}, r={CV_R}) "
        f"{100 * ker.mean:.2f} +- {100 * ker.std:.2f} (both >= {100 * CV_MIN_ACC:.0f})"
    )
    assert report(9, "cross-planes 10-fold CV", ok, detail)


def _direct_kernel_objectives(u1, u2, ds, spec, c):
    """Nonlinear objectives evaluated from kernel values, one pair at a time."""
    ref = spec.reference_points
    K = lambda x: np.array([kernel_eval(spec, x, r) for r in ref])
    K1 = [K(x) for x in ds.X1]
    K2 = [K(x) for x in ds.X2]
    w1, b1, w2, b2 = u1[:-1], u1[-1], u2[:-1], u2[-1]
    f1 = 0.5 * (w1 @ w1 + b1 * b1)
    f1 += c / (2 * ds.m1) * sum((k @ w1 + b1) ** 2 for k in K1)
    f1 += c / ds.m2 * sum(max(0.0, 1.0 + k @ w1 + b1) for k in K2)
    f2 = 0.5 * (w2 @ w2 + b2 * b2)
    f2 += c / (2 * ds.m2) * sum((k @ w2 + b2) ** 2 for k in K2)
    f2 += c / ds.m1 * sum(max(0.0, 1.0 - k @ w2 - b2) for k in K1)
    return f1, f2


def test_c10_kernel_equivalence(report):
    ds = gen_cross_planes(KERNEL_M, seed=4)
    spec = KernelSpec.gaussian(0.1, select_reference(ds, 8, seed=1))
    mapped = map_dataset(spec, ds)
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(20):
        u1, u2 = rng.normal(size=(2, spec.r + 1))
        d1, d2 = _direct_kernel_objectives(u1, u2, ds, spec, 0.1)
        worst = max(
            worst,
            abs(objective_f1(u1, mapped, 0.1, 0.1) - d1) / abs(d1),
            abs(objective_f2(u2, mapped, 0.1, 0.1) - d2) / abs(d2),
        )
    cfg = TrainConfig(max_iter=60, early_stop=False, policy=SamplingPolicy(SamplingKind.LCM, 3))
    _, tk = train(ds, cfg, spec, trace_objectives=True)
    _, tl = train(mapped, cfg, trace_objectives=True)
    same_trace = np.array_equal(tk.f1, tl.f1) and np.array_equal(tk.f2, tl.f2)
    for i in (0, 29, 59):
        d1, d2 = _direct_kernel_objectives(tk.iterates["u1"][i], tk.iterates["u2"][i], ds, spec, 0.1)
        worst = max(worst, abs(tk.f1[i] - d1) / abs(d1), abs(tk.f2[i] - d2) / abs(d2))
    ok = worst <= KERNEL_TOL and same_trace
    detail = (
        f"{ds.m}-sample instance: max rel diff direct vs mapped {worst:.1e} (<= {KERNEL_TOL:.0e}); "
        f"kernel and mapped-feature traces identical: {same_trace}"
    )
    assert report(10, "kernel equivalence", ok, detail)


def test_c11_determinism(report, tmp_path, capsys):
    data = tmp_path / "cp.csv"
    main(["gen", "--kind", "cross-planes", "--m-per-class", "120", "--seed", "3", "--out", str(data)])

    def run(tag):
        d = tmp_path / tag
        d.mkdir()
        outputs = {}
        main(["train", "--data", str(data), "--seed", "5", "--sampling", "lcm", "--kernel", "gaussian",
              "--reduced-size", "30", "--out", str(d / "m.json"), "--trace", str(d / "t.csv")])
        capsys.readouterr()
        main(["cv", "--data", str(data), "--folds", "5", "--seed", "5", "--out", str(d / "cv.csv")])
        outputs["cv stdout"] = capsys.readouterr().out.encode()
        main(["stability", "--runs", "6", "--m-per-class", "400", "--test-per-class", "400", "--seed", "5",
              "--mask", "--out", str(d / "s.csv")])
        outputs["stability stdout"] = capsys.readouterr().out.encode()
        main(["compare", "--data", str(data), "--seed", "5", "--out", str(d / "cmp.csv")])
        capsys.readouterr()
        for f in ("m.json", "t.csv", "cv.csv", "s.csv", "cmp.csv"):
            outputs[f] = (d / f).read_bytes()
        return outputs

    a, b = run("a"), run("b")
    diff = [k for k in a if a[k] != b[k]]
    ok = not diff
    detail = f"{len(a) - len(diff)}/{len(a)} outputs byte-identical across repeated runs" + (
        f" (differing: {diff})" if diff else ""
    )
    assert report(11, "determinism", ok, detail)


def _uncached_llvm(fn, sig):
    from numba import njit

    fresh = njit(nogil=True)(fn.py_func)
    fresh.compile(sig)
    return fresh.inspect_llvm(sig)


def test_c12_performance_shape(report):
    per_iter = []
    for n in SCALING_NS:
        r = np.random.default_rng(0)
        ds = Dataset(r.normal(size=(100, n)), r.normal(size=(100, n)))
        iters = max(2000, int(SCALING_WORK // n))
        cfg = TrainConfig(max_iter=iters, early_stop=False)
        best = math.inf
        for _ in range(3):
            t0 = time.perf_counter()
            train(ds, cfg)
            best = min(best, (time.perf_counter() - t0) / iters)
        per_iter.append(best)
    slope = float(np.polyfit(np.log(SCALING_NS), np.log(per_iter), 1)[0])
    allocs = []
    for fn in (_loops.sgtsvm_chunk, _loops.pegasos_chunk):
        for sig in fn.signatures:
            ir = _uncached_llvm(fn, sig)
            allocs += [tok for tok in ("NRT_MemInfo_alloc", "NRT_Allocate") if tok in ir]
    ok = SLOPE_RANGE[0] <= slope <= SLOPE_RANGE[1] and not allocs
    timings = ", ".join(f"n={n}: {1e9 * t:.0f}ns" for n, t in zip(SCALING_NS, per_iter))
    detail = (
        f"log-log slope {slope:.3f} in {list(SLOPE_RANGE)} ({timings}); "
        f"allocation sites in compiled inner loops: {len(allocs)}"
    )
    assert report(12, "performance shape", ok, detail)
