"""Experiment drivers behind the CLI: stability, speed, objective comparison, CV."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .data import (
    Dataset,
    SamplingKind,
    SamplingMask,
    SamplingPolicy,
    gen_gaussian_1d,
    kfold_indices,
)
from .kernel import DEFAULT_REDUCED_SIZE, KernelSpec, select_reference
from .model import evaluate
from .oracle import OracleConfig, solve
from .pegasos import PegasosConfig, pegasos_train
from .sgtsvm import TrainConfig, train

THREADS_ENV = "TWINSGD_THREADS"


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    return os.cpu_count() or 1


def parallel_map(fn: Callable, items: Iterable) -> list:
    """Order-preserving map over a thread pool sized by TWINSGD_THREADS."""
    items = list(items)
    workers = min(worker_count(), len(items)) or 1
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 63-bit seed for a (master seed, trial, ...) key."""
    ss = np.random.SeedSequence([int(seed), *map(int, keys)])
    return int(ss.generate_state(2, np.uint64)[0] >> np.uint64(1))


def decision_boundary_1d(predict: Callable, lo: float = -6.0, hi: float = 6.0, tol: float = 1e-6) -> float:
    """Location where a 1-D classifier flips, by bisection on [lo, hi].

    Returns NaN when both ends get the same label.
    """
    at = lambda x: int(predict(np.array([[x]]))[0])
    y_lo, y_hi = at(lo), at(hi)
    if y_lo == y_hi:
        return math.nan
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if at(mid) == y_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _mean_std(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=np.float64)
    a = a[np.isfinite(a)]
    if len(a) == 0:
        return math.nan, math.nan
    return float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else 0.0


# ---------------------------------------------------------------------------
# stability


@dataclass(frozen=True)
class StabilityRecord:
    run: int
    algo: str
    boundary: float
    accuracy: float


@dataclass
class StabilitySummary:
    algo: str
    boundary_mean: float
    boundary_std: float
    accuracy_mean: float
    accuracy_min: float
    accuracy_max: float

    @property
    def accuracy_spread(self) -> float:
        return self.accuracy_max - self.accuracy_min


def stability(
    runs: int = 100,
    m_per_class: int = 5000,
    test_per_class: int = 5000,
    mean_sep: float = 2.0,
    iterations: int = 200,
    algos: Sequence[str] = ("sgtsvm", "pegasos"),
    c: float = 0.1,
    mask: SamplingMask | None = None,
    seed: int = 0,
    sampling: str = "iid",
    same_data: bool = False,
) -> tuple[list[StabilityRecord], dict[str, StabilitySummary]]:
    """Repeated 1-D Gaussian runs with a fixed iteration budget.

    Each run draws fresh train/test data (unless ``same_data``) and a fresh
    sampling seed, trains every algorithm for exactly ``iterations`` steps and
    records the decision-boundary location and test accuracy. PEGASOS runs
    with a bias term; without one its 1-D boundary is pinned at 0.
    """
    for a in algos:
        if a not in ("sgtsvm", "pegasos"):
            raise ValueError(f"unknown algorithm {a!r}")

    def one(r: int) -> list[StabilityRecord]:
        dr = 0 if same_data else r
        tr = gen_gaussian_1d(m_per_class, mean_sep, derive_seed(seed, dr, 0))
        te = gen_gaussian_1d(test_per_class, mean_sep, derive_seed(seed, dr, 1))
        policy = SamplingPolicy(SamplingKind(sampling), derive_seed(seed, r, 2))
        out = []
        for a in algos:
            if a == "sgtsvm":
                cfg = TrainConfig(c, c, c, c, max_iter=iterations, policy=policy, early_stop=False)
                model, _ = train(tr, cfg, mask=mask)
            else:
                cfg = PegasosConfig(c, max_iter=iterations, with_bias=True, policy=policy, early_stop=False)
                model, _ = pegasos_train(tr, cfg, mask=mask)
            out.append(StabilityRecord(r, a, decision_boundary_1d(model.predict), evaluate(model, te).accuracy))
        return out

    if mask is not None:
        # surface an all-hidden class before spawning work
        mask.visible(gen_gaussian_1d(m_per_class, mean_sep, derive_seed(seed, 0, 0)))
    records = [rec for recs in parallel_map(one, range(runs)) for rec in recs]
    summary = {}
    for a in algos:
        sel = [r for r in records if r.algo == a]
        bm, bs = _mean_std([r.boundary for r in sel])
        acc = np.array([r.accuracy for r in sel])
        summary[a] = StabilitySummary(a, bm, bs, float(acc.mean()), float(acc.min()), float(acc.max()))
    return records, summary


# ---------------------------------------------------------------------------
# convergence speed


@dataclass(frozen=True)
class BenchRecord:
    trial: int
    tol: float
    algo: str
    iterations: int
    converged: bool
    seconds: float


def bench(
    dataset: Dataset,
    tols: Sequence[float] = tuple(10.0 ** -i for i in range(1, 7)),
    trials: int = 100,
    algos: Sequence[str] = ("sgtsvm", "pegasos"),
    c: float = 0.1,
    max_iter: int = 1_000_000,
    seed: int = 0,
    sampling: str = "iid",
) -> list[BenchRecord]:
    """Iterations (and wall time) until each algorithm's stopping rule fires."""

    def one(key) -> list[BenchRecord]:
        trial, tol = key
        policy = SamplingPolicy(SamplingKind(sampling), derive_seed(seed, trial))
        out = []
        for a in algos:
            t0 = time.perf_counter()
            if a == "sgtsvm":
                model, _ = train(dataset, TrainConfig(c, c, c, c, tol=tol, max_iter=max_iter, policy=policy))
                conv = all(model.converged)
            else:
                model, _ = pegasos_train(
                    dataset, PegasosConfig(c, tol=tol, max_iter=max_iter, with_bias=True, policy=policy)
                )
                conv = model.converged
            dt = time.perf_counter() - t0
            out.append(BenchRecord(trial, tol, a, int(model.meta["iterations"]), conv, dt))
        return out

    keys = [(t, tol) for t in range(trials) for tol in tols]
    return [rec for recs in parallel_map(one, keys) for rec in recs]


# ---------------------------------------------------------------------------
# objective comparison against the batch oracle


COMPARE_HEADER = ("iteration", "f1_sgtsvm", "f2_sgtsvm", "f1_star", "f2_star")


def compare(
    dataset: Dataset,
    config: TrainConfig = TrainConfig(policy=SamplingPolicy(SamplingKind.LCM, 0)),
    kernel: KernelSpec | None = None,
    oracle_config: OracleConfig = OracleConfig(),
) -> list[tuple[int, float, float, float, float]]:
    """Traced SGTSVM objectives next to the oracle optima, one row per iteration."""
    res = solve(dataset, config.c1, config.c2, config.c3, config.c4, kernel, oracle_config)
    _, trace = train(dataset, config, kernel, trace_objectives=True)
    return [
        (int(t), float(a), float(b), res.f1_star, res.f2_star)
        for t, a, b in zip(trace.t, trace.f1, trace.f2)
    ]


# ---------------------------------------------------------------------------
# cross-validation and grid search


@dataclass(frozen=True)
class ModelParams:
    algo: str = "sgtsvm"
    c1: float = 0.1
    c2: float = 0.1
    c3: float = 0.1
    c4: float = 0.1
    c: float = 0.1
    kernel: str = "none"
    mu: float = 0.1
    reduced_size: int = DEFAULT_REDUCED_SIZE
    tol: float = 1e-3
    max_iter: int = 1_000_000
    sampling: str = "iid"
    with_bias: bool = False


def fit(dataset: Dataset, params: ModelParams, seed: int = 0):
    policy = SamplingPolicy(SamplingKind(params.sampling), seed)
    if params.algo == "pegasos":
        if params.kernel != "none":
            raise ValueError("the PEGASOS baseline is linear only")
        cfg = PegasosConfig(params.c, params.tol, params.max_iter, params.with_bias, policy)
        return pegasos_train(dataset, cfg)
    if params.algo != "sgtsvm":
        raise ValueError(f"unknown algorithm {params.algo!r}")
    kernel = None
    if params.kernel == "gaussian":
        r = min(params.reduced_size, dataset.m)
        kernel = KernelSpec.gaussian(params.mu, select_reference(dataset, r, derive_seed(seed, 1)))
    elif params.kernel != "none":
        raise ValueError(f"unknown kernel {params.kernel!r}")
    cfg = TrainConfig(params.c1, params.c2, params.c3, params.c4, params.tol, params.max_iter, policy)
    return train(dataset, cfg, kernel)


@dataclass
class CVResult:
    params: ModelParams
    fold_accuracies: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_accuracies, ddof=1)) if len(self.fold_accuracies) > 1 else 0.0


def cross_validate(dataset: Dataset, k: int = 10, params: ModelParams = ModelParams(), seed: int = 0) -> CVResult:
    folds = kfold_indices(dataset, k, seed)

    def one(i: int) -> float:
        tr, va = folds[i]
        model, _ = fit(tr, params, derive_seed(seed, i))
        return evaluate(model, va).accuracy

    return CVResult(params, parallel_map(one, range(k)))


C_GRID = tuple(2.0 ** i for i in range(-8, 2))
MU_GRID = tuple(2.0 ** i for i in range(-10, 0))


def grid_search(
    dataset: Dataset,
    k: int = 5,
    base: ModelParams = ModelParams(),
    c_grid: Sequence[float] = C_GRID,
    mu_grid: Sequence[float] = MU_GRID,
    seed: int = 0,
) -> list[CVResult]:
    """Exhaustive CV over the penalty (and width) grids.

    Twin penalties are tied as c1 = c3 and c2 = c4. Results come back sorted
    best first; ties keep grid order.
    """
    if base.algo == "pegasos":
        grid = [replace(base, c=c) for c in c_grid]
    else:
        mus = mu_grid if base.kernel == "gaussian" else (base.mu,)
        grid = [
            replace(base, c1=a, c3=a, c2=b, c4=b, mu=mu)
            for a in c_grid for b in c_grid for mu in mus
        ]
    results = [cross_validate(dataset, k, p, seed) for p in grid]
    order = sorted(range(len(results)), key=lambda i: (-results[i].mean, i))
    return [results[i] for i in order]
