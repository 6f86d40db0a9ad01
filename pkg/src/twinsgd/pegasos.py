"""PEGASOS baseline: stochastic subgradient descent on the hinge-loss SVM.

Uses the step size 1/t (not 1/(lambda t)) and returns the last iterate.
Samples are drawn from the pooled dataset, one per iteration.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import _loops
from .data import Dataset, PooledSampler, SamplingMask, SamplingPolicy
from .sgtsvm import CHUNK, DivergenceError, StepSchedule, inverse_t


@dataclass(frozen=True)
class PegasosConfig:
    c: float = 0.1
    tol: float = 1e-3
    max_iter: int = 1_000_000
    with_bias: bool = False
    policy: SamplingPolicy = field(default_factory=SamplingPolicy)
    step: StepSchedule = inverse_t
    early_stop: bool = True

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")

    def digest(self) -> str:
        key = (
            f"pegasos|{self.c!r}|{self.tol!r}|{self.max_iter}|{self.with_bias}|"
            f"{self.policy.kind.value}|{self.policy.seed}|"
            f"{getattr(self.step, '__name__', repr(self.step))}|{self.early_stop}"
        )
        return hashlib.sha256(key.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class PegasosModel:
    w: np.ndarray
    b: float = 0.0
    converged: bool = False
    with_bias: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64).ravel()
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))
        if not self.with_bias and self.b != 0.0:
            raise ValueError("a model without bias must have b == 0")

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.w):
            raise ValueError(f"expected inputs of dimension {len(self.w)}, got {X.shape[1]}")
        return X @ self.w + self.b

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0.0, 1, -1)


def pegasos_subgrad(w, x_t, y_t: int, c: float) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    if w.shape != x_t.shape:
        raise ValueError("dimension mismatch")
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(x_t))):
        raise ValueError("non-finite input")
    active = 1.0 if 1.0 - y_t * (w @ x_t) > 0.0 else 0.0
    return w - c * y_t * active * x_t


def pegasos_predict(model: PegasosModel, x) -> int:
    """sign(w.x + b), with sign(0) = +1."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("pegasos_predict takes one vector")
    return int(model.predict(x)[0])


def pegasos_objective(w, b: float, dataset: Dataset, c: float) -> float:
    """1/2 |w|^2 + c/m * sum (1 - y (w.x + b))_+ over the whole dataset."""
    w = np.asarray(w, dtype=np.float64)
    margins = dataset.y * (dataset.X @ w + b)
    return float(0.5 * w @ w + c / dataset.m * np.sum(np.maximum(1.0 - margins, 0.0)))


@dataclass
class PegasosTrace:
    delta: np.ndarray
    objective: np.ndarray | None = None
    iterates: dict | None = None

    def __len__(self):
        return len(self.delta)

    def to_csv(self, path) -> None:
        """Same column layout as the twin trace; the objective fills f1, f2 is empty."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("t,delta1,delta2,f1,f2\n")
            for i, d in enumerate(self.delta):
                f = "" if self.objective is None else repr(float(self.objective[i]))
                fh.write(f"{i + 1},{float(d)!r},,{f},\n")


def pegasos_train(
    dataset: Dataset,
    config: PegasosConfig = PegasosConfig(),
    *,
    mask: SamplingMask | None = None,
    trace_objectives: bool = False,
) -> tuple[PegasosModel, PegasosTrace]:
    sampler = PooledSampler(config.policy, dataset, mask)
    X = dataset.X
    y = dataset.y.astype(np.float64)
    n = dataset.n
    w = np.zeros(n)
    b = np.zeros(1)
    conv = np.zeros(1, dtype=np.int8)
    max_iter = int(config.max_iter)
    deltas, objs, hist = [], [], []
    done = 0
    while done < max_iter:
        k = min(CHUNK, max_iter - done)
        idx = sampler.take(k)
        etas = np.asarray(config.step(np.arange(done + 1, done + k + 1)), dtype=np.float64)
        delta = np.zeros(k)
        if trace_objectives:
            hw, hb = np.empty((k, n)), np.empty(k)
        else:
            hw, hb = np.empty((0, n)), np.empty(0)
        ran = _loops.pegasos_chunk(
            X, y, idx, etas, config.c, config.tol, config.with_bias, config.early_stop,
            w, b, conv, delta, trace_objectives, hw, hb,
        )
        if ran < 0:
            raise DivergenceError(f"iterate became non-finite at iteration {done - ran}")
        deltas.append(delta[:ran])
        if trace_objectives:
            W, B = hw[:ran], hb[:ran]
            margins = (W @ X.T + B[:, None]) * y[None, :]
            objs.append(
                0.5 * np.sum(W * W, axis=1)
                + config.c / dataset.m * np.sum(np.maximum(1.0 - margins, 0.0), axis=1)
            )
            hist.append((W, B))
        done += ran
        if conv[0]:
            break
    delta = np.concatenate(deltas)
    converged = bool(conv[0]) if config.early_stop else bool(delta[-1] < config.tol)
    meta = {
        "algo": "pegasos",
        "config_hash": config.digest(),
        "seed": int(config.policy.seed),
        "iterations": done,
    }
    model = PegasosModel(w, float(b[0]), converged, config.with_bias, meta)
    trace = PegasosTrace(
        delta,
        np.concatenate(objs) if trace_objectives else None,
        {"w": np.vstack([h[0] for h in hist]), "b": np.concatenate([h[1] for h in hist])}
        if trace_objectives else None,
    )
    return model, trace
