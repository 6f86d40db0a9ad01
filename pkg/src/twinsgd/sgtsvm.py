"""Stochastic-gradient twin SVM.

Each iteration draws one positive sample ``x`` and one negative sample ``xh``
and takes a subgradient step on both instantaneous objectives

    f1_t(w, b) = 1/2 (|w|^2 + b^2) + c1/2 (w.x + b)^2 + c2 (1 + w.xh + b)_+
    f2_t(w, b) = 1/2 (|w|^2 + b^2) + c3/2 (w.xh + b)^2 + c4 (1 - w.x - b)_+

with step size 1/t. Each half stops on its own once
``|w_{t+1} - w_t| + |b_{t+1} - b_t| < tol``; the iteration counter keeps
running for the other half.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from . import _loops
from .data import Dataset, PairSampler, SamplingMask, SamplingPolicy
from .kernel import KernelSpec, map_dataset
from .model import TwinModel

StepSchedule = Callable[[np.ndarray], np.ndarray]


def inverse_t(t: np.ndarray) -> np.ndarray:
    """The default step schedule eta_t = 1/t."""
    return 1.0 / np.asarray(t, dtype=np.float64)


class DivergenceError(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    c1: float = 0.1
    c2: float = 0.1
    c3: float = 0.1
    c4: float = 0.1
    tol: float = 1e-3
    max_iter: int = 1_000_000
    policy: SamplingPolicy = field(default_factory=SamplingPolicy)
    step: StepSchedule = inverse_t
    # False runs exactly max_iter iterations without freezing either half
    early_stop: bool = True

    def __post_init__(self):
        for name in ("c1", "c2", "c3", "c4"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")

    def digest(self) -> str:
        key = (
            f"sgtsvm|{self.c1!r}|{self.c2!r}|{self.c3!r}|{self.c4!r}|{self.tol!r}|"
            f"{self.max_iter}|{self.policy.kind.value}|{self.policy.seed}|"
            f"{getattr(self.step, '__name__', repr(self.step))}|{self.early_stop}"
        )
        return hashlib.sha256(key.encode()).hexdigest()[:16]


@dataclass
class HalfState:
    """Iterate of one half problem: ``u = (w, b)`` at iteration ``t``."""

    w: np.ndarray
    b: float
    t: int = 1
    converged: bool = False

    @classmethod
    def zeros(cls, n: int) -> HalfState:
        return cls(np.zeros(n), 0.0, 1, False)

    @property
    def u(self) -> np.ndarray:
        return np.append(self.w, self.b)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input")


def _active(s: float) -> float:
    # subgradient of (s)_+ : 1 for s > 0, else 0 (the kink s == 0 takes 0)
    return 1.0 if s > 0.0 else 0.0


def subgrad_f1(state: HalfState, x_t, xhat_t, c1: float, c2: float) -> tuple[np.ndarray, float]:
    w, b = state.w, state.b
    x_t = np.asarray(x_t, dtype=np.float64)
    xhat_t = np.asarray(xhat_t, dtype=np.float64)
    if x_t.shape != w.shape or xhat_t.shape != w.shape:
        raise ValueError("dimension mismatch")
    _check_finite(w, x_t, xhat_t, b)
    s = w @ x_t + b
    act = _active(1.0 + w @ xhat_t + b)
    return w + c1 * s * x_t + c2 * act * xhat_t, b + c1 * s + c2 * act


def subgrad_f2(state: HalfState, x_t, xhat_t, c3: float, c4: float) -> tuple[np.ndarray, float]:
    w, b = state.w, state.b
    x_t = np.asarray(x_t, dtype=np.float64)
    xhat_t = np.asarray(xhat_t, dtype=np.float64)
    if x_t.shape != w.shape or xhat_t.shape != w.shape:
        raise ValueError("dimension mismatch")
    _check_finite(w, x_t, xhat_t, b)
    s = w @ xhat_t + b
    act = _active(1.0 - w @ x_t - b)
    return w + c3 * s * xhat_t - c4 * act * x_t, b + c3 * s - c4 * act


def step(state: HalfState, grad: tuple[np.ndarray, float], eta_t: float) -> HalfState:
    if state.converged:
        raise ValueError("cannot step a converged half")
    if not eta_t > 0:
        raise ValueError("step size must be positive")
    gw, gb = grad
    _check_finite(gw, gb)
    return HalfState(state.w - eta_t * gw, state.b - eta_t * gb, state.t + 1, False)


# ---------------------------------------------------------------------------
# objectives


def augment(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        return np.append(X, 1.0)
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _half_terms(dataset: Dataset, half: int):
    """(proximal matrix, signed hinge matrix) so that both halves read

    f(u) = |u|^2/2 + a/2 * mean((P u)^2) ... with hinge (1 + Q u)_+.
    """
    Z1, Z2 = augment(dataset.X1), augment(dataset.X2)
    return (Z1, Z2) if half == 1 else (Z2, -Z1)


def _objective_rows(U: np.ndarray, P: np.ndarray, Q: np.ndarray, cp: float, ch: float) -> np.ndarray:
    PU = U @ P.T
    QU = 1.0 + U @ Q.T
    return (
        0.5 * np.sum(U * U, axis=1)
        + cp / (2 * P.shape[0]) * np.sum(PU * PU, axis=1)
        + ch / Q.shape[0] * np.sum(np.maximum(QU, 0.0), axis=1)
    )


def _check_u(u, dataset: Dataset) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (dataset.n + 1,):
        raise ValueError(f"u must have length n+1={dataset.n + 1}, got shape {u.shape}")
    return u


def objective_f1(u, dataset: Dataset, c1: float, c2: float) -> float:
    """Full-batch first twin objective at ``u = (w1, b1)``."""
    u = _check_u(u, dataset)
    P, Q = _half_terms(dataset, 1)
    return float(_objective_rows(u[None, :], P, Q, c1, c2)[0])


def objective_f2(u, dataset: Dataset, c3: float, c4: float) -> float:
    """Full-batch second twin objective at ``u = (w2, b2)``."""
    u = _check_u(u, dataset)
    P, Q = _half_terms(dataset, 2)
    return float(_objective_rows(u[None, :], P, Q, c3, c4)[0])


def instant_f1(u, x_t, xhat_t, c1: float, c2: float) -> float:
    u = np.asarray(u, dtype=np.float64)
    z, zh = augment(x_t), augment(xhat_t)
    return float(0.5 * u @ u + 0.5 * c1 * (u @ z) ** 2 + c2 * max(1.0 + u @ zh, 0.0))


def instant_f2(u, x_t, xhat_t, c3: float, c4: float) -> float:
    u = np.asarray(u, dtype=np.float64)
    z, zh = augment(x_t), augment(xhat_t)
    return float(0.5 * u @ u + 0.5 * c3 * (u @ zh) ** 2 + c4 * max(1.0 - u @ z, 0.0))


# ---------------------------------------------------------------------------
# trace


@dataclass(frozen=True)
class TraceRecord:
    t: int
    delta1: float
    delta2: float
    f1: float | None = None
    f2: float | None = None


TRACE_HEADER = ("t", "delta1", "delta2", "f1", "f2")


def _fmt(v) -> str:
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else repr(float(v))


@dataclass
class Trace:
    """Per-iteration diagnostics, stored column-wise.

    Row ``i`` describes iteration ``t = i + 1``: the change of each half's
    iterate and, if objective tracing was on, both full objectives at the
    iterate after the update.
    """

    delta1: np.ndarray
    delta2: np.ndarray
    f1: np.ndarray | None = None
    f2: np.ndarray | None = None
    iterates: dict | None = None
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.delta1)

    @property
    def t(self) -> np.ndarray:
        return np.arange(1, len(self) + 1)

    def __getitem__(self, i) -> TraceRecord:
        i = range(len(self))[i]
        f1 = None if self.f1 is None else float(self.f1[i])
        f2 = None if self.f2 is None else float(self.f2[i])
        return TraceRecord(i + 1, float(self.delta1[i]), float(self.delta2[i]), f1, f2)

    def __iter__(self) -> Iterator[TraceRecord]:
        for i in range(len(self)):
            yield self[i]

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in self:
            w.writerow([r.t, repr(r.delta1), repr(r.delta2), _fmt(r.f1), _fmt(r.f2)])

    def to_csv(self, path=None) -> str | None:
        if path is None:
            buf = io.StringIO()
            self.write_csv(buf)
            return buf.getvalue()
        with open(path, "w", encoding="utf-8", newline="") as fh:
            self.write_csv(fh)
        return None


def read_trace_csv(path) -> Trace:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != TRACE_HEADER:
        raise ValueError(f"unexpected trace header {rows[0]}")
    body = rows[1:]
    d1 = np.array([float(r[1]) for r in body])
    d2 = np.array([float(r[2]) for r in body])
    has_f = bool(body) and body[0][3] != ""
    f1 = np.array([float(r[3]) for r in body]) if has_f else None
    f2 = np.array([float(r[4]) for r in body]) if has_f else None
    return Trace(d1, d2, f1, f2)


# ---------------------------------------------------------------------------
# training


CHUNK = 4096


def train(
    dataset: Dataset,
    config: TrainConfig = TrainConfig(),
    kernel: KernelSpec | None = None,
    *,
    mask: SamplingMask | None = None,
    trace_objectives: bool = False,
) -> tuple[TwinModel, Trace]:
    """Run paired stochastic subgradient descent from zero iterates.

    With a Gaussian ``kernel`` the samples are first pushed through the
    reduced-kernel map and the linear problem is solved in that space.
    Reaching ``max_iter`` is not an error: the model comes back with its
    ``converged`` flags cleared.
    """
    sampler = PairSampler(config.policy, dataset, mask)
    work = map_dataset(kernel, dataset) if kernel is not None else dataset
    X1, X2 = work.X1, work.X2
    n = work.n

    w1 = np.zeros(n)
    w2 = np.zeros(n)
    b = np.zeros(2)
    conv = np.zeros(2, dtype=np.int8)
    stats = np.zeros(4)
    max_iter = int(config.max_iter)

    chunk = CHUNK
    if trace_objectives:
        chunk = max(16, min(CHUNK, 2_000_000 // max(work.m, 1)))
    d1_parts, d2_parts, f1_parts, f2_parts = [], [], [], []
    hist_parts = []
    done = 0
    converged_at = [0, 0]
    while done < max_iter:
        k = min(chunk, max_iter - done)
        idx1, idx2 = sampler.take(k)
        etas = np.asarray(config.step(np.arange(done + 1, done + k + 1)), dtype=np.float64)
        if etas.shape != (k,) or not np.all(etas > 0):
            raise ValueError("step schedule must return positive step sizes")
        delta1 = np.zeros(k)
        delta2 = np.zeros(k)
        if trace_objectives:
            hw1, hw2, hb = np.empty((k, n)), np.empty((k, n)), np.empty((k, 2))
        else:
            hw1 = hw2 = np.empty((0, n))
            hb = np.empty((0, 2))
        before = conv.copy()
        ran = _loops.sgtsvm_chunk(
            X1, X2, idx1, idx2, etas,
            config.c1, config.c2, config.c3, config.c4, config.tol, config.early_stop,
            w1, w2, b, conv, delta1, delta2, stats,
            trace_objectives, hw1, hw2, hb,
        )
        if ran < 0:
            raise DivergenceError(f"iterate became non-finite at iteration {done - ran}")
        for h in range(2):
            if conv[h] and not before[h]:
                dd = delta1 if h == 0 else delta2
                nz = np.nonzero(dd[:ran] < config.tol)[0]
                converged_at[h] = done + int(nz[0]) + 1
        d1_parts.append(delta1[:ran])
        d2_parts.append(delta2[:ran])
        if trace_objectives:
            U1 = np.hstack([hw1[:ran], hb[:ran, :1]])
            U2 = np.hstack([hw2[:ran], hb[:ran, 1:]])
            P1, Q1 = _half_terms(work, 1)
            P2, Q2 = _half_terms(work, 2)
            f1_parts.append(_objective_rows(U1, P1, Q1, config.c1, config.c2))
            f2_parts.append(_objective_rows(U2, P2, Q2, config.c3, config.c4))
            hist_parts.append((U1, U2))
        done += ran
        if conv.all():
            break

    delta1 = np.concatenate(d1_parts)
    delta2 = np.concatenate(d2_parts)
    if config.early_stop:
        converged = [bool(conv[0]), bool(conv[1])]
    else:
        converged = [bool(delta1[-1] < config.tol), bool(delta2[-1] < config.tol)]
    zmax = float(np.sqrt(np.max(np.sum(augment(work.X) ** 2, axis=1))))
    trace = Trace(
        delta1,
        delta2,
        np.concatenate(f1_parts) if trace_objectives else None,
        np.concatenate(f2_parts) if trace_objectives else None,
        {
            "u1": np.vstack([p[0] for p in hist_parts]),
            "u2": np.vstack([p[1] for p in hist_parts]),
        } if trace_objectives else None,
        {"G1": (stats[0], stats[2]), "G2": (stats[1], stats[3]), "M": zmax},
    )
    meta = {
        "algo": "sgtsvm",
        "config_hash": config.digest(),
        "seed": int(config.policy.seed),
        "sampling": config.policy.kind.value,
        "c": [config.c1, config.c2, config.c3, config.c4],
        "tol": config.tol,
        "iterations": done,
        "converged": converged,
        "converged_at": converged_at,
    }
    model = TwinModel(w1, float(b[0]), w2, float(b[1]), kernel, meta)
    return model, trace


def train_reference(
    dataset: Dataset,
    config: TrainConfig,
    idx1: np.ndarray,
    idx2: np.ndarray,
) -> tuple[HalfState, HalfState, np.ndarray, np.ndarray]:
    """Plain-numpy replay of the trainer on a given index sequence.

    Slow; used to cross-check the compiled loop.
    """
    s1 = HalfState.zeros(dataset.n)
    s2 = HalfState.zeros(dataset.n)
    d1, d2 = [], []
    for t, (i, k) in enumerate(zip(idx1, idx2), start=1):
        eta = float(config.step(np.array([t]))[0])
        x, xh = dataset.X1[i], dataset.X2[k]
        dd = [0.0, 0.0]
        if not s1.converged:
            g = subgrad_f1(s1, x, xh, config.c1, config.c2)
            new = step(s1, g, eta)
            dd[0] = float(np.linalg.norm(new.w - s1.w) + abs(new.b - s1.b))
            new.converged = config.early_stop and dd[0] < config.tol
            s1 = new
        if not s2.converged:
            g = subgrad_f2(s2, x, xh, config.c3, config.c4)
            new = step(s2, g, eta)
            dd[1] = float(np.linalg.norm(new.w - s2.w) + abs(new.b - s2.b))
            new.converged = config.early_stop and dd[1] < config.tol
            s2 = new
        d1.append(dd[0])
        d2.append(dd[1])
        if s1.converged and s2.converged:
            break
    return s1, s2, np.array(d1), np.array(d2)
