"""Deterministic full-batch solver for the two unconstrained twin problems.

Both halves share the form

    f(u) = |u|^2 / 2 + a/2 * sum_i (p_i . u)^2 + beta * sum_j (1 + q_j . u)_+

(half 1: p = positives, q = negatives; half 2: p = negatives, q = -positives,
all augmented with a trailing 1). The hinge is replaced by a Huber-smoothed
version whose width is driven towards zero; each stage is minimised by
Newton steps with Armijo backtracking. The smoothed and exact objectives
differ by at most ``beta * m_q * width / 2``, so the last stage leaves a gap
far below any tolerance used downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .kernel import KernelSpec, map_dataset
from .model import TwinModel
from .sgtsvm import _half_terms, _objective_rows, augment

DEFAULT_MAX_SAMPLES = 50_000


@dataclass(frozen=True)
class OracleConfig:
    obj_tol: float = 1e-10
    max_iter: int = 100_000
    initial_step: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    width_start: float = 1.0
    width_min: float = 1e-12
    width_factor: float = 0.1
    max_samples: int = DEFAULT_MAX_SAMPLES

    def __post_init__(self):
        if not self.obj_tol > 0:
            raise ValueError("obj_tol must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")
        if not 0 < self.width_factor < 1:
            raise ValueError("width_factor must lie in (0, 1)")


class _Half:
    def __init__(self, P: np.ndarray, Q: np.ndarray, cp: float, ch: float):
        self.P, self.Q = P, Q
        self.a = cp / P.shape[0]
        self.beta = ch / Q.shape[0]
        self.cp, self.ch = cp, ch
        self.H0 = np.eye(P.shape[1]) + self.a * (P.T @ P)

    def value(self, u) -> float:
        return float(_objective_rows(u[None, :], self.P, self.Q, self.cp, self.ch)[0])

    def subgrad(self, u) -> np.ndarray:
        s = 1.0 + self.Q @ u
        return self.H0 @ u + self.beta * (self.Q.T @ (s > 0.0).astype(np.float64))

    def smooth(self, u, width):
        s = 1.0 + self.Q @ u
        hub = np.where(s <= 0.0, 0.0, np.where(s < width, s * s / (2 * width), s - width / 2))
        val = 0.5 * u @ self.H0 @ u + self.beta * np.sum(hub)
        slope = np.clip(s / width, 0.0, 1.0)
        grad = self.H0 @ u + self.beta * (self.Q.T @ slope)
        band = (s > 0.0) & (s < width)
        Qb = self.Q[band]
        hess = self.H0 + (self.beta / width) * (Qb.T @ Qb)
        return float(val), grad, hess


@dataclass
class HalfSolution:
    u: np.ndarray
    f: float
    converged: bool
    iterations: int
    subgrad_norm: float
    history: np.ndarray


def _solve_half(half: _Half, config: OracleConfig) -> HalfSolution:
    d = half.P.shape[1]
    u = np.zeros(d)
    f_true = half.value(u)
    history = [f_true]
    iters = 0
    width = config.width_start
    converged = False
    while True:
        stage_done = False
        while iters < config.max_iter:
            val, grad, hess = half.smooth(u, width)
            try:
                direction = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                direction = -grad
            slope = grad @ direction
            if slope >= 0:
                direction, slope = -grad, -(grad @ grad)
            if -slope <= 1e-30:
                stage_done = True
                break
            t = config.initial_step
            accepted = False
            while t > 1e-20:
                cand = u + t * direction
                v_s = _smooth_value(half, cand, width)
                if v_s <= val + config.armijo * t * slope:
                    f_cand = half.value(cand)
                    # only ever accept steps that do not raise the exact objective
                    if f_cand <= f_true:
                        accepted = True
                        break
                t *= config.shrink
            iters += 1
            if not accepted:
                stage_done = True
                break
            rel = (val - v_s) / max(abs(val), 1e-300)
            u = cand
            f_prev = f_true
            f_true = f_cand
            history.append(f_true)
            if rel < config.obj_tol and (f_prev - f_true) <= config.obj_tol * max(abs(f_prev), 1e-300):
                stage_done = True
                break
        if not stage_done:
            break
        if width <= config.width_min:
            converged = True
            break
        width = max(width * config.width_factor, config.width_min)
    return HalfSolution(
        u, f_true, converged, iters, float(np.linalg.norm(half.subgrad(u))), np.array(history)
    )


def _smooth_value(half: _Half, u, width) -> float:
    s = 1.0 + half.Q @ u
    hub = np.where(s <= 0.0, 0.0, np.where(s < width, s * s / (2 * width), s - width / 2))
    return float(0.5 * u @ half.H0 @ u + half.beta * np.sum(hub))


def batch_subgrad(u, dataset: Dataset, c1: float, c2: float) -> np.ndarray:
    """Selected full-batch subgradient of the first twin objective.

    u + c1/m1 Z1^T Z1 u + c2/m2 Z2^T [1 + Z2 u > 0]
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (dataset.n + 1,):
        raise ValueError(f"u must have length n+1={dataset.n + 1}")
    P, Q = _half_terms(dataset, 1)
    return _Half(P, Q, c1, c2).subgrad(u)


def batch_subgrad2(u, dataset: Dataset, c3: float, c4: float) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (dataset.n + 1,):
        raise ValueError(f"u must have length n+1={dataset.n + 1}")
    P, Q = _half_terms(dataset, 2)
    return _Half(P, Q, c3, c4).subgrad(u)


@dataclass
class OracleResult:
    model: TwinModel
    f1_star: float
    f2_star: float
    halves: tuple[HalfSolution, HalfSolution]

    @property
    def converged(self) -> tuple[bool, bool]:
        return self.halves[0].converged, self.halves[1].converged

    def __iter__(self):
        return iter((self.model, self.f1_star, self.f2_star))


def solve(
    dataset: Dataset,
    c1: float = 0.1,
    c2: float = 0.1,
    c3: float = 0.1,
    c4: float = 0.1,
    kernel: KernelSpec | None = None,
    config: OracleConfig = OracleConfig(),
) -> OracleResult:
    """Minimise both twin objectives to high accuracy on a small dataset."""
    for name, c in (("c1", c1), ("c2", c2), ("c3", c3), ("c4", c4)):
        if not c > 0:
            raise ValueError(f"{name} must be positive")
    if dataset.m > config.max_samples:
        raise ValueError(
            f"oracle is meant for small data: {dataset.m} samples exceeds the guard of "
            f"{config.max_samples} (raise max_samples to override)"
        )
    work = map_dataset(kernel, dataset) if kernel is not None else dataset
    sols = []
    for half, (cp, ch) in ((1, (c1, c2)), (2, (c3, c4))):
        P, Q = _half_terms(work, half)
        sols.append(_solve_half(_Half(P, Q, cp, ch), config))
    u1, u2 = sols[0].u, sols[1].u
    meta = {
        "algo": "oracle",
        "c": [c1, c2, c3, c4],
        "converged": [sols[0].converged, sols[1].converged],
    }
    model = TwinModel(u1[:-1], u1[-1], u2[:-1], u2[-1], kernel, meta)
    return OracleResult(model, sols[0].f, sols[1].f, (sols[0], sols[1]))


__all__ = ["OracleConfig", "OracleResult", "batch_subgrad", "batch_subgrad2", "solve", "augment"]
