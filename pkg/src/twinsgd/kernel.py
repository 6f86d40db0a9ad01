"""Gaussian kernel and the reduced-kernel feature map.

A nonlinear twin model is trained as a linear one over the features
``phi(x) = (K(x, r_1), ..., K(x, r_r))`` where ``r_i`` are reference points
drawn from the training data.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import Dataset

DEFAULT_REDUCED_SIZE = 100
_ROW_CHUNK = 2048


class KernelFamily(str, Enum):
    LINEAR = "linear"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True, eq=False)
class KernelSpec:
    family: KernelFamily = KernelFamily.LINEAR
    mu: float | None = None
    reference_points: np.ndarray | None = None

    def __post_init__(self):
        family = KernelFamily(self.family)
        object.__setattr__(self, "family", family)
        if family is KernelFamily.LINEAR:
            if self.reference_points is not None:
                raise ValueError("linear kernel takes no reference points")
            return
        if self.mu is None or not self.mu > 0:
            raise ValueError("Gaussian kernel needs mu > 0")
        if self.reference_points is None:
            raise ValueError("Gaussian kernel needs reference points")
        ref = np.array(self.reference_points, dtype=np.float64, ndmin=2)
        if ref.ndim != 2 or ref.shape[0] < 1:
            raise ValueError("reference points must be a non-empty matrix")
        ref.setflags(write=False)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "reference_points", ref)

    @classmethod
    def gaussian(cls, mu: float, reference_points) -> KernelSpec:
        return cls(KernelFamily.GAUSSIAN, mu, reference_points)

    @property
    def r(self) -> int:
        return 0 if self.reference_points is None else self.reference_points.shape[0]

    @property
    def n(self) -> int | None:
        return None if self.reference_points is None else self.reference_points.shape[1]

    def __eq__(self, other):
        if not isinstance(other, KernelSpec):
            return NotImplemented
        if self.family != other.family or self.mu != other.mu:
            return False
        if self.reference_points is None or other.reference_points is None:
            return self.reference_points is other.reference_points
        return np.array_equal(self.reference_points, other.reference_points)


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if spec.family is KernelFamily.LINEAR:
        return float(x @ y)
    d = x - y
    return float(np.exp(-spec.mu * np.sum(d * d)))


def map_features(spec: KernelSpec, X) -> np.ndarray:
    """Row-wise reduced-kernel map of an (m, n) matrix to (m, r)."""
    if spec.family is not KernelFamily.GAUSSIAN:
        raise ValueError("feature map is only defined for the Gaussian kernel")
    X = np.asarray(X, dtype=np.float64)
    R = spec.reference_points
    if X.ndim != 2 or X.shape[1] != R.shape[1]:
        raise ValueError(f"expected inputs of dimension {R.shape[1]}, got shape {X.shape}")
    out = np.empty((X.shape[0], R.shape[0]))
    # explicit differences (not the |x|^2 - 2xy + |y|^2 expansion) keep K(x, x) == 1 exactly
    for s in range(0, X.shape[0], _ROW_CHUNK):
        D = X[s:s + _ROW_CHUNK, None, :] - R[None, :, :]
        out[s:s + _ROW_CHUNK] = np.exp(-spec.mu * np.sum(D * D, axis=2))
    return out


def feature_map(spec: KernelSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("feature_map takes a single vector; use map_features for matrices")
    return map_features(spec, x[None, :])[0]


def map_dataset(spec: KernelSpec, dataset: Dataset) -> Dataset:
    return dataset.map_features(lambda A: map_features(spec, A))


def select_reference(dataset: Dataset, r: int = DEFAULT_REDUCED_SIZE, seed: int = 0) -> np.ndarray:
    """Draw ``r`` distinct samples uniformly from both classes pooled."""
    if r < 1:
        raise ValueError("r must be >= 1")
    if r > dataset.m:
        raise ValueError(f"cannot draw {r} reference points from {dataset.m} samples")
    rng = np.random.default_rng(seed)
    pick = rng.choice(dataset.m, size=r, replace=False)
    return dataset.X[pick]
