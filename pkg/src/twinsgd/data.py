"""Datasets, file loaders, synthetic generators, splitting and pair samplers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterator

import numpy as np


class DataFormatError(ValueError):
    """Raised when a dataset file cannot be parsed."""


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    label: int

    def __post_init__(self):
        if self.label not in (1, -1):
            raise ValueError(f"label must be +1 or -1, got {self.label!r}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Binary dataset stored as two row-major class matrices.

    ``X1`` holds the positive samples (one per row), ``X2`` the negatives.
    Both arrays are copied and made read-only on construction.
    """

    X1: np.ndarray
    X2: np.ndarray

    def __post_init__(self):
        X1 = np.array(self.X1, dtype=np.float64, order="C", ndmin=2)
        X2 = np.array(self.X2, dtype=np.float64, order="C", ndmin=2)
        if X1.ndim != 2 or X2.ndim != 2:
            raise ValueError("class matrices must be 2-D")
        if X1.shape[0] < 1 or X2.shape[0] < 1:
            raise ValueError("both classes need at least one sample")
        if X1.shape[1] != X2.shape[1] or X1.shape[1] < 1:
            raise ValueError(
                f"dimension mismatch between classes: {X1.shape[1]} vs {X2.shape[1]}"
            )
        X1.setflags(write=False)
        X2.setflags(write=False)
        object.__setattr__(self, "X1", X1)
        object.__setattr__(self, "X2", X2)

    @classmethod
    def from_xy(cls, X, y) -> Dataset:
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.ndim == 1:
            X = X[:, None]
        if len(X) != len(y):
            raise ValueError("X and y have different lengths")
        bad = ~np.isin(y, (1, -1))
        if bad.any():
            raise ValueError("labels must be +1 or -1")
        return cls(X[y == 1], X[y == -1])

    @property
    def n(self) -> int:
        return self.X1.shape[1]

    @property
    def m1(self) -> int:
        return self.X1.shape[0]

    @property
    def m2(self) -> int:
        return self.X2.shape[0]

    @property
    def m(self) -> int:
        return self.m1 + self.m2

    @property
    def X(self) -> np.ndarray:
        """All samples, positives first."""
        return np.vstack([self.X1, self.X2])

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([np.ones(self.m1, dtype=np.int64), -np.ones(self.m2, dtype=np.int64)])

    def samples(self) -> Iterator[Sample]:
        for x in self.X1:
            yield Sample(x, 1)
        for x in self.X2:
            yield Sample(x, -1)

    def flipped(self) -> Dataset:
        """Same samples with the class labels exchanged."""
        return Dataset(self.X2, self.X1)

    def subset(self, idx1, idx2) -> Dataset:
        return Dataset(self.X1[np.asarray(idx1)], self.X2[np.asarray(idx2)])

    def map_features(self, fn: Callable[[np.ndarray], np.ndarray]) -> Dataset:
        return Dataset(fn(self.X1), fn(self.X2))

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.X1.shape == other.X1.shape
            and self.X2.shape == other.X2.shape
            and np.array_equal(self.X1, other.X1)
            and np.array_equal(self.X2, other.X2)
        )

    def __repr__(self):
        return f"Dataset(n={self.n}, m1={self.m1}, m2={self.m2})"


# ---------------------------------------------------------------------------
# file formats


def _map_labels(raw: list[float], where: str) -> np.ndarray:
    values = sorted(set(raw))
    if len(values) != 2:
        raise DataFormatError(
            f"{where}: expected exactly two distinct labels, found {len(values)}: {values[:5]}"
        )
    hi = values[1]
    return np.array([1 if v == hi else -1 for v in raw], dtype=np.int64)


def load_libsvm(path) -> Dataset:
    """Read a LIBSVM/SVMlight text file into a dense dataset.

    Indices are 1-based and must be strictly increasing on each line; absent
    indices are zero. The numerically greater of the two raw labels becomes +1.
    """
    path = Path(path)
    labels: list[float] = []
    rows: list[tuple[list[int], list[float]]] = []
    n = 0
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: bad label {tokens[0]!r}") from None
            idx: list[int] = []
            val: list[float] = []
            prev = 0
            for tok in tokens[1:]:
                key, sep, value = tok.partition(":")
                if not sep:
                    raise DataFormatError(f"{path}:{lineno}: expected index:value, got {tok!r}")
                try:
                    j = int(key)
                    v = float(value)
                except ValueError:
                    raise DataFormatError(f"{path}:{lineno}: bad feature {tok!r}") from None
                if j <= prev:
                    raise DataFormatError(
                        f"{path}:{lineno}: indices must be 1-based and strictly increasing"
                    )
                prev = j
                idx.append(j - 1)
                val.append(v)
            n = max(n, prev)
            labels.append(label)
            rows.append((idx, val))
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    if n == 0:
        raise DataFormatError(f"{path}: no features present")
    y = _map_labels(labels, str(path))
    X = np.zeros((len(rows), n))
    for i, (idx, val) in enumerate(rows):
        X[i, idx] = val
    return Dataset(X[y == 1], X[y == -1])


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, label_column: int = -1) -> Dataset:
    """Read a numeric CSV whose ``label_column`` holds two distinct values.

    A first row made entirely of non-numeric cells is taken as a header.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows and not any(_is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    width = len(rows[0])
    if width < 2:
        raise DataFormatError(f"{path}: need a label column and at least one feature")
    col = label_column if label_column >= 0 else width + label_column
    if not 0 <= col < width:
        raise DataFormatError(f"{path}: label column {label_column} out of range for width {width}")
    data = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataFormatError(f"{path}:{i + 1}: ragged row ({len(row)} cells, expected {width})")
        for j, cell in enumerate(row):
            try:
                data[i, j] = float(cell)
            except ValueError:
                raise DataFormatError(f"{path}:{i + 1}: non-numeric cell {cell!r}") from None
    y = _map_labels(data[:, col].tolist(), str(path))
    X = np.delete(data, col, axis=1)
    return Dataset(X[y == 1], X[y == -1])


def load_dataset(path, fmt: str = "auto", label_column: int = -1) -> Dataset:
    path = Path(path)
    if fmt == "auto":
        fmt = "csv" if path.suffix.lower() == ".csv" else "libsvm"
    if fmt == "csv":
        return load_csv(path, label_column)
    if fmt == "libsvm":
        return load_libsvm(path)
    raise ValueError(f"unknown dataset format {fmt!r}")


def write_csv(dataset: Dataset, path, header: bool = True) -> None:
    """Emit ``x1..xn,label`` rows; reals use shortest round-trip repr."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow([f"x{j + 1}" for j in range(dataset.n)] + ["label"])
        for s in dataset.samples():
            w.writerow([repr(float(v)) for v in s.features] + [s.label])


def write_libsvm(dataset: Dataset, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for s in dataset.samples():
            feats = " ".join(
                f"{j + 1}:{float(v)!r}" for j, v in enumerate(s.features) if v != 0.0
            )
            fh.write(f"{s.label:+d} {feats}".rstrip() + "\n")


def write_dataset(dataset: Dataset, path, fmt: str = "auto") -> None:
    path = Path(path)
    if fmt == "auto":
        fmt = "csv" if path.suffix.lower() == ".csv" else "libsvm"
    if fmt == "csv":
        write_csv(dataset, path)
    elif fmt == "libsvm":
        write_libsvm(dataset, path)
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")


# ---------------------------------------------------------------------------
# generators


def gen_gaussian_1d(m_per_class: int, mean_sep: float = 2.0, seed: int = 0) -> Dataset:
    """Positives from N(+mean_sep, 1), negatives from N(-mean_sep, 1)."""
    if m_per_class < 1:
        raise ValueError("m_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    pos = rng.normal(mean_sep, 1.0, size=(m_per_class, 1))
    neg = rng.normal(-mean_sep, 1.0, size=(m_per_class, 1))
    return Dataset(pos, neg)


def gen_cross_planes(
    m_per_class: int, noise: float = 0.05, seed: int = 0, spread: float = 10.0
) -> Dataset:
    """Two crossing lines in the plane.

    Positives lie along x2 = x1, negatives along x2 = 1 - x1, with x1 uniform
    on [0, spread] and Gaussian noise of std ``noise`` added to x2. The lines
    cross at (0.5, 0.5). Penalties around 0.1 need a spread well above 1.
    """
    if m_per_class < 2:
        raise ValueError("m_per_class must be >= 2")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    if not spread > 0:
        raise ValueError("spread must be positive")
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.0, spread, m_per_class)
    b = rng.uniform(0.0, spread, m_per_class)
    pos = np.column_stack([a, a + noise * rng.standard_normal(m_per_class)])
    neg = np.column_stack([b, 1.0 - b + noise * rng.standard_normal(m_per_class)])
    return Dataset(pos, neg)


def minmax_scale(train: Dataset, *others: Dataset) -> list[Dataset]:
    """Scale every feature to [0, 1] using the training set's range.

    Constant features are left unscaled (shifted only).
    """
    X = train.X
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    span[span == 0] = 1.0
    fn = lambda A: (A - lo) / span
    return [d.map_features(fn) for d in (train, *others)]


# ---------------------------------------------------------------------------
# splitting


def _check_fraction(frac: float):
    if not 0.0 < frac < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")


def split(dataset: Dataset, train_fraction: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Class-stratified random train/test split."""
    _check_fraction(train_fraction)
    rng = np.random.default_rng(seed)
    parts = []
    for m in (dataset.m1, dataset.m2):
        k = int(round(train_fraction * m))
        if k < 1 or k > m - 1:
            raise ValueError(
                f"train_fraction {train_fraction} leaves an empty class part (class size {m})"
            )
        perm = rng.permutation(m)
        parts.append((np.sort(perm[:k]), np.sort(perm[k:])))
    (tr1, te1), (tr2, te2) = parts
    return dataset.subset(tr1, tr2), dataset.subset(te1, te2)


def kfold_index_arrays(dataset: Dataset, k: int, seed: int = 0):
    """Stratified fold assignment as index arrays.

    Returns a list of ``((train1, train2), (val1, val2))`` per fold where the
    arrays index into ``X1`` and ``X2``.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if min(dataset.m1, dataset.m2) < k:
        raise ValueError(
            f"each class needs at least k={k} samples (have {dataset.m1} and {dataset.m2})"
        )
    rng = np.random.default_rng(seed)
    chunks = [np.array_split(rng.permutation(m), k) for m in (dataset.m1, dataset.m2)]
    folds = []
    for i in range(k):
        val = tuple(np.sort(c[i]) for c in chunks)
        train = tuple(np.sort(np.concatenate([c[j] for j in range(k) if j != i])) for c in chunks)
        folds.append((train, val))
    return folds


def kfold_indices(dataset: Dataset, k: int, seed: int = 0) -> list[tuple[Dataset, Dataset]]:
    """Stratified k-fold views: a list of ``(train, validation)`` datasets."""
    return [
        (dataset.subset(*tr), dataset.subset(*va))
        for tr, va in kfold_index_arrays(dataset, k, seed)
    ]


# ---------------------------------------------------------------------------
# sampling


class SamplingKind(str, Enum):
    IID = "iid"
    EPOCH = "epoch"
    LCM = "lcm"


@dataclass(frozen=True)
class SamplingPolicy:
    kind: SamplingKind = SamplingKind.IID
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", SamplingKind(self.kind))
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SamplingMask:
    """Marks samples as invisible to the sampler.

    ``excluded(label, x)`` returns True for samples that must never be drawn.
    """

    excluded: Callable[[int, np.ndarray], bool]

    @classmethod
    def interval(cls, lo: float, hi: float, label: int = -1, feature: int = 0) -> SamplingMask:
        """Hide class ``label`` samples whose ``feature`` lies in [lo, hi]."""
        if lo > hi:
            raise ValueError("mask interval needs lo <= hi")
        return cls(lambda y, x: y == label and lo <= x[feature] <= hi)

    def visible(self, dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
        vis1 = np.array([i for i, x in enumerate(dataset.X1) if not self.excluded(1, x)], dtype=np.int64)
        vis2 = np.array([i for i, x in enumerate(dataset.X2) if not self.excluded(-1, x)], dtype=np.int64)
        if len(vis1) == 0 or len(vis2) == 0:
            which = "positive" if len(vis1) == 0 else "negative"
            raise ValueError(f"sampling mask hides the entire {which} class")
        return vis1, vis2


def visible_indices(dataset: Dataset, mask: SamplingMask | None):
    if mask is None:
        return np.arange(dataset.m1), np.arange(dataset.m2)
    return mask.visible(dataset)


_IID_BLOCK = 4096
# lcm blocks are materialised; refuse absurd block sizes
MAX_LCM_BLOCK = 50_000_000


class _IndexStream:
    """Endless stream of indices into ``pool`` built from random blocks."""

    def __init__(self, pool: np.ndarray, rng: np.random.Generator, kind: SamplingKind, block: int):
        self.pool = np.asarray(pool, dtype=np.int64)
        self.rng = rng
        self.kind = kind
        self.block = block
        self._buf = np.empty(0, dtype=np.int64)
        self._pos = 0

    def _next_block(self) -> np.ndarray:
        v = len(self.pool)
        if self.kind is SamplingKind.IID:
            pick = self.rng.integers(0, v, size=self.block)
        elif self.kind is SamplingKind.EPOCH:
            pick = self.rng.permutation(v)
        else:
            pick = self.rng.permutation(np.repeat(np.arange(v), self.block // v))
        return self.pool[pick]

    def take(self, k: int) -> np.ndarray:
        out = np.empty(k, dtype=np.int64)
        filled = 0
        while filled < k:
            if self._pos == len(self._buf):
                self._buf = self._next_block()
                self._pos = 0
            step = min(k - filled, len(self._buf) - self._pos)
            out[filled:filled + step] = self._buf[self._pos:self._pos + step]
            filled += step
            self._pos += step
        return out


class PairSampler:
    """Draws one positive and one negative index per iteration.

    * ``iid``: independent uniform draws within each class.
    * ``epoch``: each class is walked through a fresh random permutation.
    * ``lcm``: blocks of d = lcm(m1, m2) iterations in which every positive
      index appears d/m1 times and every negative index d/m2 times, in
      shuffled order.

    Masked samples are removed from the pools before drawing.
    """

    def __init__(self, policy: SamplingPolicy, dataset: Dataset, mask: SamplingMask | None = None):
        self.policy = policy
        self.dataset = dataset
        vis1, vis2 = visible_indices(dataset, mask)
        rng1, rng2 = (np.random.default_rng(s) for s in np.random.SeedSequence(policy.seed).spawn(2))
        kind = policy.kind
        if kind is SamplingKind.LCM:
            block = math.lcm(len(vis1), len(vis2))
            if block > MAX_LCM_BLOCK:
                raise ValueError(f"lcm block of {block} iterations is too large; use epoch sampling")
            self.block = block
            b1 = b2 = block
        else:
            self.block = None
            b1 = b2 = _IID_BLOCK
        self._s1 = _IndexStream(vis1, rng1, kind, b1)
        self._s2 = _IndexStream(vis2, rng2, kind, b2)
        self.t = 0

    def take(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Indices (into X1, X2) for the next ``k`` iterations."""
        self.t += k
        return self._s1.take(k), self._s2.take(k)

    def next_pair(self) -> tuple[Sample, Sample]:
        i, j = self.take(1)
        return Sample(self.dataset.X1[i[0]], 1), Sample(self.dataset.X2[j[0]], -1)


class PooledSampler:
    """One index per iteration into the stacked dataset (positives first).

    ``lcm`` has no meaning for a single pool and behaves like ``epoch``.
    """

    def __init__(self, policy: SamplingPolicy, dataset: Dataset, mask: SamplingMask | None = None):
        vis1, vis2 = visible_indices(dataset, mask)
        pool = np.concatenate([vis1, vis2 + dataset.m1])
        kind = SamplingKind.EPOCH if policy.kind is SamplingKind.LCM else policy.kind
        rng = np.random.default_rng(np.random.SeedSequence(policy.seed))
        self._s = _IndexStream(pool, rng, kind, _IID_BLOCK)
        self.t = 0

    def take(self, k: int) -> np.ndarray:
        self.t += k
        return self._s.take(k)
