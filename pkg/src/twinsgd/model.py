"""Twin-hyperplane model, distance decision rule and model files."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset
from .kernel import KernelFamily, KernelSpec, map_features

FORMAT_VERSION = 1


class ModelFileError(ValueError):
    pass


def _vec(v) -> np.ndarray:
    a = np.array(v, dtype=np.float64).ravel()
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TwinModel:
    """Two proximal hyperplanes ``w1.phi(x) + b1 = 0`` and ``w2.phi(x) + b2 = 0``.

    ``phi`` is the identity for linear models and the reduced-kernel map when
    ``kernel`` is a Gaussian spec (then the weights have length r).
    """

    w1: np.ndarray
    b1: float
    w2: np.ndarray
    b2: float
    kernel: KernelSpec | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w1, w2 = _vec(self.w1), _vec(self.w2)
        if w1.shape != w2.shape:
            raise ValueError("w1 and w2 must have the same length")
        if self.kernel is not None and self.kernel.family is KernelFamily.GAUSSIAN:
            if len(w1) != self.kernel.r:
                raise ValueError(f"kernel model needs weights of length r={self.kernel.r}")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b1", float(self.b1))
        object.__setattr__(self, "b2", float(self.b2))
        object.__setattr__(self, "norm1", float(np.linalg.norm(w1)))
        object.__setattr__(self, "norm2", float(np.linalg.norm(w2)))

    @property
    def is_kernel(self) -> bool:
        return self.kernel is not None and self.kernel.family is KernelFamily.GAUSSIAN

    @property
    def input_dim(self) -> int:
        return self.kernel.n if self.is_kernel else len(self.w1)

    @property
    def converged(self) -> tuple[bool, bool]:
        c = self.meta.get("converged", [False, False])
        return bool(c[0]), bool(c[1])

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.input_dim:
            raise ValueError(f"expected inputs of dimension {self.input_dim}, got {X.shape[1]}")
        return map_features(self.kernel, X) if self.is_kernel else X

    def distances(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Normalised distances of each row of ``X`` to both planes.

        A zero-norm plane is infinitely far from everything.
        """
        F = self.transform(X)
        out = []
        for w, b, nrm in ((self.w1, self.b1, self.norm1), (self.w2, self.b2, self.norm2)):
            if nrm == 0.0:
                out.append(np.full(F.shape[0], np.inf))
            else:
                out.append(np.abs(F @ w + b) / nrm)
        return out[0], out[1]

    def predict(self, X) -> np.ndarray:
        d1, d2 = self.distances(X)
        # ties (including both planes degenerate) go to +1
        return np.where(d1 <= d2, 1, -1)


def predict(model: TwinModel, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict takes one vector; use TwinModel.predict for batches")
    return int(model.predict(x)[0])


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


def evaluate(model, dataset: Dataset) -> Metrics:
    """Accuracy and confusion counts (positive class = +1)."""
    if dataset.m == 0:
        raise ValueError("empty dataset")
    p1 = model.predict(dataset.X1)
    p2 = model.predict(dataset.X2)
    tp = int(np.sum(p1 == 1))
    tn = int(np.sum(p2 == -1))
    fn = dataset.m1 - tp
    fp = dataset.m2 - tn
    return Metrics((tp + tn) / dataset.m, tp, fn, fp, tn)


# ---------------------------------------------------------------------------
# serialisation


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _checksum(payload: dict) -> str:
    return hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()


def _floats(a) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def model_to_payload(model) -> dict:
    from .pegasos import PegasosModel

    if isinstance(model, PegasosModel):
        return {
            "format_version": FORMAT_VERSION,
            "algo": "pegasos",
            "mode": "linear",
            "n": len(model.w),
            "w": _floats(model.w),
            "b": float(model.b),
            "with_bias": model.with_bias,
            "converged": model.converged,
            "meta": model.meta,
        }
    k = model.kernel if model.is_kernel else None
    return {
        "format_version": FORMAT_VERSION,
        "algo": "sgtsvm",
        "mode": "gaussian-reduced" if k is not None else "linear",
        "n": model.input_dim,
        "r": k.r if k is not None else 0,
        "mu": k.mu if k is not None else None,
        "reference_points": _floats(k.reference_points) if k is not None else None,
        "w1": _floats(model.w1),
        "b1": model.b1,
        "w2": _floats(model.w2),
        "b2": model.b2,
        "meta": model.meta,
    }


def model_from_payload(payload: dict):
    from .pegasos import PegasosModel

    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFileError(f"unsupported model format_version {version!r} (expected {FORMAT_VERSION})")
    try:
        if payload["algo"] == "pegasos":
            return PegasosModel(
                np.array(payload["w"], dtype=np.float64),
                payload["b"],
                payload["converged"],
                payload["with_bias"],
                payload.get("meta", {}),
            )
        kernel = None
        if payload["mode"] == "gaussian-reduced":
            kernel = KernelSpec.gaussian(payload["mu"], np.array(payload["reference_points"]))
        elif payload["mode"] != "linear":
            raise ModelFileError(f"unknown model mode {payload['mode']!r}")
        return TwinModel(
            np.array(payload["w1"], dtype=np.float64),
            payload["b1"],
            np.array(payload["w2"], dtype=np.float64),
            payload["b2"],
            kernel,
            payload.get("meta", {}),
        )
    except KeyError as e:
        raise ModelFileError(f"model file is missing field {e}") from None


def save(model, path) -> None:
    """Write a versioned JSON model file with a sha256 checksum.

    Reals are written with Python's shortest round-trip repr, so ``load``
    reproduces every value bit for bit.
    """
    payload = model_to_payload(model)
    doc = dict(payload, checksum=_checksum(payload))
    text = json.dumps(doc, sort_keys=True, indent=1, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load(path):
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFileError(f"{path}: truncated or corrupt model file ({e.msg})") from None
    if not isinstance(doc, dict):
        raise ModelFileError(f"{path}: not a model file")
    stored = doc.pop("checksum", None)
    if doc.get("format_version") != FORMAT_VERSION:
        return model_from_payload(doc)  # raises the version error
    if stored != _checksum(doc):
        raise ModelFileError(f"{path}: checksum mismatch")
    return model_from_payload(doc)
