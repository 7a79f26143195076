"""Matching functions M_theta applied to the target cloud, with chain-rule gradients."""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidParams
from .pointset import PointSet, Tag


@dataclass(frozen=True, eq=False)
class FreePoints:
    """Every target point carries its own offset; zero offsets are the identity."""

    offsets: np.ndarray

    @classmethod
    def identity(cls, b):
        return cls(np.zeros_like(b.points))

    def flat(self):
        return np.asarray(self.offsets, dtype=np.float64).ravel()

    def unflat(self, vec):
        return FreePoints(np.asarray(vec, dtype=np.float64).reshape(np.shape(self.offsets)))


@dataclass(frozen=True, eq=False)
class Affine:
    matrix: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).ravel()
        if m.ndim != 2 or m.shape[0] != m.shape[1] or t.shape[0] != m.shape[0]:
            raise InvalidParams(f"affine matrix {m.shape} with translation {t.shape}")
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(t))):
            raise InvalidParams("affine parameters must be finite")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim), np.zeros(dim))

    def flat(self):
        """Row-major matrix followed by the translation."""
        return np.r_[self.matrix.ravel(), self.translation]

    def unflat(self, vec):
        d = self.translation.shape[0]
        vec = np.asarray(vec, dtype=np.float64)
        return Affine(vec[: d * d].reshape(d, d), vec[d * d :])


def apply(params, b):
    pts = b.points
    if isinstance(params, FreePoints):
        off = np.asarray(params.offsets, dtype=np.float64)
        if off.shape[0] != pts.shape[0]:
            raise InvalidParams(f"{off.shape[0]} offsets for {pts.shape[0]} points")
        if off.shape[1] != pts.shape[1]:
            raise DimensionError(f"{off.shape[1]}-D offsets for {pts.shape[1]}-D points")
        out = pts + off
    elif isinstance(params, Affine):
        if params.matrix.shape[1] != pts.shape[1]:
            raise DimensionError(f"{params.matrix.shape} matrix for {pts.shape[1]}-D points")
        out = pts @ params.matrix.T + params.translation
    else:
        raise InvalidParams(f"unknown matcher {type(params).__name__}")
    return PointSet(out, Tag.TARGET_B)


def backprop_params(params, b, grad_points):
    """Pull a gradient on the matched points back to the matcher parameters."""
    g = np.asarray(grad_points, dtype=np.float64)
    if g.shape != b.points.shape:
        raise DimensionError(f"gradient of shape {g.shape} for points of shape {b.points.shape}")
    if isinstance(params, FreePoints):
        return FreePoints(g.copy())
    if isinstance(params, Affine):
        return Affine(g.T @ b.points, g.sum(axis=0))
    raise InvalidParams(f"unknown matcher {type(params).__name__}")


def write_params_csv(path, params):
    """One ``value`` per row, in :meth:`flat` order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "value"])
        for i, v in enumerate(params.flat()):
            w.writerow([i, repr(float(v))])


def read_params_csv(path, template):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    vec = np.array([float(r[1]) for r in rows])
    if vec.shape[0] != template.flat().shape[0]:
        raise InvalidParams(f"{path}: {vec.shape[0]} values, expected {template.flat().shape[0]}")
    return template.unflat(vec)
