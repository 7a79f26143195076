"""Kernels, the label-signed Gram matrix and kernel gradients."""

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DimensionError, InvalidSpec


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    sigma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "gaussian"):
            raise InvalidSpec(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian" and not (self.sigma is not None and self.sigma > 0):
            raise InvalidSpec("gaussian kernel needs a bandwidth sigma > 0")

    @classmethod
    def linear(cls):
        return cls("linear")

    @classmethod
    def gaussian(cls, sigma):
        return cls("gaussian", float(sigma))


@dataclass(frozen=True, eq=False)
class GramBlocks:
    """``q`` carries label signs; the blocks hold raw kernel values."""

    q: np.ndarray
    q_aa: np.ndarray
    q_bb: np.ndarray
    q_ab: np.ndarray
    kmat: np.ndarray
    labels: np.ndarray

    @property
    def a_count(self):
        return self.q_aa.shape[0]

    @property
    def n(self):
        return self.q.shape[0]


def _check_pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionError(f"vectors of shape {x.shape} and {y.shape}")
    return x, y


def kernel_eval(spec, x, y):
    x, y = _check_pair(x, y)
    if spec.kind == "linear":
        return float(x @ y)
    diff = x - y
    return float(np.exp((diff @ diff) * (-0.5 / (spec.sigma * spec.sigma))))


def kernel_grad_point(spec, x, y):
    """d k(x, y) / dx."""
    x, y = _check_pair(x, y)
    if spec.kind == "linear":
        return y.copy()
    return -(x - y) / spec.sigma**2 * kernel_eval(spec, x, y)


def kernel_matrix(spec, x, y=None):
    x = np.ascontiguousarray(x, dtype=np.float64)
    same = y is None
    y = x if same else np.ascontiguousarray(y, dtype=np.float64)
    if x.shape[1] != y.shape[1]:
        raise DimensionError(f"{x.shape[1]}-D vs {y.shape[1]}-D points")
    if spec.kind == "linear":
        k = x @ y.T
        return 0.5 * (k + k.T) if same else k
    return _backend.core.gaussian_gram(x, y, float(spec.sigma))


def quad_form_grad(spec, x, c, kmat=None):
    """Gradient of ``c^T K(x) c`` with respect to each row of ``x``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    if spec.kind == "linear":
        return 2.0 * c[:, None] * (c @ x)[None, :]
    if kmat is None:
        kmat = kernel_matrix(spec, x)
    return _backend.core.gaussian_quad_grad(x, c, np.ascontiguousarray(kmat), float(spec.sigma))


def build_gram(spec, c):
    kmat = kernel_matrix(spec, c.points)
    y = c.labels
    q = y[:, None] * kmat * y[None, :]
    na = c.a_count
    return GramBlocks(
        q=q,
        q_aa=kmat[:na, :na],
        q_bb=kmat[na:, na:],
        q_ab=kmat[:na, na:],
        kmat=kmat,
        labels=np.asarray(y),
    )


def median_heuristic(points):
    """Median pairwise Euclidean distance over distinct pairs."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[0] < 2:
        raise InvalidSpec("median heuristic needs two or more points")
    iu = np.triu_indices(pts.shape[0], k=1)
    diff = pts[iu[0]] - pts[iu[1]]
    med = float(np.median(np.sqrt(np.einsum("ij,ij->i", diff, diff))))
    if med <= 0:
        raise InvalidSpec("all points coincide; median distance is zero")
    return med
