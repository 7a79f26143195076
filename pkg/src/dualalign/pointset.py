"""Point clouds, synthetic generators and the labeled union of two domains."""

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InsufficientData, InvalidSpec


class Tag(enum.Enum):
    SOURCE_A = "A"
    TARGET_B = "B"


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PointSet:
    """An ordered set of points in R^d.

    ``labels`` optionally carries per-point class labels (0/1) for labeled
    source data; alignment code never looks at it.
    """

    points: np.ndarray
    tag: Tag = Tag.SOURCE_A
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidSpec(f"expected a nonempty (n, d) array, got shape {pts.shape}")
        object.__setattr__(self, "points", _frozen(pts))
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (pts.shape[0],):
                raise InvalidSpec("labels must have one entry per point")
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.n

    def with_tag(self, tag):
        return PointSet(self.points, tag, self.labels)


@dataclass(frozen=True, eq=False)
class LabeledUnion:
    """Source points (label +1) followed by transformed target points (label -1)."""

    points: np.ndarray
    labels: np.ndarray
    a_count: int
    b_count: int

    @property
    def n(self):
        return self.a_count + self.b_count

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def a_points(self):
        return self.points[: self.a_count]

    @property
    def b_points(self):
        return self.points[self.a_count :]


# --- generators -------------------------------------------------------------


@dataclass(frozen=True)
class GaussianBlob:
    mean: tuple
    covariance: tuple


@dataclass(frozen=True)
class Ring:
    center: tuple
    radius: float
    noise_sd: float = 0.0


@dataclass(frozen=True)
class TwoClassLabeled:
    """Two Gaussian blobs; ``count`` points are split evenly, class 0 first."""

    class0: GaussianBlob
    class1: GaussianBlob


@dataclass(frozen=True)
class GeneratorSpec:
    kind: GaussianBlob | Ring | TwoClassLabeled
    count: int
    seed: int
    tag: Tag = field(default=Tag.SOURCE_A)


def make_rng(seed):
    """Counter-based Philox stream; the only randomness source in the package."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def _cholesky(blob):
    mean = np.asarray(blob.mean, dtype=np.float64)
    cov = np.asarray(blob.covariance, dtype=np.float64)
    if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
        raise InvalidSpec(f"covariance shape {cov.shape} does not match mean of length {mean.size}")
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
        raise InvalidSpec("covariance is not symmetric")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise InvalidSpec("covariance is not positive definite") from exc
    return mean, chol


def _blob(blob, count, rng):
    mean, chol = _cholesky(blob)
    z = rng.standard_normal((count, mean.size))
    return mean + z @ chol.T


def generate(spec):
    """Draw ``spec.count`` points; identical specs give bit-identical output."""
    if spec.count < 1:
        raise InvalidSpec("count must be positive")
    rng = make_rng(spec.seed)
    kind = spec.kind
    if isinstance(kind, GaussianBlob):
        return PointSet(_blob(kind, spec.count, rng), spec.tag)
    if isinstance(kind, Ring):
        center = np.asarray(kind.center, dtype=np.float64)
        if kind.radius <= 0 or kind.noise_sd < 0:
            raise InvalidSpec("ring needs radius > 0 and noise_sd >= 0")
        if center.size != 2:
            raise InvalidSpec("ring generator is two-dimensional")
        theta = rng.uniform(0.0, 2 * np.pi, spec.count)
        r = kind.radius + kind.noise_sd * rng.standard_normal(spec.count)
        pts = center + np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        return PointSet(pts, spec.tag)
    if isinstance(kind, TwoClassLabeled):
        n0 = spec.count // 2
        n1 = spec.count - n0
        if n0 < 1:
            raise InvalidSpec("two-class generator needs count >= 2")
        x0 = _blob(kind.class0, n0, rng)
        x1 = _blob(kind.class1, n1, rng)
        if x0.shape[1] != x1.shape[1]:
            raise InvalidSpec("class blobs differ in dimension")
        labels = np.r_[np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)]
        return PointSet(np.vstack([x0, x1]), spec.tag, labels)
    raise InvalidSpec(f"unknown generator kind {kind!r}")


def make_labeled_union(a, b_prime):
    if a.dim != b_prime.dim:
        raise DimensionError(f"A is {a.dim}-D but B' is {b_prime.dim}-D")
    pts = np.vstack([a.points, b_prime.points])
    pts.setflags(write=False)
    labels = np.r_[np.ones(a.n), -np.ones(b_prime.n)]
    labels.setflags(write=False)
    return LabeledUnion(pts, labels, a.n, b_prime.n)


def empirical_moments(p):
    """Sample mean and unbiased (n - 1) sample covariance."""
    pts = p.points if isinstance(p, PointSet) else np.asarray(p, dtype=np.float64)
    n = pts.shape[0]
    if n < 2:
        raise InsufficientData("need at least two points for a covariance")
    mean = pts.mean(axis=0)
    centered = pts - mean
    cov = centered.T @ centered / (n - 1)
    return mean, 0.5 * (cov + cov.T)


# --- CSV ---------------------------------------------------------------------


def write_points_csv(path, p, labels=None, label_column="label"):
    """Header ``x0,...,x{d-1}``; a trailing label column when labels are given.

    Union labels (+1/-1) go in ``label``; class labels (0/1) use ``class``.
    """
    if isinstance(p, LabeledUnion):
        pts, labels = p.points, p.labels
    else:
        pts = p.points
    header = [f"x{j}" for j in range(pts.shape[1])]
    if labels is not None:
        header.append(label_column)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, row in enumerate(pts):
            out = [repr(float(v)) for v in row]
            if labels is not None:
                out.append(str(int(labels[i])))
            w.writerow(out)


def read_points_csv(path, tag=Tag.SOURCE_A):
    """Inverse of :func:`write_points_csv`.

    Returns a LabeledUnion for a ``label`` column, a PointSet carrying class
    labels for a ``class`` column, else a plain PointSet.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidSpec(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    has_label = header[-1] == "label"
    data = np.array([[float(v) for v in r] for r in body], dtype=np.float64)
    if header[-1] == "class":
        return PointSet(data[:, :-1], tag, data[:, -1].astype(np.int64))
    if has_label:
        pts, lab = data[:, :-1], data[:, -1]
        a_count = int(np.sum(lab > 0))
        if not np.all(lab[:a_count] > 0) or not np.all(lab[a_count:] < 0):
            raise InvalidSpec(f"{path}: labels must be +1 rows followed by -1 rows")
        return make_labeled_union(PointSet(pts[:a_count]), PointSet(pts[a_count:], Tag.TARGET_B))
    return PointSet(data, tag)
