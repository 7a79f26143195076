"""Alignment objectives and their analytic gradients.

Conventions
-----------
``alpha`` lives in [0, 1] with a ``1/(2*lam)`` prefactor on the quadratic form.
The negative-entropy term is ``H(a) = a log a + (1 - a) log(1 - a)`` (so H <= 0).
Point gradients are returned for every union row; rows belonging to the
source set A are zero because only the matched target moves.
"""

import enum
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, log_expit, xlogy

from .errors import DimensionError, UnsupportedKernel
from .kernels import build_gram, kernel_matrix, quad_form_grad
from .pointset import PointSet, make_labeled_union


class MmdNormalization(enum.Enum):
    STANDARD = "standard"
    PAPER_FORM = "paper_form"


@dataclass(frozen=True)
class PrimalDiscriminator:
    w: np.ndarray
    b: float = 0.0
    lam: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).ravel()
        if not (np.all(np.isfinite(w)) and np.isfinite(self.b)):
            raise ValueError("discriminator parameters must be finite")
        object.__setattr__(self, "w", w)

    def score(self, x):
        return np.asarray(x) @ self.w + self.b


@dataclass(frozen=True)
class DualState:
    """Per-point dual weights plus the penalty coefficients.

    With ``project=True`` alpha is kept inside [eps, 1 - eps] by the optimizer
    and the positivity penalty is inactive. With ``project=False`` the entropy
    is evaluated on the clipped weights and ``penalty_positivity`` charges
    ``lam2 * sum(|min(0, alpha)|)``.
    """

    alpha: np.ndarray
    lam: float = 1.0
    penalty_balance: float = 0.0
    penalty_positivity: float = 0.0
    clamp_eps: float = 1e-6
    project: bool = True
    a_count: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=np.float64).ravel())
        if self.lam <= 0:
            raise ValueError("lambda must be positive")

    def with_alpha(self, alpha):
        return replace(self, alpha=alpha)


@dataclass(frozen=True)
class CriticState:
    w: np.ndarray
    b: float = 0.0
    gp_weight: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=np.float64).ravel())


# --- variational log-sigmoid machinery --------------------------------------


def neg_entropy(alpha):
    """Elementwise ``a log a + (1-a) log(1-a)`` with 0 log 0 = 0."""
    a = np.asarray(alpha, dtype=np.float64)
    return xlogy(a, a) + xlogy(1.0 - a, 1.0 - a)


def log_sigmoid_bound(u, alpha):
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return float(alpha * u + neg_entropy(alpha))


def bound_minimizer(u):
    """argmin over alpha of ``alpha*u + H(alpha)``: sigmoid(-u)."""
    return expit(-np.asarray(u, dtype=np.float64))


# --- primal logistic distance ---------------------------------------------


def _check_dim(vec, c):
    if vec.shape[0] != c.dim:
        raise DimensionError(f"parameter of length {vec.shape[0]} for {c.dim}-D points")


def primal_distance(disc, c):
    _check_dim(disc.w, c)
    margins = c.labels * disc.score(c.points)
    return float(log_expit(margins).sum() - 0.5 * disc.lam * disc.w @ disc.w)


def primal_grad(disc, c):
    """Returns ``(grad_w, grad_b, grad_points)`` of :func:`primal_distance`."""
    _check_dim(disc.w, c)
    y = c.labels
    r = expit(-(y * disc.score(c.points))) * y
    grad_w = r @ c.points - disc.lam * disc.w
    grad_b = float(r.sum())
    grad_points = r[:, None] * disc.w[None, :]
    grad_points[: c.a_count] = 0.0
    return grad_w, grad_b, grad_points


def generator_nonsaturating_loss(disc, c):
    """Inverted-label generator loss: ``-sum_{B'} log sigmoid(score)``."""
    _check_dim(disc.w, c)
    return float(-log_expit(disc.score(c.b_points)).sum())


def generator_nonsaturating_grad(disc, c):
    s = disc.score(c.b_points)
    g = np.zeros_like(c.points)
    g[c.a_count :] = -expit(-s)[:, None] * disc.w[None, :]
    return g


def best_bias(w, c, lam=1.0):
    """Maximize the primal objective over the bias at fixed ``w``.

    The bias derivative is strictly decreasing from |A| to -|B|, so its root
    is bracketed and found by Brent's method.
    """
    w = np.asarray(w, dtype=np.float64)
    _check_dim(w, c)
    s = c.points @ w
    y = c.labels

    def dbias(b):
        return float((expit(-(y * (s + b))) * y).sum())

    lo, hi = -1.0, 1.0
    while dbias(lo) < 0 and lo > -1e12:
        lo *= 2.0
    while dbias(hi) > 0 and hi < 1e12:
        hi *= 2.0
    return float(brentq(dbias, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500))


# --- dual distance ------------------------------------------------------------


def _check_alpha(state, n):
    if state.alpha.shape[0] != n:
        raise DimensionError(f"alpha has length {state.alpha.shape[0]}, expected {n}")


def _entropy_alpha(state):
    if state.project:
        return state.alpha
    return np.clip(state.alpha, state.clamp_eps, 1.0 - state.clamp_eps)


def _balance(state, na):
    return state.alpha[:na].sum() - state.alpha[na:].sum()


def dual_penalties(state, na):
    val = state.penalty_balance * abs(_balance(state, na))
    if not state.project:
        val += state.penalty_positivity * np.abs(np.minimum(0.0, state.alpha)).sum()
    return float(val)


def dual_quadratic(state, gram):
    a = state.alpha
    return float(a @ gram.q @ a) / (2.0 * state.lam)


def dual_distance(state, gram):
    _check_alpha(state, gram.n)
    ent = neg_entropy(_entropy_alpha(state)).sum()
    return dual_quadratic(state, gram) + float(ent) + dual_penalties(state, gram.a_count)


def dual_grad_alpha(state, gram):
    _check_alpha(state, gram.n)
    na = gram.a_count
    a_ent = _entropy_alpha(state)
    g = gram.q @ state.alpha / state.lam + np.log(a_ent) - np.log1p(-a_ent)
    if not state.project:
        inside = (state.alpha > state.clamp_eps) & (state.alpha < 1.0 - state.clamp_eps)
        g = np.where(inside, g, gram.q @ state.alpha / state.lam)
        g = g - state.penalty_positivity * (state.alpha < 0)
    if state.penalty_balance:
        s = np.sign(_balance(state, na))
        g[:na] += state.penalty_balance * s
        g[na:] -= state.penalty_balance * s
    return g


def dual_grad_points(state, gram, kernel, c):
    """Gradient of the dual objective with respect to every union point."""
    coef = c.labels * state.alpha
    g = quad_form_grad(kernel, c.points, coef, gram.kmat) / (2.0 * state.lam)
    g[: c.a_count] = 0.0
    return g


def dual_grad(state, gram, kernel, c):
    """Returns ``(grad_alpha, grad_points)``."""
    _check_alpha(state, c.n)
    return dual_grad_alpha(state, gram), dual_grad_points(state, gram, kernel, c)


def recover_primal_w(state, c, kernel=None):
    """Closed-form ``w = (1/lam) sum_j alpha_j y_j x_j`` plus the best bias."""
    if kernel is not None and kernel.kind != "linear":
        raise UnsupportedKernel("an explicit weight vector exists only for the linear kernel")
    _check_alpha(state, c.n)
    w = (state.alpha * c.labels) @ c.points / state.lam
    return PrimalDiscriminator(w, best_bias(w, c, state.lam), state.lam)


def kernel_dual_scores(state, c, kernel, x=None):
    """``sum_j alpha_j y_j k(x_j, x) / lam`` evaluated at ``x`` (default: union points)."""
    coef = state.alpha * c.labels / state.lam
    x = c.points if x is None else x
    return kernel_matrix(kernel, x, c.points) @ coef


# --- MMD --------------------------------------------------------------------


def _blocks(kernel, a, b):
    pa = a.points if isinstance(a, PointSet) else np.asarray(a, dtype=np.float64)
    pb = b.points if isinstance(b, PointSet) else np.asarray(b, dtype=np.float64)
    if pa.shape[1] != pb.shape[1]:
        raise DimensionError(f"{pa.shape[1]}-D vs {pb.shape[1]}-D point sets")
    both = np.vstack([pa, pb])
    k = kernel_matrix(kernel, both)
    na = pa.shape[0]
    return k[:na, :na], k[na:, na:], k[:na, na:], both


def mmd_distance(kernel, a, b, normalization=MmdNormalization.STANDARD):
    kaa, kbb, kab, _ = _blocks(kernel, a, b)
    na, nb = kaa.shape[0], kbb.shape[0]
    normalization = MmdNormalization(normalization)
    if normalization is MmdNormalization.STANDARD:
        return float(kaa.sum() / na**2 + kbb.sum() / nb**2 - 2.0 * kab.sum() / (na * nb))
    return float(kaa.sum() / (2 * na) + kbb.sum() / (2 * nb) - kab.sum() / (na * nb))


def mmd_grad_points(kernel, a, b):
    """Gradient of Standard MMD with respect to the points of ``b``."""
    _, _, _, both = _blocks(kernel, a, b)
    na = a.points.shape[0] if isinstance(a, PointSet) else len(a)
    nb = both.shape[0] - na
    coef = np.r_[np.full(na, 1.0 / na), np.full(nb, -1.0 / nb)]
    g = quad_form_grad(kernel, both, coef)
    return g[na:]


def weighted_mmd(kernel, a, b, alpha, lam):
    """``(1/2lam) [aA'KaaA + aB'KbbB - 2 aA'KabB]`` on raw kernel blocks."""
    kaa, kbb, kab, _ = _blocks(kernel, a, b)
    alpha = np.asarray(alpha, dtype=np.float64)
    na = kaa.shape[0]
    if alpha.shape[0] != na + kbb.shape[0]:
        raise DimensionError("alpha length must equal |A| + |B|")
    aa, ab = alpha[:na], alpha[na:]
    return float(aa @ kaa @ aa + ab @ kbb @ ab - 2.0 * (aa @ kab @ ab)) / (2.0 * lam)


def weighted_mmd_grad_points(kernel, a, b, alpha, lam):
    """Gradient of :func:`weighted_mmd` with respect to the points of ``b``."""
    _, _, _, both = _blocks(kernel, a, b)
    na = a.points.shape[0] if isinstance(a, PointSet) else len(a)
    coef = np.asarray(alpha, dtype=np.float64).copy()
    coef[na:] *= -1.0
    return quad_form_grad(kernel, both, coef)[na:] / (2.0 * lam)


def frobenius_form(state, gram):
    """``(1/2lam) <alpha alpha^T, Q>_F + sum H(alpha)``, forming the rank-1 matrix explicitly."""
    _check_alpha(state, gram.n)
    s = np.outer(state.alpha, state.alpha)
    return float(np.sum(s * gram.q)) / (2.0 * state.lam) + float(neg_entropy(_entropy_alpha(state)).sum())


# --- linear WGAN critic with gradient penalty ------------------------------------


def _gp_term(w):
    return (np.linalg.norm(w) - 1.0) ** 2


def wgan_critic_value(critic, c):
    _check_dim(critic.w, c)
    fa = c.a_points @ critic.w + critic.b
    fb = c.b_points @ critic.w + critic.b
    return float(fa.mean() - fb.mean() - critic.gp_weight * _gp_term(critic.w))


def wgan_grad(critic, c):
    """Returns ``(grad_w, grad_b, grad_points)`` of :func:`wgan_critic_value`."""
    _check_dim(critic.w, c)
    norm = np.linalg.norm(critic.w)
    gp = 0.0 if norm == 0.0 else 2.0 * (norm - 1.0) / norm
    grad_w = c.a_points.mean(0) - c.b_points.mean(0) - critic.gp_weight * gp * critic.w
    g = np.zeros_like(c.points)
    g[c.a_count :] = -critic.w / c.b_count
    return grad_w, 0.0, g


# --- convenience -------------------------------------------------------------------


def union_and_gram(kernel, a, b_prime):
    c = make_labeled_union(a, b_prime)
    return c, build_gram(kernel, c)
