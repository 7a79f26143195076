"""Gradient dynamics: saddle simulator, primal ascent-descent and dual min-min descent."""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import (
    DIVERGENCE_THRESHOLD,
    RunTrace,
    Status,
    accuracy_from_scores,
    best_bias_for_scores,
    classify_trace,
    discriminator_accuracy,
    moment_gaps,
)
from .errors import DimensionError, InsufficientData, InvalidSpec
from .kernels import KernelSpec, build_gram, kernel_matrix, median_heuristic
from .matchers import Affine, FreePoints, apply, backprop_params
from .objectives import (
    CriticState,
    DualState,
    PrimalDiscriminator,
    dual_distance,
    dual_grad_alpha,
    dual_grad_points,
    generator_nonsaturating_grad,
    mmd_distance,
    mmd_grad_points,
    primal_distance,
    primal_grad,
    wgan_critic_value,
    wgan_grad,
)
from .pointset import PointSet, make_labeled_union, make_rng

OBJECTIVES = ("primal", "wgan", "dual_linear", "dual_kernel", "mmd")


@dataclass(frozen=True)
class OptimizerConfig:
    lr_theta: float = 0.05
    lr_disc: float = 0.01
    lr_alpha: float = 0.01
    mode: str = "simultaneous"
    disc_steps: int = 1
    iterations: int = 2000
    batch_size: int | None = None
    disc_pretrain_steps: int = 0
    seed: int = 0
    trace_every: int = 10
    lam: float = 1.0
    gp_weight: float = 10.0
    clamp_eps: float = 1e-6
    alpha_init: float = 0.5
    theta_rule: str = "sgd"
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    generator_loss: str = "nonsaturating"
    backtracking: bool = False
    snapshot_at: tuple = ()
    window_frac: float = 0.1
    classify_tol: float = 0.05

    def __post_init__(self):
        for name in ("lr_theta", "lr_disc", "lr_alpha"):
            if getattr(self, name) < 0 or not math.isfinite(getattr(self, name)):
                raise InvalidSpec(f"{name} must be a finite nonnegative number")
        if self.iterations < 1:
            raise InvalidSpec("iterations must be >= 1")
        if self.mode not in ("simultaneous", "alternating"):
            raise InvalidSpec(f"unknown mode {self.mode!r}")
        if self.disc_steps < 1 or self.disc_pretrain_steps < 0 or self.trace_every < 1:
            raise InvalidSpec("disc_steps and trace_every must be >= 1, pretrain steps >= 0")
        if self.batch_size is not None and self.batch_size < 2:
            raise InvalidSpec("batch_size must be >= 2 or None for full batch")
        if self.lam <= 0:
            raise InvalidSpec("lam must be positive")
        if not 0 < self.clamp_eps < 0.5:
            raise InvalidSpec("clamp_eps must lie in (0, 0.5)")
        if self.theta_rule not in ("sgd", "adam"):
            raise InvalidSpec(f"unknown theta_rule {self.theta_rule!r}")
        if self.generator_loss not in ("nonsaturating", "minimax"):
            raise InvalidSpec(f"unknown generator_loss {self.generator_loss!r}")


@dataclass(frozen=True)
class Penalties:
    """Balance (``lam1``) and positivity (``lam2``) penalties on alpha."""

    lam1: float = 1.0
    lam2: float = 0.0


@dataclass(frozen=True)
class ExactProjection:
    """Enforce sum(alpha_A) == sum(alpha_B) by Euclidean projection after each step."""


# --- saddle toy -------------------------------------------------------------------------


@dataclass(frozen=True)
class SaddleState:
    x: float
    y: float
    step: float


def saddle_step(state):
    """One simultaneous step on f(x, y) = x*y: descent in x, ascent in y."""
    return SaddleState(state.x - state.step * state.y, state.y + state.step * state.x, state.step)


def saddle_trajectory(x0=1.0, y0=0.0, step=0.1, steps=200):
    """``(steps + 1, 2)`` array of iterates starting at ``(x0, y0)``."""
    out = np.empty((steps + 1, 2))
    s = SaddleState(float(x0), float(y0), float(step))
    out[0] = s.x, s.y
    for t in range(1, steps + 1):
        s = saddle_step(s)
        out[t] = s.x, s.y
    return out


def saddle_trace(x0=1.0, y0=0.0, step=0.1, steps=200):
    """Saddle iterates as a RunTrace: objective is x*y, mean_gap the squared radius."""
    traj = saddle_trajectory(x0, y0, step, steps)
    trace = RunTrace()
    for t, (x, y) in enumerate(traj):
        trace.record(t, x * y, 0.5, x * x + y * y, 0.0)
        if not np.isfinite(x * x + y * y) or x * x + y * y > DIVERGENCE_THRESHOLD:
            trace.status = Status.DIVERGED
            break
    return trace


# --- projections --------------------------------------------------------------------------


def project_box(alpha, eps):
    return np.clip(alpha, eps, 1.0 - eps)


def project_box_balanced(v, signs, lo, hi, scale=None):
    """Projection onto ``{lo <= a <= hi, signs @ a == 0}``.

    Euclidean by default; with positive ``scale`` the metric is
    ``sum((a - v)**2 / scale)``. Either way the answer is
    ``clip(v - tau * scale * signs)`` for the root tau of a piecewise linear
    nonincreasing function, located among its breakpoints.
    """
    v = np.asarray(v, dtype=np.float64)
    s = np.asarray(signs, dtype=np.float64)
    u = s if scale is None else np.asarray(scale, dtype=np.float64) * s

    def g(tau):
        return np.clip(v[None, :] - np.atleast_1d(tau)[:, None] * u[None, :], lo, hi) @ s

    nz = u != 0
    bps = np.unique(np.r_[(v[nz] - lo) / u[nz], (v[nz] - hi) / u[nz]])
    vals = g(bps)
    if vals[0] < 0 or vals[-1] > 0:
        raise InvalidSpec("balance constraint is infeasible for these bounds")
    k = int(np.searchsorted(-vals, 0.0, side="left"))
    if vals[k] == 0.0:
        tau = bps[k]
    else:
        t0, t1, g0, g1 = bps[k - 1], bps[k], vals[k - 1], vals[k]
        tau = t0 + (t1 - t0) * g0 / (g0 - g1)
    return np.clip(v - tau * u, lo, hi)


# --- theta update rules -----------------------------------------------------------------------


class ThetaStepper:
    """SGD or Adam on the flattened matcher parameters."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params, grad_params, scale=1.0):
        g = grad_params.flat()
        lr = self.cfg.lr_theta * scale
        if self.cfg.theta_rule == "sgd":
            return params.unflat(params.flat() - lr * g)
        b1, b2 = self.cfg.adam_betas
        if self.m is None:
            self.m = np.zeros_like(g)
            self.v = np.zeros_like(g)
        self.t += 1
        self.m = b1 * self.m + (1 - b1) * g
        self.v = b2 * self.v + (1 - b2) * g * g
        mhat = self.m / (1 - b1**self.t)
        vhat = self.v / (1 - b2**self.t)
        return params.unflat(params.flat() - lr * mhat / (np.sqrt(vhat) + self.cfg.adam_eps))


# --- shared helpers ---------------------------------------------------------------------------


def _check_inputs(a, b, matcher):
    if a.dim != b.dim:
        raise DimensionError(f"A is {a.dim}-D but B is {b.dim}-D")
    if a.n < 2 or b.n < 2:
        raise InsufficientData("alignment needs at least two points per set")
    apply(matcher, b)


def _diverged(*values):
    for v in values:
        arr = np.asarray(v, dtype=np.float64)
        if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > DIVERGENCE_THRESHOLD):
            return True
    return False


def _finish(trace, cfg):
    if trace.status is Status.DIVERGED:
        return trace
    window = max(1, int(len(trace) * cfg.window_frac))
    try:
        trace.status = classify_trace(trace, window, cfg.classify_tol)
    except InsufficientData:
        trace.status = Status.MAX_ITERS
    return trace


def _observe(trace, it, cfg, a, b_prime, objective, acc, params, keep_params):
    mean_gap, cov_gap = moment_gaps(a, b_prime)
    trace.record(it, objective, acc, mean_gap, cov_gap)
    if keep_params:
        trace.params[it] = params
    if it in cfg.snapshot_at:
        trace.snapshots[it] = np.array(b_prime.points)
    return _diverged(objective, mean_gap, cov_gap)


def _should_record(it, cfg):
    return it % cfg.trace_every == 0 or it == cfg.iterations


def _record_final(trace, cfg, b_prime, params):
    trace.snapshots.setdefault(cfg.iterations if trace.status is not Status.DIVERGED else -1,
                               np.array(b_prime.points))
    trace.info["final_params"] = params


# --- primal min-max (logistic and WGAN-GP) ---------------------------------------------------------


def run_primal_alignment(a, b, matcher, objective="logistic", cfg=None, keep_params=False):
    """Gradient ascent on a linear discriminator/critic, descent on the matcher.

    ``objective`` is ``"logistic"`` (ADDA-style) or ``"wgan"``. With
    ``cfg.generator_loss == "nonsaturating"`` the logistic matcher step uses
    inverted labels; ``"minimax"`` descends the discriminator objective itself.
    """
    cfg = cfg or OptimizerConfig()
    _check_inputs(a, b, matcher)
    if objective not in ("logistic", "wgan"):
        raise InvalidSpec(f"unknown primal objective {objective!r}")
    wgan = objective == "wgan"
    d = a.dim
    disc = (CriticState(np.zeros(d), 0.0, cfg.gp_weight) if wgan
            else PrimalDiscriminator(np.zeros(d), 0.0, cfg.lam))
    params = matcher
    stepper = ThetaStepper(cfg)
    trace = RunTrace()
    trace.snapshots[0] = np.array(apply(params, b).points)

    def disc_update(disc, c):
        if wgan:
            gw, _, _ = wgan_grad(disc, c)
            return replace(disc, w=disc.w + cfg.lr_disc * gw)
        gw, gb, _ = primal_grad(disc, c)
        return replace(disc, w=disc.w + cfg.lr_disc * gw, b=disc.b + cfg.lr_disc * gb)

    def theta_grad_points(disc, c):
        if wgan:
            return -wgan_grad(disc, c)[2]
        if cfg.generator_loss == "nonsaturating":
            return generator_nonsaturating_grad(disc, c)
        return primal_grad(disc, c)[2]

    def value(disc, c):
        return wgan_critic_value(disc, c) if wgan else primal_distance(disc, c)

    b_prime = apply(params, b)
    c = make_labeled_union(a, b_prime)
    for _ in range(cfg.disc_pretrain_steps):
        disc = disc_update(disc, c)

    for it in range(cfg.iterations + 1):
        b_prime = apply(params, b)
        c = make_labeled_union(a, b_prime)
        if _should_record(it, cfg):
            val = value(disc, c)
            acc = discriminator_accuracy(disc, c)
            if _observe(trace, it, cfg, a, b_prime, val, acc, params, keep_params):
                trace.status = Status.DIVERGED
                break
        if it == cfg.iterations:
            break
        if cfg.mode == "simultaneous":
            gp = theta_grad_points(disc, c)
            disc = disc_update(disc, c)
        else:
            for _ in range(cfg.disc_steps):
                disc = disc_update(disc, c)
            gp = theta_grad_points(disc, c)
        grad = backprop_params(params, b, gp[c.a_count:])
        params = stepper.step(params, grad)
        if _diverged(params.flat(), disc.w):
            b_prime = apply(params, b) if not _diverged(params.flat()) else b_prime
            trace.status = Status.DIVERGED
            break
    trace.info["discriminator"] = disc
    _record_final(trace, cfg, b_prime, params)
    return _finish(trace, cfg)


# --- dual min-min -----------------------------------------------------------------------------


def _dual_state(alpha, cfg, penalties, na):
    if isinstance(penalties, ExactProjection):
        return DualState(alpha, cfg.lam, 0.0, 0.0, cfg.clamp_eps, True, na)
    return DualState(alpha, cfg.lam, penalties.lam1, penalties.lam2, cfg.clamp_eps, True, na)


def _project_alpha(alpha, labels, cfg, penalties):
    lo, hi = cfg.clamp_eps, 1.0 - cfg.clamp_eps
    if isinstance(penalties, ExactProjection):
        return project_box_balanced(alpha, labels, lo, hi)
    return np.clip(alpha, lo, hi)


def solve_dual(c, kernel, lam, *, eps=1e-6, exact=True, penalties=None, alpha0=None,
               max_iter=20000, tol=1e-13, gram=None):
    """Minimize the dual objective over alpha with the points held fixed.

    Projected gradient descent with a diagonal (Jacobi) metric and Armijo
    backtracking; the metric tames the entropy curvature near the box
    bounds. ``exact=True`` enforces the balance constraint by projection in
    that metric; otherwise ``penalties`` (default: none) join the objective.
    """
    gram = gram if gram is not None else build_gram(kernel, c)
    pen = ExactProjection() if exact else (penalties or Penalties(0.0, 0.0))
    lo, hi = eps, 1.0 - eps
    alpha = np.full(c.n, 0.5) if alpha0 is None else np.asarray(alpha0, dtype=np.float64)
    cfg = OptimizerConfig(lam=lam, clamp_eps=eps)
    state = _dual_state(_project_alpha(alpha, c.labels, cfg, pen), cfg, pen, c.a_count)
    f = dual_distance(state, gram)
    qdiag = np.diag(gram.q) / lam

    def project(v, scale):
        if exact:
            return project_box_balanced(v, c.labels, lo, hi, scale)
        return np.clip(v, lo, hi)

    step = 1.0
    for _ in range(max_iter):
        a = state.alpha
        g = dual_grad_alpha(state, gram)
        scale = 1.0 / (qdiag + 1.0 / (a * (1.0 - a)))
        while True:
            cand = project(a - step * scale * g, scale)
            delta = cand - a
            new = state.with_alpha(cand)
            fn = dual_distance(new, gram)
            if fn <= f + g @ delta + (delta @ (delta / scale)) / (2 * step) or step < 1e-16:
                break
            step *= 0.5
        state, f = new, fn
        step = min(1.0, step * 2.0)
        if np.max(np.abs(delta)) < tol:
            break
    return state, f


def run_dual_alignment(a, b, matcher, kernel, cfg=None, penalties=None, keep_params=False):
    """Joint descent on the per-point dual weights and the matcher.

    ``penalties`` is a :class:`Penalties` (default) or :class:`ExactProjection`.
    """
    cfg = cfg or OptimizerConfig()
    penalties = penalties if penalties is not None else Penalties()
    _check_inputs(a, b, matcher)
    na, nb = a.n, b.n
    n = na + nb
    alpha = _project_alpha(np.full(n, cfg.alpha_init), np.r_[np.ones(na), -np.ones(nb)], cfg, penalties)
    params = matcher
    stepper = ThetaStepper(cfg)
    rng = make_rng(cfg.seed)
    trace = RunTrace()
    trace.snapshots[0] = np.array(apply(params, b).points)
    batched = cfg.batch_size is not None and cfg.batch_size < n
    scale_min = 1.0

    def evaluate(params, alpha):
        b_prime = apply(params, b)
        c = make_labeled_union(a, b_prime)
        gram = build_gram(kernel, c)
        return b_prime, c, gram, _dual_state(alpha, cfg, penalties, na)

    def alpha_step(state, gram, labels, lr):
        g = dual_grad_alpha(state, gram)
        return _project_alpha(state.alpha - lr * g, labels, cfg, penalties)

    b_prime, c, gram, state = evaluate(params, alpha)
    for _ in range(cfg.disc_pretrain_steps):
        state = state.with_alpha(alpha_step(state, gram, c.labels, cfg.lr_alpha))
    alpha = state.alpha

    for it in range(cfg.iterations + 1):
        b_prime, c, gram, state = evaluate(params, alpha)
        if _should_record(it, cfg):
            val = dual_distance(state, gram)
            s = gram.kmat @ (alpha * c.labels) / cfg.lam
            acc = accuracy_from_scores(s + best_bias_for_scores(s, c.labels), c.labels)
            if _observe(trace, it, cfg, a, b_prime, val, acc, params, keep_params):
                trace.status = Status.DIVERGED
                break
        if it == cfg.iterations:
            break

        if batched:
            ka = max(1, round(cfg.batch_size * na / n))
            kb = max(1, cfg.batch_size - ka)
            ia = np.sort(rng.choice(na, size=min(ka, na), replace=False))
            ib = np.sort(rng.choice(nb, size=min(kb, nb), replace=False))
            idx = np.r_[ia, na + ib]
            sub = make_labeled_union(PointSet(a.points[ia]), PointSet(b_prime.points[ib]))
            sgram = build_gram(kernel, sub)
            sstate = state.with_alpha(alpha[idx])
            sstate = replace(sstate, a_count=len(ia))
            if cfg.mode == "alternating":
                for _ in range(cfg.disc_steps):
                    sstate = sstate.with_alpha(alpha_step(sstate, sgram, sub.labels, cfg.lr_alpha))
                gp_sub = dual_grad_points(sstate, sgram, kernel, sub)
            else:
                gp_sub = dual_grad_points(sstate, sgram, kernel, sub)
                sstate = sstate.with_alpha(alpha_step(sstate, sgram, sub.labels, cfg.lr_alpha))
            alpha = alpha.copy()
            alpha[idx] = sstate.alpha
            gp = np.zeros_like(b.points)
            gp[ib] = gp_sub[len(ia):]
            params = stepper.step(params, backprop_params(params, b, gp))
        else:
            f0 = dual_distance(state, gram) if cfg.backtracking else None
            scale = 1.0
            while True:
                if cfg.mode == "alternating":
                    st = state
                    for _ in range(cfg.disc_steps):
                        st = st.with_alpha(alpha_step(st, gram, c.labels, scale * cfg.lr_alpha))
                    new_alpha = st.alpha
                    gp = dual_grad_points(st, gram, kernel, c)
                else:
                    gp = dual_grad_points(state, gram, kernel, c)
                    new_alpha = alpha_step(state, gram, c.labels, scale * cfg.lr_alpha)
                grad = backprop_params(params, b, gp[na:])
                if not cfg.backtracking:
                    new_params = stepper.step(params, grad, scale)
                    break
                new_params = params.unflat(params.flat() - scale * cfg.lr_theta * grad.flat())
                _, _, g2, s2 = evaluate(new_params, new_alpha)
                if dual_distance(s2, g2) <= f0 or scale < 1e-12:
                    break
                scale *= 0.5
            scale_min = min(scale_min, scale)
            alpha, params = new_alpha, new_params
        if _diverged(params.flat(), alpha):
            trace.status = Status.DIVERGED
            break
    if cfg.backtracking:
        trace.info["stable_lr_scale"] = scale_min
    trace.info["alpha"] = alpha
    trace.info["kernel"] = kernel
    _record_final(trace, cfg, b_prime, params)
    return _finish(trace, cfg)


# --- MMD baseline ----------------------------------------------------------------------------


def run_mmd_alignment(a, b, matcher, kernel, cfg=None, keep_params=False):
    """Plain gradient descent on the standard MMD estimate through the matcher."""
    cfg = cfg or OptimizerConfig()
    _check_inputs(a, b, matcher)
    params = matcher
    stepper = ThetaStepper(cfg)
    trace = RunTrace()
    trace.snapshots[0] = np.array(apply(params, b).points)
    na, nb = a.n, b.n
    coef = np.r_[np.full(na, 1.0 / na), np.full(nb, -1.0 / nb)]
    for it in range(cfg.iterations + 1):
        b_prime = apply(params, b)
        if _should_record(it, cfg):
            c = make_labeled_union(a, b_prime)
            val = mmd_distance(kernel, a, b_prime)
            s = kernel_matrix(kernel, c.points) @ coef
            acc = accuracy_from_scores(s + best_bias_for_scores(s, c.labels), c.labels) if np.any(s) else 0.5
            if _observe(trace, it, cfg, a, b_prime, val, acc, params, keep_params):
                trace.status = Status.DIVERGED
                break
        if it == cfg.iterations:
            break
        gp = mmd_grad_points(kernel, a, b_prime)
        params = stepper.step(params, backprop_params(params, b, gp))
        if _diverged(params.flat()):
            trace.status = Status.DIVERGED
            break
    _record_final(trace, cfg, b_prime, params)
    return _finish(trace, cfg)


# --- dispatch ------------------------------------------------------------------------------------


def default_kernel(objective, a, b, sigma=None):
    if objective == "dual_linear":
        return KernelSpec.linear()
    if sigma is None:
        sigma = median_heuristic(np.vstack([a.points, b.points]))
    return KernelSpec.gaussian(sigma)


def run_alignment(objective, a, b, matcher, cfg, *, kernel=None, penalties=None, keep_params=False):
    """Run one alignment with any of :data:`OBJECTIVES`."""
    if objective not in OBJECTIVES:
        raise InvalidSpec(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")
    if objective == "primal":
        return run_primal_alignment(a, b, matcher, "logistic", cfg, keep_params)
    if objective == "wgan":
        return run_primal_alignment(a, b, matcher, "wgan", cfg, keep_params)
    kernel = kernel or default_kernel(objective, a, b)
    if objective == "dual_linear" and kernel.kind != "linear":
        kernel = KernelSpec.linear()
    if objective == "mmd":
        return run_mmd_alignment(a, b, matcher, kernel, cfg, keep_params)
    return run_dual_alignment(a, b, matcher, kernel, cfg, penalties, keep_params)


def identity_matcher(kind, b):
    if kind == "free_points":
        return FreePoints.identity(b)
    if kind == "affine":
        return Affine.identity(b.dim)
    raise InvalidSpec(f"unknown matcher kind {kind!r}")
