import dataclasses

import numpy as np
import pytest
from scipy.optimize import minimize

from dualalign.diagnostics import Status, discriminator_accuracy
from dualalign.errors import DimensionError, InvalidSpec
from dualalign.kernels import KernelSpec, build_gram
from dualalign.matchers import Affine, FreePoints, apply, backprop_params
from dualalign.objectives import (
    DualState,
    dual_distance,
    dual_grad_alpha,
    dual_grad_points,
    mmd_grad_points,
    recover_primal_w,
    weighted_mmd_grad_points,
)
from dualalign.optimizers import (
    ExactProjection,
    OptimizerConfig,
    Penalties,
    SaddleState,
    project_box_balanced,
    run_alignment,
    run_dual_alignment,
    run_mmd_alignment,
    run_primal_alignment,
    saddle_step,
    saddle_trace,
    saddle_trajectory,
    solve_dual,
)
from dualalign.pointset import GaussianBlob, GeneratorSpec, PointSet, Tag, generate, make_labeled_union


def blobs(n=40, seed_a=1, seed_b=2, shift=4.0):
    a = generate(GeneratorSpec(GaussianBlob((0.0, 0.0), ((1.0, 0.0), (0.0, 1.0))), n, seed_a))
    b = generate(GeneratorSpec(GaussianBlob((shift, 0.0), ((0.5, 0.0), (0.0, 2.0))), n, seed_b, Tag.TARGET_B))
    return a, b


# --- saddle ----------------------------------------------------------------------------------


def test_saddle_fixed_point_and_first_step():
    assert saddle_step(SaddleState(0.0, 0.0, 0.7)) == SaddleState(0.0, 0.0, 0.7)
    s = saddle_step(SaddleState(1.0, 0.0, 0.1))
    assert (s.x, s.y) == (1.0, 0.1)
    assert abs(s.x**2 + s.y**2 - 1.01) < 1e-15


@pytest.mark.parametrize("step", [0.01, 0.1, 0.5, 1.0])
def test_saddle_radius_recurrence(step):
    rng = np.random.default_rng(int(step * 100))
    x0, y0 = rng.normal(size=2)
    traj = saddle_trajectory(x0, y0, step, 300)
    r2 = np.sum(traj**2, axis=1)
    assert np.all(np.abs(r2[1:] / ((1 + step**2) * r2[:-1]) - 1.0) < 1e-12)


def test_saddle_trace_marks_divergence():
    short = saddle_trace(steps=200)
    assert short.status is not Status.DIVERGED and len(short) == 201
    long = saddle_trace(steps=5000)
    assert long.status is Status.DIVERGED and long.mean_gap[-1] > 1e12


# --- config --------------------------------------------------------------------------------


@pytest.mark.parametrize("kw", [dict(lr_theta=-1.0), dict(iterations=0), dict(mode="bogus"), dict(lam=0.0),
                                dict(clamp_eps=0.0), dict(theta_rule="rmsprop"), dict(batch_size=1),
                                dict(lr_alpha=float("nan"))])
def test_invalid_optimizer_config(kw):
    with pytest.raises(InvalidSpec):
        OptimizerConfig(**kw)


# --- projection ---------------------------------------------------------------------------------


@pytest.mark.filterwarnings("ignore:Values in x were outside bounds")
def test_balanced_projection_matches_generic_solver():
    rng = np.random.default_rng(3)
    for _ in range(25):
        na, nb = rng.integers(1, 6, size=2)
        v = rng.normal(0.5, 0.6, na + nb)
        s = np.r_[np.ones(na), -np.ones(nb)]
        lo, hi = 1e-6, 1 - 1e-6
        p = project_box_balanced(v, s, lo, hi)
        assert abs(p @ s) < 1e-12 and p.min() >= lo and p.max() <= hi
        ref = minimize(lambda z: 0.5 * np.sum((z - v) ** 2), np.full(v.size, 0.5), jac=lambda z: z - v,
                       bounds=[(lo, hi)] * v.size, constraints=[{"type": "eq", "fun": lambda z: z @ s, "jac": lambda z: s}],
                       method="SLSQP", options={"ftol": 1e-15, "maxiter": 500})
        assert np.sum((p - v) ** 2) <= np.sum((ref.x - v) ** 2) + 1e-9
        # weighted metric: the projection is a clipped shift along scale * signs
        scale = rng.uniform(0.1, 3.0, v.size)
        q = project_box_balanced(v, s, lo, hi, scale)
        assert abs(q @ s) < 1e-12
        ref = minimize(lambda z: 0.5 * np.sum((z - v) ** 2 / scale), np.full(v.size, 0.5), jac=lambda z: (z - v) / scale,
                       bounds=[(lo, hi)] * v.size, constraints=[{"type": "eq", "fun": lambda z: z @ s, "jac": lambda z: s}],
                       method="SLSQP", options={"ftol": 1e-15, "maxiter": 500})
        assert np.sum((q - v) ** 2 / scale) <= np.sum((ref.x - v) ** 2 / scale) + 1e-9


def test_solve_dual_exact_balance_and_box():
    rng = np.random.default_rng(4)
    a = PointSet(rng.normal(size=(6, 2)))
    b = PointSet(rng.normal(size=(9, 2)) + 1)
    c = make_labeled_union(a, b)
    state, f = solve_dual(c, KernelSpec.linear(), 1.0)
    assert abs(state.alpha[:6].sum() - state.alpha[6:].sum()) < 1e-10
    assert state.alpha.min() >= 1e-6 and state.alpha.max() <= 1 - 1e-6
    assert f == pytest.approx(dual_distance(state, build_gram(KernelSpec.linear(), c)))


# --- primal runs ------------------------------------------------------------------------------


def test_frozen_generator_keeps_params_and_discriminator_learns():
    a, b = blobs()
    cfg = OptimizerConfig(lr_theta=0.0, lr_disc=0.01, iterations=400, trace_every=20, lam=1.0)
    trace = run_primal_alignment(a, b, FreePoints.identity(b), "logistic", cfg)
    assert np.all(trace.info["final_params"].flat() == 0.0)
    acc = np.array(trace.disc_accuracy)
    assert acc[0] == 0.5 and acc[-1] > 0.95
    assert acc[len(acc) // 2:].mean() >= acc[: len(acc) // 2].mean()


def test_identical_sets_stay_indistinguishable():
    a, _ = blobs()
    cfg = OptimizerConfig(lr_theta=0.1, lr_disc=0.01, iterations=300, trace_every=10, lam=1.0)
    trace = run_primal_alignment(a, a.with_tag(Tag.TARGET_B), FreePoints.identity(a), "logistic", cfg)
    assert max(abs(v - 0.5) for v in trace.disc_accuracy) <= 0.1


def test_wgan_and_minimax_variants_run():
    a, b = blobs(20)
    cfg = OptimizerConfig(lr_theta=0.05, lr_disc=0.05, iterations=50, trace_every=5, generator_loss="minimax",
                          mode="alternating", disc_steps=3, disc_pretrain_steps=5)
    for obj in ("logistic", "wgan"):
        trace = run_primal_alignment(a, b, FreePoints.identity(b), obj, cfg)
        assert len(trace) == 11 and trace.status in Status


def test_primal_divergence_is_recorded_not_raised():
    a, b = blobs(20)
    cfg = OptimizerConfig(lr_theta=1e8, lr_disc=1e3, iterations=200, trace_every=1, lam=1.0)
    trace = run_primal_alignment(a, b, Affine.identity(2), "logistic", cfg)
    assert trace.status is Status.DIVERGED


@pytest.mark.slow
def test_primal_grid_has_oscillating_runs():
    a, b = blobs(100)
    statuses = []
    for lr_theta in (1.0, 3.0, 10.0):
        for lr_disc in (0.003, 0.01, 0.03):
            cfg = OptimizerConfig(lr_theta=lr_theta, lr_disc=lr_disc, iterations=5000, trace_every=10, lam=1.0)
            statuses.append(run_primal_alignment(a, b, FreePoints.identity(b), "logistic", cfg).status)
    assert Status.OSCILLATING in statuses


# --- dual runs --------------------------------------------------------------------------------


def test_frozen_alpha_step_equals_weighted_mmd_descent():
    a, b = blobs(15)
    kernel = KernelSpec.gaussian(2.0)
    cst, lam, lr, steps = 0.37, 2.0, 0.5, 100
    cfg = OptimizerConfig(lr_theta=lr, lr_alpha=0.0, iterations=steps, trace_every=1, lam=lam, alpha_init=cst)
    trace = run_dual_alignment(a, b, FreePoints.identity(b), kernel, cfg, Penalties(0.0, 0.0), keep_params=True)
    alpha = np.full(a.n + b.n, cst)
    params = FreePoints.identity(b)
    worst = 0.0
    for t in range(steps + 1):
        worst = max(worst, np.max(np.abs(trace.params[t].flat() - params.flat())))
        g = weighted_mmd_grad_points(kernel, a, apply(params, b), alpha, lam)
        params = params.unflat(params.flat() - lr * backprop_params(params, b, g).flat())
    assert worst < 1e-10


def test_single_full_batch_step_matches_oracle():
    a, b = blobs(12)
    kernel = KernelSpec.gaussian(1.5)
    cfg = OptimizerConfig(lr_theta=0.3, lr_alpha=0.05, iterations=1, trace_every=1, lam=3.0)
    pen = Penalties(0.2, 0.0)
    trace = run_dual_alignment(a, b, Affine.identity(2), kernel, cfg, pen, keep_params=True)
    c = make_labeled_union(a, b)
    gram = build_gram(kernel, c)
    state = DualState(np.full(24, 0.5), 3.0, 0.2, 0.0, a_count=12)
    alpha = np.clip(0.5 - 0.05 * dual_grad_alpha(state, gram), 1e-6, 1 - 1e-6)
    gp = dual_grad_points(state, gram, kernel, c)[12:]
    theta = Affine.identity(2).flat() - 0.3 * backprop_params(Affine.identity(2), b, gp).flat()
    assert np.max(np.abs(trace.info["alpha"] - alpha)) < 1e-14
    assert np.max(np.abs(trace.params[1].flat() - theta)) < 1e-14


def test_identical_sets_give_uninformative_alpha():
    a, _ = blobs(30)
    b = a.with_tag(Tag.TARGET_B)
    cfg = OptimizerConfig(lr_theta=0.1, lr_alpha=0.05, iterations=2000, trace_every=50, lam=10.0)
    trace = run_dual_alignment(a, b, FreePoints.identity(b), KernelSpec.linear(), cfg, Penalties(0.01, 0.0))
    c = make_labeled_union(a, apply(trace.info["final_params"], b))
    disc = recover_primal_w(DualState(trace.info["alpha"], 10.0), c)
    probs = 1.0 / (1.0 + np.exp(c.labels * (c.points @ disc.w)))
    assert np.max(np.abs(probs - 0.5)) < 0.05


def test_dual_kernel_blob_run_shrinks_covariance_gap():
    a, b = blobs(100)
    cfg = OptimizerConfig(lr_theta=3.0, lr_alpha=0.01, iterations=5000, trace_every=10, lam=10.0)
    trace = run_dual_alignment(a, b, FreePoints.identity(b), KernelSpec.gaussian(4.0), cfg, Penalties(0.01, 0.0))
    assert trace.status is Status.CONVERGED
    assert trace.cov_gap_ratio >= 100


def test_exact_projection_backtracking_is_monotone():
    a, b = blobs(20)
    cfg = OptimizerConfig(lr_theta=5.0, lr_alpha=0.05, iterations=300, trace_every=1, lam=5.0, backtracking=True)
    trace = run_dual_alignment(a, b, FreePoints.identity(b), KernelSpec.gaussian(3.0), cfg, ExactProjection())
    obj = np.array(trace.objective)
    assert np.all(np.diff(obj) <= 1e-12)
    assert 0 < trace.info["stable_lr_scale"] <= 1.0
    alpha = trace.info["alpha"]
    assert abs(alpha[:20].sum() - alpha[20:].sum()) < 1e-9


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_exact_projection_default_rates_do_not_increase_objective(seed):
    a, b = blobs(30, seed, seed + 10)
    cfg = OptimizerConfig(iterations=500, trace_every=50, lam=10.0)
    trace = run_dual_alignment(a, b, FreePoints.identity(b), KernelSpec.gaussian(4.0), cfg, ExactProjection())
    assert trace.objective[-1] <= trace.objective[0]
    assert np.all(np.isfinite(trace.info["alpha"]))


def test_minibatch_updates_only_the_batch_slice():
    a, b = blobs(20)
    cfg = OptimizerConfig(lr_theta=0.5, lr_alpha=0.1, iterations=1, trace_every=1, lam=2.0, batch_size=8, seed=9)
    trace = run_dual_alignment(a, b, FreePoints.identity(b), KernelSpec.gaussian(2.0), cfg, Penalties(0.0, 0.0))
    moved_alpha = np.flatnonzero(trace.info["alpha"] != 0.5)
    moved_pts = np.flatnonzero(np.any(trace.info["final_params"].offsets != 0.0, axis=1))
    assert 0 < moved_alpha.size <= 8
    assert set(moved_pts + 20) <= set(moved_alpha)
    again = run_dual_alignment(a, b, FreePoints.identity(b), KernelSpec.gaussian(2.0), cfg, Penalties(0.0, 0.0))
    assert np.array_equal(again.info["alpha"], trace.info["alpha"])


def test_alternating_and_adam_modes_run():
    a, b = blobs(20)
    cfg = OptimizerConfig(lr_theta=0.05, lr_alpha=0.01, iterations=100, trace_every=10, lam=10.0,
                          mode="alternating", disc_steps=2, theta_rule="adam", disc_pretrain_steps=3)
    trace = run_dual_alignment(a, b, Affine.identity(2), KernelSpec.gaussian(3.0), cfg)
    assert len(trace) == 11 and np.all(np.isfinite(trace.objective))


def test_runs_are_bit_reproducible():
    a, b = blobs(25)
    cfg = OptimizerConfig(lr_theta=1.0, lr_alpha=0.02, iterations=200, trace_every=10, lam=10.0, batch_size=16)
    for obj in ("primal", "wgan", "dual_linear", "dual_kernel", "mmd"):
        t1 = run_alignment(obj, a, b, FreePoints.identity(b), cfg)
        t2 = run_alignment(obj, a, b, FreePoints.identity(b), cfg)
        assert t1.objective == t2.objective and t1.cov_gap == t2.cov_gap


def test_dimension_mismatch_rejected():
    a, _ = blobs(5)
    b3 = PointSet(np.zeros((5, 3)))
    with pytest.raises(DimensionError):
        run_dual_alignment(a, b3, FreePoints.identity(b3), KernelSpec.linear())


# --- MMD runs -----------------------------------------------------------------------------------


def test_mmd_stationary_when_sets_coincide():
    a, _ = blobs(20)
    assert np.linalg.norm(mmd_grad_points(KernelSpec.gaussian(1.0), a, a)) < 1e-8


def test_mmd_single_point_linear_descent():
    a, b = PointSet([[0.0]]), PointSet([[2.0]])
    pts = [2.0]
    params = FreePoints.identity(b)
    for _ in range(5):
        g = mmd_grad_points(KernelSpec.linear(), a, apply(params, b))
        params = params.unflat(params.flat() - 0.1 * g.ravel())
        pts.append(2.0 + params.flat()[0])
    # gradient 2(b - a) with lr 0.1 shrinks the gap by 0.8 per step
    assert np.allclose(pts, [2.0 * 0.8**k for k in range(6)], rtol=0, atol=1e-14)


def test_linear_mmd_matches_means_but_not_covariances():
    a, b = blobs(50)
    cfg = OptimizerConfig(lr_theta=20.0, iterations=300, trace_every=10)
    trace = run_mmd_alignment(a, b, FreePoints.identity(b), KernelSpec.linear(), cfg)
    assert trace.mean_gap[-1] < 1e-8 * trace.mean_gap[0]
    assert trace.cov_gap[-1] > 0.5 * trace.cov_gap[0]
