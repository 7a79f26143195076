"""Run traces, convergence classification, discriminator accuracy and the toy DA evaluation."""

import csv
import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.special import expit, log_expit

from .errors import DimensionError, InsufficientData, InvalidSpec
from .pointset import PointSet, empirical_moments

DIVERGENCE_THRESHOLD = 1e12


class Status(enum.Enum):
    CONVERGED = "Converged"
    OSCILLATING = "Oscillating"
    DIVERGED = "Diverged"
    MAX_ITERS = "MaxIters"


@dataclass
class RunTrace:
    iterations: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    disc_accuracy: list = field(default_factory=list)
    mean_gap: list = field(default_factory=list)
    cov_gap: list = field(default_factory=list)
    status: Status = Status.MAX_ITERS
    # not serialized to the trace CSV
    snapshots: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def record(self, it, objective, acc, mean_gap, cov_gap):
        self.iterations.append(int(it))
        self.objective.append(float(objective))
        self.disc_accuracy.append(float(acc))
        self.mean_gap.append(float(mean_gap))
        self.cov_gap.append(float(cov_gap))

    def __len__(self):
        return len(self.iterations)

    @property
    def cov_gap_ratio(self):
        """Initial over final covariance gap (inf when the final gap is zero)."""
        if not self.cov_gap:
            return float("nan")
        first, last = self.cov_gap[0], self.cov_gap[-1]
        if not np.isfinite(last):
            return float("nan")
        return float("inf") if last == 0 else first / last


def moment_gaps(a, b_prime):
    """``(||mu_A - mu_B'||^2, ||Sigma_A - Sigma_B'||_F^2)`` with unbiased covariances."""
    ma, ca = empirical_moments(a)
    mb, cb = empirical_moments(b_prime)
    return float(np.sum((ma - mb) ** 2)), float(np.sum((ca - cb) ** 2))


def accuracy_from_scores(scores, labels):
    """Fraction with sign(score) == label; a zero score counts as half correct."""
    s = np.sign(np.asarray(scores, dtype=np.float64))
    lab = np.asarray(labels)
    correct = np.where(s == 0, 0.5, (s == lab).astype(np.float64))
    return float(correct.mean())


def best_bias_for_scores(scores, labels):
    """Bias maximizing the logistic log-likelihood of fixed scores."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)

    def dbias(b):
        return float((expit(-(y * (s + b))) * y).sum())

    if np.all(y > 0) or np.all(y < 0):
        raise InvalidSpec("bias needs both labels present")
    lo, hi = -1.0, 1.0
    while dbias(lo) < 0 and lo > -1e12:
        lo *= 2.0
    while dbias(hi) > 0 and hi < 1e12:
        hi *= 2.0
    return float(brentq(dbias, lo, hi, xtol=1e-12, maxiter=500))


def discriminator_accuracy(disc, c, kernel=None):
    """Accuracy of a primal discriminator or a dual state on the labeled union.

    A :class:`~dualalign.objectives.DualState` is scored through the kernel
    expansion ``sum_j alpha_j y_j k(x_j, x) / lam`` plus its best bias.
    """
    from .objectives import CriticState, DualState, kernel_dual_scores

    if isinstance(disc, DualState):
        if kernel is None:
            raise InvalidSpec("scoring a dual state needs its kernel")
        s = kernel_dual_scores(disc, c, kernel)
        return accuracy_from_scores(s + best_bias_for_scores(s, c.labels), c.labels)
    w = np.asarray(disc.w, dtype=np.float64)
    if w.shape[0] != c.dim:
        raise DimensionError(f"weights of length {w.shape[0]} for {c.dim}-D points")
    s = c.points @ w
    if isinstance(disc, CriticState):
        # critic offsets are arbitrary; calibrate before thresholding
        if not np.any(s):
            return 0.5
        return accuracy_from_scores(s + best_bias_for_scores(s, c.labels), c.labels)
    return accuracy_from_scores(s + disc.b, c.labels)


def _finite_ok(trace):
    for col in (trace.objective, trace.mean_gap, trace.cov_gap):
        arr = np.asarray(col, dtype=np.float64)
        if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > DIVERGENCE_THRESHOLD):
            return False
    return True


def classify_trace(trace, window=None, tol=0.05):
    """Label a trace Converged, Oscillating, Diverged or MaxIters.

    ``window`` defaults to 10% of the trace length.
    """
    n = len(trace.objective)
    if window is None:
        window = max(1, n // 10)
    if window < 1 or tol <= 0:
        raise ValueError("window and tol must be positive")
    if trace.status is Status.DIVERGED or not _finite_ok(trace):
        return Status.DIVERGED
    if n < 2 * window:
        raise InsufficientData(f"trace of length {n} is shorter than two windows of {window}")
    obj = np.asarray(trace.objective, dtype=np.float64)
    span = obj.max() - obj.min()
    tail = obj[-window:]
    spread = tail.std()
    if spread <= tol * span and trace.cov_gap[-1] <= trace.cov_gap[0]:
        return Status.CONVERGED
    if spread >= tol * span:
        half = window // 2
        drift = abs(tail[half:].mean() - tail[:half].mean()) if half else 0.0
        if drift < spread:
            return Status.OSCILLATING
    return Status.MAX_ITERS


def distance_drop_ratio(distances):
    """``(d_0 - d_T) / (max_t d - min_t d)``; used to filter runs by how much the distance fell."""
    d = np.asarray(distances, dtype=np.float64)
    span = d.max() - d.min()
    return 0.0 if span == 0 else float((d[0] - d[-1]) / span)


def passes_drop_filter(trace, threshold):
    return distance_drop_ratio(trace.objective) > threshold


# --- CSV ---------------------------------------------------------------------------

TRACE_HEADER = ["iter", "objective", "disc_acc", "mean_gap", "cov_gap"]


def _fmt(v):
    return repr(float(v))


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for row in zip(trace.iterations, trace.objective, trace.disc_accuracy, trace.mean_gap, trace.cov_gap):
            w.writerow([row[0]] + [_fmt(v) for v in row[1:]])


def read_trace_csv(path):
    trace = RunTrace()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for r in reader:
            trace.record(int(r["iter"]), float(r["objective"]), float(r["disc_acc"]),
                         float(r["mean_gap"]), float(r["cov_gap"]))
    return trace


# --- toy domain adaptation ----------------------------------------------------------------


@dataclass
class ToyDaResult:
    source_accuracy: float
    target_accuracy_before: float
    target_accuracy_after: list
    epochs: list = field(default_factory=list)
    trace: RunTrace | None = None

    @property
    def final_accuracy(self):
        return self.target_accuracy_after[-1] if self.target_accuracy_after else self.target_accuracy_before

    @property
    def improved(self):
        return self.final_accuracy > self.target_accuracy_before


def fit_source_classifier(source, lam=1e-3):
    """Ridge-regularized logistic regression on labeled source points, to convergence."""
    if source.labels is None:
        raise InvalidSpec("source points carry no class labels")
    if np.unique(source.labels).size < 2:
        raise InvalidSpec("source must contain two classes")
    x = source.points
    y = np.where(source.labels > 0, 1.0, -1.0)
    d = x.shape[1]

    def f(theta):
        w, b = theta[:d], theta[d]
        m = y * (x @ w + b)
        r = expit(-m) * y
        val = -log_expit(m).sum() + 0.5 * lam * w @ w
        grad = np.r_[-(r @ x) + lam * w, -r.sum()]
        return val, grad

    res = minimize(f, np.zeros(d + 1), jac=True, method="L-BFGS-B",
                   options={"maxiter": 10000, "gtol": 1e-10, "ftol": 1e-15})
    return res.x[:d], float(res.x[d])


def classifier_accuracy(w, b, points, labels):
    pred = (points @ w + b) > 0
    return float(np.mean(pred == (np.asarray(labels) > 0)))


def toy_da_evaluate(source_labeled, target, target_labels_heldout, matcher, *,
                    objective="dual_kernel", config=None, kernel=None, penalties=None):
    """Train on labeled source, align the unlabeled target, score each epoch.

    Only :func:`classifier_accuracy` ever sees ``target_labels_heldout``; the
    alignment run receives the target points alone.
    """
    from . import optimizers

    w, b = fit_source_classifier(source_labeled)
    src_acc = classifier_accuracy(w, b, source_labeled.points, source_labeled.labels)
    before = classifier_accuracy(w, b, target.points, target_labels_heldout)
    source_unlabeled = PointSet(source_labeled.points, source_labeled.tag)
    unlabeled_target = PointSet(target.points, target.tag)
    cfg = config or optimizers.OptimizerConfig()
    trace = optimizers.run_alignment(objective, source_unlabeled, unlabeled_target, matcher, cfg,
                                     kernel=kernel, penalties=penalties, keep_params=True)
    from .matchers import apply

    epochs, after = [], []
    for it, params in sorted(trace.params.items()):
        moved = apply(params, unlabeled_target).points
        if not np.all(np.isfinite(moved)):
            after.append(0.0)
        else:
            after.append(classifier_accuracy(w, b, moved, target_labels_heldout))
        epochs.append(it)
    return ToyDaResult(src_acc, before, after, epochs, trace)


def write_toy_da_csv(path, result):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "target_acc"])
        for e, acc in zip(result.epochs, result.target_accuracy_after):
            w.writerow([e, _fmt(acc)])


def toy_da_summary_row(result):
    return {
        "source_acc": _fmt(result.source_accuracy),
        "target_acc_before": _fmt(result.target_accuracy_before),
        "target_acc_final": _fmt(result.final_accuracy),
        "improved": int(result.improved),
    }
