"""Reference computations written independently of the package code.

Everything here uses plain loops or scipy so that agreement with the
package is evidence rather than tautology.
"""

import math

import numpy as np
from scipy.optimize import minimize


def log_sigmoid(u):
    # stable for both signs
    return -math.log1p(math.exp(-u)) if u >= 0 else u - math.log1p(math.exp(u))


def sigmoid(u):
    return 1.0 / (1.0 + math.exp(-u)) if u >= 0 else math.exp(u) / (1.0 + math.exp(u))


def primal_objective_loops(points, labels, w, b, lam):
    total = 0.0
    for x, y in zip(points, labels):
        total += log_sigmoid(y * (sum(wi * xi for wi, xi in zip(w, x)) + b))
    return total - 0.5 * lam * sum(wi * wi for wi in w)


def primal_optimum(points, labels, lam):
    """Maximize the regularized logistic log-likelihood over (w, b) by Newton trust region."""
    x = np.asarray(points, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n, d = x.shape
    xa = np.hstack([x, np.ones((n, 1))])
    reg = np.r_[np.full(d, lam), 0.0]

    def negf(t):
        m = y * (xa @ t)
        return np.logaddexp(0.0, -m).sum() + 0.5 * (reg * t) @ t

    def grad(t):
        m = y * (xa @ t)
        p = np.exp(-np.logaddexp(0.0, m))  # sigmoid(-m)
        return -(p * y) @ xa + reg * t

    def hess(t):
        m = y * (xa @ t)
        s = np.exp(-np.logaddexp(0.0, m)) * np.exp(-np.logaddexp(0.0, -m))
        return (xa * s[:, None]).T @ xa + np.diag(reg)

    res = minimize(negf, np.zeros(d + 1), jac=grad, hess=hess, method="trust-exact",
                   options={"gtol": 1e-12, "maxiter": 1000})
    return -res.fun, res.x[:d], res.x[d]


def wgan_loops(points_a, points_b, w, b, gp_weight):
    fa = [sum(wi * xi for wi, xi in zip(w, x)) + b for x in points_a]
    fb = [sum(wi * xi for wi, xi in zip(w, x)) + b for x in points_b]
    norm = math.sqrt(sum(wi * wi for wi in w))
    return sum(fa) / len(fa) - sum(fb) / len(fb) - gp_weight * (norm - 1.0) ** 2


def gauss(x, y, sigma):
    return math.exp(-sum((xi - yi) ** 2 for xi, yi in zip(x, y)) / (2 * sigma * sigma))


def weighted_mmd_loops(a, b, alpha, lam, k):
    na = len(a)
    aa, ab = alpha[:na], alpha[na:]
    s = 0.0
    for i in range(na):
        for j in range(na):
            s += aa[i] * aa[j] * k(a[i], a[j])
    for i in range(len(b)):
        for j in range(len(b)):
            s += ab[i] * ab[j] * k(b[i], b[j])
    for i in range(na):
        for j in range(len(b)):
            s -= 2 * aa[i] * ab[j] * k(a[i], b[j])
    return s / (2 * lam)
