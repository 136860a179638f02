"""Binary probit: normal CDF, likelihood derivatives and Newton-Raphson MLE."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

# Probabilities entering log() are clamped here; keeps the objective finite
# for extreme linear predictors.
PROB_CLAMP = 1e-12
# Any |coefficient| above this during Newton iterations is treated as divergence.
SEPARATION_BOUND = 1e4

# Well-posed fits converge in a handful of Newton steps; slower fits get an
# exact separation check.
SLOW_FIT_ITERATIONS = 12

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ProbitError(ArithmeticError):
    pass


class DegenerateResponseError(ProbitError):
    pass


class SeparationError(ProbitError):
    pass


@dataclass(frozen=True)
class ProbitFit:
    coefficients: np.ndarray  # intercept first
    converged: bool
    iterations: int
    final_gradient_norm: float
    n_obs: int
    neg_loglik: float = float("nan")
    tol: float = 1e-8

    @property
    def n_covariates(self) -> int:
        return self.coefficients.shape[0] - 1

    def linear_predictor(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self.coefficients[0] + X @ self.coefficients[1:]


def std_normal_cdf(x):
    """Standard normal CDF; accepts scalars or arrays.

    Non-finite input raises ``ValueError``.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("std_normal_cdf requires finite input")
    out = special.ndtr(arr)
    return float(out) if out.ndim == 0 else out


def _mills(z: np.ndarray, cdf: np.ndarray | None = None) -> np.ndarray:
    """phi(z) / Phi(z); switches to log space where Phi(z) underflows."""
    if cdf is None:
        cdf = special.ndtr(z)
    pdf = np.exp(-0.5 * z * z - _LOG_SQRT_2PI)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = pdf / cdf
    tail = z < -30.0
    if tail.any():
        zt = z[tail]
        lam[tail] = np.exp(-0.5 * zt * zt - _LOG_SQRT_2PI - special.log_ndtr(zt))
    return lam


def probit_nll(beta, X, y, weights=None):
    """Negative log-likelihood of a probit model with gradient and Hessian.

    ``X`` must already contain the intercept column. ``weights`` are optional
    frequency weights (a resampled row counted ``w`` times).

    The value uses probabilities clamped to ``[1e-12, 1 - 1e-12]``; the
    gradient and Hessian use the exact inverse Mills ratio, so they are the
    analytic derivatives wherever the clamp is inactive (|x'b| below ~7).
    """
    beta = np.asarray(beta, dtype=float)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] != beta.shape[0] or X.shape[0] != y.shape[0]:
        raise ValueError(f"dimension mismatch: X {X.shape}, beta {beta.shape}, y {y.shape}")
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != y.shape:
        raise ValueError("weights must have the same length as y")
    return _Objective(X, 2.0 * y - 1.0, w)(beta)


class ProbitDesign:
    """Design matrix with intercept plus cached column products.

    Build once and pass to :func:`fit_probit` when the same covariates are
    fitted against many responses or weight vectors.
    """

    def __init__(self, X):
        self.Z = add_intercept(X)
        self.iu = np.triu_indices(self.Z.shape[1])
        self.pairs = self.Z[:, self.iu[0]] * self.Z[:, self.iu[1]]


class _Objective:
    """Probit NLL for fixed data."""

    def __init__(self, X, sign, w, design: ProbitDesign | None = None):
        self.X = X
        self.sign = sign
        self.w = w
        if design is None:
            self.iu = np.triu_indices(X.shape[1])
            self.pairs = X[:, self.iu[0]] * X[:, self.iu[1]]
        else:
            self.iu = design.iu
            self.pairs = design.pairs

    def __call__(self, beta):
        z = self.sign * (self.X @ beta)
        cdf = special.ndtr(z)
        value = -float(self.w @ np.log(np.clip(cdf, PROB_CLAMP, 1.0 - PROB_CLAMP)))
        lam = _mills(z, cdf)
        grad = -((self.w * self.sign * lam) @ self.X)
        upper = (self.w * lam * (lam + z)) @ self.pairs
        k = self.X.shape[1]
        hess = np.empty((k, k))
        hess[self.iu] = upper
        hess[self.iu[1], self.iu[0]] = upper
        return value, grad, hess


def add_intercept(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if X.size else X.reshape(-1, 0)
    return np.column_stack([np.ones(X.shape[0]), X])


def fit_probit(X, y, tol: float = 1e-8, max_iter: int = 100, weights=None, start=None) -> ProbitFit:
    """Maximum-likelihood probit fit by Newton-Raphson with step-halving.

    ``X`` holds covariates only (or is a :class:`ProbitDesign`); the
    intercept is added here. Iteration starts at zero (or ``start``; the
    closed-form MLE when there are no covariates) and stops once the max-norm of the gradient
    is at most ``tol``. Hitting ``max_iter`` returns a fit with
    ``converged=False``.

    Raises DegenerateResponseError when y has a single class and
    SeparationError when the data are perfectly separated or a coefficient
    diverges past 1e4.
    """
    design = X if isinstance(X, ProbitDesign) else ProbitDesign(X)
    Z = design.Z
    y = np.asarray(y, dtype=float).reshape(-1)
    if Z.shape[0] != y.shape[0]:
        raise ValueError(f"dimension mismatch: X has {Z.shape[0]} rows, y has {y.shape[0]}")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y must be binary")
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    active = w > 0
    n_eff = int(np.count_nonzero(active))
    k = Z.shape[1]
    if n_eff <= k - 1:
        raise ValueError(f"need more observations ({n_eff}) than covariates ({k - 1})")
    ys = y[active]
    if ys.min() == ys.max():
        raise DegenerateResponseError("degenerate response: y has a single class")

    sign = 2.0 * y - 1.0
    objective = _Objective(Z, sign, w, design)
    if k == 1:
        # intercept only: the MLE is the inverse CDF of the weighted mean
        beta = np.array([special.ndtri(np.dot(w, y) / w.sum())])
    else:
        beta = np.zeros(k) if start is None else np.array(start, dtype=float)
    value, grad, hess = objective(beta)
    gnorm = float(np.max(np.abs(grad)))
    it = 0
    converged = gnorm <= tol
    while not converged and it < max_iter:
        it += 1
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        t = 1.0
        for _ in range(60):
            cand = beta - t * step
            evaluated = objective(cand)
            if evaluated[0] <= value + 1e-13 * abs(value):
                break
            t *= 0.5
        else:
            break  # no descent possible at machine precision
        beta = cand
        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            raise SeparationError(
                f"separation: coefficient norm exceeded {SEPARATION_BOUND:g} at iteration {it}")
        value, grad, hess = evaluated
        gnorm = float(np.max(np.abs(grad)))
        converged = gnorm <= tol

    margins = (sign * (Z @ beta))[active]
    if np.all(margins > 0):
        raise SeparationError("separation: the fitted index classifies every observation")
    if it >= SLOW_FIT_ITERATIONS and _separable(Z[active], sign[active]):
        raise SeparationError("separation: a (quasi-)separating direction exists")
    return ProbitFit(beta, bool(converged), it, gnorm, int(round(w.sum())), value, tol)


def _separable(Z: np.ndarray, sign: np.ndarray) -> bool:
    # LP: is there b in the unit box with s_i z_i'b >= 0 for all i and > 0 for some?
    A = sign[:, None] * Z
    res = optimize.linprog(-A.sum(axis=0), A_ub=-A, b_ub=np.zeros(A.shape[0]),
                           bounds=[(-1.0, 1.0)] * Z.shape[1], method="highs")
    return bool(res.status == 0 and -res.fun > 1e-7 * max(1.0, np.abs(A).sum()) ** 0.5)


def predict_probit(fit: ProbitFit, x) -> float | np.ndarray:
    """Phi(b0 + x'b) for one covariate vector or each row of a matrix."""
    x = np.asarray(x, dtype=float)
    k = fit.n_covariates
    if x.ndim <= 1:
        if x.size != k:
            raise ValueError(f"expected {k} covariates, got {x.size}")
        return float(special.ndtr(fit.coefficients[0] + x.reshape(-1) @ fit.coefficients[1:]))
    if x.shape[1] != k:
        raise ValueError(f"expected {k} covariate columns, got {x.shape[1]}")
    return special.ndtr(fit.linear_predictor(x))
