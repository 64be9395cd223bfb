"""Penalized (MAP) estimation under the GDP prior.

The GDP prior on ``beta_j | sigma`` induces the penalty
``p(|b|) = (alpha + 1) * log(sigma*eta + |b|)``.  This module has the scalar
thresholding rules for orthonormal designs, two EM algorithms for general
designs (normal and Laplace mixture representations), the exact weighted
lasso solver used by the latter, and the one-step estimator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from . import _backend
from .errors import ConvergenceError, DataError, NumericError, UsageError
from .model import Dataset

__all__ = [
    "MapConfig",
    "MapResult",
    "penalty",
    "penalty_derivative",
    "is_thresholding_rule",
    "threshold_orthogonal",
    "threshold_general",
    "neg_log_posterior",
    "sigma2_root",
    "weighted_lasso",
    "kkt_violation",
    "em_normal",
    "em_laplace",
    "one_step",
    "one_step_hyper",
    "lasso_bic",
    "least_squares",
]


# ----------------------------------------------------------------------------
# penalty and scalar thresholding
# ----------------------------------------------------------------------------

def penalty(beta_abs, alpha, eta, sigma):
    """``(alpha + 1) * log(sigma*eta + |beta|)``."""
    return (alpha + 1.0) * np.log(sigma * eta + np.abs(beta_abs))


def penalty_derivative(beta_abs, alpha, eta, sigma):
    return (alpha + 1.0) / (sigma * eta + np.abs(beta_abs))


def is_thresholding_rule(alpha: float, eta: float) -> bool:
    """True iff ``eta < 2*sqrt(alpha + 1)`` (the boundary itself is excluded)."""
    return bool(eta < 2.0 * math.sqrt(alpha + 1.0))


def threshold_orthogonal(beta_hat, sigma: float, alpha: float):
    """Closed-form MAP estimate on the continuity manifold ``eta = sqrt(alpha+1)``.

    Zero for ``|beta_hat| <= sigma*sqrt(alpha+1)``; otherwise the larger root
    of the first-order condition, with odd symmetry in ``beta_hat``.
    """
    if not (sigma > 0 and alpha > 0):
        raise UsageError("sigma and alpha must be positive")
    bh = np.asarray(beta_hat, dtype=float)
    s = sigma * math.sqrt(alpha + 1.0)
    b = np.abs(bh)
    rad = np.maximum((b + 3.0 * s) * (b - s), 0.0)
    mag = np.where(b > s, 0.5 * (b - s + np.sqrt(rad)), 0.0)
    out = np.sign(bh) * mag
    return out.item() if out.ndim == 0 else out


def _threshold_general_one(b: float, sigma: float, alpha: float, eta: float) -> float:
    # minimize h(x) = (b - x)^2/2 + c*log(se + x) over x >= 0, for b >= 0
    c = sigma * sigma * (alpha + 1.0)
    se = sigma * eta
    # h'(x) = 0  <=>  x^2 + (se - b) x + (c - b se) = 0
    B = b - se
    disc = (b + se) ** 2 - 4.0 * c
    if disc < 0.0:
        return 0.0
    sq = math.sqrt(disc)
    if B >= 0.0:
        big = 0.5 * (B + sq)
    else:
        small = 0.5 * (B - sq)
        big = (c - b * se) / small if small != 0.0 else 0.0
    if not big > 0.0:
        return 0.0
    # h(big) - h(0), written to avoid cancellation
    dh = 0.5 * big * (big - 2.0 * b) + c * math.log1p(big / se)
    return big if dh < 0.0 else 0.0


def threshold_general(beta_hat, sigma: float, alpha: float, eta: float):
    """Global minimizer of ``(beta_hat - b)^2/2 + sigma^2 p(|b|)`` for any ``(alpha, eta)``.

    The first-order condition is a quadratic in ``|b|``; its larger positive
    root is compared against ``b = 0`` on the exact objective.
    """
    if not (sigma > 0 and alpha > 0 and eta > 0):
        raise UsageError("sigma, alpha and eta must be positive")
    bh = np.asarray(beta_hat, dtype=float)
    mags = np.array([_threshold_general_one(abs(v), sigma, alpha, eta) for v in bh.ravel()])
    out = np.sign(bh) * mags.reshape(bh.shape)
    return out.item() if out.ndim == 0 else out


# ----------------------------------------------------------------------------
# results/config
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class MapConfig:
    alpha: float = 1.0
    eta: float = 1.0
    tol: float = 1e-6
    max_iters: int = 10_000
    zero_eps: float = 1e-8
    representation: str = "laplace"

    def __post_init__(self):
        if not (self.alpha > 0 and self.eta > 0):
            raise UsageError("alpha and eta must be positive")
        if not (self.tol > 0 and self.zero_eps > 0):
            raise UsageError("tol and zero_eps must be positive")
        if self.max_iters < 1:
            raise UsageError("max_iters must be >= 1")
        if self.representation not in ("normal", "laplace"):
            raise UsageError("representation must be 'normal' or 'laplace'")


@dataclass(frozen=True)
class MapResult:
    beta: np.ndarray
    sigma2: float
    support: tuple
    iterations: int
    converged: bool
    objective: tuple = field(default=(), repr=False)

    @classmethod
    def build(cls, beta, sigma2, zero_eps, iterations, converged, objective=()):
        beta = np.asarray(beta, dtype=float)
        support = tuple(int(j) for j in np.flatnonzero(np.abs(beta) > zero_eps))
        return cls(beta, float(sigma2), support, int(iterations), bool(converged), tuple(objective))


def _xy(data):
    if isinstance(data, Dataset):
        return data.X, data.y
    X, y = data
    return np.asarray(X, dtype=float), np.asarray(y, dtype=float)


def neg_log_posterior(beta, sigma2, X, y, alpha, eta) -> float:
    """Negative log of the marginal posterior of ``(beta, sigma2)``, up to a constant.

    Prior: ``beta_j | sigma ~ GDP(xi = sigma*eta/alpha, alpha)``, ``pi(sigma) ~ 1/sigma``.
    """
    n, p = X.shape
    r = y - X @ beta
    sigma = math.sqrt(sigma2)
    return float((0.5 * n + 1.0 - 0.5 * p * alpha) * math.log(sigma2) + (r @ r) / (2.0 * sigma2)
                 + (alpha + 1.0) * np.sum(np.log(sigma * eta + np.abs(beta))))


def sigma2_root(a: float, b: float, c: float) -> float:
    """Maximizer in ``sigma**2`` of ``a*log(sigma) - c/(2 sigma^2) - b/sigma`` (a < 0, c > 0).

    The positive root of ``a s^2 + b s + c = 0``, squared:
    ``(b^2 - 2ac + sqrt(b^4 - 4acb^2)) / (2a^2)``.
    """
    if not (a < 0 and c > 0 and b >= 0):
        raise UsageError("sigma2_root needs a < 0, b >= 0, c > 0")
    s = (b + math.sqrt(b * b - 4.0 * a * c)) / (-2.0 * a)
    return s * s


# ----------------------------------------------------------------------------
# weighted lasso
# ----------------------------------------------------------------------------

def _penalties(weights, lam):
    w = np.asarray(weights, dtype=float)
    if np.any(np.isnan(w)) or np.any(w < 0):
        raise UsageError("weights must be non-negative")
    if lam < 0:
        raise UsageError("lam must be non-negative")
    if lam == 0:
        return np.zeros_like(w)
    return lam * w


def _kkt_gap(G, c, pen, beta):
    q = c - G @ beta
    nz = beta != 0
    gap = np.zeros_like(q)
    gap[nz] = np.abs(q[nz] - 0.5 * pen[nz] * np.sign(beta[nz]))
    z = ~nz
    gap[z] = np.maximum(np.abs(q[z]) - 0.5 * pen[z], 0.0)
    return gap


def _polish(G, c, pen, beta):
    """Solve exactly on the current active set with fixed signs; keep if consistent."""
    act = np.flatnonzero(beta)
    if act.size == 0:
        return beta
    s = np.sign(beta[act])
    try:
        b = linalg.solve(G[np.ix_(act, act)], c[act] - 0.5 * pen[act] * s, assume_a="pos")
    except (linalg.LinAlgError, ValueError):
        return beta
    if not np.all(np.sign(b) == s):
        return beta
    cand = np.zeros_like(beta)
    cand[act] = b
    if np.max(_kkt_gap(G, c, pen, cand)) <= np.max(_kkt_gap(G, c, pen, beta)):
        return cand
    return beta


def _lasso_gram(G, c, pen, beta0=None, kkt_tol=1e-10, max_sweeps=100_000, chunk=500):
    p = len(c)
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    beta[np.isinf(pen)] = 0.0
    scale = max(1.0, float(np.max(np.abs(c))) if p else 1.0)
    tol = 1e-13 * scale
    used = 0
    # CD in chunks; after each, an exact solve on the active set usually
    # finishes the job even when CD itself crawls (near-collinear columns)
    while used < max_sweeps:
        budget = min(chunk, max_sweeps - used)
        sweeps = _backend.cd_lasso_gram(G, c, pen, beta, budget, tol)
        used += budget if sweeps < 0 else sweeps
        beta = _polish(G, c, pen, beta)
        if np.max(_kkt_gap(G, c, pen, beta), initial=0.0) <= kkt_tol * scale:
            return beta
        if sweeps >= 0:
            tol *= 1e-2
            if tol < 1e-25 * scale:
                raise ConvergenceError("weighted lasso: KKT conditions not met after refinement")
    raise ConvergenceError(f"weighted lasso: cycle limit ({max_sweeps} sweeps) exceeded")


def weighted_lasso(X, y, weights, lam: float, beta0=None) -> np.ndarray:
    """Minimize ``||y - X b||^2 + lam * sum_j w_j |b_j|`` exactly.

    Coordinate descent followed by an active-set solve; the returned vector
    satisfies the subgradient (KKT) conditions to ``1e-10`` relative to
    ``max|X'y|``.  Infinite weights pin the coefficient at zero.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    pen = _penalties(weights, lam)
    return _lasso_gram(X.T @ X, X.T @ y, pen, beta0)


def kkt_violation(X, y, beta, weights, lam) -> float:
    """Largest violation of the weighted-lasso optimality conditions, on the ``2 X'r`` scale."""
    X = np.asarray(X, dtype=float)
    pen = _penalties(weights, lam)
    return 2.0 * float(np.max(_kkt_gap(X.T @ X, X.T @ np.asarray(y, float), pen, np.asarray(beta, float))))


def least_squares(X, y) -> np.ndarray:
    return np.linalg.lstsq(X, y, rcond=None)[0]


# ----------------------------------------------------------------------------
# EM algorithms
# ----------------------------------------------------------------------------

def _init(X, y, G, c):
    n, p = X.shape
    ridge = 1e-6 * max(np.trace(G) / p, 1e-300)
    beta = linalg.solve(G + ridge * np.eye(p), c, assume_a="pos")
    r = y - X @ beta
    rss = float(r @ r)
    if not rss > 0:
        if not np.any(beta):
            raise DataError("y is identically zero: residual sum of squares is 0 at beta = 0")
        raise DataError("initial fit is exact (zero residuals); sigma2 is not identified")
    return beta, rss / n


def em_normal(data, cfg: MapConfig, record_objective: bool = False) -> MapResult:
    """EM for the posterior mode using the normal scale-mixture representation.

    E-step weights ``d_j = (alpha+1) sigma2 / (|b_j| (|b_j| + sigma eta))``;
    M-step ``b = (X'X + D)^-1 X'y`` and
    ``sigma2 = (RSS + b'Db) / (n + p + 2)``.  Coordinates that fall below
    ``cfg.zero_eps`` are frozen at zero.
    """
    X, y = _xy(data)
    n, p = X.shape
    G = X.T @ X
    c = X.T @ y
    beta, sigma2 = _init(X, y, G, c)
    active = np.abs(beta) > cfg.zero_eps
    beta[~active] = 0.0
    trace = [neg_log_posterior(beta, sigma2, X, y, cfg.alpha, cfg.eta)] if record_objective else []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        sigma = math.sqrt(sigma2)
        A = np.flatnonzero(active)
        new = np.zeros(p)
        pen_quad = 0.0
        if A.size:
            bA = np.abs(beta[A])
            d = (cfg.alpha + 1.0) * sigma2 / (bA * (bA + sigma * cfg.eta))
            M = G[np.ix_(A, A)] + np.diag(d)
            try:
                new[A] = linalg.solve(M, c[A], assume_a="pos")
            except linalg.LinAlgError as exc:
                raise NumericError(f"em_normal iteration {it}: M-step solve failed ({exc})") from exc
            pen_quad = float(np.sum(d * new[A] ** 2))
        r = y - X @ new
        sigma2_new = (float(r @ r) + pen_quad) / (n + p + 2)
        if not sigma2_new > 0:
            raise NumericError(f"em_normal iteration {it}: sigma2 collapsed to zero")
        dead = np.abs(new) < cfg.zero_eps
        new[dead] = 0.0
        active &= ~dead
        delta = float(np.linalg.norm(new - beta))
        beta, sigma2 = new, sigma2_new
        if record_objective:
            trace.append(neg_log_posterior(beta, sigma2, X, y, cfg.alpha, cfg.eta))
        if delta < cfg.tol:
            converged = True
            break
    return MapResult.build(beta, sigma2, cfg.zero_eps, it, converged, trace)


def em_laplace(data, cfg: MapConfig, record_objective: bool = False,
               sigma2_fixed: Optional[float] = None) -> MapResult:
    """EM (ECM) for the posterior mode using the Laplace mixture representation.

    Each iteration solves the weighted lasso
    ``min ||y - Xb||^2 + 2 sigma sum_j w_j |b_j|`` with
    ``w_j = (alpha+1) / (|b_j|/sigma + eta)`` and then updates ``sigma2`` by
    :func:`sigma2_root`.  With ``sigma2_fixed`` the noise variance is held
    at that value and only ``beta`` is iterated.
    """
    X, y = _xy(data)
    n, p = X.shape
    G = X.T @ X
    c = X.T @ y
    beta, sigma2 = _init(X, y, G, c)
    if sigma2_fixed is not None:
        if not sigma2_fixed > 0:
            raise UsageError("sigma2_fixed must be positive")
        sigma2 = float(sigma2_fixed)
    trace = [neg_log_posterior(beta, sigma2, X, y, cfg.alpha, cfg.eta)] if record_objective else []
    a = -(n + p + 2.0)
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        sigma = math.sqrt(sigma2)
        w = (cfg.alpha + 1.0) / (np.abs(beta) / sigma + cfg.eta)
        try:
            new = _lasso_gram(G, c, 2.0 * sigma * w, beta)
        except NumericError as exc:
            raise type(exc)(f"em_laplace iteration {it}: {exc}") from exc
        if sigma2_fixed is None:
            r = y - X @ new
            rss = float(r @ r)
            if not rss > 0:
                raise NumericError(f"em_laplace iteration {it}: zero residual sum of squares")
            sigma2 = sigma2_root(a, float(np.sum(w * np.abs(new))), rss)
        delta = float(np.linalg.norm(new - beta))
        beta = new
        if record_objective:
            trace.append(neg_log_posterior(beta, sigma2, X, y, cfg.alpha, cfg.eta))
        if delta < cfg.tol:
            converged = True
            break
    beta = np.where(np.abs(beta) > cfg.zero_eps, beta, 0.0)
    return MapResult.build(beta, sigma2, cfg.zero_eps, it, converged, trace)


# ----------------------------------------------------------------------------
# one-step estimator and plain lasso
# ----------------------------------------------------------------------------

def one_step(data, alpha_dag: float, eta_dag: float, beta0=None, zero_eps: float = 1e-8) -> MapResult:
    """Single weighted-lasso solve with ``w_j = 1/(|beta0_j| + eta_dag)`` and ``lam = alpha_dag``.

    ``beta0`` defaults to least squares, which requires ``n > p``.
    """
    X, y = _xy(data)
    n, p = X.shape
    if alpha_dag < 0 or eta_dag < 0:
        raise UsageError("alpha_dag and eta_dag must be non-negative")
    if beta0 is None:
        if n <= p:
            raise UsageError("n <= p: least-squares start is not defined; pass beta0 explicitly")
        beta0 = least_squares(X, y)
    beta0 = np.asarray(beta0, dtype=float)
    if beta0.shape != (p,):
        raise UsageError(f"beta0 must have length {p}")
    denom = np.abs(beta0) + eta_dag
    with np.errstate(divide="ignore"):
        w = np.where(denom > 0, 1.0 / np.where(denom > 0, denom, 1.0), np.inf)
    beta = weighted_lasso(X, y, w, alpha_dag)
    r = y - X @ beta
    sigma2 = float(r @ r) / n
    if not sigma2 > 0:
        raise DataError("one-step fit is exact (zero residuals); sigma2 is not identified")
    return MapResult.build(beta, sigma2, zero_eps, 1, True)


def one_step_hyper(data, alpha: float, eta: float, beta0=None) -> MapResult:
    """One-step estimator from GDP hyperparameters.

    ``alpha_dag = 2 sigma0^2 (alpha + 1)``, ``eta_dag = sigma0 * eta`` with
    ``sigma0^2`` the residual variance (denominator n) of ``beta0``.
    """
    X, y = _xy(data)
    n, p = X.shape
    if beta0 is None:
        if n <= p:
            raise UsageError("n <= p: least-squares start is not defined; pass beta0 explicitly")
        beta0 = least_squares(X, y)
    r = y - X @ beta0
    s2 = float(r @ r) / n
    return one_step((X, y), 2.0 * s2 * (alpha + 1.0), math.sqrt(s2) * eta, beta0)


def lasso_bic(data, n_lambda: int = 60, ratio: float = 1e-4, zero_eps: float = 1e-8) -> MapResult:
    """Plain lasso with the penalty chosen by BIC along a log-spaced path."""
    X, y = _xy(data)
    n, p = X.shape
    G = X.T @ X
    c = X.T @ y
    lam_max = 2.0 * float(np.max(np.abs(c)))
    if lam_max == 0:
        raise DataError("X'y is zero; lasso path is empty")
    best = None
    beta = np.zeros(p)
    for lam in np.geomspace(lam_max, lam_max * ratio, n_lambda):
        beta = _lasso_gram(G, c, np.full(p, lam), beta)
        r = y - X @ beta
        rss = float(r @ r)
        if rss <= 0:
            break
        df = int(np.count_nonzero(beta))
        bic = n * math.log(rss / n) + math.log(n) * df
        if best is None or bic < best[0]:
            best = (bic, beta.copy(), rss / n)
    return MapResult.build(best[1], best[2], zero_eps, 1, True)
