"""Data-augmentation Gibbs sampler for the GDP linear model.

Model: ``y = X beta + eps``, ``eps ~ N(0, sigma2 I)``,
``beta_j | sigma, tau_j ~ N(0, sigma2 tau_j)``, ``tau_j ~ Exp(lambda_j**2/2)``,
``lambda_j ~ Ga(alpha, eta)`` (rate parameterization) and ``pi(sigma) ~ 1/sigma``.
Optionally ``alpha`` and/or ``eta`` get generalized-Pareto hyperpriors and are
updated by griddy Gibbs on ``a = 1/(1+alpha)`` and ``e = 1/(1+eta)``.

One sweep updates, in order: beta, sigma2, [alpha], [eta], lambda, tau.  The
griddy steps integrate lambda and tau out, so they run before those two
blocks are refreshed.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .distributions import rand_gamma, rand_inverse_gaussian
from .errors import DataError, GdpError, NumericError, UsageError
from .model import Dataset
from .rng import make_rng

__all__ = [
    "BETA_FLOOR",
    "GibbsConfig",
    "GibbsState",
    "PosteriorDraws",
    "draw_beta",
    "draw_sigma2",
    "draw_lambda",
    "draw_tau_inv",
    "griddy_weights",
    "griddy_draw",
    "initial_state",
    "run_gibbs",
]

# |beta_j| is clamped here inside the tau update; the inverse-Gaussian mean
# lambda*sigma/|beta_j| diverges at zero.
BETA_FLOOR = 1e-10

HYPER_MODES = ("fixed", "learn_alpha", "learn_both")


@dataclass(frozen=True)
class GibbsConfig:
    iters: int = 5000
    burn_in: int = 1000
    thin: int = 1
    hyper_mode: str = "fixed"
    alpha: float = 1.0
    eta: float = 1.0
    grid_size: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.hyper_mode not in HYPER_MODES:
            raise UsageError(f"hyper_mode must be one of {HYPER_MODES}")
        if self.iters < 1 or self.burn_in < 0 or self.burn_in >= self.iters:
            raise UsageError("need 0 <= burn_in < iters")
        if self.thin < 1:
            raise UsageError("thin must be >= 1")
        if self.grid_size < 10:
            raise UsageError("grid_size must be >= 10")
        if not (self.alpha > 0 and self.eta > 0):
            raise UsageError("alpha and eta must be positive")

    @property
    def kept(self) -> int:
        return (self.iters - self.burn_in) // self.thin


@dataclass
class GibbsState:
    beta: np.ndarray
    sigma2: float
    tau: np.ndarray
    lam: np.ndarray
    alpha: float
    eta: float

    def check(self):
        if not (self.sigma2 > 0 and np.all(self.tau > 0) and np.all(self.lam > 0)):
            raise NumericError("Gibbs state left its support (sigma2, tau, lambda must be > 0)")
        if not (self.alpha > 0 and self.eta > 0):
            raise NumericError("Gibbs state has non-positive hyperparameters")

    def copy(self) -> "GibbsState":
        return GibbsState(self.beta.copy(), self.sigma2, self.tau.copy(), self.lam.copy(),
                          self.alpha, self.eta)


@dataclass(frozen=True)
class PosteriorDraws:
    """Thinned post-burn-in draws of one chain."""

    beta: np.ndarray
    sigma2: np.ndarray
    alpha: np.ndarray
    eta: np.ndarray
    config: GibbsConfig
    seed: int
    names: tuple = field(default=())

    def __post_init__(self):
        for a in (self.beta, self.sigma2, self.alpha, self.eta):
            a.setflags(write=False)

    @property
    def kept(self) -> int:
        return self.beta.shape[0]

    def posterior_mean(self) -> np.ndarray:
        return self.beta.mean(axis=0)

    def summary(self) -> dict:
        def block(a):
            a = np.atleast_2d(a.T).T if a.ndim == 1 else a
            return {
                "mean": a.mean(axis=0).tolist(),
                "sd": a.std(axis=0, ddof=1).tolist() if a.shape[0] > 1 else [0.0] * a.shape[1],
                "q025": np.quantile(a, 0.025, axis=0).tolist(),
                "q975": np.quantile(a, 0.975, axis=0).tolist(),
            }

        return {
            "kept": self.kept,
            "names": list(self.names),
            "beta": block(self.beta),
            "sigma2": block(self.sigma2[:, None]),
            "alpha": block(self.alpha[:, None]),
            "eta": block(self.eta[:, None]),
            "config": asdict(self.config),
            "seed": self.seed,
        }


class _Prepared:
    """Sufficient statistics of a data set, computed once per chain."""

    def __init__(self, data):
        if isinstance(data, _Prepared):
            self.__dict__.update(data.__dict__)
            return
        if isinstance(data, Dataset):
            X, y = data.X, data.y
        else:
            X, y = data
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.n, self.p = self.X.shape
        self.XtX = self.X.T @ self.X
        self.Xty = self.X.T @ self.y


def _cholesky_jittered(A):
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    scale = max(np.trace(A) / A.shape[0], np.finfo(float).tiny)
    for k in range(-10, -5):
        try:
            return np.linalg.cholesky(A + (10.0 ** k) * scale * np.eye(A.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise NumericError("X'X + T^-1 is not positive definite even after jitter 1e-6")


def draw_beta(state: GibbsState, data, rng) -> np.ndarray:
    """One draw of ``beta | sigma2, T, y ~ N(A^-1 X'y, sigma2 A^-1)``, ``A = X'X + T^-1``."""
    d = _Prepared(data)
    A = d.XtX + np.diag(1.0 / state.tau)
    L = _cholesky_jittered(A)
    mean = linalg.cho_solve((L, True), d.Xty)
    z = make_rng(rng).standard_normal(d.p)
    return mean + math.sqrt(state.sigma2) * linalg.solve_triangular(L, z, lower=True, trans="T")


def draw_sigma2(state: GibbsState, data, rng) -> float:
    """One draw of ``sigma2 | beta, T, y ~ IG((n+p)/2, RSS/2 + beta'T^-1 beta/2)``."""
    d = _Prepared(data)
    r = d.y - d.X @ state.beta
    rate = 0.5 * (r @ r + np.sum(state.beta ** 2 / state.tau))
    if not rate > 0:
        raise DataError("inverse-gamma rate is zero (beta = 0 and y = 0); sigma2 is not identified")
    shape = 0.5 * (d.n + d.p)
    return float(rate / make_rng(rng).gamma(shape))


def draw_lambda(state: GibbsState, j=None, rng=None):
    """``lambda_j | beta_j, sigma ~ Ga(alpha + 1, |beta_j|/sigma + eta)``; all j when ``j`` is None."""
    b = state.beta if j is None else state.beta[j]
    rate = np.abs(b) / math.sqrt(state.sigma2) + state.eta
    out = rand_gamma(state.alpha + 1.0, rate, make_rng(rng), size=np.shape(rate))
    return out if j is None else float(out)


def draw_tau_inv(state: GibbsState, j=None, rng=None):
    """``1/tau_j ~ InvGauss(mu = lambda_j sigma / |beta_j|, rho = lambda_j**2)``.

    ``|beta_j|`` below :data:`BETA_FLOOR` is treated as the floor.
    """
    b = state.beta if j is None else state.beta[j]
    lam = state.lam if j is None else state.lam[j]
    absb = np.maximum(np.abs(b), BETA_FLOOR)
    mu = lam * math.sqrt(state.sigma2) / absb
    out = rand_inverse_gaussian(mu, lam * lam, make_rng(rng))
    return out if j is None else float(out)


def _grid(m: int) -> np.ndarray:
    return (np.arange(m) + 0.5) / m


def griddy_weights(side: str, state: GibbsState, m: int = 100):
    """Grid on ``(0, 1)`` and normalized conditional weights for ``a`` or ``e``.

    Returns ``(grid, values, weights)`` where ``values`` are the mapped
    hyperparameters (``alpha = 1/a - 1`` or ``eta = 1/e - 1``).  Weights are
    computed in log space and normalized by their maximum.
    """
    g = _grid(m)
    absb = np.abs(state.beta)
    p = len(absb)
    sigma = math.sqrt(state.sigma2)
    if side == "alpha":
        s = np.sum(np.log1p(absb / (sigma * state.eta)))
        logw = p * (np.log1p(-g) - np.log(g)) - s / g
    elif side == "eta":
        ratio = g / (1.0 - g)
        logw = p * np.log(ratio) - (state.alpha + 1.0) * np.sum(
            np.log1p(np.outer(ratio, absb / sigma)), axis=1)
    else:
        raise UsageError(f"side must be 'alpha' or 'eta', got {side!r}")
    if not np.any(np.isfinite(logw)):
        raise NumericError(f"griddy weights for {side} are all non-finite")
    w = np.exp(logw - np.max(logw))
    tot = w.sum()
    if not (tot > 0 and math.isfinite(tot)):
        raise NumericError(f"griddy weights for {side} underflowed; state is degenerate")
    return g, 1.0 / g - 1.0, w / tot


def griddy_draw(side: str, state: GibbsState, m: int = 100, rng=None) -> float:
    """Sample ``alpha`` (or ``eta``) from its discretized conditional."""
    _, values, w = griddy_weights(side, state, m)
    cdf = np.cumsum(w)
    k = int(np.searchsorted(cdf, make_rng(rng).random() * cdf[-1], side="right"))
    return float(values[min(k, m - 1)])


def _looks_standardized(d: _Prepared) -> bool:
    norms = np.sqrt(np.diag(d.XtX))
    return (np.allclose(d.X.mean(axis=0), 0.0, atol=1e-8) and np.allclose(norms, 1.0, atol=1e-6)
            and abs(d.y.mean()) < 1e-8 * max(1.0, np.abs(d.y).max()))


def initial_state(data, cfg: GibbsConfig) -> GibbsState:
    d = _Prepared(data)
    ridge = 1e-6 * max(np.trace(d.XtX) / d.p, 1e-300)
    beta = np.linalg.solve(d.XtX + ridge * np.eye(d.p), d.Xty)
    r = d.y - d.X @ beta
    sigma2 = float(r @ r / d.n)
    if not sigma2 > 0:
        sigma2 = float(np.var(d.y)) or 1.0
    return GibbsState(beta, sigma2, np.ones(d.p), np.ones(d.p), cfg.alpha, cfg.eta)


def run_gibbs(data, cfg: GibbsConfig, init: Optional[GibbsState] = None) -> PosteriorDraws:
    """Run one chain and return the thinned post-burn-in draws.

    ``data`` is a :class:`Dataset` or an ``(X, y)`` pair; standardized data
    (centered ``y``, centered unit-length columns) are expected and a warning
    is issued otherwise.  The chain is a deterministic function of
    ``(data, cfg)``.
    """
    d = _Prepared(data)
    if not _looks_standardized(d):
        warnings.warn("run_gibbs expects standardized data (see model.standardize)", stacklevel=2)
    rng = make_rng(cfg.seed, "gibbs")
    st = init.copy() if init is not None else initial_state(d, cfg)
    kept = cfg.kept
    out_beta = np.empty((kept, d.p))
    out_s2 = np.empty(kept)
    out_a = np.empty(kept)
    out_e = np.empty(kept)
    learn_a = cfg.hyper_mode in ("learn_alpha", "learn_both")
    learn_e = cfg.hyper_mode == "learn_both"
    row = 0
    for it in range(1, cfg.iters + 1):
        try:
            st.beta = draw_beta(st, d, rng)
            st.sigma2 = draw_sigma2(st, d, rng)
            if learn_a:
                st.alpha = griddy_draw("alpha", st, cfg.grid_size, rng)
            if learn_e:
                st.eta = griddy_draw("eta", st, cfg.grid_size, rng)
            st.lam = draw_lambda(st, rng=rng)
            st.tau = 1.0 / draw_tau_inv(st, rng=rng)
            st.check()
        except GdpError as exc:
            raise type(exc)(f"Gibbs iteration {it}: {exc}") from exc
        if it > cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0 and row < kept:
            out_beta[row] = st.beta
            out_s2[row] = st.sigma2
            out_a[row] = st.alpha
            out_e[row] = st.eta
            row += 1
    names = data.names if isinstance(data, Dataset) else tuple(f"x{j + 1}" for j in range(d.p))
    return PosteriorDraws(out_beta, out_s2, out_a, out_e, cfg, cfg.seed, names)
