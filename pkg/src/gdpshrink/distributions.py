"""Generalized double Pareto (GDP) distribution family and elementary samplers.

The density is

    f(theta | xi, alpha) = 1/(2 xi) * (1 + |theta| / (alpha xi)) ** -(alpha + 1)

with scale ``xi > 0`` and shape ``alpha > 0``.  Throughout the package the
family is parameterized by ``(alpha, eta)`` with rate ``eta = alpha * xi``,
which is the parameterization of the normal/exponential/gamma hierarchy

    theta ~ N(0, tau),  tau ~ Exp(lambda**2 / 2),  lambda ~ Ga(alpha, eta).

Wherever ``alpha * xi`` appears in a formula the code uses ``eta`` directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import special

from . import _backend
from .errors import DataError, NumericError
from .rng import make_rng

__all__ = [
    "DomainError",
    "GdpHyper",
    "MixtureDraw",
    "MixtureDraws",
    "gdp_pdf",
    "gdp_logpdf",
    "gdp_cdf",
    "gdp_quantile",
    "gdp_moments",
    "gdp_sample_direct",
    "gdp_sample_hierarchical",
    "hyp1f1",
    "kappa_pdf_standard",
    "kappa_pdf_general",
    "rand_inverse_gaussian",
    "rand_gamma",
    "rand_inv_gamma",
    "rand_exponential",
    "rand_mvn_precision",
]


class DomainError(DataError):
    """Argument outside the mathematical domain of a function."""


@dataclass(frozen=True)
class GdpHyper:
    """Shape ``alpha`` and rate ``eta`` of a GDP prior (scale ``xi = eta/alpha``)."""

    alpha: float
    eta: float

    def __post_init__(self):
        for name in ("alpha", "eta"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a finite positive number, got {v!r}")
            object.__setattr__(self, name, float(v))

    @classmethod
    def from_scale(cls, xi: float, alpha: float) -> "GdpHyper":
        """Build from scale ``xi`` and shape ``alpha``."""
        if not (math.isfinite(xi) and xi > 0):
            raise DomainError(f"xi must be a finite positive number, got {xi!r}")
        return cls(alpha=alpha, eta=xi * alpha)

    @property
    def xi(self) -> float:
        return self.eta / self.alpha


class MixtureDraw(NamedTuple):
    theta: float
    tau: float
    lam: float


class MixtureDraws(NamedTuple):
    """Struct-of-arrays output of :func:`gdp_sample_hierarchical`."""

    theta: np.ndarray
    tau: np.ndarray
    lam: np.ndarray

    def __len__(self):
        return len(self.theta)

    def __getitem__(self, i):
        if isinstance(i, str):
            return getattr(self, i)
        return MixtureDraw(float(self.theta[i]), float(self.tau[i]), float(self.lam[i]))


def _scalar_or_array(x):
    return x.item() if isinstance(x, np.ndarray) and x.ndim == 0 else x


# ----------------------------------------------------------------------------
# density, cdf, quantile
# ----------------------------------------------------------------------------

def gdp_logpdf(theta, h: GdpHyper):
    a = np.abs(np.asarray(theta, dtype=float))
    out = math.log(h.alpha / (2.0 * h.eta)) - (h.alpha + 1.0) * np.log1p(a / h.eta)
    return _scalar_or_array(out)


def gdp_pdf(theta, h: GdpHyper):
    """GDP density at ``theta`` (scalar or array)."""
    a = np.abs(np.asarray(theta, dtype=float))
    out = h.alpha / (2.0 * h.eta) * np.exp(-(h.alpha + 1.0) * np.log1p(a / h.eta))
    return _scalar_or_array(out)


def gdp_cdf(theta, h: GdpHyper):
    t = np.asarray(theta, dtype=float)
    tail = 0.5 * np.exp(-h.alpha * np.log1p(np.abs(t) / h.eta))
    out = np.where(t >= 0, 1.0 - tail, tail)
    return _scalar_or_array(out)


def gdp_quantile(u, h: GdpHyper):
    """Inverse of :func:`gdp_cdf` on the open interval (0, 1)."""
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0) & (u < 1))):
        raise DomainError("quantile level must lie strictly inside (0, 1)")
    tail = np.minimum(u, 1.0 - u)
    mag = h.eta * np.expm1(-np.log(2.0 * tail) / h.alpha)
    out = np.where(u >= 0.5, mag, -mag)
    return _scalar_or_array(out)


def gdp_moments(h: GdpHyper) -> tuple[Optional[float], Optional[float]]:
    """Mean and variance; ``None`` where the moment does not exist."""
    mean = 0.0 if h.alpha > 1 else None
    if h.alpha > 2:
        xi = h.xi
        var = 2.0 * xi * xi * h.alpha ** 2 / ((h.alpha - 1.0) * (h.alpha - 2.0))
    else:
        var = None
    return mean, var


# ----------------------------------------------------------------------------
# sampling
# ----------------------------------------------------------------------------

def _open_uniform(rng, n):
    # (k + 1/2) / 2**53 never hits 0 or 1
    return (rng.integers(0, 1 << 53, size=n, dtype=np.int64) + 0.5) / float(1 << 53)


def gdp_sample_direct(h: GdpHyper, n: int, seed) -> np.ndarray:
    """``n`` i.i.d. GDP draws by inversion of the closed-form CDF."""
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = make_rng(seed)
    return np.asarray(gdp_quantile(_open_uniform(rng, n), h), dtype=float).reshape(n)


def gdp_sample_hierarchical(h: GdpHyper, n: int, seed) -> MixtureDraws:
    """Draw ``(theta, tau, lambda)`` through the normal/exponential/gamma hierarchy."""
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = make_rng(seed)
    lam = rand_gamma(h.alpha, h.eta, rng, size=n)
    tau = rand_exponential(0.5 * lam * lam, rng)
    theta = rng.standard_normal(n) * np.sqrt(tau)
    return MixtureDraws(theta, tau, lam)


def rand_gamma(shape, rate, rng, size=None):
    """Gamma draws with shape/rate parameterization (mean ``shape/rate``)."""
    return make_rng(rng).gamma(shape, 1.0 / np.asarray(rate, dtype=float), size=size)


def rand_inv_gamma(shape, rate, rng, size=None):
    """Inverse-gamma draws: reciprocal of Ga(shape, rate)."""
    return 1.0 / rand_gamma(shape, rate, rng, size=size)


def rand_exponential(rate, rng, size=None):
    return make_rng(rng).exponential(1.0 / np.asarray(rate, dtype=float), size=size)


def rand_inverse_gaussian(mu, rho, seed, size=None):
    """Inverse-Gaussian draws with mean ``mu`` and shape ``rho``.

    Uses the transformation-with-rejection method of Michael, Schucany and
    Haas: the smaller root ``x`` of the chi-square transformation is kept with
    probability ``mu / (mu + x)``, otherwise ``mu**2 / x`` is returned.
    Vectorizes over broadcast ``mu``, ``rho``.
    """
    rng = make_rng(seed)
    mu = np.asarray(mu, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if np.any(~(mu > 0)) or np.any(~(rho > 0)):
        raise DomainError("inverse-Gaussian parameters must be positive")
    shape = np.broadcast(mu, rho).shape if size is None else size
    mu = np.broadcast_to(mu, shape)
    rho = np.broadcast_to(rho, shape)
    nu = rng.standard_normal(shape)
    t = mu * nu * nu / (2.0 * rho)
    # mu * (1 + t - sqrt(t**2 + 2t)), rationalized to avoid cancellation
    x = mu / (1.0 + t + np.sqrt(t * (t + 2.0)))
    u = rng.random(shape)
    out = np.where(u * (mu + x) <= mu, x, mu * (mu / x))
    return _scalar_or_array(out)


def rand_mvn_precision(mean, chol_prec, scale, rng):
    """Draw ``N(mean, scale * A^{-1})`` given the lower Cholesky factor of ``A``."""
    from scipy.linalg import solve_triangular

    z = make_rng(rng).standard_normal(len(mean))
    return mean + math.sqrt(scale) * solve_triangular(chol_prec, z, lower=True, trans="T")


# ----------------------------------------------------------------------------
# shrinkage-factor densities
# ----------------------------------------------------------------------------

_SERIES_RTOL = 1e-15
_SERIES_MAX_TERMS = 10_000
# accept the two-series form of the kappa density while the cancellation
# between its terms costs fewer than this many digits
_MAX_CANCELLATION = 1e4


def hyp1f1(a: float, b: float, z: float) -> float:
    """Confluent hypergeometric function M(a, b, z) by its power series.

    Negative arguments go through Kummer's transformation
    ``M(a, b, z) = exp(z) M(b - a, b, -z)`` so the summed series has a
    positive argument.  Raises :class:`NumericError` if the series has not
    converged after 10**4 terms.
    """
    if b <= 0 and float(b).is_integer():
        raise DomainError("b must not be a non-positive integer")
    if z < 0:
        val, nterms = _backend.hyp1f1_series(b - a, b, -z, _SERIES_RTOL, _SERIES_MAX_TERMS)
        val *= math.exp(z)
    else:
        val, nterms = _backend.hyp1f1_series(a, b, z, _SERIES_RTOL, _SERIES_MAX_TERMS)
    if nterms < 0 or not math.isfinite(val):
        raise NumericError(f"1F1({a}, {b}, {z}) series did not converge in {_SERIES_MAX_TERMS} terms")
    return val


def _log_hyperu(a: float, b: float, z: float) -> float:
    """log U(a, b, z) for a > 0, z > 0 from the Laplace-type integral.

    U = z**-a / G(a) * int_0^inf exp(-s) s**(a-1) (1 + s/z)**(b-a-1) ds
    """
    from scipy import integrate

    def integrand(s):
        return math.exp(-s + (a - 1.0) * math.log(s) + (b - a - 1.0) * math.log1p(s / z)) if s > 0 else (
            1.0 if a == 1.0 else 0.0)

    peak = max(a - 1.0, 0.0)
    pts = [0.0, peak + 1.0, peak + 10.0 * math.sqrt(a) + 10.0]
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        total += integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    total += integrate.quad(integrand, pts[-1], math.inf, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    if not (total > 0 and math.isfinite(total)):
        raise NumericError(f"U({a}, {b}, {z}) quadrature failed")
    return -a * math.log(z) - special.gammaln(a) + math.log(total)


def _check_kappa(kappa):
    k = np.asarray(kappa, dtype=float)
    if np.any(~((k > 0) & (k < 1))):
        raise DomainError("kappa must lie strictly inside (0, 1)")
    return k


def kappa_pdf_standard(kappa):
    """Prior density of ``kappa = 1/(1+tau)`` under the standard double Pareto.

    ``exp(x) * erfc(sqrt(x))`` is evaluated as ``erfcx(sqrt(x))`` so the
    expression stays finite as ``kappa -> 1``.
    """
    k = _check_kappa(kappa)
    x = k / (2.0 * (1.0 - k))
    inner = math.sqrt(math.pi) * special.erfcx(np.sqrt(x)) / np.sqrt(2.0 * k * (1.0 - k)) - 1.0
    return _scalar_or_array(inner / (2.0 * (1.0 - k) ** 2))


def _kappa_general_one(k: float, alpha: float, eta: float) -> float:
    a1 = 0.5 * alpha + 1.0
    a2 = 0.5 * (alpha + 3.0)
    z = eta * eta * k / (2.0 * (1.0 - k))
    log_pre = ((0.5 * alpha - 1.0) * math.log(2.0) + alpha * math.log(eta)
               + 0.5 * (alpha - 1.0) * math.log(k) - 0.5 * (alpha + 3.0) * math.log1p(-k)
               - special.gammaln(alpha))
    try:
        t1 = math.sqrt(1.0 / k - 1.0) * math.exp(special.gammaln(a1)) * hyp1f1(a1, 0.5, z)
        t2 = math.sqrt(2.0) * eta * math.exp(special.gammaln(a2)) * hyp1f1(a2, 1.5, z)
    except NumericError:  # series overflows for large z; the U form below covers it
        t1 = t2 = math.inf
    diff = t1 - t2
    if math.isfinite(t1) and diff > 0 and t1 < _MAX_CANCELLATION * diff:
        return math.exp(log_pre) * diff
    # Same bracket written as a Tricomi U function, free of cancellation:
    # {...} = eta / sqrt(2z) * G(a1) G(a2) / sqrt(pi) * U(a1, 1/2, z)
    log_br = (math.log(eta) - 0.5 * math.log(2.0 * z) + special.gammaln(a1) + special.gammaln(a2)
              - 0.5 * math.log(math.pi) + _log_hyperu(a1, 0.5, z))
    return math.exp(log_pre + log_br)


def kappa_pdf_general(kappa, h: GdpHyper):
    """Prior density of ``kappa = 1/(1+tau)`` for general ``(alpha, eta)``.

    The closed form combines two Kummer functions whose leading terms cancel
    as ``kappa -> 1``.  The direct series form is used while that cancellation
    is mild; beyond it the identical expression in terms of Tricomi's U is
    evaluated instead, by quadrature of its integral representation.
    """
    k = _check_kappa(kappa)
    out = np.array([_kappa_general_one(float(v), h.alpha, h.eta) for v in k.ravel()]).reshape(k.shape)
    return _scalar_or_array(out)
