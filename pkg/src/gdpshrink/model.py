"""Regression data model, standardization and synthetic designs."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, UsageError
from .rng import make_rng

__all__ = [
    "Dataset",
    "StandardizationRecord",
    "SimSpec",
    "standardize",
    "destandardize",
    "ar1_covariance",
    "gen_sim_data",
    "gen_bench_data",
    "load_csv",
]


@dataclass(frozen=True)
class Dataset:
    """Response ``y`` (n,) and design ``X`` (n, p) with column labels."""

    y: np.ndarray
    X: np.ndarray
    names: tuple = field(default=())

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if y.ndim != 1 or X.ndim != 2:
            raise DataError("y must be a vector and X a matrix")
        n, p = X.shape
        if len(y) != n:
            raise DataError(f"y has {len(y)} rows but X has {n}")
        if n < 2 or p < 1:
            raise DataError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise DataError("data contain non-finite values")
        names = tuple(self.names) if self.names else tuple(f"x{j + 1}" for j in range(p))
        if len(names) != p:
            raise DataError(f"{len(names)} names for {p} columns")
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class StandardizationRecord:
    y_center: float
    x_centers: np.ndarray
    x_scales: np.ndarray

    def __post_init__(self):
        if np.any(~(np.asarray(self.x_scales) > 0)):
            raise DataError("standardization scales must be positive")

    @classmethod
    def identity(cls, p: int, y_center: float = 0.0) -> "StandardizationRecord":
        return cls(float(y_center), np.zeros(p), np.ones(p))


def standardize(d: Dataset) -> tuple[Dataset, StandardizationRecord]:
    """Center ``y``; center the columns of ``X`` and scale them to unit length."""
    y_center = float(np.mean(d.y))
    centers = d.X.mean(axis=0)
    Xc = d.X - centers
    scales = np.sqrt(np.sum(Xc * Xc, axis=0))
    ref = np.maximum(np.abs(d.X).max(axis=0), 1.0)
    for j in range(d.p):
        if scales[j] <= 1e-12 * ref[j] * math.sqrt(d.n):
            raise DataError(f"column {d.names[j]!r} is constant; cannot standardize")
    Xs = Xc / scales
    rec = StandardizationRecord(y_center, centers, scales)
    return Dataset(d.y - y_center, Xs, d.names), rec


def destandardize(beta_std, rec: StandardizationRecord, intercept_free: bool = False):
    """Map standardized-scale coefficients back to the original predictors.

    Returns ``(beta, intercept)``.  With ``intercept_free`` the intercept is
    reported as 0 (the model was fitted without one).
    """
    beta_std = np.asarray(beta_std, dtype=float)
    if beta_std.shape[-1] != len(rec.x_scales):
        raise DataError(f"coefficient length {beta_std.shape[-1]} != {len(rec.x_scales)} predictors")
    beta = beta_std / rec.x_scales
    if intercept_free:
        return beta, 0.0 if beta.ndim == 1 else np.zeros(beta.shape[0])
    intercept = rec.y_center - beta @ rec.x_centers
    return beta, (float(intercept) if beta.ndim == 1 else intercept)


def ar1_covariance(p: int, rho: float = 0.5) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


_SUPPORT = {1: (5, 1.0), 2: (5, 3.0), 3: (10, 1.0), 4: (10, 3.0)}


@dataclass(frozen=True)
class SimSpec:
    """One simulation design: model id (1-5), sample size, dimension, noise sd."""

    model_id: int
    n: int
    p: int = 20
    sigma: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.model_id not in (1, 2, 3, 4, 5):
            raise UsageError(f"model_id must be 1..5, got {self.model_id}")
        need = _SUPPORT[self.model_id][0] if self.model_id in _SUPPORT else 1
        if self.p < need:
            raise UsageError(f"model {self.model_id} needs p >= {need}, got {self.p}")
        if self.n < 2:
            raise UsageError("n must be >= 2")
        if not self.sigma > 0:
            raise UsageError("sigma must be positive")


def true_beta(model_id: int, p: int, rng) -> np.ndarray:
    if model_id == 5:
        return np.full(p, 0.85)
    k, value = _SUPPORT[model_id]
    beta = np.zeros(p)
    beta[np.sort(rng.choice(p, size=k, replace=False))] = value
    return beta


def gen_sim_data(s: SimSpec, replicate: int = 0):
    """Draw one data set from simulation model ``s.model_id``.

    Rows of ``X`` are N(0, C) with ``C[j, k] = 0.5**|j-k|``; the support of
    ``beta_star`` is redrawn for every replicate.  Returns
    ``(Dataset, beta_star, C)``.
    """
    rng = make_rng(s.seed, "sim-data", s.model_id, replicate)
    C = ar1_covariance(s.p)
    L = np.linalg.cholesky(C)
    beta = true_beta(s.model_id, s.p, rng)
    X = rng.standard_normal((s.n, s.p)) @ L.T
    y = X @ beta + s.sigma * rng.standard_normal(s.n)
    return Dataset(y, X), beta, C


def gen_bench_data(n: int, p: int, sigma: float, rng):
    """Independent standard-normal design, first ``p // 4`` coefficients 1."""
    rng = make_rng(rng)
    beta = np.zeros(p)
    beta[: p // 4] = 1.0
    X = rng.standard_normal((n, p))
    y = X @ beta + sigma * rng.standard_normal(n)
    return Dataset(y, X), beta


def load_csv(path, response: str, predictors: Optional[Sequence[str]] = None) -> Dataset:
    """Read a headered CSV; ``response`` names the y column, the rest are predictors."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        if response not in header:
            raise DataError(f"response column {response!r} not in header {header}")
        cols = [h for h in header if h != response] if predictors is None else list(predictors)
        missing = [c for c in cols if c not in header]
        if missing:
            raise DataError(f"predictor columns {missing} not in header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            vals = []
            for name, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: column {name!r} has non-numeric value {cell!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}:{lineno}: column {name!r} has non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path} has no data rows")
    arr = np.array(rows)
    yi = header.index(response)
    xi = [header.index(c) for c in cols]
    return Dataset(arr[:, yi], arr[:, xi], tuple(cols))
