"""Evaluation: model error, bootstrap SEs, support recovery and experiment drivers."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import UsageError
from .gibbs import GibbsConfig, run_gibbs
from .map_estimation import MapConfig, em_laplace, em_normal, lasso_bic, one_step_hyper
from .model import SimSpec, destandardize, gen_bench_data, gen_sim_data, standardize
from .rng import make_rng

__all__ = [
    "METHODS",
    "model_error",
    "bootstrap_se_of_median",
    "support_recovery",
    "SimReport",
    "run_simulation",
    "oracle_study",
    "em_bench",
]


def model_error(beta_hat, beta_star, C) -> float:
    """``(beta_star - beta_hat)' C (beta_star - beta_hat)``."""
    d = np.asarray(beta_star, dtype=float) - np.asarray(beta_hat, dtype=float)
    return float(d @ np.asarray(C, dtype=float) @ d)


def bootstrap_se_of_median(values, B: int = 500, seed=0) -> float:
    """Standard deviation of the median over ``B`` resamples with replacement."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise UsageError("no values to bootstrap")
    rng = make_rng(seed, "bootstrap")
    idx = rng.integers(0, v.size, size=(B, v.size))
    meds = np.median(v[idx], axis=1)
    return float(np.std(meds, ddof=1)) if B > 1 else 0.0


def support_recovery(beta_hat, beta_star, zero_eps: float = 1e-8):
    """``(exact_match, precision, recall)`` of the estimated support.

    Precision of an empty estimated support is 1 (no false positives);
    recall with an empty true support is 1.
    """
    est = np.abs(np.asarray(beta_hat, dtype=float)) > zero_eps
    true = np.asarray(beta_star, dtype=float) != 0
    tp = int(np.sum(est & true))
    precision = tp / int(est.sum()) if est.any() else 1.0
    recall = tp / int(true.sum()) if true.any() else 1.0
    return bool(np.array_equal(est, true)), precision, recall


# ----------------------------------------------------------------------------
# simulation study
# ----------------------------------------------------------------------------

METHODS = ("gdp-pm", "gdp-pm-eta1", "gdp-pm-learn", "gdp-map", "onestep", "lasso")


@dataclass(frozen=True)
class SimReport:
    spec: SimSpec
    reps: int
    methods: tuple
    model_errors: dict
    exact: dict
    precision: dict
    recall: dict
    median: dict = field(default_factory=dict)
    boot_se: dict = field(default_factory=dict)
    gibbs: dict = field(default_factory=dict)

    def rows(self):
        for m in self.methods:
            for r in range(self.reps):
                yield {"replicate": r, "method": m, "model_error": self.model_errors[m][r],
                       "exact_support": int(self.exact[m][r]), "precision": self.precision[m][r],
                       "recall": self.recall[m][r]}

    def summary_rows(self):
        for m in self.methods:
            yield {"method": m, "median_model_error": self.median[m], "bootstrap_se": self.boot_se[m],
                   "exact_support_rate": float(np.mean(self.exact[m])), "reps": self.reps}

    def config(self) -> dict:
        return {"spec": asdict(self.spec), "reps": self.reps, "methods": list(self.methods),
                "gibbs": self.gibbs}


def _fit_method(method, ds, rec, n, p, seed, rep, gibbs_iters, gibbs_burn):
    if method.startswith("gdp-pm"):
        mode = {"gdp-pm": "fixed", "gdp-pm-eta1": "learn_alpha", "gdp-pm-learn": "learn_both"}[method]
        cfg = GibbsConfig(iters=gibbs_iters, burn_in=gibbs_burn, hyper_mode=mode,
                          seed=int(make_rng(seed, "gibbs-seed", method, rep).integers(0, 2 ** 63)))
        b = run_gibbs(ds, cfg).posterior_mean()
    elif method == "gdp-map":
        b = em_laplace(ds, MapConfig(alpha=1.0, eta=1.0)).beta
    elif method == "onestep":
        b = one_step_hyper(ds, 1.0, 1.0).beta
    elif method == "lasso":
        b = lasso_bic(ds).beta
    else:
        raise UsageError(f"unknown method {method!r}; choose from {METHODS}")
    return destandardize(b, rec)[0]


def _one_replicate(args):
    spec, rep, methods, gibbs_iters, gibbs_burn = args
    data, beta_star, C = gen_sim_data(spec, rep)
    ds, rec = standardize(data)
    out = {}
    for m in methods:
        b = _fit_method(m, ds, rec, data.n, data.p, spec.seed, rep, gibbs_iters, gibbs_burn)
        out[m] = (model_error(b, beta_star, C),) + support_recovery(b, beta_star)
    return out


def _map_jobs(fn, tasks, jobs):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


def run_simulation(spec: SimSpec, reps: int, methods: Sequence[str] = ("gdp-pm", "gdp-map", "onestep", "lasso"),
                   gibbs_iters: int = 3000, gibbs_burn: int = 1000, B: int = 500,
                   jobs: int = 1) -> SimReport:
    """Replicate one simulation design and score every method by model error.

    Each replicate redraws data (including the support of ``beta_star``)
    from a stream keyed by ``(spec.seed, replicate)``; estimates are fitted on
    standardized data and mapped back before scoring.  Output does not
    depend on ``jobs``.
    """
    methods = tuple(methods)
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise UsageError(f"unknown methods {bad}; choose from {METHODS}")
    if reps < 1:
        raise UsageError("reps must be >= 1")
    tasks = [(spec, r, methods, gibbs_iters, gibbs_burn) for r in range(reps)]
    results = _map_jobs(_one_replicate, tasks, jobs)
    me = {m: np.array([res[m][0] for res in results]) for m in methods}
    ex = {m: np.array([res[m][1] for res in results]) for m in methods}
    pr = {m: np.array([res[m][2] for res in results]) for m in methods}
    rc = {m: np.array([res[m][3] for res in results]) for m in methods}
    med = {m: float(np.median(me[m])) for m in methods}
    se = {m: bootstrap_se_of_median(me[m], B, seed=make_rng(spec.seed, "boot", m)) for m in methods}
    return SimReport(spec, reps, methods, me, ex, pr, rc, med, se,
                     {"iters": gibbs_iters, "burn_in": gibbs_burn, "B": B})


# ----------------------------------------------------------------------------
# oracle-property study
# ----------------------------------------------------------------------------

def _oracle_one(args):
    n, seed, p, sigma, a_exp, e_exp = args
    data, beta_star, _ = gen_sim_data(SimSpec(2, n, p, sigma, seed))
    alpha_prime = n ** a_exp
    eta_prime = n ** e_exp
    alpha = alpha_prime / (2.0 * sigma * sigma) - 1.0
    if alpha <= 0:
        raise UsageError(f"n={n}: alpha'_n={alpha_prime:.4g} must exceed 2 sigma^2={2 * sigma * sigma:.4g}")
    cfg = MapConfig(alpha=alpha, eta=eta_prime / sigma)
    res = em_laplace(data, cfg, sigma2_fixed=sigma * sigma)
    return support_recovery(res.beta, beta_star)[0]


def oracle_study(schedule: Iterable[int] = (100, 400, 1600), seeds: Iterable[int] = range(50), p: int = 20,
                 sigma: float = 1.0, alpha_exponent: float = 0.35, eta_exponent: float = -0.5,
                 jobs: int = 1):
    """Exact-support-recovery rate of the GDP(MAP) estimator along a sample-size schedule.

    Uses the penalty ``alpha'_n * sum log(|b| + eta'_n)`` with
    ``alpha'_n = n**alpha_exponent`` and ``eta'_n = n**eta_exponent`` on
    unstandardized model-2 data with known noise level ``sigma``.  Returns a
    list of ``(n, rate)``.
    """
    seeds = list(seeds)
    table = []
    for n in schedule:
        hits = _map_jobs(_oracle_one, [(n, s, p, sigma, alpha_exponent, eta_exponent) for s in seeds], jobs)
        table.append((int(n), float(np.mean(hits))))
    return table


# ----------------------------------------------------------------------------
# EM convergence benchmark
# ----------------------------------------------------------------------------

def _bench_one(args):
    n, p, seed, sigma, tol = args
    data, _ = gen_bench_data(n, p, sigma, make_rng(seed, "em-bench", n, p))
    cfg = MapConfig(alpha=1.0, eta=1.0, tol=tol)
    rn = em_normal(data, cfg)
    rl = em_laplace(data, cfg)
    return {"n": n, "p": p, "seed": seed, "iters_normal": rn.iterations, "iters_laplace": rl.iterations,
            "converged_normal": rn.converged, "converged_laplace": rl.converged,
            "max_abs_diff": float(np.max(np.abs(rn.beta - rl.beta)))}


def em_bench(n_grid=(200, 400, 600, 800, 1000), p_grid=(20, 40, 60, 80, 100), seeds: Iterable[int] = range(100),
             sigma: float = 3.0, tol: float = 1e-6, jobs: int = 1):
    """Iterations to ``||b_{k+1} - b_k||_2 < tol`` for both EM variants on paired data.

    Design: independent standard-normal predictors, first ``p // 4``
    coefficients 1, the rest 0, noise sd ``sigma``.  Returns
    ``(rows, summary)`` where summary maps ``(n, p)`` to the median
    iteration counts.
    """
    seeds = list(seeds)
    tasks = [(n, p, s, sigma, tol) for n in n_grid for p in p_grid for s in seeds]
    rows = _map_jobs(_bench_one, tasks, jobs)
    summary = {}
    for n in n_grid:
        for p in p_grid:
            cell = [r for r in rows if r["n"] == n and r["p"] == p]
            summary[(n, p)] = {
                "median_normal": float(np.median([r["iters_normal"] for r in cell])),
                "median_laplace": float(np.median([r["iters_laplace"] for r in cell])),
            }
    return rows, summary
