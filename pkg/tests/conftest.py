import numpy as np
import pytest

from gdpshrink import _backend


def sup_cdf_distance(sample, cdf):
    """Kolmogorov distance between the empirical CDF of ``sample`` and ``cdf``."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def two_sample_distance(a, b):
    a = np.sort(a)
    b = np.sort(b)
    grid = np.concatenate([a, b])
    Fa = np.searchsorted(a, grid, side="right") / a.size
    Fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(Fa - Fb)))


def mc_ok(draws, target, k=3.0):
    """Sample mean within ``k`` Monte-Carlo standard errors of ``target``."""
    d = np.asarray(draws, dtype=float)
    se = d.std(ddof=1) / np.sqrt(d.size)
    return abs(d.mean() - target) <= k * se


@pytest.fixture(params=_backend.available())
def backend(request):
    prev = _backend.use(request.param)
    yield request.param
    _backend.use(prev)


def brute_threshold(bh, sigma, alpha, eta, step=1e-3):
    """Global minimizer of ``(bh - b)^2/2 + sigma^2 (alpha+1) log(sigma*eta + |b|)`` by grid + refine.

    The minimizer has the sign of ``bh`` and magnitude in ``[0, |bh|]``, so a
    grid on that interval plus a bounded golden-section refinement around the
    best grid point, compared against ``b = 0``, finds it.
    """
    from scipy.optimize import minimize_scalar

    a = abs(bh)
    c = sigma * sigma * (alpha + 1.0)
    se = sigma * eta

    def h(x):
        return 0.5 * (a - x) ** 2 + c * np.log(se + x)

    grid = np.linspace(0.0, a, max(int(a / step), 1) + 1)
    k = int(np.argmin(h(grid)))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    best = 0.0
    if hi > lo:
        r = minimize_scalar(h, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        best = r.x if h(r.x) < h(0.0) else 0.0
        if abs(h(r.x) - h(0.0)) < 1e-9 * (1.0 + abs(h(0.0))):
            best = _mp_refine(a, c, se, lo, hi)
    return float(np.sign(bh) * best)


def _mp_refine(a, c, se, lo, hi):
    """Golden-section search at 40 digits, for objectives too flat for doubles."""
    import mpmath

    with mpmath.workdps(40):
        a, c, se = mpmath.mpf(a), mpmath.mpf(c), mpmath.mpf(se)
        h = lambda x: (a - x) ** 2 / 2 + c * mpmath.log(se + x)
        lo, hi = mpmath.mpf(lo), mpmath.mpf(hi)
        g = (mpmath.sqrt(5) - 1) / 2
        for _ in range(200):
            x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
            if h(x1) < h(x2):
                hi = x2
            else:
                lo = x1
        x = (lo + hi) / 2
        return float(x) if h(x) < h(mpmath.mpf(0)) else 0.0


# ----------------------------------------------------------------------------
# acceptance reporting: one line per criterion in the terminal summary
# ----------------------------------------------------------------------------

ACCEPTANCE_LINES = {}


def record_acceptance(number, ok, detail, seconds):
    line = f"ACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'} ({seconds:.1f}s) {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
