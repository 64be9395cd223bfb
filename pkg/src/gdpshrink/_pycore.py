"""Pure-Python versions of the hot kernels.

Function-for-function twin of ``_core.pyx``; ``_backend`` selects this module
when the compiled extension is not importable.
"""
import math

import numpy as np


def cd_lasso_gram(G, c, pen, beta, max_sweeps, tol):
    """Cyclic coordinate descent on ``b'Gb - 2c'b + sum_j pen_j |b_j|``.

    ``beta`` is updated in place.  Returns the number of sweeps used, or
    ``-max_sweeps`` when the sweep limit was hit before the largest scaled
    coordinate step fell below ``tol``.
    """
    p = G.shape[0]
    q = c - G @ beta
    diag = np.diag(G).copy()
    for sweep in range(1, max_sweeps + 1):
        max_step = 0.0
        for j in range(p):
            gjj = diag[j]
            old = beta[j]
            if gjj <= 0.0:
                new = 0.0
            else:
                g = q[j] + gjj * old
                thr = 0.5 * pen[j]
                if g > thr:
                    new = (g - thr) / gjj
                elif g < -thr:
                    new = (g + thr) / gjj
                else:
                    new = 0.0
            if new != old:
                d = new - old
                q -= G[:, j] * d
                beta[j] = new
                step = abs(d) * math.sqrt(gjj) if gjj > 0.0 else abs(d)
                if step > max_step:
                    max_step = step
        if max_step < tol:
            return sweep
    return -max_sweeps


def hyp1f1_series(a, b, z, rtol, max_terms):
    """Partial sums of the Kummer series M(a, b, z).

    Returns ``(value, n_terms)``; ``n_terms`` is -1 if the relative term size
    never dropped below ``rtol``.
    """
    term = 1.0
    total = 1.0
    for k in range(max_terms):
        term *= (a + k) / (b + k) * z / (k + 1)
        total += term
        if math.isinf(total):  # overflow is not convergence
            return total, -1
        if term == 0.0 or abs(term) <= rtol * abs(total):
            return total, k + 1
    return total, -1
