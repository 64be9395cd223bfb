# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels (coordinate descent, Kummer series)."""
from libc.math cimport fabs, isinf, sqrt

import numpy as np


def cd_lasso_gram(double[:, ::1] G, double[::1] c, double[::1] pen,
                  double[::1] beta, long max_sweeps, double tol):
    cdef Py_ssize_t p = G.shape[0]
    cdef Py_ssize_t i, j
    cdef long sweep
    cdef double gjj, old, new, g, thr, d, step, max_step
    cdef double[::1] q = np.empty(p)
    for i in range(p):
        g = c[i]
        for j in range(p):
            g -= G[i, j] * beta[j]
        q[i] = g
    for sweep in range(1, max_sweeps + 1):
        max_step = 0.0
        for j in range(p):
            gjj = G[j, j]
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
                # G is symmetric: row j == column j, and rows are contiguous
                for i in range(p):
                    q[i] -= G[j, i] * d
                beta[j] = new
                step = fabs(d) * sqrt(gjj) if gjj > 0.0 else fabs(d)
                if step > max_step:
                    max_step = step
        if max_step < tol:
            return sweep
    return -max_sweeps


def hyp1f1_series(double a, double b, double z, double rtol, long max_terms):
    cdef double term = 1.0
    cdef double total = 1.0
    cdef long k
    for k in range(max_terms):
        term *= (a + k) / (b + k) * z / (k + 1)
        total += term
        if isinf(total):  # overflow is not convergence
            return total, -1
        if term == 0.0 or fabs(term) <= rtol * fabs(total):
            return total, k + 1
    return total, -1
