"""Kernel backend selection.

The compiled extension ``gdpshrink._core`` is used when it imports; otherwise
the pure-Python twin in ``gdpshrink._pycore``.  Both expose the same
functions with the same semantics, and the test-suite checks them against
each other.
"""
import numpy as np

from . import _pycore

try:
    from . import _core as _compiled
except ImportError:  # extension not built
    _compiled = None

_impls = {"python": _pycore}
if _compiled is not None:
    _impls["compiled"] = _compiled

_active = _impls.get("compiled", _pycore)


def available():
    """Names of the importable backends."""
    return sorted(_impls)


def current():
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def use(name):
    """Switch the active backend; returns the previous name."""
    global _active
    if name not in _impls:
        raise ValueError(f"backend {name!r} unavailable; have {available()}")
    prev = current()
    _active = _impls[name]
    return prev


def cd_lasso_gram(G, c, pen, beta, max_sweeps, tol):
    G = np.ascontiguousarray(G, dtype=float)
    c = np.ascontiguousarray(c, dtype=float)
    pen = np.ascontiguousarray(pen, dtype=float)
    return _active.cd_lasso_gram(G, c, pen, beta, int(max_sweeps), float(tol))


def hyp1f1_series(a, b, z, rtol, max_terms):
    return _active.hyp1f1_series(float(a), float(b), float(z), float(rtol), int(max_terms))
