import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gdpshrink import _backend, _pycore

pytestmark = pytest.mark.skipif(len(_backend.available()) < 2, reason="compiled extension not built")


def both(fn, *args):
    out = {}
    for name in ("compiled", "python"):
        prev = _backend.use(name)
        try:
            out[name] = fn(*args)
        finally:
            _backend.use(prev)
    return out


def test_compiled_is_default():
    assert _backend.current() == "compiled"


def test_use_rejects_unknown():
    with pytest.raises(ValueError):
        _backend.use("fortran")


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 20), st.sampled_from([0.5, 1.5, 2.5]), st.floats(0, 200))
def test_hyp1f1_series_agree(a, b, z):
    out = both(lambda: _backend.hyp1f1_series(a, b, z, 1e-15, 10_000))
    (vc, nc), (vp, np_) = out["compiled"], out["python"]
    assert nc == np_
    assert vc == pytest.approx(vp, rel=1e-14)


def test_hyp1f1_nonconvergence_flag():
    out = both(lambda: _backend.hyp1f1_series(1.0, 1.5, 1e5, 1e-15, 100))
    assert out["compiled"][1] == -1 and out["python"][1] == -1


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 15), st.floats(0, 10))
def test_cd_sweeps_agree(seed, p, lam):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((30, p))
    y = rng.standard_normal(30)
    G, c = X.T @ X, X.T @ y
    pen = lam * rng.uniform(0, 2, p)

    def run():
        beta = np.zeros(p)
        n = _backend.cd_lasso_gram(G, c, pen, beta, 50, 1e-12)
        return n, beta

    out = both(run)
    assert out["compiled"][0] == out["python"][0]
    assert np.allclose(out["compiled"][1], out["python"][1], rtol=1e-12, atol=1e-13)


def test_cd_sweep_limit_sign():
    G = np.array([[1.0, 0.999], [0.999, 1.0]])
    c = np.array([1.0, 0.0])
    out = both(lambda: _backend.cd_lasso_gram(G, c, np.zeros(2), np.zeros(2), 3, 1e-15))
    assert out["compiled"] == out["python"] == -3


def test_pure_python_module_importable_alone():
    assert callable(_pycore.cd_lasso_gram) and callable(_pycore.hyp1f1_series)


def test_fallback_when_extension_missing(tmp_path):
    import subprocess
    import sys

    code = ("import sys; sys.modules['gdpshrink._core'] = None\n"
            "from gdpshrink import _backend; print(_backend.current(), _backend.available())")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python ['python']"
