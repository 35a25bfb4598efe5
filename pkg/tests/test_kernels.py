"""Both loss backends agree and match finite differences."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dare import _kernels

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba backend unavailable")
BACKENDS = [False, pytest.param(True, marks=needs_numba)]


def _problem(seed, n, d, k):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, d))
    w = rng.uniform(0.1, 1.0, n)
    return (rng, Z, rng.integers(0, k, n), rng.standard_normal(n), rng.standard_normal((d, k)),
            rng.standard_normal(k), w / w.sum())


@needs_numba
@given(st.integers(0, 2**31 - 1), st.integers(1, 60), st.integers(1, 6), st.integers(2, 5))
def test_backends_agree(seed, n, d, k):
    _, Z, yc, yr, beta, bias, w = _problem(seed, n, d, k)
    for fn, y, b, c in ((_kernels.softmax_xent, yc, beta, bias),
                        (_kernels.squared, yr, beta[:, :1], bias[:1])):
        ref = fn(Z, y, b, c, w, use_numba=False)
        got = fn(Z, y, b, c, w, use_numba=True)
        assert got[0] == pytest.approx(ref[0], rel=1e-12, abs=1e-12)
        np.testing.assert_allclose(got[1], ref[1], rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(got[2], ref[2], rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("use_numba", BACKENDS)
@pytest.mark.parametrize("task", ["classify", "regress"])
def test_kernel_gradient_finite_difference(use_numba, task):
    rng, Z, yc, yr, beta, bias, w = _problem(0, 40, 4, 3)
    if task == "regress":
        fn, y, beta, bias = _kernels.squared, yr, beta[:, :1], bias[:1]
    else:
        fn, y = _kernels.softmax_xent, yc
    theta = np.r_[beta.ravel(), bias]
    d, k = beta.shape

    def f(t):
        return fn(Z, y, t[:d * k].reshape(d, k), t[d * k:], w, use_numba=use_numba)

    for _ in range(20):
        t = theta + rng.standard_normal(theta.size)
        _, gb, gc = f(t)
        g = np.r_[gb.ravel(), gc]
        h = 1e-6
        fd = np.array([(f(t + h * e)[0] - f(t - h * e)[0]) / (2 * h) for e in np.eye(t.size)])
        assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(fd), 1.0)


def test_softmax_xent_known_value():
    # beta = 0: every sample costs log k
    Z = np.ones((5, 2))
    loss, gb, gc = _kernels.softmax_xent(Z, np.array([0, 1, 2, 0, 1]), np.zeros((2, 3)),
                                         np.zeros(3), np.full(5, 0.2))
    assert loss == pytest.approx(np.log(3))
    assert gc.sum() == pytest.approx(0.0, abs=1e-15)


def test_env_flag_forces_numpy():
    code = "from dare import _kernels; print(_kernels.backend())"
    env = dict(os.environ, DARE_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "numpy"
