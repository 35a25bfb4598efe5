"""Per-sample loss/gradient kernels.

Two interchangeable backends: fused numba loops and plain numpy. The numba
path is used when numba imports and ``DARE_DISABLE_NUMBA`` is unset (or
``0``); set ``DARE_DISABLE_NUMBA=1`` to force the numpy path.

All kernels take per-sample weights ``w`` and return weighted *sums*; the
caller normalizes.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("DARE_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag
    HAVE_NUMBA = False


def softmax_xent_numpy(Z, y, beta, bias, w):
    S = Z @ beta + bias
    m = S.max(axis=1, keepdims=True)
    E = np.exp(S - m)
    tot = E.sum(axis=1, keepdims=True)
    lse = np.log(tot)[:, 0] + m[:, 0]
    n = Z.shape[0]
    loss = float(np.dot(w, lse - S[np.arange(n), y]))
    R = E / tot
    R[np.arange(n), y] -= 1.0
    R *= w[:, None]
    return loss, Z.T @ R, R.sum(axis=0)


def squared_numpy(Z, y, beta, bias, w):
    r = Z @ beta[:, 0] + bias[0] - y
    wr = w * r
    loss = float(np.dot(wr, r))
    g = 2.0 * (Z.T @ wr)
    return loss, g[:, None], np.array([2.0 * wr.sum()])


if HAVE_NUMBA:
    @njit(cache=True)
    def _softmax_xent_nb(Z, y, beta, bias, w):
        n, d = Z.shape
        k = beta.shape[1]
        gb = np.zeros((d, k))
        gc = np.zeros(k)
        s = np.empty(k)
        loss = 0.0
        for i in range(n):
            for j in range(k):
                acc = bias[j]
                for t in range(d):
                    acc += Z[i, t] * beta[t, j]
                s[j] = acc
            m = s[0]
            for j in range(1, k):
                if s[j] > m:
                    m = s[j]
            yi = y[i]
            sy = s[yi]
            tot = 0.0
            for j in range(k):
                s[j] = np.exp(s[j] - m)
                tot += s[j]
            loss += w[i] * (np.log(tot) + m - sy)
            for j in range(k):
                r = s[j] / tot
                if j == yi:
                    r -= 1.0
                r *= w[i]
                gc[j] += r
                for t in range(d):
                    gb[t, j] += Z[i, t] * r
        return loss, gb, gc

    @njit(cache=True)
    def _squared_nb(Z, y, beta, bias, w):
        n, d = Z.shape
        g = np.zeros((d, 1))
        gc = np.zeros(1)
        loss = 0.0
        for i in range(n):
            r = bias[0] - y[i]
            for t in range(d):
                r += Z[i, t] * beta[t, 0]
            wr = w[i] * r
            loss += wr * r
            gc[0] += 2.0 * wr
            for t in range(d):
                g[t, 0] += 2.0 * Z[i, t] * wr
        return loss, g, gc

    def softmax_xent_numba(Z, y, beta, bias, w):
        return _softmax_xent_nb(Z, y, beta, bias, w)

    def squared_numba(Z, y, beta, bias, w):
        return _squared_nb(Z, y, beta, bias, w)


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


def _prep(Z, y, beta, bias, w, label_dtype):
    return (np.ascontiguousarray(Z, dtype=np.float64),
            np.ascontiguousarray(y, dtype=label_dtype),
            np.ascontiguousarray(beta, dtype=np.float64),
            np.ascontiguousarray(bias, dtype=np.float64),
            np.ascontiguousarray(w, dtype=np.float64))


def softmax_xent(Z, y, beta, bias, w, use_numba: bool | None = None):
    """Weighted multinomial logistic loss sum and its gradients."""
    args = _prep(Z, y, beta, bias, w, np.int64)
    if HAVE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA):
        return softmax_xent_numba(*args)
    return softmax_xent_numpy(*args)


def squared(Z, y, beta, bias, w, use_numba: bool | None = None):
    """Weighted squared-error sum and its gradients (``beta`` is ``d x 1``)."""
    args = _prep(Z, y, beta, bias, w, np.float64)
    if HAVE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA):
        return squared_numba(*args)
    return squared_numpy(*args)
