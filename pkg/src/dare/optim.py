"""Full-batch BFGS with Armijo backtracking."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class OptResult:
    x: np.ndarray
    fun: float
    grad_norm: float
    iters: int
    converged: bool
    history: list = field(default_factory=list)


def bfgs(fun, x0, grad_tol=1e-8, max_iters=10000, c1=1e-4, shrink=0.5, max_backtracks=60,
         noise=1e-14):
    """Minimize ``fun`` (returning ``(value, gradient)``) from ``x0``.

    Steps must satisfy the Armijo condition. Close to the optimum the
    objective decrease drops below floating-point resolution, so a step is
    also accepted when the objective is unchanged up to ``noise`` (relative)
    and the gradient norm shrinks. When the line search still stalls the
    inverse-Hessian estimate is reset to the identity once before giving up.
    """
    x = np.array(x0, dtype=float).ravel()
    f, g = fun(x)
    n = x.size
    H = np.eye(n)
    history = [f]
    gnorm = float(np.linalg.norm(g))
    it = 0
    reset = False
    while gnorm > grad_tol and it < max_iters:
        p = -H @ g
        slope = float(g @ p)
        if slope >= 0:
            H = np.eye(n)
            p = -g
            slope = -gnorm ** 2
        t = 1.0
        for _ in range(max_backtracks):
            x_new = x + t * p
            f_new, g_new = fun(x_new)
            if not np.isfinite(f_new):
                t *= shrink
                continue
            if f_new <= f + c1 * t * slope:
                break
            if (f_new <= f + noise * max(abs(f), 1.0)
                    and np.linalg.norm(g_new) < gnorm):
                break
            t *= shrink
        else:
            if reset:
                break
            H = np.eye(n)
            reset = True
            continue
        reset = False
        s = x_new - x
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
            if it == 0:
                H = np.eye(n) * (sy / float(yv @ yv))
            rho = 1.0 / sy
            Hy = H @ yv
            H = (H - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                 + (rho * rho * float(yv @ Hy) + rho) * np.outer(s, s))
        x, f, g = x_new, f_new, g_new
        gnorm = float(np.linalg.norm(g))
        history.append(f)
        it += 1
    converged = gnorm <= grad_tol
    if not converged:
        log.warning("BFGS stopped after %d iterations with gradient norm %.3e", it, gnorm)
    return OptResult(x=x, fun=float(f), grad_norm=gnorm, iters=it, converged=converged, history=history)
