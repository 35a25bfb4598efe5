"""Whitening and linear predictors.

DARE (domain-adjusted regression) whitens every training domain with its
own covariance, fits a single linear predictor on the adjusted features,
and penalizes any effect of each domain's adjusted mean on the prediction.
ERM, reweighted ERM and GroupDRO are provided as baselines on raw features.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .envmodel import LabeledDataset
from .matops import inv_sqrt_psd, nullspace_projector, shrink_cov
from .optim import bfgs

log = logging.getLogger(__name__)


@dataclass
class FitConfig:
    lam: float = 10.0
    max_iters: int = 10000
    grad_tol: float = 1e-8
    shrinkage_weight: float = 0.1
    center: bool = True

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass
class Whitener:
    mu: np.ndarray
    cov: np.ndarray
    inv_sqrt: np.ndarray
    shrinkage_weight: float

    def transform(self, X, center: bool = True) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return ((X - self.mu) if center else X) @ self.inv_sqrt

    @property
    def adjusted_mean(self) -> np.ndarray:
        return self.inv_sqrt @ self.mu


@dataclass
class LinearModel:
    beta: np.ndarray
    bias: np.ndarray
    task: str
    test_whitener: np.ndarray
    method_tag: str
    lam: float = 0.0
    convergence: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.beta.ndim == 1:
            self.beta = self.beta[:, None]
        self.bias = np.asarray(self.bias, dtype=float).reshape(-1)
        self.test_whitener = np.asarray(self.test_whitener, dtype=float)
        if not np.all(np.isfinite(self.beta)):
            raise ValueError("beta must be finite")

    @property
    def dim(self) -> int:
        return self.beta.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.beta.shape[1]

    def direction(self) -> np.ndarray:
        """Single coefficient vector: the logit difference for binary models."""
        if self.task == "classify" and self.n_outputs == 2:
            return self.beta[:, 1] - self.beta[:, 0]
        if self.n_outputs == 1:
            return self.beta[:, 0]
        raise ValueError("direction() is only defined for binary or scalar models")


# --------------------------------------------------------------------------- whitening

def fit_whiteners(datasets, shrinkage_weight: float = 0.1) -> list[Whitener]:
    out = []
    for ds in datasets:
        if ds.n < 1:
            raise ValueError(f"environment {ds.env_id!r} is empty")
        mu, cov = shrink_cov(ds.X, shrinkage_weight)
        out.append(Whitener(mu, cov, inv_sqrt_psd(cov), shrinkage_weight))
    return out


def guess_test_whitener(whiteners) -> np.ndarray:
    """Average of the training inverse square roots."""
    if not whiteners:
        raise ValueError("need at least one whitener")
    return np.mean([w.inv_sqrt for w in whiteners], axis=0)


# --------------------------------------------------------------------------- objective

class LinearObjective:
    """Weighted loss over stacked samples plus an optional mean-invariance penalty.

    The parameter vector packs ``beta`` (``d x k``, row-major) followed by the
    ``k`` biases when ``fit_intercept`` is set.
    """

    def __init__(self, Z, y, weights, task, n_outputs, anchors=None, lam=0.0,
                 fit_intercept=True):
        self.Z = np.ascontiguousarray(Z, dtype=float)
        self.y = y
        self.w = np.ascontiguousarray(weights, dtype=float)
        self.task = task
        self.k = n_outputs
        self.d = self.Z.shape[1]
        self.anchors = (np.zeros((0, self.d)) if anchors is None
                        else np.atleast_2d(np.asarray(anchors, dtype=float)))
        self.lam = float(lam)
        self.fit_intercept = fit_intercept

    @property
    def size(self) -> int:
        return self.d * self.k + (self.k if self.fit_intercept else 0)

    def unpack(self, theta):
        beta = theta[: self.d * self.k].reshape(self.d, self.k)
        bias = theta[self.d * self.k:] if self.fit_intercept else np.zeros(self.k)
        return beta, bias

    def pack(self, beta, bias):
        parts = [np.asarray(beta, dtype=float).ravel()]
        if self.fit_intercept:
            parts.append(np.asarray(bias, dtype=float).ravel())
        return np.concatenate(parts)

    def data_term(self, theta):
        beta, bias = self.unpack(theta)
        kern = _kernels.softmax_xent if self.task == "classify" else _kernels.squared
        return kern(self.Z, self.y, beta, bias, self.w)

    def penalty(self, beta):
        """Mean over anchors of the invariance penalty and its gradient in ``beta``."""
        M = self.anchors
        if M.shape[0] == 0 or self.lam == 0.0:
            return 0.0, np.zeros_like(beta)
        S = M @ beta
        E = M.shape[0]
        if self.task == "classify":
            m = S.max(axis=1, keepdims=True)
            ex = np.exp(S - m)
            tot = ex.sum(axis=1, keepdims=True)
            # cross-entropy against the uniform distribution
            val = np.sum(np.log(tot)[:, 0] + m[:, 0] - S.mean(axis=1)) / E
            G = M.T @ (ex / tot - 1.0 / self.k) / E
        else:
            val = float(np.sum(S ** 2)) / E
            G = 2.0 * M.T @ S / E
        return self.lam * val, self.lam * G

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        beta, _ = self.unpack(theta)
        loss, gb, gc = self.data_term(theta)
        pval, pgrad = self.penalty(beta)
        grad_beta = gb + pgrad
        g = grad_beta.ravel() if not self.fit_intercept else np.concatenate([grad_beta.ravel(), gc])
        return loss + pval, g


def _n_outputs(datasets) -> int:
    tasks = {ds.task for ds in datasets}
    if len(tasks) != 1:
        raise ValueError(f"mixed tasks across environments: {sorted(tasks)}")
    if tasks == {"regress"}:
        return 1
    return max(ds.n_classes for ds in datasets)


def _stack(blocks, datasets, env_weights):
    """Stack feature blocks with per-sample weights ``env_weights[e] / n_e``."""
    Z = np.vstack(blocks)
    y = np.concatenate([ds.y for ds in datasets])
    w = np.concatenate([np.full(ds.n, env_weights[e] / ds.n) for e, ds in enumerate(datasets)])
    return Z, y, w


def _solve(obj: LinearObjective, cfg: FitConfig, theta0=None):
    x0 = np.zeros(obj.size) if theta0 is None else theta0
    res = bfgs(obj, x0, grad_tol=cfg.grad_tol, max_iters=cfg.max_iters)
    beta, bias = obj.unpack(res.x)
    conv = {"iters": res.iters, "grad_norm": res.grad_norm, "converged": res.converged,
            "objective": res.fun}
    return beta.copy(), bias.copy(), conv, res


def dare_objective(datasets, cfg: FitConfig, whiteners=None) -> tuple[LinearObjective, list[Whitener]]:
    """Build the penalized DARE objective (averaged over environments)."""
    datasets = list(datasets)
    if not datasets:
        raise ValueError("need at least one environment")
    if whiteners is None:
        whiteners = fit_whiteners(datasets, cfg.shrinkage_weight)
    k = _n_outputs(datasets)
    E = len(datasets)
    blocks = [w.transform(ds.X, center=cfg.center) for w, ds in zip(whiteners, datasets)]
    Z, y, wts = _stack(blocks, datasets, np.full(E, 1.0 / E))
    anchors = np.array([w.adjusted_mean for w in whiteners])
    obj = LinearObjective(Z, y, wts, datasets[0].task, k, anchors=anchors, lam=cfg.lam,
                          fit_intercept=cfg.center)
    return obj, whiteners


def dare_fit(datasets, cfg: FitConfig | None = None, whiteners=None) -> LinearModel:
    """Fit DARE; predictions use the average training whitener unless replaced."""
    cfg = cfg or FitConfig()
    obj, whiteners = dare_objective(datasets, cfg, whiteners)
    beta, bias, conv, res = _solve(obj, cfg)
    model = LinearModel(beta, bias, obj.task, guess_test_whitener(whiteners), "dare",
                        lam=cfg.lam, convergence=conv)
    model.extras["objective_history"] = res.history
    return model


def constraint_violation(model: LinearModel, whiteners) -> np.ndarray:
    """Per-environment effect of the adjusted mean on the output.

    Classification: spread of the class scores ``max_j |s_j - mean(s)|``;
    regression: ``|beta^T m_e|``.
    """
    S = np.array([w.adjusted_mean for w in whiteners]) @ model.beta
    return np.max(np.abs(S - S.mean(axis=1, keepdims=True)), axis=1) if model.task == "classify" \
        else np.abs(S[:, 0])


def closed_form_dare_linear(beta_star, B) -> np.ndarray:
    """Population DARE regression solution: ``beta*`` projected off span(B)."""
    beta_star = np.asarray(beta_star, dtype=float).reshape(-1)
    B = np.asarray(B, dtype=float)
    if B.size and B.shape[0] != beta_star.size:
        raise ValueError(f"B has {B.shape[0]} rows, beta_star has length {beta_star.size}")
    return nullspace_projector(B, d=beta_star.size) @ beta_star


# --------------------------------------------------------------------------- prediction

def softmax(S):
    m = S.max(axis=1, keepdims=True)
    ex = np.exp(S - m)
    return ex / ex.sum(axis=1, keepdims=True)


def scores(model: LinearModel, X, whitener=None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.dim:
        raise ValueError(f"X has {X.shape[1]} columns, model expects {model.dim}")
    W = model.test_whitener if whitener is None else whitener
    return (X @ W) @ model.beta + model.bias


def predict(model: LinearModel, X, whitener=None) -> np.ndarray:
    """Class-probability rows (classification) or real predictions (regression)."""
    S = scores(model, X, whitener)
    return softmax(S) if model.task == "classify" else S[:, 0]


def accuracy(model: LinearModel, ds: LabeledDataset, whitener=None) -> float:
    return float(np.mean(np.argmax(scores(model, ds.X, whitener), axis=1) == ds.y))


def mean_loss(model: LinearModel, ds: LabeledDataset, whitener=None) -> float:
    S = scores(model, ds.X, whitener)
    if model.task == "classify":
        m = S.max(axis=1)
        lse = np.log(np.exp(S - m[:, None]).sum(axis=1)) + m
        return float(np.mean(lse - S[np.arange(ds.n), ds.y]))
    return float(np.mean((S[:, 0] - ds.y) ** 2))


# --------------------------------------------------------------------------- baselines

def _raw_objective(datasets, env_weights, fit_intercept=True):
    k = _n_outputs(datasets)
    Z, y, w = _stack([ds.X for ds in datasets], datasets, env_weights)
    return LinearObjective(Z, y, w, datasets[0].task, k, fit_intercept=fit_intercept)


def erm_objective(datasets):
    datasets = list(datasets)
    N = sum(ds.n for ds in datasets)
    return _raw_objective(datasets, np.array([ds.n / N for ds in datasets]))


def reweighted_objective(datasets):
    datasets = list(datasets)
    return _raw_objective(datasets, np.full(len(datasets), 1.0 / len(datasets)))


def _baseline(obj, datasets, cfg, tag):
    beta, bias, conv, res = _solve(obj, cfg)
    d = datasets[0].dim
    model = LinearModel(beta, bias, obj.task, np.eye(d), tag, convergence=conv)
    model.extras["objective_history"] = res.history
    return model


def erm_fit(datasets, cfg: FitConfig | None = None) -> LinearModel:
    """Pooled empirical risk minimization on raw features."""
    datasets = list(datasets)
    if not datasets:
        raise ValueError("need at least one environment")
    return _baseline(erm_objective(datasets), datasets, cfg or FitConfig(), "erm")


def reweighted_erm_fit(datasets, cfg: FitConfig | None = None) -> LinearModel:
    """ERM with every domain's mean loss weighted equally."""
    datasets = list(datasets)
    if not datasets:
        raise ValueError("need at least one environment")
    return _baseline(reweighted_objective(datasets), datasets, cfg or FitConfig(), "reweighted_erm")


def groupdro_fit(datasets, cfg: FitConfig | None = None, step_size: float = 0.01,
                 outer_iters: int = 2000, weight_tol: float = 1e-10) -> LinearModel:
    """GroupDRO with exponentiated-gradient group weights.

    Each outer iteration multiplies the group weights by ``exp(step_size *
    group_loss)``, renormalizes, and re-minimizes the weighted loss
    (warm-started BFGS). Stops once the weights move less than ``weight_tol``.
    """
    datasets = list(datasets)
    if not datasets:
        raise ValueError("need at least one environment")
    cfg = cfg or FitConfig()
    E = len(datasets)
    q = np.full(E, 1.0 / E)
    obj = _raw_objective(datasets, q)
    groups = [_raw_objective([ds], np.ones(1)) for ds in datasets]
    sample_group = np.concatenate([np.full(ds.n, e) for e, ds in enumerate(datasets)])
    inv_n = np.array([1.0 / ds.n for ds in datasets])
    beta, bias, conv, res = _solve(obj, cfg)
    theta = res.x
    outer = 0
    for outer in range(1, outer_iters + 1):
        losses = np.array([g(theta)[0] for g in groups])
        q_new = q * np.exp(step_size * (losses - losses.max()))
        q_new /= q_new.sum()
        moved = float(np.max(np.abs(q_new - q)))
        q = q_new
        obj.w = (q * inv_n)[sample_group]
        beta, bias, conv, res = _solve(obj, cfg, theta0=theta)
        theta = res.x
        if moved < weight_tol:
            break
    conv["outer_iters"] = outer
    d = datasets[0].dim
    model = LinearModel(beta, bias, obj.task, np.eye(d), "groupdro", convergence=conv)
    model.extras["group_weights"] = q.tolist()
    return model


# --------------------------------------------------------------------------- JIT-UDA

def jituda_fit_predict(source: LabeledDataset, target_X, cfg: FitConfig | None = None):
    """Unconstrained, uncentered DARE regression with a just-in-time target whitener.

    The first half of the source estimates its covariance, the second half
    fits ``beta`` on ``Sigma_S^{-1/2} x``. Predictions on the target use the
    inverse square root of the target sample covariance.
    """
    cfg = replace(cfg or FitConfig(), lam=0.0, center=False)
    if source.task != "regress":
        raise ValueError("JIT-UDA is defined for the regression task")
    if source.n < 4:
        raise ValueError("need at least 4 source samples")
    target_X = np.atleast_2d(np.asarray(target_X, dtype=float))
    if target_X.shape[0] < 2:
        raise ValueError("need at least 2 target samples")
    half = source.n // 2
    _, cov_s = shrink_cov(source.X[:half], cfg.shrinkage_weight)
    W_s = inv_sqrt_psd(cov_s)
    fit_half = LabeledDataset(source.X[half:], source.y[half:], source.env_id, "regress")
    obj = LinearObjective(fit_half.X @ W_s, fit_half.y, np.full(fit_half.n, 1.0 / fit_half.n),
                          "regress", 1, fit_intercept=False)
    beta, bias, conv, _ = _solve(obj, cfg)
    _, cov_t = shrink_cov(target_X, cfg.shrinkage_weight)
    model = LinearModel(beta, bias, "regress", inv_sqrt_psd(cov_t), "dare_jituda",
                        lam=0.0, convergence=conv)
    model.extras["source_whitener"] = W_s
    return model, predict(model, target_X)
