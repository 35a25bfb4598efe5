"""Synthetic domains from the latent linear shift model.

Latents are ``eps = eps0 + b_e`` with zero-mean, identity-covariance
residuals ``eps0``; observations are ``x = A_e eps``. Binary labels follow
``y = 1{beta*^T eps + eta >= 0}`` with logistic ``eta``; regression targets
are ``y = beta*^T eps + eta`` with Gaussian ``eta``.

``A_e`` is kept symmetric positive definite so that the symmetric square
root of ``Sigma_e = A_e A_e^T`` recovers ``A_e`` itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matops import check_symmetric, nullspace_projector, sqrt_psd, sym_eig

RESIDUAL_LAWS = ("standard-gaussian", "rademacher", "uniform-symmetric")
TASKS = ("classify", "regress")


@dataclass
class EnvironmentSpec:
    A: np.ndarray
    b: np.ndarray
    residual_law: str = "standard-gaussian"

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape != (self.b.size, self.b.size):
            raise ValueError(f"A has shape {self.A.shape}, b has length {self.b.size}")
        if self.residual_law not in RESIDUAL_LAWS:
            raise ValueError(f"unknown residual law {self.residual_law!r}")

    @property
    def dim(self) -> int:
        return self.b.size

    @property
    def mean(self) -> np.ndarray:
        return self.A @ self.b

    @property
    def cov(self) -> np.ndarray:
        return self.A @ self.A.T


@dataclass
class GroundTruth:
    beta_star: np.ndarray
    noise_std: float = 0.1  # regression only; classification noise is logistic

    def __post_init__(self):
        self.beta_star = np.asarray(self.beta_star, dtype=float).reshape(-1)
        if not np.any(self.beta_star):
            raise ValueError("beta_star must be nonzero")

    @property
    def dim(self) -> int:
        return self.beta_star.size


@dataclass
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    env_id: str = "0"
    task: str = "classify"
    n_classes: int = field(default=2)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise ValueError("X must be an n x d matrix")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == "classify":
            self.y = np.asarray(self.y).astype(np.int64).reshape(-1)
            if self.y.size and (self.y.min() < 0 or self.y.max() >= self.n_classes):
                raise ValueError(f"labels must lie in [0, {self.n_classes})")
        else:
            self.y = np.asarray(self.y, dtype=float).reshape(-1)
            self.n_classes = 1
        if self.X.shape[0] != self.y.size:
            raise ValueError(f"X has {self.X.shape[0]} rows but y has {self.y.size} entries")
        if self.X.shape[0] < 1:
            raise ValueError("a dataset needs at least one sample")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


@dataclass
class EnvPrior:
    """Gaussian prior over environment mean shifts ``b_e ~ N(0, Sigma_b)``."""

    Sigma_b: np.ndarray
    invariant_projector: np.ndarray | None = None

    def __post_init__(self):
        self.Sigma_b = check_symmetric(np.asarray(self.Sigma_b, dtype=float))
        if self.invariant_projector is None:
            w, U = sym_eig(self.Sigma_b)
            keep = w > 1e-10 * max(w[0], 0.0) if w[0] > 0 else np.zeros_like(w, bool)
            self.invariant_projector = nullspace_projector(U[:, keep], d=w.size)
        if np.linalg.norm(self.invariant_projector @ self.Sigma_b) > 1e-9:
            raise ValueError("span(Sigma_b) must equal the range of I - Pi")

    @property
    def dim(self) -> int:
        return self.Sigma_b.shape[0]


def sample_residuals(law: str, n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean, identity-covariance latent residuals."""
    if law == "standard-gaussian":
        return rng.standard_normal((n, d))
    if law == "rademacher":
        return rng.integers(0, 2, size=(n, d)) * 2.0 - 1.0
    if law == "uniform-symmetric":
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=(n, d))
    raise ValueError(f"unknown residual law {law!r}")


def logistic_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.uniform(size=n)
    # u == 0 has probability 2^-53 per draw; nudge it off the boundary.
    u = np.clip(u, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
    return np.log(u) - np.log1p(-u)


def sample_latents(spec: EnvironmentSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    return sample_residuals(spec.residual_law, n, spec.dim, rng) + spec.b


def gen_environment(spec: EnvironmentSpec, truth: GroundTruth, n: int, task: str = "classify",
                    seed=None, env_id: str = "0", return_latents: bool = False):
    """Draw ``n`` labelled samples from one environment."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if spec.dim != truth.dim:
        raise ValueError(f"environment dimension {spec.dim} != ground-truth dimension {truth.dim}")
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    rng = np.random.default_rng(seed)
    eps = sample_latents(spec, n, rng)
    X = eps @ spec.A.T
    score = eps @ truth.beta_star
    if task == "classify":
        y = (score + logistic_noise(n, rng) >= 0).astype(np.int64)
        ds = LabeledDataset(X, y, env_id=str(env_id), task=task, n_classes=2)
    else:
        y = score + truth.noise_std * rng.standard_normal(n)
        ds = LabeledDataset(X, y, env_id=str(env_id), task=task)
    return (ds, eps) if return_latents else ds


def gen_environments(specs, truth: GroundTruth, n: int, task: str = "classify", seed: int = 0):
    """One dataset per spec; environment ``i`` uses seed ``seed + i``."""
    return [gen_environment(s, truth, n, task, seed=seed + i, env_id=str(i))
            for i, s in enumerate(specs)]


def sample_env_params(prior: EnvPrior, A_base: np.ndarray | None, E: int, seed=None,
                      residual_law: str = "standard-gaussian") -> list[EnvironmentSpec]:
    """Draw ``E`` environments with ``b_e ~ N(0, Sigma_b)`` and ``A_e = A_base``."""
    if E < 1:
        raise ValueError("E must be at least 1")
    d = prior.dim
    A = np.eye(d) if A_base is None else np.asarray(A_base, dtype=float)
    rng = np.random.default_rng(seed)
    root = sqrt_psd(prior.Sigma_b)
    bs = rng.standard_normal((E, d)) @ root
    return [EnvironmentSpec(A.copy(), b, residual_law) for b in bs]


def _check_psd(S, name):
    S = check_symmetric(np.atleast_2d(np.asarray(S, dtype=float)))
    w = np.linalg.eigvalsh(S)
    if w.size and w[0] < -1e-10 * max(abs(w[-1]), 1.0):
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    return S


def example1_family(d1: int, d2: int, Sigma_inv, varying_covs, bs=None,
                    residual_law: str = "standard-gaussian") -> list[EnvironmentSpec]:
    """Block-diagonal mixing maps with a shared top-left block.

    Every ``A_e = diag(Sigma_inv^{1/2}, Sigma_e^{1/2})``. Mean shifts default to
    zero; pass ``bs`` (one ``d1 + d2`` vector per environment) to add them.
    """
    top = sqrt_psd(_check_psd(Sigma_inv, "Sigma_inv"))
    if top.shape != (d1, d1):
        raise ValueError(f"Sigma_inv must be {d1}x{d1}")
    specs = []
    for i, cov in enumerate(varying_covs):
        bottom = sqrt_psd(_check_psd(cov, f"varying_covs[{i}]"))
        if bottom.shape != (d2, d2):
            raise ValueError(f"varying_covs[{i}] must be {d2}x{d2}")
        A = np.zeros((d1 + d2, d1 + d2))
        A[:d1, :d1] = top
        A[d1:, d1:] = bottom
        b = np.zeros(d1 + d2) if bs is None else np.asarray(bs[i], dtype=float)
        specs.append(EnvironmentSpec(A, b, residual_law))
    return specs


def random_spd(d: int, rng: np.random.Generator, cond: float = 4.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues log-uniform in ``[1/sqrt(cond), sqrt(cond)]``."""
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lo = -0.5 * np.log(cond)
    w = np.exp(rng.uniform(lo, -lo, size=d))
    S = (Q * w) @ Q.T
    return 0.5 * (S + S.T)
