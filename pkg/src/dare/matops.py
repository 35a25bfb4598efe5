"""Symmetric-matrix primitives.

Eigendecompositions, (pseudo)inverse square roots, nullspace projectors,
spectral summaries and the shrinkage covariance estimator used for
per-domain whitening.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_REL_TOL = 1e-10
SYMMETRY_TOL = 1e-12


class NotSymmetricError(ValueError):
    """Raised when a matrix expected to be symmetric is not."""

    def __init__(self, asym_norm: float, scale: float):
        self.asym_norm = asym_norm
        self.scale = scale
        super().__init__(
            f"matrix is not symmetric: ||S - S^T||_F = {asym_norm:.3e} "
            f"(relative {asym_norm / max(scale, 1e-300):.3e})"
        )


@dataclass(frozen=True)
class SpectralSummary:
    eigenvalues: np.ndarray
    effective_rank: float
    eigengap: float


def _check_square(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    return S


def check_symmetric(S: np.ndarray, tol: float = SYMMETRY_TOL) -> np.ndarray:
    """Return ``S`` symmetrized, or raise if it is too far from symmetric."""
    S = _check_square(S)
    scale = np.linalg.norm(S)
    asym = np.linalg.norm(S - S.T)
    if asym > tol * max(scale, 1.0):
        raise NotSymmetricError(float(asym), float(scale))
    return 0.5 * (S + S.T)


def sym_eig(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns eigenvalues in descending order and orthonormal eigenvectors as
    columns. Each eigenvector is sign-normalized so that its largest-magnitude
    entry is positive.
    """
    S = check_symmetric(S)
    w, U = np.linalg.eigh(S)
    w = w[::-1].copy()
    U = U[:, ::-1].copy()
    if U.size:
        idx = np.argmax(np.abs(U), axis=0)
        signs = np.sign(U[idx, np.arange(U.shape[1])])
        signs[signs == 0] = 1.0
        U *= signs
    return w, U


def _cutoff(w: np.ndarray, rel_tol: float) -> float:
    lam_max = float(w[0]) if w.size else 0.0
    return rel_tol * max(lam_max, 0.0)


def inv_sqrt_psd(S: np.ndarray, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Pseudoinverse square root of a PSD matrix.

    Eigenvalues at or below ``rel_tol * lambda_max`` are treated as zero, so
    ``W S W`` is the orthogonal projector onto the retained range.
    """
    w, U = sym_eig(S)
    keep = w > _cutoff(w, rel_tol)
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / np.sqrt(w[keep])
    W = (U * inv) @ U.T
    return 0.5 * (W + W.T)


def sqrt_psd(S: np.ndarray, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Symmetric PSD square root via the eigendecomposition.

    Eigenvalues at or below ``rel_tol * lambda_max`` (round-off included)
    are treated as exact zeros so the root keeps the numerical range.
    """
    w, U = sym_eig(S)
    root = np.where(w > _cutoff(w, rel_tol), np.sqrt(np.clip(w, 0.0, None)), 0.0)
    R = (U * root) @ U.T
    return 0.5 * (R + R.T)


def range_projector(S: np.ndarray, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Orthogonal projector onto the range of a PSD matrix."""
    w, U = sym_eig(S)
    Ur = U[:, w > _cutoff(w, rel_tol)]
    return Ur @ Ur.T


def nullspace_projector(B: np.ndarray, d: int | None = None,
                        rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Projector ``I - B B^+`` onto the orthogonal complement of span(B).

    ``B`` is ``d x E``; ``E == 0`` gives the identity (pass ``d`` explicitly
    when ``B`` has no columns and no usable shape).
    """
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    if d is None:
        d = B.shape[0]
    if B.size == 0:
        return np.eye(d)
    if B.shape[0] != d:
        raise ValueError(f"B has {B.shape[0]} rows, expected {d}")
    # SVD is more accurate than forming B B^T for the range basis.
    U, s, _ = np.linalg.svd(B, full_matrices=False)
    keep = s > np.sqrt(rel_tol) * s[0] if s.size and s[0] > 0 else np.zeros(0, bool)
    Ur = U[:, keep]
    P = np.eye(d) - Ur @ Ur.T
    return 0.5 * (P + P.T)


def spectral_summary(S: np.ndarray) -> SpectralSummary:
    """Effective rank ``tr(S)/lambda_max`` and the smallest consecutive eigengap."""
    w, _ = sym_eig(S)
    if w.size == 0 or w[0] <= 0:
        raise ValueError("effective rank is undefined for the zero matrix")
    eff = float(np.sum(np.clip(w, 0.0, None)) / w[0])
    gap = float(np.min(w[:-1] - w[1:])) if w.size > 1 else 0.0
    return SpectralSummary(eigenvalues=w, effective_rank=eff, eigengap=max(gap, 0.0))


def shrink_cov(samples: np.ndarray, shrinkage_weight: float) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and shrunk covariance ``(1-w) S + w I`` (divisor n)."""
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2:
        raise ValueError("samples must be an n x d matrix")
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot estimate a covariance from zero samples")
    if not 0.0 <= shrinkage_weight <= 1.0:
        raise ValueError("shrinkage_weight must lie in [0, 1]")
    mu = X.mean(axis=0)
    Xc = X - mu
    S = Xc.T @ Xc / n
    S = 0.5 * (S + S.T)
    cov = (1.0 - shrinkage_weight) * S + shrinkage_weight * np.eye(X.shape[1])
    return mu, cov


def is_projector(P: np.ndarray, tol: float = 1e-10) -> bool:
    P = np.asarray(P, dtype=float)
    return (np.linalg.norm(P @ P - P) <= tol
            and np.linalg.norm(P - P.T) <= tol)
