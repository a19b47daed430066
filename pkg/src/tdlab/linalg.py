"""Rank-agnostic linear algebra: pseudo-inverse, least-norm weights, weighted projection.

Nothing here assumes the feature matrix has independent columns (or rows).
Every rank decision in the package goes through ``numerical_rank`` /
``singular_cutoff`` so that "rank" means one thing everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_SAFETY = 16.0  # multiplier on the usual max(m,n)*sigma_max*eps rule


def singular_cutoff(shape: tuple[int, int], singular_values: np.ndarray) -> float:
    """Threshold below which a singular value is treated as exactly zero."""
    if singular_values.size == 0:
        return 0.0
    sigma_max = float(singular_values.max(initial=0.0))
    return max(shape) * sigma_max * np.finfo(float).eps * RANK_SAFETY


def numerical_rank(M: np.ndarray) -> int:
    """Rank of M under the shared singular-value cutoff."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > singular_cutoff(M.shape, s)))


def pseudo_inverse(M: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Total on all real matrices: the zero matrix maps to the (transposed) zero
    matrix. Singular values under the shared cutoff are dropped rather than
    inverted, so near-singular inputs do not blow up.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    u, s, vt = np.linalg.svd(M, full_matrices=False)
    cut = singular_cutoff(M.shape, s)
    inv = np.where(s > cut, np.divide(1.0, s, out=np.zeros_like(s), where=s > cut), 0.0)
    return (vt.T * inv) @ u.T


@dataclass(frozen=True)
class FeatureMap:
    """State-feature matrix X (row s is the feature vector of state s) plus its rank."""

    X: np.ndarray
    rank: int

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.X, dtype=float))
        X.flags.writeable = False
        object.__setattr__(self, "X", X)

    @classmethod
    def from_matrix(cls, X: np.ndarray) -> "FeatureMap":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return cls(X=X, rank=numerical_rank(X))

    @property
    def n_states(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class Projector:
    """Weighted projection onto the feature span, with the weights it was built from."""

    Pi: np.ndarray
    D_used: np.ndarray

    def __post_init__(self):
        for name in ("Pi", "D_used"):
            a = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=float))
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self.Pi @ np.asarray(v, dtype=float)


def _sqrt_diag(D: np.ndarray) -> np.ndarray:
    d = np.diag(np.asarray(D, dtype=float))
    if np.any(d <= 0):
        raise ValueError("weighting matrix must be positive definite diagonal")
    return np.sqrt(d)


def d_norm(v: np.ndarray, D: np.ndarray) -> float:
    """Weighted norm sqrt(v^T D v) for positive definite diagonal D."""
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(v @ (np.diag(D) * v)))


def least_norm_weight(features: FeatureMap, D: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Smallest-norm minimizer of ||Xw - v||_D.

    Computed as (D^{1/2} X)^+ D^{1/2} v. Among all weights minimizing the
    weighted residual this is the unique one of minimal Euclidean norm; it
    lies in the row space of X, orthogonal to ker(X).
    """
    s = _sqrt_diag(D)
    return pseudo_inverse(s[:, None] * features.X) @ (s * np.asarray(v, dtype=float))


def projection_matrix(features: FeatureMap, D: np.ndarray) -> Projector:
    """The D-weighted projection onto the column space of X.

    Pi = X (D^{1/2} X)^+ D^{1/2}. For full-column-rank X this reduces to the
    classical X (X^T D X)^{-1} X^T D; with rank-deficient X it projects via
    the least-norm weight instead, and stays idempotent and D-nonexpansive.
    """
    s = _sqrt_diag(D)
    Pi = features.X @ pseudo_inverse(s[:, None] * features.X) * s[None, :]
    return Projector(Pi=Pi, D_used=np.diag(np.diag(np.asarray(D, dtype=float))))
