"""The TD linear system Aw + b = 0 and its full solution set.

With arbitrary features A = X^T D (gamma P_pi - I) X is only negative
semi-definite, so the fixed-point equation can have an affine set of
solutions. We represent that set as a least-norm particular solution plus an
orthonormal basis of ker(A), and compute the common value estimate v_* by two
independent routes (least-norm algebra and fixed-point iteration of the
projected Bellman operator), cross-checking one against the other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InconsistentSystem
from .linalg import (
    FeatureMap,
    Projector,
    d_norm,
    least_norm_weight,
    numerical_rank,
    projection_matrix,
    pseudo_inverse,
    singular_cutoff,
)
from .markov import PolicyChain, bellman_apply

CONSISTENCY_TOL = 1e-8  # scaled by (1 + ||b||)
ROUTE_AGREEMENT_TOL = 1e-9
ITERATION_STOP = 1e-13
ITERATION_CAP = 100_000


@dataclass(frozen=True)
class TdLinearSystem:
    """Matrices of the expected TD update: mean field h(w) = A w + b."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        for name in ("A", "b"):
            a = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=float))
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    def mean_field(self, w: np.ndarray) -> np.ndarray:
        return self.A @ np.asarray(w, dtype=float) + self.b


@dataclass(frozen=True)
class FixedPointSet:
    """Affine solution set {w : Aw + b = 0} = w_particular + span(null_basis).

    ``w_particular`` is the least-norm solution; ``null_basis`` is an
    orthonormal (d, k) basis of ker(A), empty when the solution is unique.
    All solutions share the value estimate ``v_star = X w``.
    """

    w_particular: np.ndarray
    null_basis: np.ndarray
    v_star: np.ndarray

    def __post_init__(self):
        for name in ("w_particular", "null_basis", "v_star"):
            a = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=float))
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def null_dim(self) -> int:
        return self.null_basis.shape[1]

    def sample(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        """A random element of the solution set."""
        if self.null_dim == 0:
            return self.w_particular.copy()
        return self.w_particular + self.null_basis @ (scale * rng.standard_normal(self.null_dim))


def build_system(chain: PolicyChain, features: FeatureMap, gamma: float) -> TdLinearSystem:
    """Assemble A = X^T D (gamma P_pi - I) X and b = X^T D r_pi."""
    X = features.X
    if X.shape[0] != chain.n_states:
        raise ValueError(f"feature matrix has {X.shape[0]} rows for {chain.n_states} states")
    DX = chain.mu[:, None] * X
    A = X.T @ (chain.mu[:, None] * (gamma * (chain.P_pi @ X) - X))
    b = DX.T @ chain.r_pi
    return TdLinearSystem(A=A, b=b)


def _kernel_basis(A: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ker(A) under the shared rank cutoff, shape (d, k)."""
    _, s, vt = np.linalg.svd(A)
    cut = singular_cutoff(A.shape, s)
    keep = s <= cut
    return vt[keep].T.copy() if keep.any() else np.zeros((A.shape[1], 0))


def _iterate_projected_value(
    chain: PolicyChain, Pi: Projector, gamma: float
) -> tuple[np.ndarray, int]:
    """Fixed point of v -> Pi(T v) by iteration from zero (contraction, modulus gamma)."""
    v = np.zeros(chain.n_states)
    for k in range(ITERATION_CAP):
        v_next = Pi(bellman_apply(chain, gamma, v))
        if d_norm(v_next - v, Pi.D_used) <= ITERATION_STOP:
            return v_next, k + 1
        v = v_next
    return v, ITERATION_CAP


def solve_fixed_points(
    sys: TdLinearSystem,
    features: FeatureMap,
    D: np.ndarray,
    chain: PolicyChain,
    gamma: float,
) -> FixedPointSet:
    """Solve Aw + b = 0 as a set and cross-check v_* against the projected Bellman route.

    Raises InconsistentSystem when the least-norm candidate does not satisfy
    the system, or when the two v_* routes disagree; with a correctly built
    system either failure indicates a bug, not a property of the input.
    """
    w_particular = pseudo_inverse(sys.A) @ (-sys.b)
    residual = float(np.linalg.norm(sys.A @ w_particular + sys.b))
    if residual > CONSISTENCY_TOL * (1.0 + float(np.linalg.norm(sys.b))):
        raise InconsistentSystem(f"least-norm candidate leaves residual {residual:.3e}")
    null_basis = _kernel_basis(sys.A)
    v_star = features.X @ w_particular

    Pi = projection_matrix(features, D)
    v_iter, _ = _iterate_projected_value(chain, Pi, gamma)
    gap = d_norm(v_star - v_iter, D)
    # tolerance scales with the value magnitude; the routes agree to relative 1e-9
    if gap > ROUTE_AGREEMENT_TOL * (1.0 + d_norm(v_star, D)):
        raise InconsistentSystem(
            f"v_* routes disagree by {gap:.3e} (least-norm algebra vs projected iteration)"
        )
    return FixedPointSet(w_particular=w_particular, null_basis=null_basis, v_star=v_star)


def mspbe(
    w: np.ndarray,
    features: FeatureMap,
    D: np.ndarray,
    chain: PolicyChain,
    gamma: float,
) -> float:
    """Mean squared projected Bellman error ||Pi(T Xw - Xw)||_D^2; zero exactly on the fixed set."""
    Pi = projection_matrix(features, D)
    Xw = features.X @ np.asarray(w, dtype=float)
    resid = Pi(bellman_apply(chain, gamma, Xw) - Xw)
    return d_norm(resid, D) ** 2


def check_equivalence(
    w: np.ndarray,
    sys: TdLinearSystem,
    features: FeatureMap,
    D: np.ndarray,
    chain: PolicyChain,
    gamma: float,
) -> tuple[float, float]:
    """Residuals of the two fixed-point characterizations at w.

    Returns (||Aw + b||, ||Pi T Xw - Xw||_D). The two vanish together: each is
    (near) zero iff w solves the linear system iff Xw is the projected Bellman
    fixed point.
    """
    w = np.asarray(w, dtype=float)
    residual_linear = float(np.linalg.norm(sys.A @ w + sys.b))
    Pi = projection_matrix(features, D)
    Xw = features.X @ w
    residual_projected = d_norm(Pi(bellman_apply(chain, gamma, Xw)) - Xw, D)
    return residual_linear, residual_projected


def distance_to_fixed_set(w: np.ndarray, fps: FixedPointSet) -> float:
    """Euclidean distance from w to the affine solution set."""
    delta = np.asarray(w, dtype=float) - fps.w_particular
    if fps.null_dim:
        delta = delta - fps.null_basis @ (fps.null_basis.T @ delta)
    return float(np.linalg.norm(delta))
