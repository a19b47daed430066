"""The mean flow dw/dt = Aw + b of linear TD and its long-time limits.

Because A is negative semi-definite with a semisimple zero eigenvalue,
exp(At) converges as t -> infinity to a projector onto ker(A) along range(A).
We build that projector directly from SVD bases (numerical Jordan forms are
unstable) and cross-check it against the matrix exponential at a large time.
The closed form w(t) = w_* + exp(At)(w0 - w_*) is the primary trajectory
engine; fixed-step RK4 exists only as an independent numerical oracle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ZeroEigenvalueNotSemisimple
from .fixed_points import FixedPointSet, TdLinearSystem, distance_to_fixed_set
from .linalg import numerical_rank, singular_cutoff

REAL_PART_ZERO_TOL = 1e-10
PROJECTOR_EXP_TOL = 1e-6
MIN_SPECTRAL_GAP = 1e-8
EIG_CLUSTER_TOL = 1e-8


@dataclass(frozen=True)
class OdeLimit:
    """Limit projector A_inf = lim exp(At) and the eigenvalue layout it rests on."""

    A_inf: np.ndarray
    spectrum_report: tuple[tuple[complex, int], ...]  # (eigenvalue, algebraic multiplicity)

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.A_inf, dtype=float))
        a.flags.writeable = False
        object.__setattr__(self, "A_inf", a)


@dataclass(frozen=True)
class OdeTrajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), d)
    w0: np.ndarray


def matrix_exponential(M: np.ndarray, t: float) -> np.ndarray:
    """exp(M t), scaling-and-squaring with Pade approximation (scipy.linalg.expm)."""
    M = np.asarray(M, dtype=float)
    return scipy.linalg.expm(M * t)


def spectral_gap(A: np.ndarray) -> float:
    """min |Re(lambda)| over eigenvalues with strictly negative real part; inf if none."""
    eigs = np.linalg.eigvals(np.asarray(A, dtype=float))
    negative = eigs.real[eigs.real < -REAL_PART_ZERO_TOL]
    return float(np.abs(negative).min()) if negative.size else np.inf


def _cluster_spectrum(eigs: np.ndarray) -> tuple[tuple[complex, int], ...]:
    """Group numerically coincident eigenvalues and report algebraic multiplicities."""
    order = np.lexsort((eigs.imag, eigs.real))
    out: list[tuple[complex, int]] = []
    for lam in eigs[order]:
        if out and abs(lam - out[-1][0]) <= EIG_CLUSTER_TOL * max(1.0, abs(out[-1][0])):
            out[-1] = (out[-1][0], out[-1][1] + 1)
        else:
            out.append((complex(lam), 1))
    return tuple(out)


def limit_projector(sys: TdLinearSystem) -> OdeLimit:
    """The long-time limit of exp(At): the projector onto ker(A) along range(A).

    Requires the zero eigenvalue of A to be semisimple, verified through
    rank(A) = rank(A^2); that holds for every A assembled from a genuine
    chain/feature pair, so a failure flags a foreign input. The result is
    cross-checked against exp(At) at a time chosen from the spectral gap
    (skipped with a warning when the gap is too small to reach the limit).
    """
    A = sys.A
    d = A.shape[0]
    eigs = np.linalg.eigvals(A)
    if eigs.size and eigs.real.max() > REAL_PART_ZERO_TOL:
        raise ValueError(
            f"A has an eigenvalue with positive real part ({eigs.real.max():.3e}); "
            "not negative semi-definite"
        )
    rank_A = numerical_rank(A)
    if rank_A != numerical_rank(A @ A):
        raise ZeroEigenvalueNotSemisimple(
            f"rank(A) = {rank_A} but rank(A^2) = {numerical_rank(A @ A)}"
        )

    u, s, vt = np.linalg.svd(A)
    cut = singular_cutoff(A.shape, s)
    kernel = vt[s <= cut].T if (s <= cut).any() else np.zeros((d, 0))
    rng_basis = u[:, s > cut] if (s > cut).any() else np.zeros((d, 0))
    # ker(A) + range(A) spans R^d exactly because zero is semisimple
    basis = np.hstack([kernel, rng_basis])
    coords = np.linalg.solve(basis, np.eye(d))
    A_inf = kernel @ coords[: kernel.shape[1]]

    gap = spectral_gap(A)
    if np.isinf(gap):
        # no decaying modes: A is (numerically) zero and exp(At) = I already
        drift = float(np.abs(matrix_exponential(A, 1.0) - A_inf).max())
        if drift > PROJECTOR_EXP_TOL:
            raise ArithmeticError(f"limit projector disagrees with exp(A) by {drift:.3e}")
    elif gap < MIN_SPECTRAL_GAP:
        warnings.warn(
            f"spectral gap {gap:.3e} below {MIN_SPECTRAL_GAP}; skipping exp(At) cross-check",
            RuntimeWarning,
        )
    else:
        drift = float(np.linalg.norm(matrix_exponential(A, 40.0 / gap) - A_inf, 2))
        if drift > PROJECTOR_EXP_TOL:
            raise ArithmeticError(
                f"limit projector disagrees with exp(At) at t = 40/gap by {drift:.3e}"
            )
    return OdeLimit(A_inf=A_inf, spectrum_report=_cluster_spectrum(eigs))


def ode_solution(
    sys: TdLinearSystem, fps: FixedPointSet, w0: np.ndarray, t: float
) -> np.ndarray:
    """Exact flow value w(t) = w_* + exp(At)(w0 - w_*)."""
    w0 = np.asarray(w0, dtype=float)
    return fps.w_particular + matrix_exponential(sys.A, t) @ (w0 - fps.w_particular)


def rk4_trajectory(
    sys: TdLinearSystem, w0: np.ndarray, step: float, horizon: float
) -> OdeTrajectory:
    """Classic fixed-step RK4 integration of dw/dt = Aw + b, endpoint at the horizon."""
    if step <= 0 or horizon < step:
        raise ValueError("need step > 0 and horizon >= step")
    n_steps = int(round(horizon / step))
    h = horizon / n_steps
    w = np.asarray(w0, dtype=float).copy()
    states = np.empty((n_steps + 1, w.size))
    states[0] = w
    A, b = sys.A, sys.b
    for k in range(n_steps):
        k1 = A @ w + b
        k2 = A @ (w + 0.5 * h * k1) + b
        k3 = A @ (w + 0.5 * h * k2) + b
        k4 = A @ (w + h * k3) + b
        w = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[k + 1] = w
    times = np.linspace(0.0, horizon, n_steps + 1)
    return OdeTrajectory(times=times, states=states, w0=np.asarray(w0, dtype=float))


def w_infinity(lim: OdeLimit, fps: FixedPointSet, w0: np.ndarray) -> np.ndarray:
    """The initial-condition-dependent flow limit A_inf (w0 - w_*) + w_*."""
    w0 = np.asarray(w0, dtype=float)
    return lim.A_inf @ (w0 - fps.w_particular) + fps.w_particular


@dataclass(frozen=True)
class BoundedArcReport:
    """Sup-norms of the forward/backward arcs through w0 and its distance to the fixed set."""

    forward_sup: float
    backward_sup: float
    backward_bounded: bool
    bound_threshold: float
    distance_to_set: float
    horizon: float


def bounded_invariant_check(
    sys: TdLinearSystem,
    fps: FixedPointSet,
    w0: np.ndarray,
    horizon: float,
    n_grid: int = 256,
) -> BoundedArcReport:
    """Probe the two-sided flow through w0 for the bounded-orbit dichotomy.

    Evaluates the closed form on grids over [0, horizon] and [-horizon, 0].
    A trajectory bounded in both time directions must sit inside the fixed
    set, so a backward arc that stays under 10 ||w0|| + 10 forces w0 to lie
    (numerically) on the solution set; if that implication fails we raise,
    because it cannot fail for a correctly assembled system.
    """
    w0 = np.asarray(w0, dtype=float)
    z = w0 - fps.w_particular
    h = horizon / n_grid
    step_fwd = matrix_exponential(sys.A, h)
    step_bwd = matrix_exponential(sys.A, -h)
    threshold = 10.0 * float(np.linalg.norm(w0)) + 10.0

    forward_sup = float(np.linalg.norm(w0))
    zf = z.copy()
    for _ in range(n_grid):
        zf = step_fwd @ zf
        forward_sup = max(forward_sup, float(np.linalg.norm(zf + fps.w_particular)))

    backward_sup = float(np.linalg.norm(w0))
    zb = z.copy()
    for _ in range(n_grid):
        zb = step_bwd @ zb
        if not np.all(np.isfinite(zb)):
            backward_sup = np.inf
            break
        backward_sup = max(backward_sup, float(np.linalg.norm(zb + fps.w_particular)))
        if backward_sup > 1e100:
            break

    bounded = backward_sup <= threshold
    dist = distance_to_fixed_set(w0, fps)
    if bounded and dist > 1e-6:
        raise ArithmeticError(
            f"backward arc bounded ({backward_sup:.3e} <= {threshold:.3e}) but w0 sits "
            f"{dist:.3e} away from the fixed set"
        )
    return BoundedArcReport(
        forward_sup=forward_sup,
        backward_sup=backward_sup,
        backward_bounded=bounded,
        bound_threshold=threshold,
        distance_to_set=dist,
        horizon=horizon,
    )
