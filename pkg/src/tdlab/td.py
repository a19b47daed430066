"""Stochastic linear TD(0): Markovian sampling, the update rule, seeded traces.

Runs are bitwise reproducible: every draw comes from a PCG64 generator seeded
with the run's 64-bit seed, transitions are sampled by inverse CDF (two
uniforms per step: action, then next state), and the initial state is drawn
from the stationary distribution. Checkpoint diagnostics are recomputed
vectorized after the run, so dense checkpointing stays cheap.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import AssumptionViolation, BudgetTooSmall, NonFiniteIterate
from .fixed_points import FixedPointSet, build_system, solve_fixed_points
from .linalg import FeatureMap, projection_matrix, pseudo_inverse
from .markov import Mdp, Policy, induce_chain


@dataclass(frozen=True)
class LearningRateSchedule:
    """Power-law learning rates alpha_t = alpha0 / (t+1)^p.

    The family satisfies the usual step-size conditions (divergent sum,
    summable squares, slowly varying inverse) exactly when p lies in
    (0.5, 1]. Construction does not enforce that window so that assumption
    checking can report on deliberately broken schedules.
    """

    alpha0: float
    p: float
    kind: str = "power"

    def __post_init__(self):
        if self.kind != "power":
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.alpha0 <= 0 or self.p <= 0:
            raise ValueError("alpha0 and p must be positive")

    def alpha(self, t: int) -> float:
        return self.alpha0 / (t + 1) ** self.p


def schedule_alpha(sched: LearningRateSchedule, t: int) -> float:
    """Learning rate at step t >= 0."""
    if t < 0:
        raise ValueError("step index must be nonnegative")
    return sched.alpha(t)


def m_horizon(sched: LearningRateSchedule, t: int, T: float) -> int:
    """Largest n >= t whose accumulated learning rates sum(alpha_t..alpha_n) stay within T."""
    if T <= 0:
        raise BudgetTooSmall(f"budget must be positive, got {T}")
    total = sched.alpha(t)
    if total > T:
        raise BudgetTooSmall(f"alpha_{t} = {total} already exceeds budget {T}")
    n = t
    while True:
        nxt = total + sched.alpha(n + 1)
        if nxt > T:
            return n
        total = nxt
        n += 1


@dataclass(frozen=True)
class TdConfig:
    """Everything a single seeded TD run needs."""

    mdp: Mdp
    policy: Policy
    features: FeatureMap
    schedule: LearningRateSchedule
    n_steps: int
    seed: int
    w_init: np.ndarray
    checkpoint_every: int = 1000
    dense_from: int | None = None  # checkpoint every step from this step on

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")
        w = np.ascontiguousarray(np.asarray(self.w_init, dtype=float))
        if w.shape != (self.features.d,):
            raise ValueError(f"w_init has shape {w.shape}, expected ({self.features.d},)")
        w.flags.writeable = False
        object.__setattr__(self, "w_init", w)


@dataclass
class TdTrace:
    """Checkpointed weights plus diagnostics, one row per checkpoint."""

    steps: np.ndarray  # (n_cp,) strictly increasing step indices
    weights: np.ndarray  # (n_cp, d)
    value_error_d: np.ndarray  # ||X w - v_*||_D
    mspbe: np.ndarray
    dist_to_set: np.ndarray
    norm_w: np.ndarray
    gamma_proj: np.ndarray  # (n_cp, d) projection of w onto the row space of X^T D X
    final_w: np.ndarray
    max_norm: float  # max ||w_t|| over every step, not just checkpoints
    seed: int

    @property
    def n_checkpoints(self) -> int:
        return self.steps.size


def sample_step(
    mdp: Mdp, policy: Policy, s: int, rng: np.random.Generator
) -> tuple[int, int, int, float]:
    """One environment interaction from state s: (s, a, s', r(s, a)).

    Consumes exactly two uniforms (action, next state), matching the stream
    layout of run_td so externally replayed paths agree bit for bit.
    """
    a = _inverse_cdf(np.cumsum(policy.probs[s]), rng.random())
    s_next = _inverse_cdf(np.cumsum(mdp.transition[s, a]), rng.random())
    return s, a, s_next, float(mdp.reward[s, a])


def _inverse_cdf(cumulative: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(cumulative, u, side="right")), cumulative.size - 1)


def td_step(
    w: np.ndarray,
    transition: tuple[int, int, int, float],
    alpha: float,
    features: FeatureMap,
    gamma: float,
) -> np.ndarray:
    """One TD(0) update: w + alpha (r + gamma x(s')^T w - x(s)^T w) x(s)."""
    s, _, s_next, r = transition
    x_s = features.X[s]
    delta = r + gamma * (features.X[s_next] @ w) - (x_s @ w)
    return w + alpha * delta * x_s


def _analysis_objects(config: TdConfig):
    chain = induce_chain(config.mdp, config.policy)
    gamma = config.mdp.discount
    sys = build_system(chain, config.features, gamma)
    fps = solve_fixed_points(sys, config.features, chain.D, chain, gamma)
    return chain, gamma, sys, fps


def run_td(config: TdConfig) -> TdTrace:
    """Run seeded TD(0) and collect a checkpointed trace with diagnostics.

    Checkpoints land on multiples of ``checkpoint_every``, on every step from
    ``dense_from`` onward, and always on step 0 and the final step. Identical
    configs (seed included) produce bitwise identical traces.
    """
    from .sa_checks import check_assumptions  # local import to avoid a module cycle

    report = check_assumptions(config.mdp, config.policy, config.features, config.schedule)
    if not report.all_passed:
        raise AssumptionViolation("; ".join(c.name for c in report.checks if not c.passed))

    chain, gamma, sys, fps = _analysis_objects(config)
    X = config.features.X
    rng = np.random.Generator(np.random.PCG64(config.seed))
    s = _inverse_cdf(np.cumsum(chain.mu), rng.random())

    dense_from = config.dense_from if config.dense_from is not None else config.n_steps + 1
    policy_cum = np.cumsum(config.policy.probs, axis=1)
    trans_cum = np.cumsum(config.mdp.transition, axis=2)
    reward = config.mdp.reward
    alphas = config.schedule.alpha0 / np.arange(1.0, config.n_steps + 1.0) ** config.schedule.p

    w = config.w_init.copy()
    cp_steps: list[int] = [0]
    cp_weights: list[np.ndarray] = [w.copy()]
    max_sq = float(w @ w)

    for t in range(config.n_steps):
        a = _inverse_cdf(policy_cum[s], rng.random())
        s_next = _inverse_cdf(trans_cum[s, a], rng.random())
        delta = reward[s, a] + gamma * (X[s_next] @ w) - (X[s] @ w)
        w = w + alphas[t] * delta * X[s]
        s = s_next
        max_sq = max(max_sq, float(w @ w))
        step_done = t + 1
        if (
            step_done == config.n_steps
            or step_done % config.checkpoint_every == 0
            or step_done >= dense_from
        ):
            if not np.all(np.isfinite(w)):
                raise NonFiniteIterate(f"non-finite weight at step {step_done} (seed {config.seed})")
            if cp_steps[-1] != step_done:
                cp_steps.append(step_done)
                cp_weights.append(w.copy())

    if not np.all(np.isfinite(w)):
        raise NonFiniteIterate(f"non-finite final weight (seed {config.seed})")

    steps = np.asarray(cp_steps, dtype=np.int64)
    W = np.asarray(cp_weights)
    diag = compute_diagnostics(W, config.features, chain, gamma, fps)
    return TdTrace(
        steps=steps,
        weights=W,
        final_w=w,
        max_norm=float(np.sqrt(max_sq)),
        seed=config.seed,
        **diag,
    )


def compute_diagnostics(
    W: np.ndarray,
    features: FeatureMap,
    chain,
    gamma: float,
    fps: FixedPointSet,
) -> dict[str, np.ndarray]:
    """Vectorized per-checkpoint diagnostics for a stack of weights (n, d)."""
    X = features.X
    mu = chain.mu
    V = W @ X.T  # value estimates, one row per checkpoint
    value_error_d = np.sqrt(np.maximum(((V - fps.v_star) ** 2 * mu).sum(axis=1), 0.0))

    Pi = projection_matrix(features, chain.D)
    bellman = chain.r_pi + gamma * (V @ chain.P_pi.T)
    proj_resid = (bellman - V) @ Pi.Pi.T
    mspbe = (proj_resid**2 * mu).sum(axis=1)

    delta = W - fps.w_particular
    if fps.null_dim:
        delta = delta - (delta @ fps.null_basis) @ fps.null_basis.T
    dist_to_set = np.linalg.norm(delta, axis=1)

    M = X.T @ (mu[:, None] * X)
    G = M @ pseudo_inverse(M)
    gamma_proj = W @ G.T
    return {
        "value_error_d": value_error_d,
        "mspbe": mspbe,
        "dist_to_set": dist_to_set,
        "norm_w": np.linalg.norm(W, axis=1),
        "gamma_proj": gamma_proj,
    }


@dataclass(frozen=True)
class LocalStabilityReport:
    """Window maxima of the distance to the fixed set along a trace.

    For each checkpoint step t the window runs to m(t, T), the last step whose
    accumulated learning rates stay within the budget T. ``anchor_steps`` are
    the checkpoints that set a new distance record (closest approach so far);
    their window maxima shrinking is the evidence the diagnostic reports.
    """

    budget: float
    checkpoint_steps: np.ndarray
    window_max: np.ndarray
    anchor_steps: np.ndarray
    anchor_window_max: np.ndarray
    anchors_nonincreasing: bool
    first_quartile_median: float
    last_quartile_median: float
    quartile_ratio: float


def local_stability_report(
    trace: TdTrace, fps: FixedPointSet, sched: LearningRateSchedule, T: float
) -> LocalStabilityReport:
    """Evaluate the shrinking-window stability diagnostic on a trace.

    Windows are clipped to the recorded trace. The quartile statistics split
    the covered step range into quarters by step index and compare median
    window maxima of the first quarter against the last.
    """
    steps = trace.steps
    dist = trace.dist_to_set
    last_step = int(steps[-1])
    alphas = sched.alpha0 / np.arange(1.0, last_step + 2.0) ** sched.p
    cum = np.concatenate([[0.0], np.cumsum(alphas)])  # cum[i] = sum of alpha_0..alpha_{i-1}

    # window end m(t, T) per checkpoint, capped at the trace end
    ends = np.searchsorted(cum, cum[steps] + T, side="right") - 2
    ends = np.clip(ends, steps, last_step)

    # sliding maximum over checkpoint windows; window ends are non-decreasing
    n = steps.size
    window_max = np.empty(n)
    idx: deque[int] = deque()
    hi = 0
    for k in range(n):
        end_cp = int(np.searchsorted(steps, ends[k], side="right"))
        while hi < end_cp:
            while idx and dist[idx[-1]] <= dist[hi]:
                idx.pop()
            idx.append(hi)
            hi += 1
        while idx and idx[0] < k:
            idx.popleft()
        window_max[k] = dist[idx[0]] if idx else dist[k]

    record = np.minimum.accumulate(dist)
    is_anchor = dist <= record
    anchor_steps = steps[is_anchor]
    anchor_max = window_max[is_anchor]
    if anchor_max.size > 1:
        nonincreasing = bool(np.all(np.diff(anchor_max) <= 1e-9 * anchor_max[:-1]))
    else:
        nonincreasing = True

    span = steps[-1] - steps[0]
    first_q = window_max[steps <= steps[0] + span / 4]
    last_q = window_max[steps >= steps[0] + 3 * span / 4]
    first_med = float(np.median(first_q)) if first_q.size else np.nan
    last_med = float(np.median(last_q)) if last_q.size else np.nan
    ratio = first_med / last_med if last_med > 0 else np.inf

    return LocalStabilityReport(
        budget=T,
        checkpoint_steps=steps,
        window_max=window_max,
        anchor_steps=anchor_steps,
        anchor_window_max=anchor_max,
        anchors_nonincreasing=nonincreasing,
        first_quartile_median=first_med,
        last_quartile_median=last_med,
        quartile_ratio=float(ratio),
    )
