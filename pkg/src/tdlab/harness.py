"""Experiment pipeline: assumptions -> fixed points -> ODE limits -> TD runs -> outputs.

Reports and trace files are deterministic functions of the config: floats are
written with 17 significant digits, JSON keys are sorted, seeds are processed
in config order (even when runs execute in a worker pool), and nothing
time- or host-dependent enters any output file.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .errors import ValidationError
from .fixed_points import build_system, mspbe, solve_fixed_points
from .markov import induce_chain
from .ode import limit_projector, ode_solution, spectral_gap, w_infinity
from .sa_checks import check_assumptions
from .td import TdConfig, TdTrace, run_td

ODE_CONVERGENCE_TOL = 1e-8
TD_NORM_BOUND = 1e3
ODE_CSV_POINTS = 200


def fmt(x: float) -> str:
    """Render one float at 17 significant digits (round-trip exact)."""
    return format(float(x), ".17g")


def _json_text(obj, indent: int = 0) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""
    pad = "  " * indent
    pad_in = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad_in}"{k}": {_json_text(obj[k], indent + 1)}' for k in sorted(obj)
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = [f"{pad_in}{_json_text(v, indent + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return fmt(x) if np.isfinite(x) else f'"{x!r}"'
    if isinstance(obj, np.ndarray):
        return _json_text(obj.tolist(), indent)
    raise TypeError(f"cannot serialize {type(obj)!r}")


@dataclass
class RunReport:
    """Machine-readable summary of one experiment; every number is recomputable."""

    config: dict
    assumptions: list[dict]
    fixed_point: dict
    ode: dict
    td: dict
    checks: dict
    outputs: dict

    @property
    def all_checks_pass(self) -> bool:
        return all(self.checks.values())

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "assumptions": self.assumptions,
            "fixed_point": self.fixed_point,
            "ode": self.ode,
            "td": self.td,
            "checks": self.checks,
            "outputs": self.outputs,
        }


def _td_config(config: ExperimentConfig, seed: int) -> TdConfig:
    return TdConfig(
        mdp=config.mdp,
        policy=config.policy,
        features=config.features,
        schedule=config.schedule,
        n_steps=config.n_steps,
        seed=seed,
        w_init=config.w_init,
        checkpoint_every=config.checkpoint_every,
        dense_from=config.dense_from,
    )


def _worker_count(n_jobs: int) -> int:
    env = os.environ.get("TDLAB_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def run_seeds(config: ExperimentConfig, seeds: tuple[int, ...]) -> list[TdTrace]:
    """Run one TD trace per seed, fanning out to a process pool when allowed."""
    jobs = [_td_config(config, seed) for seed in seeds]
    workers = _worker_count(len(jobs))
    if workers == 1 or len(jobs) == 1:
        return [run_td(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_td, jobs))


def run_experiment(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    seeds: tuple[int, ...] | None = None,
    n_steps: int | None = None,
) -> RunReport:
    """Execute the full pipeline and (optionally) write outputs.

    ``seeds`` / ``n_steps`` / ``out_dir`` override the corresponding config
    fields. Raises on assumption violations and internal cross-check
    failures; softer verdicts land in the report's ``checks`` block.
    """
    if seeds is not None or n_steps is not None:
        from dataclasses import replace

        config = replace(
            config,
            seeds=tuple(seeds) if seeds is not None else config.seeds,
            n_steps=int(n_steps) if n_steps is not None else config.n_steps,
        )
    if not config.seeds:
        raise ValidationError("TD experiment needs a nonempty seed list")

    assumption_report = check_assumptions(config.mdp, config.policy, config.features, config.schedule)
    chain = induce_chain(config.mdp, config.policy)
    sys = build_system(chain, config.features, config.gamma)
    fps = solve_fixed_points(sys, config.features, chain.D, chain, config.gamma)
    lim = limit_projector(sys)
    gap = spectral_gap(sys.A)
    horizon = 200.0 / gap if np.isfinite(gap) else 1.0

    per_w0 = []
    ode_trajectories = []
    for w0 in config.ode_initial_conditions:
        w_lim = w_infinity(lim, fps, w0)
        w_end = ode_solution(sys, fps, w0, horizon)
        value_err = _d_norm(config.features.X @ w_end - fps.v_star, chain.mu)
        weight_err = float(np.linalg.norm(w_end - w_lim))
        in_set_resid = float(np.linalg.norm(sys.A @ w_lim + sys.b))
        per_w0.append(
            {
                "w0": w0,
                "w_limit": w_lim,
                "value_error_at_horizon": value_err,
                "weight_error_at_horizon": weight_err,
                "fixed_set_residual": in_set_resid,
            }
        )
        ode_trajectories.append(_ode_grid(sys, fps, chain.mu, config.features.X, w0, horizon))

    traces = run_seeds(config, config.seeds)
    per_seed = []
    for trace in traces:
        value_sup = float(np.abs(config.features.X @ trace.final_w - fps.v_star).max())
        per_seed.append(
            {
                "seed": trace.seed,
                "final_value_error_sup": value_sup,
                "final_value_error_d": float(trace.value_error_d[-1]),
                "final_mspbe": float(trace.mspbe[-1]),
                "final_dist_to_set": float(trace.dist_to_set[-1]),
                "max_weight_norm": trace.max_norm,
                "steps": int(trace.steps[-1]),
            }
        )
    finals = np.asarray([t.final_w for t in traces])
    spread = 0.0
    if len(traces) > 1:
        diff = finals[:, None, :] - finals[None, :, :]
        spread = float(np.sqrt((diff**2).sum(axis=2)).max())

    checks = {
        "assumptions_pass": assumption_report.all_passed,
        "fixed_point_routes_agree": True,  # solve_fixed_points raises otherwise
        "ode_value_converged": all(
            r["value_error_at_horizon"] <= ODE_CONVERGENCE_TOL for r in per_w0
        ),
        "ode_weight_converged": all(
            r["weight_error_at_horizon"] <= ODE_CONVERGENCE_TOL for r in per_w0
        ),
        "ode_limits_in_fixed_set": all(
            r["fixed_set_residual"] <= 1e-8 * (1.0 + float(np.linalg.norm(sys.b)))
            for r in per_w0
        ),
        "td_norm_bounded": all(p["max_weight_norm"] <= TD_NORM_BOUND for p in per_seed),
    }

    report = RunReport(
        config=config.raw,
        assumptions=assumption_report.to_json(),
        fixed_point={
            "feature_rank": config.features.rank,
            "feature_dim": config.features.d,
            "null_dim": fps.null_dim,
            "v_star": fps.v_star,
            "w_particular_norm": float(np.linalg.norm(fps.w_particular)),
            "mspbe_at_w_particular": mspbe(
                fps.w_particular, config.features, chain.D, chain, config.gamma
            ),
        },
        ode={
            "spectrum": [
                {"re": lam.real, "im": lam.imag, "multiplicity": mult}
                for lam, mult in lim.spectrum_report
            ],
            "a_inf_norm": float(np.linalg.norm(lim.A_inf, 2)),
            "spectral_gap": gap if np.isfinite(gap) else None,
            "horizon": horizon,
            "per_w0": per_w0,
        },
        td={
            "per_seed": per_seed,
            "median_final_value_error_sup": float(
                np.median([p["final_value_error_sup"] for p in per_seed])
            ),
            "median_final_mspbe": float(np.median([p["final_mspbe"] for p in per_seed])),
            "median_final_dist_to_set": float(
                np.median([p["final_dist_to_set"] for p in per_seed])
            ),
            "max_weight_norm": float(max(p["max_weight_norm"] for p in per_seed)),
            "final_weight_max_spread": spread,
        },
        checks=checks,
        outputs={},
    )

    if out_dir is None and config.outputs is not None:
        out_dir = config.outputs
    if out_dir is not None:
        emit_outputs(report, traces, ode_trajectories, out_dir)
    return report


def _d_norm(v: np.ndarray, mu: np.ndarray) -> float:
    return float(np.sqrt((v**2 * mu).sum()))


def _ode_grid(sys, fps, mu, X, w0, horizon):
    """Closed-form trajectory sampled on a uniform grid, with per-point diagnostics."""
    from .fixed_points import distance_to_fixed_set
    from .ode import matrix_exponential

    times = np.linspace(0.0, horizon, ODE_CSV_POINTS + 1)
    h = horizon / ODE_CSV_POINTS
    step = matrix_exponential(sys.A, h)
    z = np.asarray(w0, dtype=float) - fps.w_particular
    out = []
    for t in times:
        w = fps.w_particular + z
        out.append(
            {
                "t": float(t),
                "w": w.copy(),
                "dnorm_value_error": _d_norm(X @ w - fps.v_star, mu),
                "dist_W": distance_to_fixed_set(w, fps),
            }
        )
        z = step @ z
    return out


def emit_outputs(report: RunReport, traces, ode_trajectories, directory: str | Path) -> list[str]:
    """Write report.json plus one CSV per seed and per ODE initial condition."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        files: list[str] = []
        trace_names = []
        for trace in traces:
            name = f"trace_seed{trace.seed}.csv"
            _write_trace_csv(directory / name, trace)
            trace_names.append(name)
            files.append(name)
        ode_names = []
        for i, rows in enumerate(ode_trajectories):
            name = f"ode_trajectory_{i}.csv"
            _write_ode_csv(directory / name, rows)
            ode_names.append(name)
            files.append(name)
        report.outputs = {"traces": trace_names, "ode_trajectories": ode_names}
        (directory / "report.json").write_text(
            _json_text(report.to_json_dict()) + "\n", encoding="utf-8"
        )
        files.append("report.json")
        return files
    except OSError as exc:
        raise OSError(f"cannot write outputs under {directory}: {exc}") from exc


def _write_trace_csv(path: Path, trace: TdTrace) -> None:
    lines = ["step,dnorm_value_error,mspbe,dist_W,norm_w,norm_gamma_proj"]
    gamma_norm = np.linalg.norm(trace.gamma_proj, axis=1)
    for i in range(trace.n_checkpoints):
        lines.append(
            f"{int(trace.steps[i])},{fmt(trace.value_error_d[i])},{fmt(trace.mspbe[i])},"
            f"{fmt(trace.dist_to_set[i])},{fmt(trace.norm_w[i])},{fmt(gamma_norm[i])}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_ode_csv(path: Path, rows) -> None:
    d = rows[0]["w"].size
    header = "t," + ",".join(f"w{j}" for j in range(d)) + ",dnorm_value_error,dist_W"
    lines = [header]
    for row in rows:
        ws = ",".join(fmt(x) for x in row["w"])
        lines.append(f"{fmt(row['t'])},{ws},{fmt(row['dnorm_value_error'])},{fmt(row['dist_W'])}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
