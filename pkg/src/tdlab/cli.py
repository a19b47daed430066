"""Command line entry point: ``tdlab run | check | fixpoints``.

Exit codes: 0 all checks pass, 1 config/validation problem, 2 a numerical
assertion or assumption failed, 3 output I/O failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import parse_config
from .errors import (
    AssumptionViolation,
    InconsistentSystem,
    NonFiniteIterate,
    NotIrreducible,
    ParseError,
    TdlabError,
    ValidationError,
    ZeroEigenvalueNotSemisimple,
)
from .fixed_points import build_system, solve_fixed_points
from .harness import _json_text, run_experiment
from .markov import induce_chain
from .sa_checks import check_assumptions

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_ASSERTION = 2
EXIT_IO = 3


def _parse_seeds(text: str) -> tuple[int, ...]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _error_json(exc: Exception) -> str:
    return _json_text({"error": type(exc).__name__, "message": str(exc)})


def cmd_run(args) -> int:
    config = parse_config(args.config)
    seeds = _parse_seeds(args.seeds) if args.seeds else None
    report = run_experiment(
        config,
        out_dir=args.out,
        seeds=seeds,
        n_steps=args.steps,
    )
    print(_json_text(report.to_json_dict()))
    return EXIT_OK if report.all_checks_pass else EXIT_ASSERTION


def cmd_check(args) -> int:
    config = parse_config(args.config)
    report = check_assumptions(config.mdp, config.policy, config.features, config.schedule)
    print(_json_text(report.to_json()))
    return EXIT_OK if report.all_passed else EXIT_ASSERTION


def cmd_fixpoints(args) -> int:
    config = parse_config(args.config)
    chain = induce_chain(config.mdp, config.policy)
    sys_ = build_system(chain, config.features, config.gamma)
    fps = solve_fixed_points(sys_, config.features, chain.D, chain, config.gamma)
    print(
        _json_text(
            {
                "feature_rank": config.features.rank,
                "feature_dim": config.features.d,
                "null_dim": fps.null_dim,
                "w_particular": fps.w_particular,
                "w_particular_norm": float(np.linalg.norm(fps.w_particular)),
                "v_star": fps.v_star,
            }
        )
    )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="tdlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the full experiment pipeline")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="output directory (overrides config)")
    p_run.add_argument("--seeds", default=None, help="e.g. 0..19 or 0,3,7 (overrides config)")
    p_run.add_argument("--steps", type=int, default=None, help="override n_steps")
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="evaluate the assumption report only")
    p_check.add_argument("--config", required=True)
    p_check.set_defaults(func=cmd_check)

    p_fix = sub.add_parser("fixpoints", help="print the TD fixed-point set summary")
    p_fix.add_argument("--config", required=True)
    p_fix.set_defaults(func=cmd_fixpoints)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(_error_json(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except (
        AssumptionViolation,
        InconsistentSystem,
        NonFiniteIterate,
        NotIrreducible,
        ZeroEigenvalueNotSemisimple,
        ArithmeticError,
    ) as exc:
        print(_error_json(exc), file=sys.stderr)
        return EXIT_ASSERTION
    except OSError as exc:
        print(_error_json(exc), file=sys.stderr)
        return EXIT_IO
    except TdlabError as exc:
        print(_error_json(exc), file=sys.stderr)
        return EXIT_ASSERTION


if __name__ == "__main__":
    raise SystemExit(main())
