"""JSON experiment configs with named MDP/feature generators.

A config names its MDP, policy, and features either inline (explicit tables)
or through small generator expressions such as ``cycle(4)``,
``random_mdp(6, 2, 13)``, ``duplicate_columns(tabular, 1)``, or
``zero_pad(random_rank(3, 8, 7), 2)``. Everything is validated eagerly so a
bad config fails at parse time with a field-level message.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import generators as gen
from .errors import InvalidStochastic, ParseError, ValidationError
from .linalg import FeatureMap
from .markov import Mdp, Policy
from .td import LearningRateSchedule

_CALL_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$", re.S)


def _split_args(argstr: str) -> list[str]:
    """Split a generator argument list on top-level commas."""
    args, depth, cur = [], 0, []
    for ch in argstr:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ParseError(f"unbalanced parentheses in {argstr!r}")
        if ch == "," and depth == 0:
            args.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise ParseError(f"unbalanced parentheses in {argstr!r}")
    if cur or args:
        args.append("".join(cur))
    return [a.strip() for a in args]


def _parse_call(spec: str) -> tuple[str, list[str]]:
    m = _CALL_RE.match(spec)
    if not m:
        raise ParseError(f"cannot parse generator expression {spec!r}")
    name, argstr = m.group(1), m.group(2)
    return name, _split_args(argstr) if argstr is not None and argstr.strip() else []


def _int_arg(name: str, args: list[str], i: int) -> int:
    try:
        return int(args[i])
    except (IndexError, ValueError) as exc:
        raise ParseError(f"{name}: argument {i} must be an integer, got {args[i:i+1]}") from exc


def _resolve_mdp(spec, gamma: float) -> Mdp:
    if isinstance(spec, dict):
        try:
            return Mdp(
                transition=np.asarray(spec["transition"], dtype=float),
                reward=np.asarray(spec["reward"], dtype=float),
                discount=gamma,
            )
        except KeyError as exc:
            raise ValidationError(f"inline mdp is missing field {exc}") from exc
        except InvalidStochastic as exc:
            raise ValidationError(f"mdp: {exc}") from exc
    name, args = _parse_call(str(spec))
    if name == "cycle":
        return gen.cycle(_int_arg(name, args, 0), gamma)
    if name == "random_walk":
        return gen.random_walk(_int_arg(name, args, 0), gamma)
    if name == "random_mdp":
        return gen.random_mdp(
            _int_arg(name, args, 0), _int_arg(name, args, 1), _int_arg(name, args, 2), gamma
        )
    raise ParseError(f"unknown mdp generator {name!r}")


def _resolve_policy(spec, mdp: Mdp) -> Policy:
    if isinstance(spec, dict):
        try:
            policy = Policy(probs=np.asarray(spec["probs"], dtype=float))
        except KeyError as exc:
            raise ValidationError(f"inline policy is missing field {exc}") from exc
        except InvalidStochastic as exc:
            raise ValidationError(f"policy: {exc}") from exc
        if policy.probs.shape != (mdp.n_states, mdp.n_actions):
            raise ValidationError(
                f"policy table has shape {policy.probs.shape}, "
                f"expected ({mdp.n_states}, {mdp.n_actions})"
            )
        return policy
    name, args = _parse_call(str(spec))
    if name == "uniform":
        return gen.uniform_policy(mdp)
    if name == "random":
        return gen.random_policy(mdp, _int_arg(name, args, 0))
    raise ParseError(f"unknown policy generator {name!r}")


def _resolve_features(spec, n_states: int) -> FeatureMap:
    if isinstance(spec, dict):
        try:
            X = np.asarray(spec["matrix"], dtype=float)
        except KeyError as exc:
            raise ValidationError(f"inline features are missing field {exc}") from exc
        if X.ndim != 2 or X.shape[0] != n_states:
            raise ValidationError(
                f"feature matrix has shape {X.shape}, expected ({n_states}, d)"
            )
        return FeatureMap.from_matrix(X)
    name, args = _parse_call(str(spec))
    if name == "tabular":
        return gen.tabular_features(n_states)
    if name == "duplicate_columns":
        if len(args) != 2:
            raise ParseError("duplicate_columns takes (base, k)")
        return gen.duplicate_columns(_resolve_features(args[0], n_states), _int_arg(name, args, 1))
    if name == "zero_pad":
        if len(args) != 2:
            raise ParseError("zero_pad takes (base, k)")
        return gen.zero_pad(_resolve_features(args[0], n_states), _int_arg(name, args, 1))
    if name == "random_rank":
        if len(args) != 3:
            raise ParseError("random_rank takes (rank, d, seed)")
        return gen.random_rank_features(
            n_states, _int_arg(name, args, 0), _int_arg(name, args, 1), _int_arg(name, args, 2)
        )
    if name == "zero":
        return gen.zero_features(n_states, _int_arg(name, args, 0))
    raise ParseError(f"unknown feature generator {name!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """A parsed, fully resolved experiment description."""

    raw: dict
    mdp: Mdp
    policy: Policy
    features: FeatureMap
    gamma: float
    schedule: LearningRateSchedule
    n_steps: int
    seeds: tuple[int, ...]
    checkpoint_every: int
    dense_from: int | None
    w_init: np.ndarray
    ode_initial_conditions: tuple[np.ndarray, ...]
    outputs: str | None


def resolve_config(data: dict) -> ExperimentConfig:
    """Validate a loaded config dict and build all referenced objects."""
    if not isinstance(data, dict):
        raise ValidationError("config root must be a JSON object")
    for field in ("mdp", "gamma"):
        if field not in data:
            raise ValidationError(f"config is missing required field {field!r}")
    gamma = float(data["gamma"])
    if not 0.0 <= gamma < 1.0:
        raise ValidationError(f"gamma must lie in [0, 1), got {gamma}")

    mdp = _resolve_mdp(data["mdp"], gamma)
    policy = _resolve_policy(data.get("policy", "uniform"), mdp)
    features = _resolve_features(data.get("features", "tabular"), mdp.n_states)

    sched_raw = data.get("schedule", {"alpha0": 0.5, "p": 0.75})
    try:
        schedule = LearningRateSchedule(
            alpha0=float(sched_raw.get("alpha0", 0.5)),
            p=float(sched_raw.get("p", 0.75)),
            kind=str(sched_raw.get("kind", "power")),
        )
    except (ValueError, AttributeError) as exc:
        raise ValidationError(f"schedule: {exc}") from exc

    n_steps = int(data.get("n_steps", 10_000))
    if n_steps < 1:
        raise ValidationError("n_steps must be >= 1")
    seeds = tuple(int(s) for s in data.get("seeds", []))
    if len(set(seeds)) != len(seeds):
        raise ValidationError("seeds must be distinct")
    checkpoint_every = int(data.get("checkpoint_every", 1000))
    if checkpoint_every < 1:
        raise ValidationError("checkpoint_every must be >= 1")
    dense_from = data.get("dense_from")
    dense_from = int(dense_from) if dense_from is not None else None

    d = features.d
    w_init = np.asarray(data.get("w_init", np.zeros(d)), dtype=float)
    if w_init.shape != (d,):
        raise ValidationError(f"w_init has shape {w_init.shape}, expected ({d},)")

    raw_w0s = data.get("ode_initial_conditions")
    if raw_w0s is None:
        w0s = (np.zeros(d), np.ones(d))
    else:
        w0s = tuple(np.asarray(v, dtype=float) for v in raw_w0s)
        for i, v in enumerate(w0s):
            if v.shape != (d,):
                raise ValidationError(
                    f"ode_initial_conditions[{i}] has shape {v.shape}, expected ({d},)"
                )

    return ExperimentConfig(
        raw=data,
        mdp=mdp,
        policy=policy,
        features=features,
        gamma=gamma,
        schedule=schedule,
        n_steps=n_steps,
        seeds=seeds,
        checkpoint_every=checkpoint_every,
        dense_from=dense_from,
        w_init=w_init,
        ode_initial_conditions=w0s,
        outputs=data.get("outputs"),
    )


def parse_config(path: str | Path) -> ExperimentConfig:
    """Load and validate a JSON experiment config from disk."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON in {path}: {exc}") from exc
    return resolve_config(data)
