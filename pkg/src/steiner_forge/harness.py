"""Batch experiments from JSON configs, with per-seed result files and a
deterministic merged summary.

Config::

    {"experiment": "find-pm", "params": {"n": 99}, "seeds": {"start": 0, "count": 4},
     "out_dir": "runs/pm"}

``seeds`` may also be an explicit list.  Each seed's result goes to
``<out_dir>/<experiment>-seed<seed>.json``; ``summary.json`` holds every result
sorted by seed.  Neither file carries timestamps or host data, so re-running
a config reproduces them byte for byte.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable

import jsonschema

from . import __version__
from .rng import RNG_VERSION

JOBS_ENV = "STEINER_FORGE_JOBS"


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def provenance(command: str, params: dict, seed: int | None = None) -> dict:
    return {
        "tool": "steiner-forge",
        "version": __version__,
        "rng": RNG_VERSION,
        "command": command,
        "params": params,
        "seed": seed,
    }


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# -- experiments --------------------------------------------------------------------------
# Each takes (params, seed) and returns a JSON-ready dict.


def _exp_generate(params: dict, seed: int) -> dict:
    from .completion import generate_sts
    from .design import validate

    S = generate_sts(params["n"], seed, params.get("prefix_fraction", 0.5))
    return {"n": S.n, "m": S.m, "status": validate(S).status.value, "triples": [list(t) for t in S.triples]}


def _exp_trajectory(params: dict, seed: int) -> dict:
    from .design import PartialSystem
    from .removal import trajectory

    n = params["n"]
    N = n * (n - 1) // 6
    steps = params.get("steps", int(params.get("fraction", 0.8) * N))
    recs = trajectory(PartialSystem(n), steps, seed, h=params.get("h", 1))
    return {
        "steps": recs[-1].step,
        "frozen": recs[-1].step < steps,
        "max_deg_dev": max(r.deg_dev for r in recs),
        "max_dev": max(r.max_dev for r in recs),
        "final_Q": recs[-1].Q,
    }


def _exp_find_pm(params: dict, seed: int) -> dict:
    from .absorbing import PipelineFailure, PipelineParams, find_pm_via_absorbers
    from .completion import generate_sts
    from .matching import find_perfect_matching, is_perfect_matching

    S = generate_sts(params["n"], seed)
    keys = {"delta", "beta", "z_size", "reserve", "template_kind", "multiplier", "node_budget", "attempts"}
    pp = PipelineParams(seed=seed, **{k: v for k, v in params.items() if k in keys})
    try:
        res = find_pm_via_absorbers(S, pp)
        triples, path, stage = res.matching.triples, "absorber", None
    except PipelineFailure as exc:
        stage = exc.stage
        M = find_perfect_matching(S, seed) if params.get("fallback", "exact") == "exact" else None
        triples, path = (M.triples, "exact") if M else ((), None)
    return {"path": path, "failure_stage": stage, "valid": bool(triples) and is_perfect_matching(S, list(triples))}


def _exp_count_pm(params: dict, seed: int) -> dict:
    from .completion import generate_sts
    from .matching import count_perfect_matchings

    S = generate_sts(params["n"], seed, params.get("prefix_fraction", 0.5))
    return {"n": S.n, "count": count_perfect_matchings(S)}


def _exp_bernstein(params: dict, seed: int) -> dict:
    from .concentration import bernstein_tail_experiment

    t = bernstein_tail_experiment(params["f"], params["n"], params["p"], params.get("samples", 10_000),
                                  params.get("t_grid"), seed)
    return t.to_dict()


def _exp_typicality(params: dict, seed: int) -> dict:
    from .completion import generate_sts
    from .concentration import random_order_typicality

    S = generate_sts(params["n"], seed)
    r = random_order_typicality(S, params.get("alpha", 0.3), params.get("eps", 0.3), params.get("h", 2),
                                params.get("trials", 200), seed, params.get("stride", 1))
    return r.to_dict()


def _exp_coupling(params: dict, seed: int) -> dict:
    from .design import PartialSystem
    from .removal import coupling_experiment, window_property

    n = params["n"]
    runs = params.get("runs", 1000)
    prop = window_property(range(params.get("window", n // 3)))
    base = seed * runs
    return coupling_experiment(PartialSystem(n), params.get("alpha", 0.2), prop, range(base, base + runs)).to_dict()


def _exp_latin(params: dict, seed: int) -> dict:
    from .latin import count_transversals, generate_latin, validate_latin

    L = generate_latin(params["n"], seed)
    out = {"n": L.n, "valid": validate_latin(L), "cells": L.cells}
    if L.n <= params.get("count_limit", 9):
        out["transversals"] = count_transversals(L)
    return out


EXPERIMENTS: dict[str, Callable[[dict, int], dict]] = {
    "generate": _exp_generate,
    "trajectory": _exp_trajectory,
    "find-pm": _exp_find_pm,
    "count-pm": _exp_count_pm,
    "bernstein": _exp_bernstein,
    "typicality": _exp_typicality,
    "coupling": _exp_coupling,
    "latin": _exp_latin,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["experiment", "params", "seeds", "out_dir"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": sorted(EXPERIMENTS)},
        "params": {"type": "object"},
        "seeds": {
            "oneOf": [
                {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
                {
                    "type": "object",
                    "required": ["start", "count"],
                    "additionalProperties": False,
                    "properties": {
                        "start": {"type": "integer", "minimum": 0},
                        "count": {"type": "integer", "minimum": 1},
                    },
                },
            ]
        },
        "out_dir": {"type": "string", "minLength": 1},
    },
}

SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["provenance", "experiment", "params", "seeds", "results"],
    "properties": {
        "provenance": {"type": "object"},
        "experiment": {"type": "string"},
        "params": {"type": "object"},
        "seeds": {"type": "array", "items": {"type": "integer"}},
        "results": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["seed", "file", "result"],
                "properties": {
                    "seed": {"type": "integer"},
                    "file": {"type": "string"},
                    "result": {"type": "object"},
                },
            },
        },
    },
}


class ConfigError(ValueError):
    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        self.message = message
        super().__init__(f"{pointer}: {message}")


def _pointer(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required" and isinstance(err.instance, dict):
        missing = [k for k in err.validator_value if k not in err.instance]
        if missing:
            parts.append(missing[0])
    return "/" + "/".join(parts) if parts else ""


def validate_config(config: Any) -> dict:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        err = errors[0]
        raise ConfigError(_pointer(err), err.message)
    return config


def expand_seeds(seeds: list[int] | dict) -> list[int]:
    if isinstance(seeds, dict):
        return list(range(seeds["start"], seeds["start"] + seeds["count"]))
    return sorted(set(seeds))


def _run_one(job: tuple[str, dict, int]) -> tuple[int, dict]:
    name, params, seed = job
    return seed, EXPERIMENTS[name](params, seed)


def run_config(config: str | os.PathLike | dict, jobs: int | None = None) -> dict:
    """Run every seed of a config and write per-seed files plus summary.json.

    Returns the summary.  Raises :class:`ConfigError` with a JSON pointer on
    schema violations.
    """
    if not isinstance(config, dict):
        try:
            config = json.loads(Path(config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON: {exc}") from None
    validate_config(config)
    name, params = config["experiment"], config["params"]
    seeds = expand_seeds(config["seeds"])
    out = Path(config["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    jobs = jobs or default_jobs()
    work = [(name, params, s) for s in seeds]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(_run_one, work))
    else:
        results = dict(map(_run_one, work))
    entries = []
    for s in seeds:
        fname = f"{name}-seed{s}.json"
        (out / fname).write_text(dumps({"provenance": provenance(name, params, s), "result": results[s]}))
        entries.append({"seed": s, "file": fname, "result": results[s]})
    summary = {
        "provenance": provenance(name, params),
        "experiment": name,
        "params": params,
        "seeds": seeds,
        "results": entries,
    }
    (out / "summary.json").write_text(dumps(summary))
    return summary
