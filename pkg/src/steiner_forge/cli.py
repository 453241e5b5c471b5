"""Command-line front end.

Exit codes: 0 success, 1 domain failure (no matching found, count refused,
bound violated, ...), 2 usage error.  Every output carries provenance: ``#``
comment lines for text and CSV, a ``provenance`` key for JSON.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .harness import ConfigError, default_jobs, dumps, provenance, run_config


class DomainFailure(Exception):
    def __init__(self, message: str, payload: dict | None = None):
        super().__init__(message)
        self.payload = payload


# -- output helpers -----------------------------------------------------------------------


def _params(args: argparse.Namespace) -> dict:
    skip = {"func", "out", "jobs", "format", "command_path"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _comment_header(args: argparse.Namespace) -> str:
    prov = provenance(args.command_path, _params(args), getattr(args, "seed", None))
    return "".join(f"# {k}: {json.dumps(v, sort_keys=True)}\n" for k, v in prov.items())


def _write(args: argparse.Namespace, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit(args: argparse.Namespace, result: dict, rows: list[dict] | None = None, columns: Sequence[str] | None = None) -> None:
    """JSON report, or CSV of ``rows`` (falling back to a one-row table)."""
    if args.format == "csv":
        if rows is None:
            rows = [{k: v for k, v in result.items() if not isinstance(v, (list, dict))}]
        if columns is None:
            columns = list(rows[0]) if rows else []
        buf = io.StringIO()
        buf.write(_comment_header(args))
        w = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        _write(args, buf.getvalue())
    else:
        doc = {"provenance": provenance(args.command_path, _params(args), getattr(args, "seed", None))}
        doc.update(result)
        _write(args, dumps(doc))


def _read_system(path: str):
    from .design import load

    return load(Path(path).read_text())


# -- subcommands --------------------------------------------------------------------------


def cmd_generate(args):
    from .completion import generate_sts
    from .design import encode, to_json

    S = generate_sts(args.n, args.seed, args.prefix_fraction)
    if args.format == "json":
        doc = json.loads(to_json(S))
        doc["provenance"] = provenance("generate", _params(args), args.seed)
        _write(args, dumps(doc))
    else:
        _write(args, _comment_header(args) + encode(S))


def cmd_remove_process(args):
    from .design import PartialSystem, encode
    from .removal import run_trp, trajectory, trajectory_csv

    start = _read_system(args.input) if args.input else PartialSystem(args.n)
    h = int(args.track.split("=", 1)[1]) if args.track else 1
    N = start.n * (start.n - 1) // 6
    steps = args.steps if args.steps is not None else N - start.m
    if steps > N - start.m:
        raise SystemExit(_usage(f"--steps {steps} exceeds remaining capacity {N - start.m}"))
    recs = trajectory(start, steps, args.seed, h=h)
    if args.system_out:
        out = run_trp(start, steps, args.seed)
        text = _comment_header(args)
        text += encode(out.system) if out.system is not None else "# frozen before the requested step count\n"
        Path(args.system_out).write_text(text)
    if args.format == "json":
        _emit(args, {"frozen": recs[-1].step < steps, "records": [r.__dict__ for r in recs]})
    else:
        _write(args, _comment_header(args) + trajectory_csv(recs))


def cmd_check_quasirandom(args):
    from .design import leave_graph
    from .quasirandom import check_quasirandom

    S = _read_system(args.input)
    if args.prefix is not None:
        S = S.prefix(args.prefix)
    rep = check_quasirandom(leave_graph(S), args.eps, args.h, args.mode, args.samples, args.seed)
    _emit(args, rep.to_dict())


def cmd_count_completions(args):
    from .completion import count_completions

    S = _read_system(args.input)
    _emit(args, {"n": S.n, "m": S.m, "completions": count_completions(S)})


def cmd_count_pm(args):
    from .matching import count_perfect_matchings

    S = _read_system(args.input)
    _emit(args, {"n": S.n, "perfect_matchings": count_perfect_matchings(S)})


def cmd_find_pm(args):
    from .absorbing import PipelineFailure, PipelineParams, find_pm_via_absorbers
    from .matching import find_perfect_matching, is_perfect_matching

    S = _read_system(args.input)
    log: dict[str, Any] = {"method": args.method}
    M = None
    path = None
    if args.method == "absorber":
        params = PipelineParams(delta=args.delta, beta=args.beta, z_size=args.z_size, seed=args.seed)
        try:
            res = find_pm_via_absorbers(S, params)
            M, path = res.matching, "absorber"
            log["pipeline"] = res.log
            if args.structure_out:
                doc = res.to_dict()
                doc["provenance"] = provenance("find-pm", _params(args), args.seed)
                Path(args.structure_out).write_text(dumps(doc))
        except PipelineFailure as exc:
            log["failure"] = {"stage": exc.stage, "log": exc.log}
            if args.fallback != "exact":
                raise DomainFailure(f"absorber pipeline failed at stage {exc.stage!r}", log) from None
    if M is None:
        M = find_perfect_matching(S, args.seed)
        path = "exact"
        if M is None:
            raise DomainFailure("system has no perfect matching", log)
    assert is_perfect_matching(S, list(M.triples))
    log["path"] = path
    if args.format == "json":
        _emit(args, {"path": path, "matching": [list(t) for t in M.triples], "log": log})
    else:
        lines = [f"# path: {path}\n"] + [f"{a} {b} {c}\n" for a, b, c in M.triples]
        _write(args, _comment_header(args) + "".join(lines))


def cmd_bound(args):
    from . import bounds

    if args.kind == "pm":
        res = {"n": args.n, "log_bound": bounds.pm_log_bound(args.n), "flag": bounds.NOMINAL}
    elif args.kind == "integral":
        res = bounds.integral_identity(args.c)
    elif args.kind == "completions":
        res = bounds.completions_log_bound(args.n, args.alpha, args.ordered)
        res.update(n=args.n, alpha=args.alpha)
    else:
        res = {"n": args.n, "log_bound": bounds.latin_transversal_log_bound(args.n), "flag": bounds.NOMINAL}
    _emit(args, res)


def cmd_latin(args):
    from .errors import ParseError
    from .latin import count_transversals, encode_latin, generate_latin, parse_latin, validate_latin

    if args.latin_cmd == "count-transversals":
        L = parse_latin(Path(args.input).read_text())
        if not validate_latin(L):
            raise ParseError(1, "not a Latin square")
        _emit(args, {"n": L.n, "transversals": count_transversals(L)})
    else:
        L = generate_latin(args.n, args.seed)
        if args.format == "json":
            _emit(args, {"n": L.n, "cells": L.cells})
        else:
            _write(args, _comment_header(args) + encode_latin(L))


def cmd_concentration(args):
    from . import concentration as C

    if args.conc_cmd == "bernstein":
        t = C.bernstein_tail_experiment(args.f, args.n, args.p, args.samples, args.t, args.seed)
        d = t.to_dict()
        _emit(args, d, rows=d["rows"], columns=["t", "empirical", "bound"])
        if t.violations:
            raise DomainFailure(f"{t.violations} bound violations", None)
    elif args.conc_cmd == "freedman":
        paths = C.degree_martingale_paths(args.n, args.runs, args.seed, args.fraction)
        rep = C.freedman_check(paths)
        d = rep.to_dict()
        _emit(args, d, rows=d["rows"], columns=["sign", "v", "t", "empirical", "bound", "violation"])
        if rep.violations:
            raise DomainFailure(f"{rep.violations} bound violations", None)
    else:
        S = _read_system(args.input)
        rep = C.random_order_typicality(S, args.alpha, args.eps, args.h, args.trials, args.seed, args.stride)
        _emit(args, rep.to_dict())


def _coupling_chunk(job):
    from .design import PartialSystem
    from .removal import coupling_experiment, window_property

    n, alpha, window, seeds = job
    return coupling_experiment(PartialSystem(n), alpha, window_property(range(window)), seeds)


def cmd_coupling(args):
    from concurrent.futures import ProcessPoolExecutor

    from .removal import wilson_interval

    seeds = list(range(args.seed, args.seed + args.runs))
    window = args.window if args.window is not None else args.n // 3
    jobs = max(1, args.jobs)
    chunks = [seeds[i::jobs] for i in range(jobs) if seeds[i::jobs]]
    work = [(args.n, args.alpha, window, c) for c in chunks]
    if len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_coupling_chunk, work))
    else:
        parts = [_coupling_chunk(w) for w in work]
    runs = sum(p.runs for p in parts)
    tf = sum(p.trp_failures for p in parts)
    bf = sum(p.bite_failures for p in parts)
    _emit(args, {
        "n": args.n, "alpha": args.alpha, "window": window, "runs": runs,
        "trp_failures": tf, "bite_failures": bf,
        "trp_fail_rate": tf / runs, "bite_fail_rate": bf / runs,
        "trp_frozen": sum(p.trp_frozen for p in parts),
        "trp_ci": list(wilson_interval(tf, runs)), "bite_ci": list(wilson_interval(bf, runs)),
        "trp_steps": parts[0].trp_steps, "p": parts[0].p,
    })


def cmd_enumerate(args):
    from .completion import enumerate_systems

    systems = enumerate_systems(args.n)
    if args.catalog:
        doc = {
            "provenance": provenance("enumerate", _params(args)),
            "n": args.n,
            "systems": [[list(t) for t in sorted(S.triples)] for S in systems],
        }
        Path(args.catalog).write_text(dumps(doc))
    _emit(args, {"n": args.n, "count": len(systems)})


def cmd_run_config(args):
    summary = run_config(args.config, jobs=args.jobs)
    _emit(args, {"experiment": summary["experiment"], "seeds": summary["seeds"], "results": len(summary["results"])})


# -- parser -------------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(_usage(f"{self.prog}: error: {message}"))


def _usage(message: str) -> int:
    print(message, file=sys.stderr)
    return 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--jobs", type=int, default=default_jobs(), help="worker processes (env STEINER_FORGE_JOBS)")

    text = argparse.ArgumentParser(add_help=False)
    text.add_argument("--format", choices=["text", "json"], default="text")
    text.add_argument("--out", help="output file (default: stdout)")
    text.add_argument("--jobs", type=int, default=default_jobs())

    p = _Parser(prog="steiner-forge", description="Random Steiner triple systems and Latin squares.")
    p.add_argument("--version", action="version", version=f"steiner-forge {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("generate", parents=[text], help="random STS(n): removal prefix + hill-climb")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--prefix-fraction", type=float, default=0.5)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("remove-process", help="triangle removal trajectory (CSV by default)")
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.add_argument("--out")
    s.add_argument("--jobs", type=int, default=default_jobs())
    s.add_argument("--n", type=int)
    s.add_argument("--in", dest="input")
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--track", help="h=<k>: track up to k-set neighbourhoods (k <= 2)")
    s.add_argument("--system-out", help="write the resulting partial system here")
    s.set_defaults(func=cmd_remove_process)

    s = sub.add_parser("check-quasirandom", parents=[common])
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--h", type=int, default=2)
    s.add_argument("--mode", choices=["exhaustive", "sampled"], default="exhaustive")
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--prefix", type=int, help="check the leave graph of the first i triples")
    s.set_defaults(func=cmd_check_quasirandom)

    s = sub.add_parser("count-completions", parents=[common])
    s.add_argument("--in", dest="input", required=True)
    s.set_defaults(func=cmd_count_completions)

    s = sub.add_parser("count-pm", parents=[common])
    s.add_argument("--in", dest="input", required=True)
    s.set_defaults(func=cmd_count_pm)

    s = sub.add_parser("find-pm", parents=[text])
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--method", choices=["absorber", "exact"], default="absorber")
    s.add_argument("--fallback", choices=["exact", "none"], default="none")
    s.add_argument("--delta", type=float, default=0.15)
    s.add_argument("--beta", type=float, default=0.5)
    s.add_argument("--z-size", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--structure-out", help="JSON dump of template, absorbers and stage log")
    s.set_defaults(func=cmd_find_pm)

    s = sub.add_parser("bound", help="nominal counting bounds and the integral identity")
    bsub = s.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    b = bsub.add_parser("pm", parents=[common])
    b.add_argument("--n", type=int, required=True)
    b = bsub.add_parser("integral", parents=[common])
    b.add_argument("--c", type=float, required=True)
    b = bsub.add_parser("completions", parents=[common])
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--alpha", type=float, required=True)
    b.add_argument("--ordered", action="store_true")
    b = bsub.add_parser("latin", parents=[common])
    b.add_argument("--n", type=int, required=True)
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("latin")
    lsub = s.add_subparsers(dest="latin_cmd", required=True, parser_class=_Parser)
    lc = lsub.add_parser("count-transversals", parents=[common])
    lc.add_argument("--in", dest="input", required=True)
    lg = lsub.add_parser("generate", parents=[text])
    lg.add_argument("--n", type=int, required=True)
    lg.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_latin)

    s = sub.add_parser("concentration")
    csub = s.add_subparsers(dest="conc_cmd", required=True, parser_class=_Parser)
    cb = csub.add_parser("bernstein", parents=[common])
    cb.add_argument("--f", choices=["coordinate-sum", "edge-count", "isolated-triples"], required=True)
    cb.add_argument("--n", type=int, required=True)
    cb.add_argument("--p", type=float, required=True)
    cb.add_argument("--samples", type=int, default=10_000)
    cb.add_argument("--t", type=float, nargs="+", help="tail thresholds (default: 0..6 sd)")
    cb.add_argument("--seed", type=int, default=0)
    cf = csub.add_parser("freedman", parents=[common])
    cf.add_argument("--n", type=int, default=99)
    cf.add_argument("--runs", type=int, default=200)
    cf.add_argument("--fraction", type=float, default=0.8)
    cf.add_argument("--seed", type=int, default=0)
    ct = csub.add_parser("typicality", parents=[common])
    ct.add_argument("--in", dest="input", required=True)
    ct.add_argument("--alpha", type=float, default=0.3)
    ct.add_argument("--eps", type=float, default=0.3)
    ct.add_argument("--h", type=int, default=2)
    ct.add_argument("--trials", type=int, default=200)
    ct.add_argument("--stride", type=int, default=1)
    ct.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_concentration)

    s = sub.add_parser("coupling", parents=[common], help="removal process vs binomial bite on a window property")
    s.add_argument("--n", type=int, default=99)
    s.add_argument("--alpha", type=float, default=0.2)
    s.add_argument("--window", type=int, help="window size (default n // 3)")
    s.add_argument("--runs", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0, help="first seed")
    s.set_defaults(func=cmd_coupling)

    s = sub.add_parser("enumerate", parents=[common], help="all labelled STS(n), n <= 9")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--catalog", help="write every system to this JSON file")
    s.set_defaults(func=cmd_enumerate)

    s = sub.add_parser("run-config", parents=[common], help="batch experiment from a JSON config")
    s.add_argument("config")
    s.set_defaults(func=cmd_run_config)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    from .errors import ParseError, TooLarge

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    args.command_path = " ".join(
        x for x in (args.command, getattr(args, "kind", None), getattr(args, "latin_cmd", None),
                    getattr(args, "conc_cmd", None)) if x
    )
    if args.command == "remove-process" and args.n is None and args.input is None:
        return _usage("remove-process: one of --n or --in is required")
    try:
        args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except DomainFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.payload:
            print(json.dumps(exc.payload, sort_keys=True), file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error at {exc.pointer or '/'}: {exc.message}", file=sys.stderr)
        return 2
    except (ParseError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except (TooLarge, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
