"""Command line: ``viterbo {capacity,volume,simulate,verify,figures}``.

Exit codes: 0 all rows ok, 1 some row not ok, 2 bad input, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np
import yaml

from . import pl_flow
from .errors import DegenerateStartError, NumericFailure, RunawayError
from .verify import FIGURE_KINDS, ConfigError, body_report, emit_figure_data, format_rows, load_config

EXIT_OK, EXIT_NOT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


def _g(x: float) -> str:
    return f"{x:.12g}"


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_verify(args) -> int:
    rows = [body_report(b, samples=args.samples, seed=args.seed, workers=args.workers) for b in load_config(args.config)]
    _emit(format_rows(rows, args.format), args.out)
    return EXIT_OK if all(r.ok for r in rows) else EXIT_NOT_OK


def _columns(rows, keys, fmt, out):
    if fmt == "structured":
        _emit(json.dumps([{k: r[k] for k in keys} for r in rows], indent=2), out)
    else:
        lines = ["\t".join(keys)] + ["\t".join(_g(r[k]) if isinstance(r[k], float) else str(r[k]) for k in keys) for r in rows]
        _emit("\n".join(lines), out)


def cmd_capacity(args) -> int:
    rows = []
    for b in load_config(args.config):
        r = body_report(b, samples=args.samples, seed=args.seed, workers=args.workers)
        rows.append({"body": r.body_label, "n": r.n, "capacity": r.capacity, "tag": r.capacity_tag})
    _columns(rows, ["body", "n", "capacity", "tag"], args.format, args.out)
    return EXIT_OK


def cmd_volume(args) -> int:
    rows = []
    for b in load_config(args.config):
        r = body_report(b, samples=args.samples, seed=args.seed, workers=args.workers)
        rows.append({"body": r.body_label, "n": r.n, "volume": r.volume, "std_error": r.volume_std_error, "method": r.volume_method})
    _columns(rows, ["body", "n", "volume", "std_error", "method"], args.format, args.out)
    return EXIT_OK


def _start_from(doc) -> pl_flow.PhasePoint:
    start = doc.get("start", "one-cycle")
    if start == "one-cycle":
        return pl_flow.one_cycle_minimal().start
    if start == "explicit":
        return pl_flow.explicit_nd_start(int(doc.get("dimension", 2)))
    if isinstance(start, dict) and "p" in start and "q" in start:
        return pl_flow.PhasePoint(start["p"], start["q"])
    raise ConfigError("start must be 'one-cycle', 'explicit' or a mapping with p and q")


def cmd_simulate(args) -> int:
    try:
        doc = yaml.safe_load(open(args.config, encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read {args.config}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("simulate config must be a mapping")
    x0 = _start_from(doc)
    traj = pl_flow.simulate(x0, max_events=int(doc.get("max_events", 10_000)), closure_tol=args.tol)
    summary = {
        "n": x0.n,
        "energy": traj.energy,
        "closed": traj.closed,
        "events": len(traj.events),
        "period": traj.period if traj.closed else None,
        "action": traj.action if traj.closed else None,
        "cycles": traj.cycles if traj.closed else None,
    }
    if args.format == "structured":
        summary["event_list"] = [
            {"t": ev.time, "kind": ev.kind, "indices": list(ev.indices), "p": ev.point.p.tolist(), "q": ev.point.q.tolist()}
            for ev in traj.events
        ]
        _emit(json.dumps(summary, indent=2), args.out)
    else:
        head = "\n".join(f"# {k}: {_g(v) if isinstance(v, float) else v}" for k, v in summary.items())
        lines = ["t\tkind\tindices\t" + "\t".join(f"p_{i + 1}" for i in range(x0.n)) + "\t" + "\t".join(f"q_{i + 1}" for i in range(x0.n))]
        for ev in traj.events:
            vals = "\t".join(_g(v) for v in np.r_[ev.point.p, ev.point.q])
            lines.append(f"{_g(ev.time)}\t{ev.kind}\t{','.join(str(i + 1) for i in ev.indices)}\t{vals}")
        _emit(head + "\n" + "\n".join(lines), args.out)
    return EXIT_OK


def cmd_figures(args) -> int:
    text = emit_figure_data(args.kind, n=args.n, per_segment=args.per_segment, dense=not args.events_only)
    _emit(text, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="Monte Carlo seed (default 0)")
    common.add_argument("--samples", type=lambda s: int(float(s)), default=10**6, help="Monte Carlo samples (default 1e6)")
    common.add_argument("--tol", type=float, default=1e-8, help="closure tolerance for simulate (default 1e-8)")
    common.add_argument("--format", choices=["table", "structured"], default="table")
    common.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo (result does not depend on it)")
    common.add_argument("--out", default=None, help="write output to this path instead of stdout")

    parser = argparse.ArgumentParser(prog="viterbo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, helptext in [
        ("capacity", cmd_capacity, "capacity (or upper bound) of each configured body"),
        ("volume", cmd_volume, "volume of each configured body"),
        ("simulate", cmd_simulate, "simulate the l1/l_inf flow from a configured start"),
        ("verify", cmd_verify, "full Viterbo ratio report"),
    ]:
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("config")
        p.set_defaults(func=func)
    p = sub.add_parser("figures", parents=[common], help="trajectory data for the orbit plots")
    p.add_argument("kind", choices=FIGURE_KINDS)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--per-segment", type=int, default=64)
    p.add_argument("--events-only", action="store_true")
    p.set_defaults(func=cmd_figures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, KeyError, TypeError, DegenerateStartError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericFailure, RunawayError, pl_flow.InconsistencyError) as exc:
        diag = getattr(exc, "diagnostics", {})
        print(f"numeric failure: {exc} {diag if diag else ''}".rstrip(), file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
