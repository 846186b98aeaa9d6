"""Command-line front end: ``signedflip analyze|simulate|montecarlo|sweep|verify``.

Exit status is 0 when everything requested passed, 1 when a claim or
verification suite failed, and 2 for usage, file or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .analysis import beta_sweep, monte_carlo, sweep_is_monotone
from .config import ConfigError, ExperimentConfig, load_config, validate_config
from .dynamics import initial_states, run_trajectory, write_trajectory
from .environment import (
    GraphSchedule,
    minimal_window,
    read_schedule,
    sign_conflicts,
    total_graph,
)
from .graph import (
    GraphError,
    is_strongly_connected,
    positive_cluster_partition,
    strong_balance_bipartition,
)
from .verification import SUITES, run_suite

EXIT_OK, EXIT_CLAIM, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _fmt_set(nodes) -> str:
    return "{" + ", ".join(str(i) for i in sorted(nodes)) + "}"


# -- analyze ------------------------------------------------------------------------


def structural_report(sched: GraphSchedule, mode: str = "literal", limit: Optional[int] = None) -> dict:
    """Everything ``analyze`` prints, as plain data."""
    conflicts = sign_conflicts(sched)
    report: dict = {"n": sched.n, "period": sched.period, "sign_consistent": not conflicts,
                    "sign_conflicts": [list(c) for c in conflicts]}
    if not conflicts:
        g = total_graph(sched).graph
        part = positive_cluster_partition(g)
        split = strong_balance_bipartition(g, mode)
        report.update({
            "positive_clusters": [sorted(c) for c in part.clusters],
            "cluster_count": part.count,
            "balance_mode": mode,
            "strongly_balanced": split is not None,
            "bipartition": None if split is None else [sorted(split.side_one), sorted(split.side_two)],
            "total_graph_strongly_connected": is_strongly_connected(g),
        })
    report["windows"] = {
        "A2": minimal_window(sched, "all", limit),
        "A4": minimal_window(sched, "positive", limit),
        "A5": minimal_window(sched, "negative", limit),
    }
    return report


def format_structural_report(rep: dict) -> str:
    out = [f"nodes: {rep['n']}  frames: {rep['period']}"]
    if rep["sign_consistent"]:
        out.append("sign consistency (A3): holds")
        clusters = " ".join(_fmt_set(c) for c in rep["positive_clusters"])
        out.append(f"positive clusters: T_p = {rep['cluster_count']}: {clusters}")
        if rep["strongly_balanced"]:
            one, two = rep["bipartition"]
            out.append(f"strong balance ({rep['balance_mode']}): strongly balanced, {_fmt_set(one)} | {_fmt_set(two)}")
        else:
            out.append(f"strong balance ({rep['balance_mode']}): not strongly balanced")
        conn = "yes" if rep["total_graph_strongly_connected"] else "no"
        out.append(f"total graph strongly connected: {conn}")
    else:
        pairs = ", ".join(f"{t}->{h}" for t, h in rep["sign_conflicts"])
        out.append(f"sign consistency (A3): violated on {pairs}")
    labels = {"A2": "window union", "A4": "positive window union", "A5": "negative window union"}
    for key, k in rep["windows"].items():
        if k is None:
            out.append(f"{key} fails ({labels[key]} never strongly connected for K <= {rep['period']})")
        else:
            out.append(f"{key} holds with K={k}")
    return "\n".join(out)


def cmd_analyze(args) -> int:
    if args.path is None and args.config is None:
        raise UsageError("analyze needs a graph/schedule path or --config")
    if args.path is not None:
        sched = read_schedule(args.path)
        mode = args.mode or "literal"
    else:
        cfg = load_config(args.config)
        sched, mode = cfg.schedule, args.mode or cfg.balance_mode
    rep = structural_report(sched, mode)
    print(json.dumps(rep, indent=2, sort_keys=True) if args.json else format_structural_report(rep))
    return EXIT_OK


# -- runs ----------------------------------------------------------------------------


def _config(args) -> ExperimentConfig:
    if args.config is None:
        raise UsageError("--config is required")
    cfg = load_config(args.config)
    if getattr(args, "mode", None):
        cfg = replace(cfg, balance_mode=args.mode)
    return cfg


def _print_validation(cfg: ExperimentConfig) -> bool:
    val = validate_config(cfg)
    for w in val.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for e in val.errors:
        print(f"error: {e}", file=sys.stderr)
    return val.ok


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = _config(args)
    _print_validation(cfg)
    seed = cfg.seed if args.seed is None else args.seed
    run = args.run
    if cfg.initial is not None:
        s0 = np.asarray(cfg.initial, dtype=float)
    else:
        s0 = initial_states(cfg.n, seed, [run])[0]
    traj = run_trajectory(cfg.schedule, cfg.model, cfg.params, s0, cfg.horizon, seed, run=run,
                          probes=cfg.probes, ceiling=cfg.tolerances.ceiling,
                          forced_attention=cfg.forced_attention)
    paths = write_trajectory(traj, _out_dir(args), stem=f"{cfg.name}_run{run}",
                             extra={"config": cfg.echo()})
    print(f"{cfg.name} run {run}: {traj.verdict_hint} after {traj.steps} steps, final M = {traj.m_series[-1]:.6g}")
    for p in paths.values():
        print(f"wrote {p}")
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    cfg = _config(args)
    if not _print_validation(cfg):
        return EXIT_USAGE
    rep = monte_carlo(cfg, n_runs=args.runs, base_seed=args.seed)
    path = _out_dir(args) / f"{cfg.name}_report.json"
    path.write_text(rep.to_json())
    for kind, v in rep.verdicts.items():
        print(f"{kind}: {v['count']}/{v['of']}")
    for name, c in rep.claims.items():
        lo, hi = c["ci95"]
        status = "PASS" if c["passed"] else "FAIL"
        print(f"[{status}] {name}: {c['count']}/{c['of']} (95% CI [{lo:.3f}, {hi:.3f}], need {c['min_fraction']})")
    print(f"wrote {path}")
    return EXIT_OK if rep.passed else EXIT_CLAIM


def _parse_grid(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --betas value {text!r}: {exc}") from None


def cmd_sweep(args) -> int:
    cfg = _config(args)
    _print_validation(cfg)
    if not args.betas:
        raise UsageError("sweep needs --betas b1,b2,...")
    try:
        rows = beta_sweep(cfg, _parse_grid(args.betas), n_runs=args.runs, base_seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args)
    path = out / f"{cfg.name}_sweep.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beta", "runs", "diverged", "fraction", "ci_low", "ci_high"])
        for r in rows:
            w.writerow([repr(r.beta), r.runs, r.diverged, repr(r.fraction), repr(r.ci95[0]), repr(r.ci95[1])])
    meta = {"config": cfg.echo(), "base_seed": cfg.seed if args.seed is None else args.seed,
            "rows": [{"beta": r.beta, "runs": r.runs, "diverged": r.diverged, "ci95": list(r.ci95)} for r in rows],
            "monotone": sweep_is_monotone(rows)}
    (out / f"{cfg.name}_sweep.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    for r in rows:
        print(f"beta={r.beta:g}: diverged {r.diverged}/{r.runs} ({r.fraction:.3f})")
    if not meta["monotone"]:
        print("warning: diverged fraction is not monotone in beta", file=sys.stderr)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    names = args.suites or list(SUITES)
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise UsageError(f"unknown suite(s) {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    failed = []
    for name in names:
        res = run_suite(name, runs=args.runs)
        print(res.report(), flush=True)
        if not res.passed:
            failed.append(name)
    print(f"{len(names) - len(failed)}/{len(names)} suites passed")
    return EXIT_CLAIM if failed else EXIT_OK


# -- entry point ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signedflip", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", type=Path, help="experiment config (YAML)")
        p.add_argument("--seed", type=int, help="override the base seed")
        p.add_argument("--runs", type=int, help="override the number of runs")
        p.add_argument("--out", type=Path, help="output directory (default: current)")
        p.add_argument("--mode", choices=("literal", "classical"), help="strong-balance notion")

    p = sub.add_parser("analyze", help="structural report for a graph or schedule")
    p.add_argument("path", nargs="?", type=Path, help="graph file or schedule manifest")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="one trajectory, written as CSV + JSON")
    p.add_argument("--run", type=int, default=0, help="run index (selects the random streams)")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("montecarlo", help="many runs, claims and a JSON report")
    common(p)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("sweep", help="diverged fraction over a beta grid")
    p.add_argument("--betas", help="comma-separated ascending beta values")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run bundled verification suites")
    p.add_argument("suites", nargs="*", help=f"any of: {', '.join(SUITES)} (default: all)")
    p.add_argument("--runs", type=int, help="override run counts of the Monte Carlo suites")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, GraphError, OSError) as exc:
        print(f"signedflip {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
