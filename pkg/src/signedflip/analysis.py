"""Verdicts on trajectories and seeded Monte Carlo checks of the limit theorems."""

from __future__ import annotations

import datetime as _dt
import enum
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .dynamics import TrajectoryRecord, initial_states, max_abs, simulate_batch
from .environment import TotalGraph, total_graph
from .graph import GraphError, strong_balance_bipartition

Z95 = 1.959963984540054


class InconsistentLimits(ValueError):
    """Some limit is neither +y, -y nor 0 within tolerance."""


class HypothesisViolation(ValueError):
    """The total graph does not meet the clustering theorem's hypotheses."""


class VerdictKind(str, enum.Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    limits: Optional[np.ndarray] = None
    peak: Optional[float] = None
    step: Optional[int] = None
    reason: str = ""

    @property
    def converged(self) -> bool:
        return self.kind is VerdictKind.CONVERGED

    @property
    def diverged(self) -> bool:
        return self.kind is VerdictKind.DIVERGED


def detect_convergence(traj: TrajectoryRecord, eps: float = 1e-9, window: int = 1000) -> Verdict:
    """Converged when every coordinate varies by less than ``eps`` over the last ``window`` steps."""
    if eps <= 0 or window < 1:
        raise ValueError("eps must be positive and window at least 1")
    if traj.diverged:
        return Verdict(VerdictKind.DIVERGED, peak=float(np.max(traj.m_series)), step=traj.steps,
                       reason="non-finite state" if traj.non_finite else "ceiling exceeded")
    start = traj.steps - window
    tail = traj.probe_states[traj.probe_times >= start]
    spread = float(np.max(tail.max(axis=0) - tail.min(axis=0)))
    if spread < eps:
        return Verdict(VerdictKind.CONVERGED, limits=traj.final_state.copy(), step=traj.steps)
    return Verdict(VerdictKind.UNDECIDED, reason=f"horizon: spread {spread:.3g} over final window")


def check_absolute_consensus(limits, eps: float = 1e-6) -> tuple[bool, float]:
    """All |limit| equal to their maximum within ``eps``."""
    limits = np.asarray(limits, dtype=float)
    m_star = max_abs(limits)
    return bool(np.all(np.abs(np.abs(limits) - m_star) < eps)), m_star


@dataclass(frozen=True)
class ClusterClassification:
    plus_set: frozenset
    minus_set: frozenset
    zero_set: frozenset
    y_star: float


def classify_limits(limits, eps: float = 1e-6) -> ClusterClassification:
    limits = np.asarray(limits, dtype=float)
    y = max_abs(limits)
    n = len(limits)
    if y < eps:
        return ClusterClassification(frozenset(), frozenset(), frozenset(range(n)), y)
    plus = frozenset(i for i in range(n) if abs(limits[i] - y) < eps)
    minus = frozenset(i for i in range(n) if abs(limits[i] + y) < eps)
    stray = set(range(n)) - plus - minus
    if stray:
        raise InconsistentLimits(f"nodes {sorted(stray)} are not within {eps} of +/-{y}")
    return ClusterClassification(plus, minus, frozenset(), y)


def check_theorem2(classification: ClusterClassification, total: TotalGraph, s0,
                   mode: str = "literal", slack: float = 1e-9) -> dict:
    """Per-claim booleans for the clustering theorem on one converged run."""
    g = total.graph
    negatives = g.negative_arcs
    if not negatives:
        raise HypothesisViolation("total graph has no negative arc")
    stale = [a for a in negatives if not total.recurrent(a)]
    if stale:
        raise HypothesisViolation(f"negative arcs never recur: {stale}")
    split = strong_balance_bipartition(g, mode)
    if split is None:
        return {"balanced": False, "all_zero": classification.zero_set == frozenset(range(g.n))}
    bound = float(np.sum(np.abs(np.asarray(s0, dtype=float))))
    return {
        "balanced": True,
        "sides_match": split.same_as(classification.plus_set, classification.minus_set),
        "y_star_bound": classification.y_star <= bound + slack,
    }


def no_survivor_check(traj: TrajectoryRecord, threshold: float) -> tuple[bool, np.ndarray]:
    """Whether M hit the ceiling, and which nodes ever reached ``threshold`` in absolute value."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    return bool(traj.diverged), traj.node_peaks >= threshold


# -- Monte Carlo ---------------------------------------------------------------------


def wilson_interval(successes: int, total: int, z: float = Z95) -> tuple[float, float]:
    if total == 0:
        return (0.0, 1.0)
    p = successes / total
    denom = 1.0 + z * z / total
    centre = (p + z * z / (2 * total)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total))
    return (max(0.0, centre - half), min(1.0, centre + half))


def _proportion(successes: int, total: int) -> dict:
    lo, hi = wilson_interval(successes, total)
    return {"count": successes, "of": total, "fraction": successes / total if total else None,
            "ci95": [lo, hi]}


@dataclass
class MonteCarloReport:
    config: dict
    base_seed: int
    runs: int
    per_run: list
    verdicts: dict
    claims: dict
    aggregate: dict
    error_count: int
    generated_at: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.claims.values())

    def fraction(self, kind: str) -> float:
        return self.verdicts[kind]["fraction"]

    def to_dict(self, timestamp: bool = True) -> dict:
        out = {
            "tool": "signedflip",
            "version": __version__,
            "config": self.config,
            "base_seed": self.base_seed,
            "runs": self.runs,
            "verdicts": self.verdicts,
            "claims": self.claims,
            "aggregate": self.aggregate,
            "error_count": self.error_count,
            "passed": self.passed,
            "per_run": self.per_run,
        }
        if timestamp:
            out["generated_at"] = self.generated_at
        return out

    def to_json(self, timestamp: bool = True) -> str:
        return json.dumps(self.to_dict(timestamp), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _finite(x: float) -> Optional[float]:
    return float(x) if math.isfinite(x) else None


def _evaluate_run(cfg: ExperimentConfig, traj: TrajectoryRecord, total) -> dict:
    tol = cfg.tolerances
    verdict = detect_convergence(traj, tol.eps_conv, tol.window)
    rec = {
        "run": traj.run,
        "verdict": verdict.kind.value,
        "steps": traj.steps,
        "final_M": _finite(traj.m_series[-1]),
        "M0": float(traj.m_series[0]),
        "claims": {},
    }
    if verdict.converged:
        rec["limits"] = [float(x) for x in verdict.limits]
        rec["y_star"] = max_abs(verdict.limits)
        m_final = traj.m_series[-1]
        rec["settle_step"] = int(np.argmax(traj.m_series <= m_final + tol.eps_conv))
    if verdict.diverged:
        rec["diverged_step"] = verdict.step
    errors = []
    for name in cfg.claims:
        try:
            rec["claims"][name] = _claim(name, cfg, traj, verdict, total)
        except (InconsistentLimits, HypothesisViolation, GraphError) as exc:
            rec["claims"][name] = False
            errors.append(f"{name}: {exc}")
    if errors:
        rec["error"] = "; ".join(errors)
    return rec


def _claim(name: str, cfg: ExperimentConfig, traj, verdict: Verdict, total) -> Optional[bool]:
    """True/False per run, or None when the claim does not apply to this run."""
    tol = cfg.tolerances
    if name == "convergence":
        return verdict.converged
    if name == "absolute_consensus":
        return verdict.converged and check_absolute_consensus(verdict.limits, tol.eps_cluster)[0]
    if name == "clustering":
        if not verdict.converged:
            return False
        if isinstance(total, Exception):
            raise total
        cls = classify_limits(verdict.limits, tol.eps_cluster)
        checks = check_theorem2(cls, total, traj.s0, cfg.balance_mode)
        return all(v for k, v in checks.items() if k != "balanced")
    if name == "divergence":
        return verdict.diverged
    if name == "no_divergence":
        return not verdict.diverged
    if name == "no_survivor":
        if not traj.diverged:
            return None
        threshold = tol.survivor_factor * max_abs(traj.s0)
        if threshold == 0:
            return None
        return bool(no_survivor_check(traj, threshold)[1].all())
    raise ValueError(f"unknown claim {name!r}")


def run_experiment(cfg: ExperimentConfig, n_runs: int, base_seed: int, batch_size: int = 100,
                   first_run: int = 0) -> list[TrajectoryRecord]:
    """Simulate runs ``first_run .. first_run+n_runs-1`` in batches; results are batch-size independent."""
    trajs = []
    for lo in range(first_run, first_run + n_runs, batch_size):
        runs = list(range(lo, min(lo + batch_size, first_run + n_runs)))
        if cfg.initial is None:
            s0 = initial_states(cfg.n, base_seed, runs)
        else:
            s0 = np.tile(np.asarray(cfg.initial, dtype=float), (len(runs), 1))
        trajs.extend(simulate_batch(
            cfg.schedule, cfg.model, cfg.params, s0, cfg.horizon,
            seed=base_seed, runs=runs, probes=cfg.probes, ceiling=cfg.tolerances.ceiling,
            forced_attention=cfg.forced_attention,
        ))
    return trajs


def monte_carlo(cfg: ExperimentConfig, n_runs: Optional[int] = None, base_seed: Optional[int] = None,
                batch_size: int = 100) -> MonteCarloReport:
    n_runs = cfg.runs if n_runs is None else n_runs
    base_seed = cfg.seed if base_seed is None else base_seed
    if not n_runs or n_runs < 1:
        raise ValueError("need at least one run")
    total = None
    if "clustering" in cfg.claims:
        try:
            total = total_graph(cfg.schedule)
        except GraphError as exc:
            total = HypothesisViolation(f"total graph undefined: {exc}")

    per_run = [_evaluate_run(cfg, traj, total) for traj in run_experiment(cfg, n_runs, base_seed, batch_size)]
    return summarise(cfg, per_run, base_seed)


def summarise(cfg: ExperimentConfig, per_run: list, base_seed: int) -> MonteCarloReport:
    n_runs = len(per_run)
    verdicts = {k.value: _proportion(sum(r["verdict"] == k.value for r in per_run), n_runs)
                for k in VerdictKind}
    claims = {}
    for name, opts in cfg.claims.items():
        vals = [r["claims"].get(name) for r in per_run]
        applicable = [v for v in vals if v is not None]
        ok = sum(bool(v) for v in applicable)
        prop = _proportion(ok, len(applicable))
        need = opts.get("min_fraction", 1.0)
        passed = not applicable or ok >= math.ceil(need * len(applicable) - 1e-9)
        failing = [r["run"] for r, v in zip(per_run, vals) if v is False]
        claims[name] = {**prop, "min_fraction": need, "passed": passed, "failing_runs": failing[:50]}

    conv = [r for r in per_run if r["verdict"] == "converged"]
    div = [r for r in per_run if r["verdict"] == "diverged"]
    ys = [r["y_star"] for r in conv]
    aggregate = {
        "mean_settle_step": float(np.mean([r["settle_step"] for r in conv])) if conv else None,
        "mean_divergence_step": float(np.mean([r["diverged_step"] for r in div])) if div else None,
        "y_star": {"min": min(ys), "mean": float(np.mean(ys)), "max": max(ys)} if ys else None,
    }
    return MonteCarloReport(
        config=cfg.echo(), base_seed=base_seed, runs=n_runs, per_run=per_run, verdicts=verdicts,
        claims=claims, aggregate=aggregate, error_count=sum("error" in r for r in per_run),
    )


# -- beta sweep --------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    beta: float
    runs: int
    diverged: int
    ci95: tuple

    @property
    def fraction(self) -> float:
        return self.diverged / self.runs


def beta_sweep(cfg: ExperimentConfig, betas: Sequence[float], n_runs: Optional[int] = None,
               base_seed: Optional[int] = None) -> list[SweepRow]:
    """Diverged fraction per beta, with the same seeds reused at every grid point."""
    betas = [float(b) for b in betas]
    if not betas:
        raise ValueError("beta grid is empty")
    if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValueError("beta grid must be strictly ascending")
    n_runs = cfg.runs if n_runs is None else n_runs
    base_seed = cfg.seed if base_seed is None else base_seed
    rows = []
    for beta in betas:
        trajs = run_experiment(cfg.with_beta(beta), n_runs, base_seed)
        k = sum(t.diverged for t in trajs)
        rows.append(SweepRow(beta, n_runs, k, wilson_interval(k, n_runs)))
    return rows


def sweep_is_monotone(rows: Sequence[SweepRow], widths: float = 2.0) -> bool:
    """Non-decreasing up to ``widths`` Wilson-interval widths of noise."""
    for a, b in zip(rows, rows[1:]):
        noise = widths * max(a.ci95[1] - a.ci95[0], b.ci95[1] - b.ci95[0])
        if b.fraction < a.fraction - noise:
            return False
    return True
