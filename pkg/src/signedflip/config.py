"""Experiment configuration files and their validation."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .dynamics import DEFAULT_CEILING, ProbeSpec, UpdateParams
from .environment import (
    GraphSchedule,
    is_sign_consistent,
    minimal_window,
    read_schedule,
    sign_conflicts,
)
from .graph import GraphError, parse_graph, read_graph
from .sampler import AttentionProcess, InteractionModel, make_model, model_echo, verify_selection_assumptions

CLAIMS = ("convergence", "absolute_consensus", "clustering", "divergence", "no_divergence", "no_survivor")
_CONVERGENCE_CLAIMS = ("convergence", "absolute_consensus", "clustering")
_DIVERGENCE_CLAIMS = ("divergence", "no_survivor")


class ConfigError(ValueError):
    pass


class ParseError(ConfigError):
    """The file is not readable as a configuration."""


class SemanticError(ConfigError):
    """The file parses but describes an invalid experiment."""


@dataclass(frozen=True)
class Tolerances:
    eps_conv: float = 1e-9
    window: int = 1000
    eps_cluster: float = 1e-6
    ceiling: float = DEFAULT_CEILING
    survivor_factor: float = 1e6


@dataclass(frozen=True)
class ExperimentConfig:
    schedule: GraphSchedule
    model: InteractionModel
    params: UpdateParams
    horizon: int
    seed: int
    initial: Optional[tuple] = None  # explicit s0; None draws uniform [-1, 1]^n per run
    runs: Optional[int] = None
    probe_stride: int = 1000
    tolerances: Tolerances = Tolerances()
    claims: dict = field(default_factory=dict)  # name -> {"min_fraction": float}
    balance_mode: str = "literal"
    forced_attention: Optional[tuple] = None
    name: str = "experiment"
    source: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.schedule.n

    @property
    def probes(self) -> ProbeSpec:
        return ProbeSpec(self.probe_stride, self.tolerances.window)

    def with_beta(self, beta: float) -> "ExperimentConfig":
        return replace(self, params=replace(self.params, beta=float(beta)))

    def echo(self) -> dict:
        """Self-describing record of everything that determines the results."""
        tol = self.tolerances
        return {
            "name": self.name,
            "n": self.n,
            "schedule": {
                "period": self.schedule.period,
                "frames": [[[a.tail, a.head, a.sign.symbol] for a in g] for g in self.schedule.frames],
                "source": self.source.get("schedule"),
            },
            "interaction": model_echo(self.model),
            "params": self.params.to_dict(),
            "initial": {"kind": "explicit", "values": list(self.initial)} if self.initial is not None
            else {"kind": "uniform", "low": -1.0, "high": 1.0},
            "run": {"horizon": self.horizon, "seed": self.seed, "runs": self.runs, "probe_stride": self.probe_stride},
            "tolerances": {
                "eps_conv": tol.eps_conv,
                "window": tol.window,
                "eps_cluster": tol.eps_cluster,
                "ceiling": tol.ceiling,
                "survivor_factor": tol.survivor_factor,
            },
            "claims": copy.deepcopy(self.claims),
            "balance_mode": self.balance_mode,
            "forced_attention": list(self.forced_attention) if self.forced_attention is not None else None,
            "regimes": regime_flags(self.params, self.n),
        }


def regime_flags(params: UpdateParams, n: int) -> dict:
    return {
        "alpha_plus_beta": params.alpha + params.beta,
        "contractive_bound": 1.0 / (n - 1),
        "contractive": params.is_contractive(n),
        "nonexpansive": params.is_nonexpansive(n),
        "gamma_star": params.gamma_star(n),
        "alpha_divergence_bound": 1.0 / (4 * n),
        "beta_floor_threshold": 16.0 * n ** (n + 1),
        "divergence_candidate": params.is_divergence_candidate(n),
        "floor_regime": params.in_floor_regime(n),
    }


# -- loading --------------------------------------------------------------------


def _number(value, what: str, kind=float):
    if isinstance(value, bool):
        raise SemanticError(f"{what} must be a number")
    try:
        out = kind(value)
    except (TypeError, ValueError):
        raise SemanticError(f"{what} must be a number, got {value!r}") from None
    if kind is int and out != float(value):
        raise SemanticError(f"{what} must be an integer")
    return out


def _require(mapping: dict, key: str, where: str):
    if not isinstance(mapping, dict) or key not in mapping:
        raise SemanticError(f"missing required key {where}{key}")
    return mapping[key]


def _load_schedule(spec, base: Path) -> GraphSchedule:
    if not isinstance(spec, dict):
        raise SemanticError("schedule must be a mapping")
    try:
        if "manifest" in spec:
            return read_schedule(base / spec["manifest"])
        if "frames" in spec:
            return GraphSchedule(tuple(read_graph(base / p) for p in spec["frames"]))
        if "inline" in spec:
            return GraphSchedule(tuple(parse_graph(text) for text in spec["inline"]))
    except (OSError, GraphError) as exc:
        raise ParseError(f"schedule: {exc}") from exc
    raise SemanticError("schedule needs one of 'manifest', 'frames' or 'inline'")


def config_from_dict(raw: dict, base: Path = Path("."), name: str = "experiment") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ParseError("configuration root must be a mapping")
    n = _number(_require(raw, "n", ""), "n", int)
    schedule = _load_schedule(_require(raw, "schedule", ""), base)
    if schedule.n != n:
        raise SemanticError(f"n={n} but the schedule has {schedule.n} nodes")

    inter = _require(raw, "interaction", "")
    kind = _require(inter, "kind", "interaction.")
    p = inter.get("p")
    per_arc = {}
    for entry in inter.get("per_arc") or []:
        if not (isinstance(entry, list) and len(entry) == 3):
            raise SemanticError("interaction.per_arc entries must be [tail, head, probability]")
        t, h, q = entry
        per_arc[(_number(t, "per_arc tail", int), _number(h, "per_arc head", int))] = _number(q, "per_arc probability")
    if per_arc and kind != "bernoulli":
        raise SemanticError("interaction.per_arc only applies to kind 'bernoulli'")
    try:
        model = make_model(kind, None if p is None else _number(p, "interaction.p"), per_arc)
    except ValueError as exc:
        raise SemanticError(f"interaction: {exc}") from exc

    prm = _require(raw, "params", "")
    alpha = _number(_require(prm, "alpha", "params."), "params.alpha")
    beta = _number(_require(prm, "beta", "params."), "params.beta")
    b = _number(_require(prm, "b", "params."), "params.b")
    d = _number(_require(prm, "d", "params."), "params.d")
    try:
        params = UpdateParams(alpha, beta, AttentionProcess(b, d))
    except ValueError as exc:
        raise SemanticError(f"params: {exc}") from exc

    init = _require(raw, "initial", "")
    ikind = _require(init, "kind", "initial.")
    if ikind == "uniform":
        initial = None
    elif ikind == "explicit":
        values = _require(init, "values", "initial.")
        initial = tuple(_number(v, "initial.values[]") for v in values)
        if len(initial) != n:
            raise SemanticError(f"initial.values has {len(initial)} entries, expected {n}")
        if not np.all(np.isfinite(initial)):
            raise SemanticError("initial.values must be finite")
    else:
        raise SemanticError(f"initial.kind must be 'uniform' or 'explicit', got {ikind!r}")

    run = _require(raw, "run", "")
    horizon = _number(_require(run, "horizon", "run."), "run.horizon", int)
    seed = _number(_require(run, "seed", "run."), "run.seed", int)
    runs = run.get("runs")
    runs = None if runs is None else _number(runs, "run.runs", int)
    stride = _number(run.get("probe_stride", 1000), "run.probe_stride", int)
    if horizon < 1:
        raise SemanticError("run.horizon must be at least 1")
    if not 0 <= seed < 2**64:
        raise SemanticError("run.seed must be an unsigned 64-bit integer")
    if runs is not None and runs < 1:
        raise SemanticError("run.runs must be at least 1")
    if stride < 1:
        raise SemanticError("run.probe_stride must be at least 1")

    traw = raw.get("tolerances") or {}
    tol = Tolerances(
        eps_conv=_number(traw.get("eps_conv", 1e-9), "tolerances.eps_conv"),
        window=_number(traw.get("window", 1000), "tolerances.window", int),
        eps_cluster=_number(traw.get("eps_cluster", 1e-6), "tolerances.eps_cluster"),
        ceiling=_number(traw.get("ceiling", DEFAULT_CEILING), "tolerances.ceiling"),
        survivor_factor=_number(traw.get("survivor_factor", 1e6), "tolerances.survivor_factor"),
    )
    if tol.eps_conv <= 0 or tol.eps_cluster <= 0 or tol.window < 1 or tol.ceiling <= 0:
        raise SemanticError("tolerances must be positive")

    claims = {}
    craw = raw.get("claims") or {}
    if isinstance(craw, list):
        craw = {c: {} for c in craw}
    for cname, opts in craw.items():
        if cname not in CLAIMS:
            raise SemanticError(f"unknown claim {cname!r}; choose from {', '.join(CLAIMS)}")
        opts = dict(opts or {})
        frac = _number(opts.get("min_fraction", 1.0), f"claims.{cname}.min_fraction")
        if not 0 < frac <= 1:
            raise SemanticError(f"claims.{cname}.min_fraction must lie in (0, 1]")
        claims[cname] = {"min_fraction": frac}

    mode = raw.get("balance_mode", "literal")
    if mode not in ("literal", "classical"):
        raise SemanticError("balance_mode must be 'literal' or 'classical'")

    forced = (raw.get("debug") or {}).get("forced_attention")
    if forced is not None:
        if not (isinstance(forced, list) and len(forced) == 2):
            raise SemanticError("debug.forced_attention must be [B, D]")
        for v in forced:
            vals = v if isinstance(v, list) else [v]
            if any(x not in (0, 1) for x in vals):
                raise SemanticError("debug.forced_attention values must be 0 or 1")
        forced = tuple(forced)

    return ExperimentConfig(
        schedule=schedule, model=model, params=params, horizon=horizon, seed=seed,
        initial=initial, runs=runs, probe_stride=stride, tolerances=tol, claims=claims,
        balance_mode=mode, forced_attention=forced, name=str(raw.get("name", name)),
        source={"schedule": raw["schedule"]},
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return config_from_dict(raw, path.parent, name=path.stem)


# -- validation --------------------------------------------------------------------


@dataclass
class ValidationReport:
    assumptions: dict
    regimes: dict
    warnings: list
    errors: list

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        return {"assumptions": self.assumptions, "regimes": self.regimes,
                "warnings": self.warnings, "errors": self.errors}


def validate_config(cfg: ExperimentConfig) -> ValidationReport:
    """Which hypotheses and regimes hold; never alters the configuration."""
    sched, n = cfg.schedule, cfg.n
    sel = verify_selection_assumptions(cfg.model, sched)
    k_all = minimal_window(sched, "all")
    k_pos = minimal_window(sched, "positive")
    k_neg = minimal_window(sched, "negative")
    conflicts = sign_conflicts(sched)
    negatives = any(g.negative_arcs for g in sched.frames)
    assumptions: dict[str, Any] = {
        "A1": sel["A1"].to_dict(),
        "A2": {"holds": k_all is not None, "K": k_all},
        "A3": {"holds": not conflicts, "conflicts": [list(c) for c in conflicts]},
        "A4": {"holds": k_pos is not None, "K": k_pos},
        "A5": {"holds": k_neg is not None, "K": k_neg},
        "A6": sel["A6"].to_dict(),
    }
    flags = regime_flags(cfg.params, n)
    convergence_regime = flags["contractive"] and k_all is not None
    divergence_regime = (flags["divergence_candidate"] and k_pos is not None
                         and k_neg is not None and sel["A6"].holds)
    regimes = {
        **flags,
        "convergence_theorem": convergence_regime,
        "clustering_theorem": convergence_regime and not conflicts and negatives,
        "divergence_proposition": divergence_regime,
        "no_survivor_theorem": k_all is not None and sel["A6"].holds,
    }

    warnings, errors = [], []
    enabled = set(cfg.claims)
    if enabled & set(_CONVERGENCE_CLAIMS):
        if not flags["contractive"]:
            warnings.append(f"convergence claims enabled but alpha+beta >= 1/(n-1) = {1 / (n - 1):.6g}")
        if k_all is None:
            warnings.append("convergence claims enabled but A2 fails (no window union is strongly connected)")
    if "clustering" in enabled:
        if conflicts:
            warnings.append(f"clustering claim enabled but A3 violated: sign conflicts on {conflicts}")
        if not negatives:
            warnings.append("clustering claim enabled but the total graph has no negative arc")
    if enabled & set(_DIVERGENCE_CLAIMS):
        if not sel["A6"].holds:
            errors.append(f"divergence claims need A6: {sel['A6'].note}")
    if "divergence" in enabled:
        if not flags["divergence_candidate"]:
            warnings.append(f"divergence claim enabled but alpha > 1/(4n) = {1 / (4 * n):.6g}")
        if k_pos is None:
            warnings.append("divergence claim enabled but A4 fails")
        if k_neg is None:
            warnings.append("divergence claim enabled but A5 fails")
        if not flags["floor_regime"]:
            warnings.append(f"beta <= 16 n^(n+1) = {16 * n ** (n + 1)}; divergence is not guaranteed by the explicit bound")
    if "no_survivor" in enabled and k_all is None:
        warnings.append("no_survivor claim enabled but A2 fails")
    if cfg.forced_attention is not None:
        warnings.append("forced attention is a debug mode; results do not follow the random model")
    return ValidationReport(assumptions, regimes, warnings, errors)
