"""Bundled verification suites, runnable from the command line or from pytest."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from importlib.resources import as_file, files
from typing import Callable, Optional

import numpy as np

from . import oracles
from .analysis import monte_carlo
from .config import ExperimentConfig, load_config
from .dynamics import (
    UpdateParams,
    check_lemma1,
    check_lemma2_contraction,
    check_lemma3_pull,
    check_lemma5_floor,
    max_abs,
    step,
)
from .graph import (
    SignedArc,
    SignedDigraph,
    Sign,
    arc,
    is_strongly_connected,
    positive_cluster_partition,
    strong_balance_bipartition,
)
from .sampler import AttentionProcess

FUZZ_SEED = 20240611


@dataclass
class SuiteResult:
    name: str
    passed: bool
    lines: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def report(self) -> str:
        head = f"[{'PASS' if self.passed else 'FAIL'}] {self.name} ({self.elapsed:.1f}s)"
        return "\n".join([head] + [f"    {line}" for line in self.lines])


def fixture_config(name: str) -> ExperimentConfig:
    with as_file(files("signedflip") / "fixtures" / f"{name}.yaml") as path:
        return load_config(path)


# -- random instances ------------------------------------------------------------------


def random_signed_graph(rng: np.random.Generator, n: int, density: Optional[float] = None,
                        neg_share: Optional[float] = None) -> SignedDigraph:
    density = rng.uniform(0.05, 1.0) if density is None else density
    neg_share = rng.uniform(0.0, 1.0) if neg_share is None else neg_share
    arcs = []
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < density:
                arcs.append(arc(i, j, "-" if rng.random() < neg_share else "+"))
    return SignedDigraph(n, arcs)


def planted_balanced_graph(rng: np.random.Generator, n: int) -> SignedDigraph:
    """Negative arcs only across a random split; positive arcs anywhere."""
    side = rng.random(n) < 0.5
    arcs = []
    density = rng.uniform(0.1, 0.9)
    for i in range(n):
        for j in range(n):
            if i == j or rng.random() >= density:
                continue
            if side[i] != side[j] and rng.random() < 0.7:
                arcs.append(arc(i, j, "-"))
            else:
                arcs.append(arc(i, j, "+"))
    return SignedDigraph(n, arcs)


def random_state(rng: np.random.Generator, n: int) -> np.ndarray:
    scale = 10.0 ** rng.uniform(-3, 3)
    kind = rng.integers(4)
    if kind == 0:
        s = rng.uniform(-1, 1, n)
    elif kind == 1:  # every entry at +/-M, the tightest case for the ceiling
        s = rng.choice([-1.0, 1.0], n)
    elif kind == 2:
        s = rng.uniform(-1, 1, n)
        s[rng.random(n) < 0.3] = 0.0
    else:
        s = rng.normal(size=n)
    return scale * s


def random_sample(rng: np.random.Generator, g: SignedDigraph) -> list[SignedArc]:
    q = rng.uniform(0, 1)
    return [a for a in g if rng.random() < q]


def random_sampled_arcs(rng: np.random.Generator, n: int) -> list[SignedArc]:
    """Arcs of a random signed graph thinned by a random activation rate, in one pass."""
    density, neg_share, q = rng.uniform(0.05, 1.0), rng.uniform(0, 1), rng.uniform(0, 1)
    keep = (rng.random((n, n)) < density * q) & ~np.eye(n, dtype=bool)
    neg = rng.random((n, n)) < neg_share
    tails, heads = np.nonzero(keep)
    return [SignedArc(int(t), int(h), Sign.NEGATIVE if neg[t, h] else Sign.POSITIVE)
            for t, h in zip(tails, heads)]


def nonexpansive_params(rng: np.random.Generator, n: int) -> UpdateParams:
    total = 1.0 / (n - 1) if rng.random() < 0.2 else rng.uniform(1e-4, 1.0) / (n - 1)
    alpha = total * rng.uniform(0.05, 0.95)
    return UpdateParams(alpha, total - alpha, AttentionProcess(0.5, 0.5))


# -- deterministic lemma suites ----------------------------------------------------------------


def suite_lemma1(steps_per_n: int = 10_000) -> SuiteResult:
    rng = np.random.default_rng(FUZZ_SEED)
    lines, metrics, ok = [], {}, True
    for n in (3, 6, 10):
        fails = 0
        for _ in range(steps_per_n):
            p = nonexpansive_params(rng, n)
            s = random_state(rng, n)
            B, D = (int(x) for x in rng.integers(0, 2, 2))
            after = step(s, random_sampled_arcs(rng, n), B, D, p)
            fails += not check_lemma1(s, after, p)
        metrics[f"n{n}"] = {"steps": steps_per_n, "violations": fails}
        ok &= fails == 0
        lines.append(f"n={n}: {steps_per_n - fails}/{steps_per_n} steps with M(t+1) <= M(t)(1+1e-12)")
    return SuiteResult("lemma1", ok, lines, metrics)


def _pinned_state(rng: np.random.Generator, n: int, i: int, zeta0: float) -> np.ndarray:
    s = random_state(rng, n)
    others = np.delete(np.abs(s), i)
    m = others.max()
    if m == 0:
        s[(i + 1) % n] = m = 1.0
    s[i] = zeta0 * m * rng.uniform(-1, 1) if zeta0 > 0 else 0.0
    return s


def suite_lemma23(scenarios: int = 1000, n: int = 5) -> SuiteResult:
    rng = np.random.default_rng(FUZZ_SEED + 1)
    fails2 = fails3 = 0
    for _ in range(scenarios):
        p = nonexpansive_params(rng, n)
        i = int(rng.integers(n))
        zeta0 = 0.0 if rng.random() < 0.1 else float(rng.uniform(0.01, 0.99))
        states = [_pinned_state(rng, n, i, zeta0)]
        for _ in range(int(rng.integers(1, 30))):
            g = random_signed_graph(rng, n)
            B, D = (int(x) for x in rng.integers(0, 2, 2))
            states.append(step(states[-1], random_sample(rng, g), B, D, p))
        fails2 += not check_lemma2_contraction(states, i, zeta0, p)

    for _ in range(scenarios):
        p = nonexpansive_params(rng, n)
        i = int(rng.integers(n))
        j = int((i + rng.integers(1, n)) % n)
        zeta0 = float(rng.uniform(0.01, 0.99))
        s = _pinned_state(rng, n, i, zeta0)
        g = random_signed_graph(rng, n)
        sign = Sign.POSITIVE if rng.random() < 0.5 else Sign.NEGATIVE
        link = SignedArc(i, j, sign)
        sampled = [a for a in random_sample(rng, g) if a.pair != link.pair] + [link]
        B, D = (int(x) for x in rng.integers(0, 2, 2))
        if sign is Sign.POSITIVE:
            B = 1
        else:
            D = 1
        after = step(s, sampled, B, D, p)
        fails3 += not check_lemma3_pull(s, after, sampled, i, j, B, D, zeta0, p)
    ok = fails2 == 0 and fails3 == 0
    lines = [
        f"contraction bound: {scenarios - fails2}/{scenarios} scenarios (n={n}, up to 29 steps each)",
        f"single-arc pull bound: {scenarios - fails3}/{scenarios} scenarios (n={n})",
    ]
    return SuiteResult("lemma23", ok, lines, {"lemma2_violations": fails2, "lemma3_violations": fails3,
                                              "scenarios": scenarios})


def suite_lemma5(steps: int = 1000, n: int = 3, alpha: float = 0.08, beta: float = 1300.0) -> SuiteResult:
    rng = np.random.default_rng(FUZZ_SEED + 2)
    p = UpdateParams(alpha, beta, AttentionProcess(0.5, 0.5))
    fails = 0
    for _ in range(steps):
        g = random_signed_graph(rng, n)
        s = random_state(rng, n)
        B, D = (int(x) for x in rng.integers(0, 2, 2))
        after = step(s, random_sample(rng, g), B, D, p)
        fails += not check_lemma5_floor(s, after, p)
    lines = [f"n={n}, alpha={alpha}, beta={beta}: {steps - fails}/{steps} steps with M(t+1) >= M(t)/(2n)"]
    return SuiteResult("lemma5", fails == 0, lines, {"steps": steps, "violations": fails})


# -- Monte Carlo suites --------------------------------------------------------------------------


def _mc_lines(report) -> list[str]:
    lines = []
    for name, c in report.claims.items():
        lo, hi = c["ci95"]
        lines.append(f"{name}: {c['count']}/{c['of']} (95% CI [{lo:.3f}, {hi:.3f}], need >= {c['min_fraction']:.2f})")
    return lines


def suite_theorem1(runs: Optional[int] = None) -> SuiteResult:
    rep = monte_carlo(fixture_config("theorem1"), n_runs=runs)
    conv = rep.claims["convergence"]
    ok = rep.passed and conv["ci95"][0] > 0.98 if runs is None else rep.passed
    return SuiteResult("theorem1", ok, _mc_lines(rep), {"report": rep})


def suite_theorem2i(runs: Optional[int] = None) -> SuiteResult:
    rep = monte_carlo(fixture_config("theorem2i"), n_runs=runs)
    return SuiteResult("theorem2i", rep.passed, _mc_lines(rep), {"report": rep})


def suite_theorem2ii(runs: Optional[int] = None) -> SuiteResult:
    rep = monte_carlo(fixture_config("theorem2ii"), n_runs=runs)
    return SuiteResult("theorem2ii", rep.passed, _mc_lines(rep), {"report": rep})


def suite_proposition3(runs: Optional[int] = None) -> SuiteResult:
    rep = monte_carlo(fixture_config("proposition3"), n_runs=runs)
    ctl = monte_carlo(fixture_config("control"), n_runs=runs)
    div = rep.verdicts["diverged"]
    ctl_div = ctl.verdicts["diverged"]
    ok = rep.claims["divergence"]["passed"] and ctl_div["count"] == 0
    lines = [
        f"beta=1400: {div['count']}/{div['of']} runs hit the ceiling (need >= 99%)",
        f"control beta=0.05: {ctl_div['count']}/{ctl_div['of']} runs diverged (need 0)",
    ]
    return SuiteResult("proposition3", ok, lines, {"report": rep, "control": ctl})


def suite_theorem4(runs: Optional[int] = None) -> SuiteResult:
    rep = monte_carlo(fixture_config("proposition3"), n_runs=runs)
    c = rep.claims["no_survivor"]
    ok = c["passed"] and c["of"] > 0 and c["count"] == c["of"]
    lines = [f"diverged runs with every node past 1e6*max|s0|: {c['count']}/{c['of']}"]
    return SuiteResult("theorem4", ok, lines, {"report": rep})


# -- structure and determinism ----------------------------------------------------------------------


def suite_structure(graphs: int = 500) -> SuiteResult:
    rng = np.random.default_rng(FUZZ_SEED + 3)
    bad = {"balance": 0, "clusters": 0, "strong": 0}
    balanced = 0
    for k in range(graphs):
        n = int(rng.integers(3, 11))
        g = planted_balanced_graph(rng, n) if k % 3 == 0 else random_signed_graph(rng, n)
        split = strong_balance_bipartition(g, "literal")
        exists = bool(oracles.brute_balance_bipartitions(g, "literal"))
        if split is None:
            bad["balance"] += exists
        else:
            balanced += 1
            valid = (split.side_one and split.side_two and not split.side_one & split.side_two
                     and split.side_one | split.side_two == frozenset(range(n))
                     and oracles.bipartition_ok(g, split.side_one, "literal"))
            bad["balance"] += not (exists and valid)
        clusters = set(positive_cluster_partition(g).clusters)
        bad["clusters"] += clusters != oracles.brute_positive_clusters(g)
        bad["strong"] += is_strongly_connected(g) != oracles.brute_strongly_connected(g)
    ok = not any(bad.values())
    lines = [f"{name}: {graphs - v}/{graphs} agree with exhaustive oracle" for name, v in bad.items()]
    lines.append(f"({balanced} of the graphs were strongly balanced)")
    return SuiteResult("structure", ok, lines, {"mismatches": bad, "balanced": balanced, "graphs": graphs})


def suite_determinism() -> SuiteResult:
    lines, ok = [], True
    cfgs = [fixture_config("proposition3"), fixture_config("control"), fixture_config("theorem2ii")]
    cfgs.append(replace(fixture_config("theorem1"), horizon=20_000, runs=20))
    for cfg in cfgs:
        first = monte_carlo(cfg, batch_size=100).to_json(timestamp=False)
        second = monte_carlo(cfg, batch_size=7).to_json(timestamp=False)
        same = first == second
        ok &= same
        lines.append(f"{cfg.name}: replay {'byte-identical' if same else 'DIFFERS'} ({len(first)} bytes)")
    return SuiteResult("determinism", ok, lines, {})


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "lemma1": suite_lemma1,
    "lemma23": suite_lemma23,
    "theorem1": suite_theorem1,
    "theorem2i": suite_theorem2i,
    "theorem2ii": suite_theorem2ii,
    "lemma5": suite_lemma5,
    "proposition3": suite_proposition3,
    "theorem4": suite_theorem4,
    "structure": suite_structure,
    "determinism": suite_determinism,
}
MC_SUITES = ("theorem1", "theorem2i", "theorem2ii", "proposition3", "theorem4")


def run_suite(name: str, runs: Optional[int] = None) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    t0 = time.perf_counter()
    result = SUITES[name](runs) if (name in MC_SUITES and runs is not None) else SUITES[name]()
    result.elapsed = time.perf_counter() - t0
    return result
