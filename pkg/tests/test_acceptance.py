"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the terminal summary (see conftest.py) and also
written to stdout of each test.
"""

from conftest import ACCEPTANCE_LINES
from signedflip.config import validate_config
from signedflip.environment import total_graph
from signedflip.graph import is_strongly_balanced
from signedflip.verification import fixture_config, run_suite


def record(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number:>2} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def claim(report, name):
    c = report.claims[name]
    return c["count"], c["of"]


def test_criterion_01_ceiling_fuzz():
    res = run_suite("lemma1")
    steps = sum(v["steps"] for v in res.metrics.values())
    bad = sum(v["violations"] for v in res.metrics.values())
    ok = res.passed and bad == 0 and res.elapsed < 10.0
    record(1, "non-increasing ceiling fuzz", ok, f"{steps - bad}/{steps} steps non-increasing over n in {{3,6,10}}, {res.elapsed:.1f}s (< 10s)")
    assert bad == 0
    assert all(v["steps"] == 10_000 for v in res.metrics.values())
    assert res.elapsed < 10.0


def test_criterion_02_contraction_and_pull_bounds():
    res = run_suite("lemma23")
    m = res.metrics
    ok = res.passed and res.elapsed < 10.0
    record(2, "contraction and pull bounds", ok,
           f"contraction {m['scenarios'] - m['lemma2_violations']}/{m['scenarios']}, "
           f"pull {m['scenarios'] - m['lemma3_violations']}/{m['scenarios']}, {res.elapsed:.1f}s (< 10s)")
    assert m["scenarios"] == 1000
    assert m["lemma2_violations"] == 0 and m["lemma3_violations"] == 0
    assert res.elapsed < 10.0


def test_criterion_03_convergence_and_absolute_consensus():
    cfg = fixture_config("theorem1")
    val = validate_config(cfg)
    assert cfg.n == 5 and cfg.runs == 200 and cfg.horizon == 100_000
    assert cfg.params.alpha == cfg.params.beta == 0.1 and cfg.params.b == cfg.params.d == 0.5
    assert val.assumptions["A2"]["holds"] and val.assumptions["A2"]["K"] <= 2
    res = run_suite("theorem1")
    rep = res.metrics["report"]
    conv, of = claim(rep, "convergence")
    cons, _ = claim(rep, "absolute_consensus")
    lo = rep.claims["convergence"]["ci95"][0]
    ok = conv == of == 200 and cons == 200 and lo > 0.98 and res.elapsed < 120
    record(3, "convergence surrogate", ok,
           f"converged {conv}/{of} (CI low {lo:.3f}), absolute consensus {cons}/{of}, {res.elapsed:.1f}s (< 120s)")
    assert conv == 200 and cons == 200 and lo > 0.98
    assert res.elapsed < 120


def test_criterion_04_balanced_clustering():
    cfg = fixture_config("theorem2i")
    tot = total_graph(cfg.schedule)
    assert cfg.n == 4 and cfg.runs == 200
    assert is_strongly_balanced(tot.graph, cfg.balance_mode)
    assert all(tot.recurrent(a) for a in tot.graph.negative_arcs) and tot.graph.negative_arcs
    res = run_suite("theorem2i")
    rep = res.metrics["report"]
    conv, of = claim(rep, "convergence")
    clus, _ = claim(rep, "clustering")
    ok = conv == clus == of == 200
    record(4, "balanced clustering surrogate", ok,
           f"converged {conv}/{of}, sides match bipartition with y* <= |s0|_1 in {clus}/{of}")
    assert conv == 200 and clus == 200


def test_criterion_05_unbalanced_clustering():
    cfg = fixture_config("theorem2ii")
    tot = total_graph(cfg.schedule)
    assert cfg.n == 3 and cfg.runs == 200
    assert not is_strongly_balanced(tot.graph, cfg.balance_mode)
    assert all(a.sign < 0 for a in tot.graph)
    res = run_suite("theorem2ii")
    rep = res.metrics["report"]
    conv, of = claim(rep, "convergence")
    clus, _ = claim(rep, "clustering")
    ok = conv == clus == of == 200
    record(5, "unbalanced clustering surrogate", ok, f"converged {conv}/{of}, all limits zero in {clus}/{of}")
    assert conv == 200 and clus == 200


def test_criterion_06_growth_floor():
    res = run_suite("lemma5")
    m = res.metrics
    record(6, "growth floor", res.passed, f"{m['steps'] - m['violations']}/{m['steps']} steps with M(t+1) >= M(t)/(2n)")
    assert m["steps"] == 1000 and m["violations"] == 0


def test_criterion_07_divergence_and_control():
    cfg = fixture_config("proposition3")
    val = validate_config(cfg)
    assert cfg.n == 3 and cfg.params.alpha == 0.08 and cfg.params.beta == 1400 and cfg.horizon == 10_000
    assert val.assumptions["A4"]["holds"] and val.assumptions["A5"]["holds"]
    assert val.assumptions["A6"]["holds"] and val.assumptions["A6"]["constant"] == 0.5
    res = run_suite("proposition3")
    rep, ctl = res.metrics["report"], res.metrics["control"]
    div = rep.verdicts["diverged"]["count"]
    ctl_div = ctl.verdicts["diverged"]["count"]
    assert rep.runs == 100 and ctl.runs == 100 and ctl.config["params"]["beta"] == 0.05
    assert all(r["M0"] > 0 for r in rep.per_run)
    ok = div >= 99 and ctl_div == 0
    record(7, "divergence surrogate", ok, f"beta=1400 diverged {div}/100 (need >= 99), control beta=0.05 diverged {ctl_div}/100")
    assert div >= 99 and ctl_div == 0


def test_criterion_08_no_survivor():
    res = run_suite("theorem4")
    rep = res.metrics["report"]
    good, of = claim(rep, "no_survivor")
    diverged = rep.verdicts["diverged"]["count"]
    ok = of == diverged and good == of and of > 0
    record(8, "no-survivor surrogate", ok, f"{good}/{of} diverged runs with every node past 1e6*max|s0|")
    assert of == diverged > 0 and good == of


def test_criterion_09_structural_oracles():
    res = run_suite("structure")
    bad = res.metrics["mismatches"]
    n = res.metrics["graphs"]
    detail = ", ".join(f"{k} {n - v}/{n}" for k, v in bad.items())
    record(9, "structural oracles", res.passed, detail)
    assert n == 500 and not any(bad.values())


def test_criterion_10_determinism():
    res = run_suite("determinism")
    record(10, "determinism", res.passed, "; ".join(res.lines))
    assert res.passed
