import copy
import csv
import json
from importlib.resources import files

import pytest

from signedflip.cli import main, structural_report
from signedflip.config import (
    ParseError,
    SemanticError,
    config_from_dict,
    load_config,
    validate_config,
)
from signedflip.environment import read_schedule

FIXTURES = files("signedflip") / "fixtures"

BASE = {
    "n": 5,
    "schedule": {"inline": ["n 5\n0 1 +\n1 2 -\n2 3 +\n3 4 -\n4 0 +\n"]},
    "interaction": {"kind": "bernoulli", "p": 0.5},
    "params": {"alpha": 0.1, "beta": 0.1, "b": 0.5, "d": 0.5},
    "initial": {"kind": "uniform"},
    "run": {"horizon": 1000, "seed": 3},
}


def raw(**changes):
    out = copy.deepcopy(BASE)
    for path, value in changes.items():
        keys = path.split("__")
        node = out
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        if value is None:
            node.pop(keys[-1], None)
        else:
            node[keys[-1]] = value
    return out


# -- config parsing -------------------------------------------------------------------------


def test_minimal_config_gets_default_tolerances():
    cfg = config_from_dict(raw())
    assert cfg.n == 5 and cfg.horizon == 1000 and cfg.runs is None
    assert cfg.tolerances.eps_conv == 1e-9 and cfg.tolerances.ceiling == 1e30
    assert cfg.probe_stride == 1000 and cfg.claims == {}


@pytest.mark.parametrize("path", ["n", "params__alpha", "params__beta", "params__b", "params__d",
                                  "initial", "run__horizon", "run__seed", "interaction__kind", "schedule"])
def test_required_keys_have_no_defaults(path):
    with pytest.raises(SemanticError):
        config_from_dict(raw(**{path: None}))


@pytest.mark.parametrize("path, value", [
    ("params__b", 1.0), ("params__d", 0.0), ("params__alpha", -0.1), ("params__beta", 0),
    ("run__horizon", 0), ("n", 4), ("interaction__kind", "teleport"), ("interaction__p", 1.5),
    ("claims", {"levitation": {}}), ("claims", {"divergence": {"min_fraction": 0}}),
    ("initial", {"kind": "explicit", "values": [1, 2]}), ("balance_mode", "sideways"),
    ("debug", {"forced_attention": [2, 0]}), ("params__alpha", "fast"), ("run__seed", -1),
])
def test_semantic_errors(path, value):
    with pytest.raises(SemanticError):
        config_from_dict(raw(**{path: value}))


def test_unreadable_inputs_are_parse_errors(tmp_path):
    with pytest.raises(ParseError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("n: [1, 2\n")
    with pytest.raises(ParseError):
        load_config(bad)
    with pytest.raises(ParseError):
        config_from_dict(raw(schedule={"frames": ["nowhere.graph"]}))
    with pytest.raises(ParseError):
        config_from_dict(["not", "a", "mapping"])


def test_claim_list_form_and_per_arc_overrides():
    cfg = config_from_dict(raw(claims=["convergence", "clustering"],
                               interaction={"kind": "bernoulli", "p": 0.5, "per_arc": [[0, 1, 0.9]]}))
    assert cfg.claims == {"convergence": {"min_fraction": 1.0}, "clustering": {"min_fraction": 1.0}}
    assert cfg.model.probability(0, 1) == 0.9
    assert cfg.echo()["interaction"]["per_arc"] == [[0, 1, 0.9]]


def test_echo_is_json_serialisable_and_complete():
    cfg = config_from_dict(raw(claims={"convergence": {}}))
    echo = json.loads(json.dumps(cfg.echo()))
    assert echo["params"] == {"alpha": 0.1, "beta": 0.1, "b": 0.5, "d": 0.5}
    assert echo["regimes"]["contractive"] is True
    assert echo["schedule"]["frames"][0][0] == [0, 1, "+"]


def test_shipped_fixtures_load():
    for name in ["theorem1", "theorem2i", "theorem2ii", "proposition3", "control", "frozen"]:
        cfg = load_config(FIXTURES / f"{name}.yaml")
        assert cfg.name == name


# -- validation ---------------------------------------------------------------------------------


def test_convergence_regime_flag():
    rep = validate_config(config_from_dict(raw()))
    assert rep.regimes["contractive"] and rep.regimes["alpha_plus_beta"] == pytest.approx(0.2)
    assert rep.regimes["alpha_plus_beta"] < 1 / 4


def test_floor_regime_flag():
    cfg = config_from_dict(raw(
        n=3, schedule={"inline": ["n 3\n0 1 +\n1 2 +\n2 0 +\n0 2 -\n2 1 -\n1 0 -\n"]},
        params={"alpha": 0.08, "beta": 1300, "b": 0.5, "d": 0.5}, claims={"divergence": {}}))
    rep = validate_config(cfg)
    assert rep.regimes["divergence_candidate"] and rep.regimes["floor_regime"]
    assert rep.regimes["beta_floor_threshold"] == 1296
    assert rep.assumptions["A4"] == {"holds": True, "K": 1}
    assert rep.assumptions["A5"] == {"holds": True, "K": 1}
    assert rep.ok and rep.regimes["divergence_proposition"]


def test_sign_flipping_schedule_warns_about_a3():
    cfg = config_from_dict(raw(schedule={"inline": ["n 5\n0 1 +\n1 2 +\n2 3 +\n3 4 +\n4 0 +\n",
                                                   "n 5\n0 1 -\n"]},
                               claims={"clustering": {}}))
    rep = validate_config(cfg)
    assert not rep.assumptions["A3"]["holds"]
    assert any("A3 violated" in w for w in rep.warnings)


def test_divergence_claim_without_a6_is_an_error():
    cfg = config_from_dict(raw(interaction={"kind": "full"}, claims={"divergence": {}}))
    rep = validate_config(cfg)
    assert not rep.ok and any("A6" in e for e in rep.errors)


def test_validation_does_not_alter_the_config():
    cfg = config_from_dict(raw(params={"alpha": 0.5, "beta": 0.5, "b": 0.5, "d": 0.5}, claims={"convergence": {}}))
    before = cfg.echo()
    rep = validate_config(cfg)
    assert cfg.echo() == before
    assert not rep.regimes["contractive"] and rep.warnings


# -- analyze ---------------------------------------------------------------------------------------


def test_analyze_three_cluster_graph(capsys):
    assert main(["analyze", str(FIXTURES / "three_clusters.graph")]) == 0
    out = capsys.readouterr().out
    assert "T_p = 3" in out


def test_analyze_negative_triangle(capsys):
    assert main(["analyze", str(FIXTURES / "triangle_negative.graph")]) == 0
    assert "not strongly balanced" in capsys.readouterr().out


def test_analyze_positive_cycle(capsys):
    assert main(["analyze", str(FIXTURES / "positive_cycle.graph")]) == 0
    assert "A4 holds with K=1" in capsys.readouterr().out


def test_analyze_balanced_schedule_json(capsys):
    assert main(["analyze", "--json", str(FIXTURES / "balanced4.schedule")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["bipartition"] == [[0, 2], [1, 3]]
    assert rep["windows"] == {"A2": 2, "A4": None, "A5": 2}


def test_analyze_reports_sign_conflicts():
    rep = structural_report(read_schedule(FIXTURES / "mixed5.schedule"))
    assert not rep["sign_consistent"] and rep["sign_conflicts"] == [[1, 2]]


def test_analyze_via_config_and_mode(capsys):
    assert main(["analyze", "--config", str(FIXTURES / "theorem2i.yaml"), "--mode", "classical"]) == 0
    assert "strong balance (classical)" in capsys.readouterr().out


# -- run commands ------------------------------------------------------------------------------------


def test_simulate_frozen_config_keeps_s0(tmp_path, capsys):
    assert main(["simulate", "--config", str(FIXTURES / "frozen.yaml"), "--out", str(tmp_path)]) == 0
    with open(tmp_path / "frozen_run0_probes.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) > 1
    for row in rows:
        assert [float(row[f"s_{i}"]) for i in range(3)] == [0.5, -0.25, 1.0]
    summary = json.loads((tmp_path / "frozen_run0.json").read_text())
    assert summary["config"]["name"] == "frozen"


def test_montecarlo_writes_report_and_sets_exit_status(tmp_path, capsys):
    cfg = FIXTURES / "proposition3.yaml"
    assert main(["montecarlo", "--config", str(cfg), "--runs", "10", "--out", str(tmp_path)]) == 0
    first = json.loads((tmp_path / "proposition3_report.json").read_text())
    assert first["runs"] == 10 and first["passed"]
    first.pop("generated_at")
    assert main(["montecarlo", "--config", str(cfg), "--runs", "10", "--out", str(tmp_path)]) == 0
    again = json.loads((tmp_path / "proposition3_report.json").read_text())
    again.pop("generated_at")
    assert first == again

    # the control regime cannot satisfy a divergence claim
    text = (FIXTURES / "control.yaml").read_text().replace("no_divergence", "divergence")
    failing = tmp_path / "control.yaml"
    failing.write_text(text.replace("opposed_cycles3.graph", str(FIXTURES / "opposed_cycles3.graph")))
    assert main(["montecarlo", "--config", str(failing), "--runs", "5", "--out", str(tmp_path)]) == 1


def test_sweep_endpoints_csv(tmp_path, capsys):
    args = ["sweep", "--config", str(FIXTURES / "proposition3.yaml"), "--betas", "0.01,1400",
            "--runs", "30", "--out", str(tmp_path)]
    assert main(args) == 0
    with open(tmp_path / "proposition3_sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [(float(r["beta"]), float(r["fraction"])) for r in rows] == [(0.01, 0.0), (1400.0, 1.0)]
    meta = json.loads((tmp_path / "proposition3_sweep.json").read_text())
    assert meta["monotone"] and meta["config"]["name"] == "proposition3"


def test_verify_convergence_suite_exits_zero(capsys):
    assert main(["verify", "theorem1"]) == 0
    assert "[PASS] theorem1" in capsys.readouterr().out


def test_verify_small_suites(capsys):
    assert main(["verify", "lemma5", "theorem4", "--runs", "10"]) == 0
    out = capsys.readouterr().out
    assert "2/2 suites passed" in out


@pytest.mark.parametrize("argv", [
    ["verify", "nope"],
    ["montecarlo"],
    ["simulate", "--config", "/does/not/exist.yaml"],
    ["analyze"],
    ["sweep", "--config", str(FIXTURES / "proposition3.yaml")],
    ["sweep", "--config", str(FIXTURES / "proposition3.yaml"), "--betas", "5,1"],
])
def test_usage_errors_exit_2(argv, capsys, tmp_path):
    if argv[0] == "sweep":
        argv = argv + ["--out", str(tmp_path)]
    assert main(argv) == 2


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2
