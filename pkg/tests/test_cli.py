import json

import pytest

from tablescene.cli import main, write_outputs
from tablescene.harness import reference_tabletop_evidence
from tablescene.knowledge.kb import DEFAULT_KB_TEXT


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def stack(tmp_path):
    assert run("synth", "--kind", "stack", "--objects", 2, "--seed", 3, "--out", tmp_path) == 0
    return tmp_path / "scenario.json"


def test_synth_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("synth", "--kind", "Mixed", "--objects", 4, "--seed", 5, "--out", a) == 0
    out = capsys.readouterr().out
    assert run("--seed", 5, "--out", b, "synth", "--kind", "mixed", "--objects", 4) == 0
    assert (a / "scenario.json").read_bytes() == (b / "scenario.json").read_bytes()
    assert "support table -> O1" in out and "hidden supporter" in out


@pytest.mark.parametrize("argv", [["synth", "--objects", 0], ["synth", "--kind", "pile"], ["frobnicate"],
                                  ["analyze"]])
def test_usage_errors(tmp_path, argv):
    assert run(*argv, "--out", tmp_path) == 2


def test_analyze_deterministic(tmp_path, stack):
    outs = []
    for name in ("x", "y"):
        assert run("analyze", "--scenario", stack, "--seed", 1, "--iterations", 5, "--out", tmp_path / name) == 0
        outs.append({f: (tmp_path / name / f).read_bytes()
                     for f in ("graph.json", "graph.dot", "marginals.json", "trace.jsonl")})
    assert outs[0] == outs[1]
    g = json.loads(outs[0]["graph.json"])
    assert ["O1", "O2"] in g["support"]
    assert len(outs[0]["trace.jsonl"].splitlines()) == 5


def test_analyze_flags_hidden_support(tmp_path, capsys):
    run("synth", "--kind", "HiddenSupport", "--objects", 2, "--seed", 0, "--out", tmp_path)
    assert run("analyze", "--scenario", tmp_path / "scenario.json", "--out", tmp_path) == 0
    assert "hidden(O1)" in capsys.readouterr().out


def test_estimate(tmp_path, capsys):
    run("synth", "--objects", 2, "--outliers", 0.3, "--seed", 4, "--out", tmp_path)
    assert run("estimate", "--scenario", tmp_path / "scenario.json", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "estimates.json").read_text())
    assert set(rep) == {"1", "2"}
    assert (tmp_path / "estimated_scene.json").exists()


def test_infer_reference_evidence(tmp_path, capsys):
    ev = tmp_path / "ev.db"
    ev.write_text(reference_tabletop_evidence().to_text())
    assert run("infer", "--evidence", ev, "--mode", "gibbs", "--seed", 2, "--out", tmp_path) == 0
    m = json.loads((tmp_path / "marginals.json").read_text())
    hidden = {k: v for k, v in m.items() if k.startswith("hidden(")}
    assert max(hidden, key=hidden.get) == "hidden(O5)" and hidden["hidden(O5)"] > 0.6
    assert m["false(O6)"] > 0.6


def test_infer_table_only(tmp_path):
    ev = tmp_path / "ev.db"
    ev.write_text("")
    assert run("infer", "--evidence", ev, "--out", tmp_path) == 0
    m = json.loads((tmp_path / "marginals.json").read_text())
    assert m["false(table)"] == 0.0 and m["hidden(table)"] == 0.0


def test_infer_exact_matches_gibbs(tmp_path):
    ev = tmp_path / "ev.db"
    ev.write_text("stable(O1)\nhover(O1)\n!stable(O2)\ncontact(O2,table)\ncontact(table,O2)\nhigher(O2,table)\n")
    run("infer", "--evidence", ev, "--mode", "exact", "--out", tmp_path / "e")
    run("infer", "--evidence", ev, "--mode", "gibbs", "--out", tmp_path / "g")
    e = json.loads((tmp_path / "e" / "marginals.json").read_text())
    g = json.loads((tmp_path / "g" / "marginals.json").read_text())
    assert max(abs(e[k] - g[k]) for k in e) <= 0.03


def test_infer_parse_error_names_line(tmp_path, capsys):
    ev = tmp_path / "ev.db"
    ev.write_text("stable(O1)\nstable(O1\n")
    assert run("infer", "--evidence", ev, "--out", tmp_path) == 3
    assert "ev.db:2:" in capsys.readouterr().err


def test_config_parse_error(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("chain.seed = 1\nnonsense\n")
    assert run("--config", cfg, "synth", "--out", tmp_path) == 3
    assert "run.cfg:2:" in capsys.readouterr().err


def test_oracle_pass(stack, capsys):
    assert run("oracle", "--scenario", stack) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 4


def test_oracle_detects_corrupted_kb(stack, tmp_path, capsys):
    bad = tmp_path / "bad.kb"
    bad.write_text(DEFAULT_KB_TEXT.replace("log(0.90/0.10) stable(o1) -> !false(o1)",
                                           "log(0.80/0.20) stable(o1) -> !false(o1)"))
    assert run("oracle", "--scenario", stack, "--kb", bad) == 5
    captured = capsys.readouterr()
    assert "FAIL marginals" in captured.out and "false(" in captured.err


def test_oracle_capacity(tmp_path):
    run("synth", "--objects", 5, "--seed", 1, "--out", tmp_path)
    assert run("oracle", "--scenario", tmp_path / "scenario.json") == 3


def test_infeasible_initial_scene(tmp_path, capsys):
    run("synth", "--kind", "FalseEstimate", "--objects", 2, "--seed", 0, "--out", tmp_path)
    kb = tmp_path / "strict.kb"
    kb.write_text(DEFAULT_KB_TEXT + "HARD !intersect(o1,o2)\n")
    assert run("analyze", "--scenario", tmp_path / "scenario.json", "--kb", kb, "--out", tmp_path) == 4
    assert "violated" in capsys.readouterr().err
    assert not (tmp_path / "graph.json").exists()


def test_write_outputs_is_all_or_nothing(tmp_path):
    files = {"a.txt": "one", "b.txt": None}
    with pytest.raises(TypeError):
        write_outputs(tmp_path, files)
    assert list(tmp_path.iterdir()) == []
