import csv
import json
from pathlib import Path

import pytest

from acpc_synth.cli import main
from acpc_synth.formats import dump_model

from test_formats import HOA_GF_B, mini


@pytest.fixture
def case_files(tmp_path, case_model_text, case_hoa_text):
    m = tmp_path / "model.json"
    h = tmp_path / "spec.hoa"
    m.write_text(case_model_text, encoding="utf-8")
    h.write_text(case_hoa_text, encoding="utf-8")
    return m, h


def test_inspect(case_files, capsys):
    m, h = case_files
    assert main(["inspect", str(m), "--hoa", str(h)]) == 0
    out = dict(line.split("\t", 1) for line in capsys.readouterr().out.splitlines() if "\t" in line)
    assert out["states"] == "10"
    assert int(out["product_states"]) <= 50
    assert int(out["maecs"]) >= 1


def test_synth_and_simulate(case_files, tmp_path, capsys):
    m, h = case_files
    st = tmp_path / "st.json"
    rep = tmp_path / "synth.json"
    assert main(["synth", str(m), str(h), "-o", str(st), "--report", str(rep)]) == 0
    doc = json.loads(rep.read_text())
    assert doc["optimal_value"] == pytest.approx(16.0846560847, abs=1e-8)
    out = tmp_path / "sim"
    assert main(["simulate", str(st), str(m), "--rounds", "5", "--batch", "2", "--out-dir", str(out)]) == 0
    for name in ("report.json", "rounds.csv", "acpc_trajectory.png", "cycles_per_round.png"):
        assert (out / name).exists()
    rows = list(csv.DictReader((out / "rounds.csv").open()))
    assert len(rows) == 10
    first = (out / "report.json").read_bytes()
    assert main(["simulate", str(st), str(m), "--rounds", "5", "--batch", "2", "--out-dir", str(out),
                 "--jobs", "2"]) == 0
    assert (out / "report.json").read_bytes() == first
    capsys.readouterr()


def test_synth_infeasible_writes_nothing(tmp_path, capsys):
    m = tmp_path / "m.json"
    doc = json.loads(mini())
    doc["transitions"] = [{"from": "s0", "action": "go", "to": "s1", "prob": 1.0},
                          {"from": "s1", "action": "go", "to": "s1", "prob": 1.0}]
    m.write_text(json.dumps(doc))
    h = tmp_path / "a.hoa"
    h.write_text(HOA_GF_B)
    st = tmp_path / "st.json"
    assert main(["synth", str(m), str(h), "-o", str(st)]) == 2
    assert not st.exists()
    assert "infeasible" in capsys.readouterr().err


def test_input_errors(tmp_path, capsys):
    m = tmp_path / "m.json"
    m.write_text(mini(bogus=True))
    assert main(["inspect", str(m)]) == 3
    assert main(["inspect", str(tmp_path / "missing.json")]) == 3
    h = tmp_path / "a.hoa"
    h.write_text("HOA: v1\n")
    m.write_text(mini())
    assert main(["synth", str(m), str(h), "-o", str(tmp_path / "x.json")]) == 3
    assert not (tmp_path / "x.json").exists()
    capsys.readouterr()


def test_action_cap_exit_code(case_files, tmp_path, capsys):
    m, h = case_files
    assert main(["synth", str(m), str(h), "-o", str(tmp_path / "x.json"), "--action-cap", "10"]) == 4
    assert not (tmp_path / "x.json").exists()
    capsys.readouterr()


def test_oracle_on_small_model(tmp_path, capsys):
    m = tmp_path / "m.json"
    m.write_text(mini())
    h = tmp_path / "a.hoa"
    h.write_text(HOA_GF_B)
    assert main(["oracle", str(m), "--hoa", str(h)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and not any(x.startswith("FAIL") for x in lines)
    assert any(x.startswith("PASS") for x in lines)


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0


def test_model_dump_is_parseable_by_cli(tmp_path, case_model, capsys):
    p = tmp_path / "m.json"
    p.write_text(dump_model(case_model))
    assert main(["inspect", str(p)]) == 0
    capsys.readouterr()


GOLDEN = Path(__file__).parent / "golden"


def test_inspect_golden(case_files, capsys):
    m, h = case_files
    assert main(["inspect", str(m), "--hoa", str(h)]) == 0
    assert capsys.readouterr().out == (GOLDEN / "inspect_case_study.txt").read_text(encoding="utf-8")


def test_hoa_canonical_golden(case_dra):
    from acpc_synth.formats import dump_hoa, parse_hoa
    text = (GOLDEN / "case_study_canonical.hoa").read_text(encoding="utf-8")
    assert dump_hoa(case_dra) == text
    assert dump_hoa(parse_hoa(text)) == text


def test_simulate_zero_rounds(case_files, tmp_path, capsys):
    m, h = case_files
    st = tmp_path / "st.json"
    assert main(["synth", str(m), str(h), "-o", str(st)]) == 0
    out = tmp_path / "sim0"
    assert main(["simulate", str(st), str(m), "--rounds", "0", "--out-dir", str(out), "--no-plots"]) == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["runs"][0]["rounds"] == [] and doc["runs"][0]["total_cost"] == 0
    capsys.readouterr()
