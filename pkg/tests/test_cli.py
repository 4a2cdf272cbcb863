"""End-to-end command-line runs: schemas, exit codes, precedence, and
byte-level reproducibility."""

import json
import subprocess
import sys

import jsonschema
import pytest

from adiadio.cli import main
from adiadio.schemas import (
    DECISION_SCHEMA,
    DISTRIBUTION_SCHEMA,
    FLOW_SCHEMA,
    ODEFLOW_SCHEMA,
    ORACLE_SCHEMA,
    PARSE_SCHEMA,
)

MANIFEST_KEYS = {"command", "equation", "config", "versions", "schema"}


def _run_json(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out)


# -- parse --------------------------------------------------------------

def test_parse_emits_schema_conforming_json(capsys):
    code, payload = _run_json(["parse", "x^2 + y - 3"], capsys)
    assert code == 0
    jsonschema.validate(payload, PARSE_SCHEMA)
    assert payload["num_vars"] == 2
    assert payload["total_degree"] == 2
    assert set(payload["manifest"].keys()) == MANIFEST_KEYS


def test_parse_folds_named_constants(capsys):
    code, payload = _run_json(["parse", "x - n", "--const", "n=6"], capsys)
    assert code == 0
    constants = {tuple(t["exponents"]): t["coefficient"] for t in payload["terms"]}
    assert constants[(0,)] == -6


def test_parse_error_exits_2(capsys):
    assert main(["parse", "x +"]) == 2
    assert "parse error" in capsys.readouterr().err


def test_bad_const_exits_2(capsys):
    assert main(["parse", "x - n", "--const", "n=six"]) == 2


# -- flow ---------------------------------------------------------------

def test_flow_json_output(tmp_path, capsys):
    out = tmp_path / "flow.json"
    code = main(["flow", "x - 2", "--cutoff", "6", "--levels", "3",
                 "--grid", "21", "--out", str(out)])
    assert code == 0
    payload = json.loads(out.read_text())
    jsonschema.validate(payload, FLOW_SCHEMA)
    assert len(payload["s_grid"]) == 21
    assert len(payload["curves"]) == 21
    assert all(len(row) == 3 for row in payload["curves"])


def test_flow_csv_with_manifest_sidecar(tmp_path):
    out = tmp_path / "flow.csv"
    code = main(["flow", "x - 2", "--cutoff", "6", "--levels", "3",
                 "--grid", "11", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "s,E_0,E_1,E_2"
    assert len(lines) == 12
    manifest = json.loads((tmp_path / "flow.csv.manifest.json").read_text())
    assert manifest["command"] == "flow"
    assert manifest["config"]["cutoff"] == 6


def test_flow_csv_to_stdout(capsys):
    code = main(["flow", "x - 2", "--cutoff", "4", "--levels", "2",
                 "--grid", "5"])
    assert code == 0
    captured = capsys.readouterr()
    assert captured.out.startswith("s,E_0,E_1")
    assert "tracked 2 curves" in captured.err


def test_flow_gap_report(tmp_path):
    out = tmp_path / "flow.json"
    code = main(["flow", "x - 2", "--cutoff", "8", "--levels", "3",
                 "--grid", "41", "--gap-report", "--out", str(out)])
    assert code == 0
    payload = json.loads(out.read_text())
    jsonschema.validate(payload, FLOW_SCHEMA)
    gap = payload["gap_report"]
    assert gap["gap"] > 0.0
    assert gap["t_min"] > 0.0


def test_constant_equation_exits_2(capsys):
    assert main(["flow", "x - x + 1", "--cutoff", "4"]) == 2
    assert "nothing to simulate" in capsys.readouterr().err


# -- evolve -------------------------------------------------------------

def test_evolve_json_output(tmp_path):
    out = tmp_path / "dist.json"
    code = main(["evolve", "x - 2", "--cutoff", "8", "--T", "5",
                 "--out", str(out)])
    assert code == 0
    payload = json.loads(out.read_text())
    jsonschema.validate(payload, DISTRIBUTION_SCHEMA)
    assert payload["source"] == "truncated_model"
    assert payload["stats"]["method"] in ("krylov", "eigh")
    total = sum(entry["p"] for entry in payload["probabilities"])
    assert total == pytest.approx(1.0, abs=1e-9)


def test_evolve_requires_total_time(capsys):
    assert main(["evolve", "x - 2", "--cutoff", "8"]) == 2
    assert "--T" in capsys.readouterr().err


# -- decide -------------------------------------------------------------

def test_decide_solvable_exits_0(tmp_path, capsys):
    out = tmp_path / "verdict.json"
    code = main(["decide", "x - 3", "--reference-cutoff", "10",
                 "--max-cutoff", "8", "--out", str(out)])
    assert code == 0
    payload = json.loads(out.read_text())
    jsonschema.validate(payload, DECISION_SCHEMA)
    assert payload["verdict"] == "has_solution"
    assert payload["witness"] == [3]
    assert "witness (3,)" in capsys.readouterr().err


def test_decide_unsolvable_exits_1(tmp_path):
    out = tmp_path / "verdict.json"
    code = main(["decide", "2x - 3", "--reference-cutoff", "10",
                 "--max-cutoff", "8", "--out", str(out)])
    assert code == 1
    payload = json.loads(out.read_text())
    jsonschema.validate(payload, DECISION_SCHEMA)
    assert payload["verdict"] == "no_solution_within_confidence"


def test_decide_inconclusive_exits_4(tmp_path):
    out = tmp_path / "verdict.json"
    code = main(["decide", "x - 20", "--reference-cutoff", "12",
                 "--max-cutoff", "4", "--initial-cutoff", "3",
                 "--cutoff-step", "1", "--initial-T", "40",
                 "--max-T", "40", "--out", str(out)])
    assert code == 4
    payload = json.loads(out.read_text())
    assert payload["verdict"] == "inconclusive"


def test_decide_reruns_are_byte_identical(capsys):
    argv = ["decide", "x - 3", "--reference-cutoff", "10",
            "--max-cutoff", "8", "--seed", "99"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    second = capsys.readouterr().out
    assert first == second


# -- odeflow ------------------------------------------------------------

def test_odeflow_json_output(tmp_path):
    out = tmp_path / "ode.json"
    code = main(["odeflow", "x - 2", "--cutoff", "8", "--levels", "9",
                 "--out", str(out)])
    assert code == 0
    payload = json.loads(out.read_text())
    jsonschema.validate(payload, ODEFLOW_SCHEMA)
    assert abs(payload["e0_extrapolated"]) < 1e-6
    assert len(payload["checkpoints"]) == 3


def test_odeflow_levels_clamp_to_basis(tmp_path):
    out = tmp_path / "ode.json"
    code = main(["odeflow", "x - 2", "--cutoff", "8", "--levels", "50",
                 "--out", str(out)])
    assert code == 0


def test_odeflow_csv_output(tmp_path):
    out = tmp_path / "ode.csv"
    code = main(["odeflow", "x - 2", "--cutoff", "8", "--levels", "9",
                 "--out", str(out)])
    assert code == 0
    header = out.read_text().splitlines()[0]
    assert header.startswith("s,E_0")
    assert header.endswith("min_gap,ortho_defect")
    assert (tmp_path / "ode.csv.manifest.json").exists()


def test_odeflow_drift_exits_70(capsys):
    code = main(["odeflow", "x - 2", "--cutoff", "8", "--levels", "5"])
    assert code == 70
    assert "flow error" in capsys.readouterr().err


# -- oracle -------------------------------------------------------------

def test_oracle_finds_all_box_solutions(capsys):
    code, payload = _run_json(
        ["oracle", "x^2 + y^2 - 25", "--box", "6,6"], capsys)
    assert code == 0
    jsonschema.validate(payload, ORACLE_SCHEMA)
    assert payload["count"] == 4
    assert payload["solutions"] == [[0, 5], [3, 4], [4, 3], [5, 0]]
    assert payload["volume"] == 49


def test_oracle_requires_box(capsys):
    assert main(["oracle", "x - 1"]) == 2
    assert "--box" in capsys.readouterr().err


def test_oracle_volume_cap(capsys):
    code = main(["oracle", "x + y - 1", "--box", "2000,2000",
                 "--volume-cap", "1000"])
    assert code == 2


# -- option plumbing ----------------------------------------------------

def test_config_file_supplies_defaults(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("cutoff = 6\nlevels = 3\ngrid = 11\n")
    out = tmp_path / "flow.json"
    code = main(["flow", "x - 2", "--config", str(cfg), "--out", str(out)])
    assert code == 0
    manifest = json.loads(out.read_text())["manifest"]
    assert manifest["config"]["cutoff"] == 6
    assert manifest["config"]["levels"] == 3


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("cutoff = 6\nlevels = 3\ngrid = 11\n")
    out = tmp_path / "flow.json"
    code = main(["flow", "x - 2", "--config", str(cfg),
                 "--cutoff", "4", "--out", str(out)])
    assert code == 0
    manifest = json.loads(out.read_text())["manifest"]
    assert manifest["config"]["cutoff"] == 4
    assert manifest["config"]["levels"] == 3


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("cutof = 6\n")
    assert main(["flow", "x - 2", "--config", str(cfg)]) == 2
    assert "unknown config key" in capsys.readouterr().err


def test_missing_config_file_exits_2(tmp_path):
    assert main(["flow", "x - 2", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_jobs_env_variable(tmp_path, monkeypatch):
    monkeypatch.setenv("ADIADIO_JOBS", "2")
    out = tmp_path / "flow.json"
    code = main(["flow", "x - 2", "--cutoff", "6", "--levels", "3",
                 "--grid", "11", "--out", str(out)])
    assert code == 0


def test_bad_jobs_env_exits_2(monkeypatch, capsys):
    monkeypatch.setenv("ADIADIO_JOBS", "many")
    assert main(["flow", "x - 2", "--cutoff", "6", "--levels", "3"]) == 2
    assert "jobs" in capsys.readouterr().err


def test_version_flag():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "adiadio", "parse", "x - 1"],
        capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    payload = json.loads(proc.stdout)
    assert payload["manifest"]["command"] == "parse"
