import json
import os
import subprocess
import sys

import pytest

from darkbeam import parse_config
from darkbeam.cli import Scenario, main, run_scenario, worker_count
from darkbeam.config import apply_overrides
from darkbeam.errors import InvariantError, SchemaError

MINIMAL = {"params": {"alpha": 10, "r": 0.05, "gamma_tilde": 50},
           "stokes": {"kind": "TanhRampDown"}}


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_minimal_config_fills_defaults():
    cfg = parse_config(MINIMAL)
    res = cfg.resolved
    assert res["stokes"]["omega_max"] == 100.0
    assert res["grid"]["nz"] == 512
    assert res["velocities"]["dispersion_factor"] == 0.5
    assert res["input"]["pulse"]["t0"] == 10.0
    params, profile, velocities, grid, qin = cfg
    assert params.alpha == 10 and grid.nt > 0 and qin.N == 10


def test_weights_must_sum_to_one():
    doc = {**MINIMAL, "velocities": {"classes": [{"k": 0.1, "xi": 0.5}, {"k": 0.1, "xi": 0.4}]}}
    with pytest.raises(InvariantError, match="sum to 1"):
        parse_config(doc)


def test_unknown_key_reports_pointer():
    with pytest.raises(SchemaError) as info:
        parse_config({**MINIMAL, "stokes": {"kind": "TanhRampDown", "slope": 3}})
    assert info.value.pointer == "/stokes"
    with pytest.raises(SchemaError) as info:
        parse_config({"params": {"alpha": "ten", "r": 0.05, "gamma_tilde": 1}})
    assert info.value.pointer == "/params/alpha"


def test_invariant_violation_named():
    with pytest.raises(InvariantError, match="alpha"):
        parse_config({"params": {"alpha": -1, "r": 0.05, "gamma_tilde": 1}})


def test_overrides():
    doc = apply_overrides(MINIMAL, ["params.alpha=30", "stokes.kind=CosSquaredRamp",
                                    "sweep.x_values=[0,0.1]"])
    assert doc["params"]["alpha"] == 30
    assert doc["stokes"]["kind"] == "CosSquaredRamp"
    assert MINIMAL["params"]["alpha"] == 10
    with pytest.raises(SchemaError):
        apply_overrides(MINIMAL, ["params.alpha"])


def test_config_from_text_and_path(tmp_path):
    a = parse_config(json.dumps(MINIMAL))
    b = parse_config(write(tmp_path, MINIMAL))
    assert a.resolved == b.resolved
    with pytest.raises(SchemaError):
        parse_config("{not json")


def test_exit_codes(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    assert main(["feasibility", "--config", str(cfg), "--out", str(tmp_path / "ok")]) == 0
    bad = write(tmp_path, {"params": {"alpha": 1}}, "bad.json")
    assert main(["transfer", "--config", str(bad), "--out", str(tmp_path / "b")]) == 2
    assert main(["transfer", "--config", str(cfg), "--out", str(tmp_path / "p"),
                 "--set", "params.r=-0.05"]) == 3
    assert main(["feasibility", "--config", str(cfg), "--out", str(tmp_path / "a"),
                 "--set", "params.x=1.0"]) == 4
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["assertions"]["two_photon"] is False
    assert json.loads((tmp_path / "p" / "summary.json").read_text())["error_type"] \
        == "NonPositiveVelocity"


def test_transfer_artifacts(tmp_path):
    out = tmp_path / "t"
    assert run_scenario(Scenario("transfer", write(tmp_path, MINIMAL), out)) == 0
    assert (out / "fig2.csv").read_text().startswith("z,n_mean,m_mean,n_var,m_var,omega_scaled")
    assert (out / "transfer_map.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and summary["assertions"]["interior_variance_peak"]


def test_provenance_regenerates(tmp_path):
    first = tmp_path / "one"
    run_scenario(Scenario("transfer", write(tmp_path, MINIMAL), first, ["params.alpha=15"]))
    second = tmp_path / "two"
    run_scenario(Scenario("transfer", first / "resolved_config.json", second))
    assert (first / "fig2.csv").read_bytes() == (second / "fig2.csv").read_bytes()
    assert (first / "resolved_config.json").read_text() == \
        (second / "resolved_config.json").read_text()


def test_sweep_deterministic_across_pool_sizes(tmp_path, monkeypatch):
    cfg = write(tmp_path, MINIMAL)
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("DARKBEAM_THREADS", threads)
        assert worker_count() == int(threads)
        out = tmp_path / f"s{threads}"
        assert run_scenario(Scenario("sweep", cfg, out)) == 0
        outs.append((out / "sweep.csv").read_bytes())
    assert outs[0] == outs[1]
    rows = outs[0].decode().splitlines()
    assert rows[0].split(",")[:3] == ["x", "eta", "bound"]
    assert len(rows) == 10


def test_entangle_scenario(tmp_path):
    out = tmp_path / "e"
    assert run_scenario(Scenario("entangle", write(tmp_path, MINIMAL), out)) == 0
    data = json.loads((out / "entangle.json").read_text())
    assert data["duan_out"] < 2.0


def test_unknown_scenario():
    with pytest.raises(SchemaError):
        Scenario("plot", None, ".")


def test_console_entry_point(tmp_path):
    env = {**os.environ, "DARKBEAM_THREADS": "2"}
    proc = subprocess.run(
        [sys.executable, "-m", "darkbeam.cli", "feasibility", "--out", str(tmp_path / "c")],
        capture_output=True, text=True, env=env,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "c" / "feasibility.json").exists()


def test_repo_schema_in_sync():
    from pathlib import Path

    from darkbeam.config import SCHEMA

    root = Path(__file__).resolve().parents[1]
    doc = json.loads((root / "docs" / "config_schema.json").read_text())
    doc.pop("$schema")
    doc.pop("title")
    assert doc == json.loads(json.dumps(SCHEMA))
    parse_config(root / "configs" / "default.json")
