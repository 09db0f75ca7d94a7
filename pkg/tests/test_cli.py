import io
import json
import subprocess
import sys

import pytest

from sdvtest.cli import ARTIFACTS, main, shipped

CHART = str(shipped("cpds.chart"))
REQS = str(shipped("cpds.reqs"))
OVERRIDES = str(shipped("cpds.overrides"))


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_extract():
    code, out, _ = run("extract", CHART)
    lines = out.splitlines()
    assert code == 0 and len(lines) == 10
    assert lines[0].split()[0] == "IgnitionOff" and lines[0].split()[1].isdigit()


def test_extract_timeouts_only(tmp_path):
    chart = tmp_path / "t.chart"
    chart.write_text("chart T initial A state A state B transition A -> B after 3s\n")
    assert run("extract", str(chart)) == (0, "", "")


def test_extract_missing_and_bad(tmp_path):
    code, _, err = run("extract", str(tmp_path / "missing.chart"))
    assert code == 2 and "cannot read" in err
    bad = tmp_path / "bad.chart"
    bad.write_text("chart\n")
    assert run("extract", str(bad))[0] == 2


def test_map_with_and_without_overrides():
    code, out, err = run("map", CHART, "--overrides", OVERRIDES)
    assert code == 0 and err == "" and len(out.splitlines()) == 10
    assert "HVACAutoOverride -> Vehicle.Cabin.Infotainment.HVAC.AutoOverrideActive (1, manual)" in out
    code, out, err = run("map", CHART)
    assert code == 3 and "CLARIFY" in err


def test_threshold_monotonicity_visible():
    _, _, loose = run("map", CHART, "--threshold", "0.5")
    _, _, strict = run("map", CHART, "--threshold", "1")
    assert strict.count("CLARIFY") > loose.count("CLARIFY")


@pytest.mark.parametrize("value", ["0", "1.5", "abc"])
def test_threshold_domain(value):
    assert run("map", CHART, "--threshold", value)[0] == 2


def test_external_needs_endpoint(monkeypatch):
    monkeypatch.delenv("SDVTEST_ENDPOINT", raising=False)
    code, _, err = run("map", CHART, "--backend", "external")
    assert code == 2 and "endpoint" in err


def test_gen_unmapped(tmp_path):
    code, _, err = run("gen", CHART, REQS)
    assert code == 3 and "HornActive has no catalog mapping" in err


def test_gen_to_stdout_matches_golden():
    code, out, _ = run("gen", CHART, REQS, "--overrides", OVERRIDES)
    assert code == 0 and out == shipped("cpds_hvac.feature").read_text()


def test_run_exit_codes(tmp_path):
    golden = str(shipped("cpds_hvac.feature"))
    assert run("run", golden)[0] == 0
    assert run("run", golden, "--sut", "mutant-no-reset")[0] == 1
    unbound = tmp_path / "u.feature"
    unbound.write_text("Feature: U\nScenario: s\n  Given the moon is full\n")
    assert run("run", str(unbound))[0] == 3
    broken = tmp_path / "b.feature"
    broken.write_text("Feature: B\nScenario: s\n  And x is true\n")
    assert run("run", str(broken))[0] == 2
    assert run("run", golden, "--ack-delay", "0")[0] == 2
    assert run("bogus")[0] == 2


def test_run_structured_out(tmp_path):
    report = tmp_path / "r.json"
    code, out, _ = run("run", str(shipped("cpds_hvac.feature")), "--output", "structured", "--out", str(report))
    assert code == 0
    assert json.loads(out) == json.loads(report.read_text())
    assert json.loads(out)["verdict"] == "passed"


def test_run_several_files(tmp_path):
    golden = str(shipped("cpds_hvac.feature"))
    code, _, _ = run("run", golden, golden, "--out", str(tmp_path / "r.json"))
    assert code == 0
    assert len(json.loads((tmp_path / "r.json").read_text())) == 2


def test_pipeline_equals_composition(tmp_path):
    auto, manual = tmp_path / "auto", tmp_path / "manual"
    assert run("pipeline", "--out-dir", str(auto))[0] == 0
    manual.mkdir()
    m = {k: str(manual / v) for k, v in ARTIFACTS.items()}
    assert run("extract", CHART, "--out", m["signals"])[0] == 0
    assert run("map", CHART, "--overrides", OVERRIDES, "--out", m["mappings"])[0] == 0
    assert run("gen", CHART, REQS, "--mappings", m["mappings"], "--out", m["feature"],
               "--script-out", m["script"])[0] == 0
    assert run("run", m["feature"], "--out", m["report"])[0] == 0
    for name in ("signals", "mappings", "feature", "script"):
        assert (auto / ARTIFACTS[name]).read_bytes() == (manual / ARTIFACTS[name]).read_bytes()
    a = json.loads((auto / ARTIFACTS["report"]).read_text())
    b = json.loads((manual / ARTIFACTS["report"]).read_text())
    a.pop("meta"), b.pop("meta")
    assert a == b
    assert run("run", m["script"])[0] == 0


def test_pipeline_gap_without_overrides(tmp_path):
    empty = tmp_path / "none.overrides"
    empty.write_text("")
    assert run("pipeline", "--out-dir", str(tmp_path / "o"), "--overrides", str(empty))[0] == 3


def test_prompt_command():
    code, out, _ = run("prompt", "map")
    assert code == 0 and "[VSS catalog]" not in out and "IsChildDetected" in out
    code, out, _ = run("prompt", "codegen", "--feature", str(shipped("cpds_hvac.feature")))
    assert code == 0 and "Scenario: HVAC adjustment intervention" in out
    assert run("prompt", "codegen")[0] == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "sdvtest", "extract", CHART], capture_output=True, text=True)
    assert proc.returncode == 0 and len(proc.stdout.splitlines()) == 10
