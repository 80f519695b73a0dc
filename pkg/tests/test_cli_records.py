import csv
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from gengxue.cli import main
from gengxue.records import NORMS_COLUMNS, TRACES_COLUMNS, load_record, read_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMOOTH = """
[model]
family = geng_xue
[policy]
t_end = 0.2
dt_init = 0.02
output_stride = 2
[initial]
kind = gaussian_pair
amp_u = 0.3
amp_v = 0.4
center_v = 1.0
width_v = 1.5
[tracking]
x0 = 0.0, 1.0
[certificate]
x0 = 0.0
"""


def _write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_riccati_command(capsys):
    assert main(["riccati", "--a", "1", "--b", "1", "--f0", "-2"]) == 0
    assert capsys.readouterr().out.strip() == "bound=0.549306 numeric=0.549306"
    assert main(["riccati", "--a", "1", "--b", "1", "--f0", "-0.5"]) == 1


def test_usage_errors_exit_64():
    with pytest.raises(SystemExit) as err:
        main(["riccati", "--a", "1"])
    assert err.value.code == 64
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 64


def test_bad_config_exit_1(tmp_path, capsys):
    p = _write(tmp_path, SMOOTH.replace("t_end = 0.2", "t_end = soon"))
    assert main(["run", str(p), "--output-dir", str(tmp_path / "o")]) == 1
    assert "policy.t_end" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.ini")]) == 1


def test_run_writes_record(tmp_path, capsys):
    p = _write(tmp_path, SMOOTH)
    out = tmp_path / "rec"
    assert main(["run", str(p), "--output-dir", str(out)]) == 0
    assert "verdict=completed" in capsys.readouterr().out
    assert {f.name for f in out.iterdir()} == {"norms.csv", "traces.csv", "certificate.json", "record.json"}
    with open(out / "norms.csv") as fh:
        assert tuple(next(csv.reader(fh))) == NORMS_COLUMNS
    with open(out / "traces.csv") as fh:
        assert tuple(next(csv.reader(fh))) == TRACES_COLUMNS
    norms = read_csv(out / "norms.csv")
    assert norms["t"][0] == 0.0 and norms["t"][-1] == 0.2
    assert np.all(np.diff(norms["criterion_integral_cum"]) >= 0)
    traces = read_csv(out / "traces.csv")
    assert sorted(set(traces["x0"])) == [0.0, 1.0]
    rec = load_record(out)
    assert rec["verdict"] == "completed" and rec["exit_code"] == 0
    assert rec["certificate"]["certified"] is False
    assert json.loads((out / "certificate.json").read_text())["schema_version"] == 1
    assert not list(out.glob(".*.tmp"))


def test_report_and_replay(tmp_path, capsys):
    p = _write(tmp_path, SMOOTH)
    out = tmp_path / "rec"
    assert main(["run", str(p), "--output-dir", str(out)]) == 0
    assert main(["report", str(out)]) == 0
    text = capsys.readouterr().out
    assert "verdict: completed" in text and "prop41: PASS" in text
    assert main(["replay", str(out), "--output-dir", str(tmp_path / "again")]) == 0
    assert (out / "norms.csv").read_bytes() == (tmp_path / "again" / "norms.csv").read_bytes()
    assert (out / "traces.csv").read_bytes() == (tmp_path / "again" / "traces.csv").read_bytes()


def test_report_schema_check(tmp_path):
    d = tmp_path / "r"
    d.mkdir()
    (d / "record.json").write_text(json.dumps({"schema_version": 99}))
    assert main(["report", str(d)]) == 1
    assert main(["report", str(tmp_path / "nothing")]) == 1


def test_certify_command(tmp_path, capsys):
    out = tmp_path / "cert"
    assert main(["certify", str(CONFIGS / "steep_thm13.ini"), "--output-dir", str(out)]) == 0
    line = capsys.readouterr().out
    assert "theorem=thm13 certified=True" in line
    cert = json.loads((out / "certificate.json").read_text())["certificate"]
    assert cert["hypotheses_met"] == {"slope_below_threshold": True, "v0_positive": True}
    p = _write(tmp_path, SMOOTH.replace("[certificate]\nx0 = 0.0\n", ""))
    assert main(["certify", str(p)]) == 1


def test_predicted_blowup_exit_0(tmp_path, capsys):
    assert main(["run", str(CONFIGS / "steep_thm13.ini"), "--output-dir", str(tmp_path / "s")]) == 0
    assert "verdict=blowup_detected" in capsys.readouterr().out
    rec = load_record(tmp_path / "s")
    cert = rec["certificate"]
    assert cert["observed_breaking_time"] <= cert["predicted_bound"]


def test_unpredicted_blowup_exit_2(tmp_path):
    text = SMOOTH.replace("amp_u = 0.3\namp_v = 0.4\ncenter_v = 1.0\nwidth_v = 1.5", "amp_u = 2.0\namp_v = 2.0")
    text = text.replace("t_end = 0.2", "t_end = 3.0").replace("[certificate]\nx0 = 0.0\n", "")
    p = _write(tmp_path, text + "[run]\nbesov = false\n")
    assert main(["run", str(p), "--output-dir", str(tmp_path / "o")]) == 2
    assert load_record(tmp_path / "o")["verdict"] == "blowup_detected"


def test_step_budget_exit_3(tmp_path):
    p = _write(tmp_path, SMOOTH.replace("output_stride = 2", "output_stride = 2\nmax_steps = 3"))
    assert main(["run", str(p), "--output-dir", str(tmp_path / "o")]) == 3
    assert load_record(tmp_path / "o")["extras"]["max_steps_hit"] is True


def test_output_env(tmp_path, monkeypatch):
    monkeypatch.setenv("GENGXUE_OUTPUT_ROOT", str(tmp_path / "root"))
    p = _write(tmp_path, SMOOTH, "named.ini")
    assert main(["run", str(p)]) == 0
    assert (tmp_path / "root" / "named" / "record.json").exists()


def test_sweep(tmp_path, capsys):
    p = _write(tmp_path, SMOOTH.replace("t_end = 0.2", "t_end = 0.05"))
    out = tmp_path / "sw"
    rc = main(["sweep", str(p), "--param", "initial.amp_u=0.1,0.2", "--param", "grid.N=256,512",
               "--workers", "2", "--output-dir", str(out)])
    assert rc == 0
    with open(out / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert [(r["initial.amp_u"], r["grid.N"]) for r in rows] == [
        ("0.1", "256"), ("0.1", "512"), ("0.2", "256"), ("0.2", "512")]
    assert all(r["verdict"] == "completed" for r in rows)
    assert (out / "point_003" / "norms.csv").exists()
    assert main(["sweep", str(p), "--param", "grid.N=100", "--output-dir", str(out)]) == 1
    assert main(["sweep", str(p), "--param", "nodot=1"]) == 1


def test_samples_file_relative_to_config(tmp_path):
    from gengxue.initial import gaussian_pair, write_samples
    from gengxue.spectral import make_grid

    s, _ = gaussian_pair(make_grid(50.0, 512), amp_u=0.2, amp_v=0.3)
    write_samples(tmp_path / "d.csv", s)
    text = SMOOTH.replace("kind = gaussian_pair\namp_u = 0.3\namp_v = 0.4\ncenter_v = 1.0\nwidth_v = 1.5",
                          "kind = samples_file\npath = d.csv")
    p = _write(tmp_path, text)
    assert main(["run", str(p), "--output-dir", str(tmp_path / "o")]) == 0
    rec = load_record(tmp_path / "o")
    assert rec["initial_state"]["u"] == s.u.values.tolist()


def test_selftest_command(capsys):
    assert main(["selftest", "--only", "riccati", "bony"]) == 0
    out = capsys.readouterr().out
    assert "riccati" in out and "PASS" in out and "FAIL" not in out
    assert main(["selftest", "--only", "nonsense"]) == 1


def test_read_only_output_dir(tmp_path):
    p = _write(tmp_path, SMOOTH)
    ro = tmp_path / "ro"
    ro.mkdir()
    ro.chmod(0o500)
    try:
        if (ro / "probe").parent.stat().st_mode & 0o200 == 0 and not _can_write(ro):
            assert main(["run", str(p), "--output-dir", str(ro)]) == 1
    finally:
        ro.chmod(0o700)
        shutil.rmtree(ro)


def _can_write(path):
    try:
        (path / ".probe").write_text("x")
    except OSError:
        return False
    (path / ".probe").unlink()
    return True
