import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from gpstwin.cli import (InputError, OBS_FIELDS, TEL_FIELDS, cmd_validate, main, read_csv, write_csv)

CONFIG = """
[scenario]
start_week = 2300
start_tow = 284400.0
duration = {duration}
seed = 9
"""


def _config(tmp_path, duration=1.0, name="scen.toml"):
    p = tmp_path / name
    p.write_text(CONFIG.format(duration=duration))
    return p


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    d = tmp_path_factory.mktemp("gen")
    cfg = _config(d)
    assert main(["generate", str(cfg), "-o", str(d / "truth")]) == 0
    return d


def test_generate_writes_stream_and_truth(generated):
    t = generated / "truth"
    assert (t / "iq.bin").stat().st_size == int(1.0 * 2.5e6) * 2
    meta = json.loads((t / "iq.json").read_text())
    assert meta["n_samples"] == 2500000 and meta["bits"] == 8 and meta["prns"]
    obs = read_csv(t / "observables.csv", "observables")
    assert list(obs[0]) == OBS_FIELDS
    assert len(obs) == len(meta["prns"]) * 9               # 0.1 s epochs inside the 1 s run
    assert read_csv(t / "pvt.csv", "pvt") and read_csv(t / "trajectory.csv", "trajectory")
    assert set(json.loads((t / "ephemeris.json").read_text())) == {str(p) for p in meta["prns"]}


def test_generate_is_deterministic(generated, tmp_path):
    cfg = _config(tmp_path, name="again.toml")
    assert main(["generate", str(cfg), "-o", str(tmp_path / "b")]) == 0
    a, b = generated / "truth", tmp_path / "b"
    assert (a / "iq.bin").read_bytes() == (b / "iq.bin").read_bytes()
    assert (a / "observables.csv").read_text() == (b / "observables.csv").read_text()


def test_generate_rejects_bad_duration(tmp_path, capsys):
    assert main(["generate", str(_config(tmp_path, duration=0.0)), "-o", str(tmp_path / "o")]) == 2
    assert "scenario.duration" in capsys.readouterr().err
    assert not (tmp_path / "o" / "iq.bin").exists()


def test_missing_config_is_input_error(tmp_path):
    assert main(["generate", str(tmp_path / "nope.toml"), "-o", str(tmp_path / "o")]) == 2


def test_process_unknown_prn_fails(generated, tmp_path, capsys):
    meta = json.loads((generated / "truth" / "iq.json").read_text())
    absent = next(p for p in range(1, 33) if p not in meta["prns"])
    rc = main(["process", str(generated / "truth" / "iq.bin"), "-o", str(tmp_path / "rx"), "--prns", str(absent)])
    assert rc == 1
    err = capsys.readouterr().err
    assert "no satellite acquired" in err and str(absent) in err


def test_process_truncated_file_warns(generated, tmp_path, capsys):
    t = tmp_path / "cut"
    shutil.copytree(generated / "truth", t)
    data = (t / "iq.bin").read_bytes()
    (t / "iq.bin").write_bytes(data[: len(data) // 2 + 3])
    meta = json.loads((t / "iq.json").read_text())
    rc = main(["process", str(t / "iq.bin"), "-o", str(tmp_path / "rx"), "--prns",
               str(meta["reference_prn"])])
    assert rc == 0
    assert "truncated" in capsys.readouterr().err
    summary = json.loads((tmp_path / "rx" / "process.json").read_text())
    assert summary["truncated"] and summary["samples_processed"] < meta["n_samples"]
    assert summary["channels"] == [meta["reference_prn"]]
    tel = read_csv(tmp_path / "rx" / "telemetry.csv", "telemetry")
    assert list(tel[0]) == TEL_FIELDS and len(tel) > 300


def test_process_missing_sidecar(generated, tmp_path):
    shutil.copy(generated / "truth" / "iq.bin", tmp_path / "lonely.bin")
    assert main(["process", str(tmp_path / "lonely.bin"), "-o", str(tmp_path / "rx")]) == 2


def _no_skip(tmp_path):
    # the generated run is shorter than the default pull-in skip
    th = tmp_path / "noskip.toml"
    th.write_text("[thresholds]\nskip_seconds = 0.0\n")
    return str(th)


def test_validate_truth_against_itself_passes(generated, tmp_path):
    out = tmp_path / "verdict.txt"
    rc = main(["validate", str(generated / "truth"), str(generated / "truth"), "--thresholds", _no_skip(tmp_path),
               "-o", str(out)])
    text = out.read_text()
    assert rc == 0 and text.endswith("OVERALL PASS\n")
    assert "pseudorange_rms" in text and "horizontal_within_limit_fraction" in text


def _receiver_dir(generated, tmp_path, dll_sigma):
    rx = tmp_path / "rx"
    shutil.copytree(generated / "truth", rx)
    meta = json.loads((rx / "iq.json").read_text())
    rng = np.random.default_rng(0)
    rows = []
    for k in range(3000):
        t = meta["start_tow"] + 2.0 + k * 1e-3
        rows.append((meta["reference_prn"], t, k, rng.normal(0, dll_sigma), rng.normal(0, 3.0), rng.normal(0, 10.0),
                     1000.0, 1.023e6, 1.0, 0.0, 45.0, "pll"))
    write_csv(rx / "telemetry.csv", "telemetry", TEL_FIELDS, rows)
    return rx


def test_validate_flags_inflated_dll_jitter(generated, tmp_path):
    rx = _receiver_dir(generated, tmp_path, dll_sigma=0.2)
    rc = main(["validate", str(generated / "truth"), str(rx), "--thresholds", _no_skip(tmp_path)])
    text = (rx / "verdict.txt").read_text()
    assert rc == 1
    assert "FAIL dll_jitter" in text and "PASS pll_jitter_deg" in text and text.endswith("OVERALL FAIL\n")


def test_verdict_is_deterministic(generated, tmp_path):
    rx = _receiver_dir(generated, tmp_path, dll_sigma=0.02)
    a, ok_a = cmd_validate(generated / "truth", rx, {"skip_seconds": 0.0})
    b, ok_b = cmd_validate(generated / "truth", rx, {"skip_seconds": 0.0})
    assert a == b and ok_a and ok_b


def test_threshold_file(generated, tmp_path):
    th = tmp_path / "th.toml"
    th.write_text("[thresholds]\nskip_seconds = 0.0\nhorizontal_fraction = 1.01\n")
    assert main(["validate", str(generated / "truth"), str(generated / "truth"), "--thresholds", str(th),
                 "-o", str(tmp_path / "v.txt")]) == 1
    th.write_text("[thresholds]\nbogus = 1\n")
    assert main(["validate", str(generated / "truth"), str(generated / "truth"), "--thresholds", str(th),
                 "-o", str(tmp_path / "v.txt")]) == 2


def test_csv_schema_check(tmp_path):
    write_csv(tmp_path / "a.csv", "pvt", ["t_rx"], [(1.0,)])
    assert read_csv(tmp_path / "a.csv", "pvt") == [{"t_rx": "1.0"}]
    with pytest.raises(InputError, match="schema mismatch"):
        read_csv(tmp_path / "a.csv", "observables")
    with pytest.raises(InputError, match="missing"):
        read_csv(tmp_path / "b.csv", "pvt")


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "gpstwin.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("gpstwin ")


@pytest.mark.parametrize("name", ["static", "high_dynamics"])
def test_shipped_configs_load(name):
    from pathlib import Path

    from gpstwin.scenario.config import load_config
    cfg = load_config(Path(__file__).parent.parent / "configs" / f"{name}.toml")
    assert cfg.trajectory.kind == name
