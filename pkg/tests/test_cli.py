import json
import shutil
import subprocess

import numpy as np
import pytest

from qbm import cli, io

SMALL = ["--set", "grid.n_steps=64", "--set", "grid.t_max=12.8", "--set", "freq_grid.n_freq=40000"]
KERNEL_FILES = {"eta_minus", "eta_plus", "nu_minus", "nu_plus", "green", "nu_gg", "eta2", "nu2",
                "bath_spectra", "composite_spectra"}


def _run(args, out):
    return cli.run(args + ["--out", str(out)])


def _manifest(out):
    m = json.loads((out / "manifest.json").read_text())
    m.pop("timings_seconds")
    m["config"].pop("out_dir")
    return m


def test_kernels_writes_all_files(tmp_path):
    out = tmp_path / "k"
    assert _run(["kernels", *SMALL], out) == 0
    stems = {p.stem for p in out.glob("*.csv")}
    assert stems == KERNEL_FILES
    m = json.loads((out / "manifest.json").read_text())
    assert set(m["files"]) == {f"{s}.csv" for s in KERNEL_FILES}
    for name, digest in m["files"].items():
        assert io.file_hash(out / name) == digest
    header, data = io.read_csv(out / "eta_plus.csv")
    assert header == ["lag", "eta_plus"] and data.shape == (65, 2)


@pytest.mark.parametrize("command", ["kernels", "ensemble"])
def test_reruns_are_byte_identical(tmp_path, command):
    extra = ["--n-traj", "20"] if command == "ensemble" else []
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run([command, *SMALL, *extra, "--seed", "11"], a) == 0
    assert _run([command, *SMALL, *extra, "--seed", "11"], b) == 0
    assert _manifest(a) == _manifest(b)
    for f in a.iterdir():
        if f.name != "manifest.json":
            assert f.read_bytes() == (b / f.name).read_bytes()


def test_seed_changes_ensemble(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    _run(["ensemble", *SMALL, "--n-traj", "10", "--seed", "1"], a)
    _run(["ensemble", *SMALL, "--n-traj", "10", "--seed", "2"], b)
    assert (a / "ensemble_mean.csv").read_bytes() != (b / "ensemble_mean.csv").read_bytes()


def test_binary_round_trip(tmp_path):
    c, b = tmp_path / "c", tmp_path / "b"
    assert _run(["kernels", *SMALL], c) == 0
    assert _run(["kernels", *SMALL, "--format", "binary"], b) == 0
    arr, side = io.read_binary(b / "nu2.bin")
    header, data = io.read_csv(c / "nu2.csv")
    assert arr.shape == (65, 65) and side["dtype"] == "<f8"
    assert np.array_equal(arr, data[:, 1:])
    assert np.array_equal(np.asarray(side["row_axis"]), data[:, 0])
    t, g = io.read_binary(b / "green.bin")[0], io.read_csv(c / "green.csv")[1]
    assert np.array_equal(t, g)


def test_csv_round_trip_is_exact(tmp_path):
    x = np.random.default_rng(0).standard_normal((17, 3)) * 10.0 ** np.arange(-5, 10, 5)
    io.write_table(tmp_path / "x", {"a": x[:, 0], "b": x[:, 1], "c": x[:, 2]}, {})
    header, data = io.read_csv(tmp_path / "x.csv")
    assert header == ["a", "b", "c"] and np.array_equal(data, x)


def test_free_oscillator_evolve(tmp_path):
    out = tmp_path / "e"
    args = ["evolve", "--set", "bath_plus.coupling=0", "--set", "grid.n_steps=1024",
            "--set", "grid.t_max=20.48", "--set", "freq_grid.n_freq=40000"]
    assert _run(args, out) == 0
    _, data = io.read_csv(out / "mean_trajectory.csv")
    t, x = data[:, 0], data[:, 1]
    assert np.max(np.abs(x - np.cos(0.3 * t))) < 1e-3


def test_config_error_exit_code(tmp_path, capsys):
    code = _run(["evolve", "--set", "grid.n_steps=0", "--set", "seed=-1"], tmp_path / "x")
    err = capsys.readouterr().err
    assert code == 1
    assert "grid.n_steps" in err and "seed" in err


def test_usage_error_exit_code(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.run(["evolve", "--format", "xml"])
    assert exc.value.code == 1


def test_budget_guard_exit_code(tmp_path, capsys):
    code = _run(["evolve", "--set", "grid.n_steps=4097", "--set", "grid.t_max=409.7"], tmp_path / "x")
    assert code == 2
    assert "max allowed n_steps is 4096" in capsys.readouterr().err


def test_bad_time_step_refused(tmp_path, capsys):
    code = _run(["evolve", "--set", "grid.n_steps=8", "--set", "grid.t_max=100"], tmp_path / "x")
    assert code == 2
    assert capsys.readouterr().err.startswith("refused")


def test_fdr_passes_and_fault_is_caught(tmp_path, capsys):
    assert _run(["fdr"], tmp_path / "ok") == 0
    report = json.loads((tmp_path / "ok" / "fdr_report.json").read_text())
    assert report["failed"] == [] and len(report["identities"]) == 7
    capsys.readouterr()
    assert _run(["fdr", "--set", "fault_scale=1.05"], tmp_path / "bad") == 3
    out = capsys.readouterr()
    assert "FAIL  generalized FDR" in out.out
    assert "identity check failed" in out.err


def test_late_mode_and_preset(tmp_path):
    out = tmp_path / "l"
    assert _run(["kernels", *SMALL, "--kernel-mode", "late", "--preset", "relaxing"], out) == 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["kernel_mode"] == "late" and m["config"]["preset"] == "relaxing"


@pytest.mark.skipif(shutil.which("qbm") is None, reason="console script not installed")
def test_console_script(tmp_path):
    res = subprocess.run(["qbm", "evolve", *SMALL, "--out", str(tmp_path / "s")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "s" / "mean_trajectory.csv").exists()
