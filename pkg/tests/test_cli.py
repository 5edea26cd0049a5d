import pandas as pd
import pytest

from cli import error_line, main
from config import parse_config
from errors import BistabilityError

SWEEP_COLUMNS = [
    "delta_rad_s", "re_qplus", "im_qplus", "re_d", "im_d", "re_a1p", "im_a1p", "re_a1m", "im_a1m",
    "re_a2p", "im_a2p", "re_a2m", "im_a2m", "p_out_left_probe_norm", "p_out_right_as_norm",
    "p_out_right_s_norm", "error",
]


def _stem(path, subcommand, out, *overrides):
    return f"{subcommand}_{parse_config(path, [*overrides, f'out_dir={out}']).config_hash()}"


def test_spectrum_writes_sweep(write_config, tmp_path):
    path, out = write_config(), tmp_path / "out"
    assert main(["spectrum", "--config", path, "--out", str(out), "--override", "n_points=11", "--plot-data"]) == 0
    stem = _stem(path, "spectrum", out, "n_points=11")
    frame = pd.read_csv(out / f"{stem}_sweep.csv", keep_default_na=False)
    assert list(frame.columns) == SWEEP_COLUMNS
    assert len(frame) == 11
    assert (frame["error"] == "").all()
    assert (out / f"{stem}_sweep_plot.csv").exists()
    assert (out / "resolved_config.txt").read_text().startswith("# resolved configuration")


def test_stability_prints_report(write_config, tmp_path, capsys):
    path, out = write_config(), tmp_path / "out"
    assert main(["stability", "--config", path, "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert printed.startswith("verdict,margin,eigen_stable,max_re_lambda")
    assert printed.splitlines()[1].startswith("stable,")
    written = (out / f"{_stem(path, 'stability', out)}_stability.csv").read_text()
    assert written == printed


READ_TIME_SCAN = ["--override", "scan_key=t_read_s", "--override", "scan_values=2.5e-6, 3.0e-6, 3.5e-6"]


@pytest.mark.parametrize(
    "subcommand, extra",
    [
        ("spectrum", []),
        ("stability", []),
        pytest.param("transduce", ["--dt", "2e-10"], marks=pytest.mark.slow),
        pytest.param("scan", ["--dt", "2e-10", *READ_TIME_SCAN], marks=pytest.mark.slow),
        pytest.param("verify", [], marks=pytest.mark.slow),
    ],
)
def test_outputs_are_byte_identical(write_config, tmp_path, monkeypatch, subcommand, extra):
    monkeypatch.setenv("OMSIM_THREADS", "3")
    path = write_config()
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main([subcommand, "--config", path, "--out", str(out), *extra]) == 0
        outputs.append({p.name: p.read_bytes() for p in out.iterdir() if p.name != "resolved_config.txt"})
    assert outputs[0] == outputs[1]


def test_config_error_exit_code(write_config, tmp_path, capsys):
    path = write_config(extra="kapa1_hz = 1.5e6\n")
    assert main(["spectrum", "--config", path, "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "error code=2 kind=ConfigError message=line" in err
    assert "kappa1_hz" in err


def test_scan_needs_scan_key(write_config, tmp_path):
    assert main(["scan", "--config", write_config(), "--out", str(tmp_path)]) == 2


def test_unstable_read_stage_exit_code(write_config, tmp_path, capsys):
    code = main([
        "transduce", "--config", write_config(), "--out", str(tmp_path),
        "--override", "detuning_case=blue", "--override", "max_transient_gain=0.1",
    ])
    assert code == 3
    assert "kind=InstabilityError" in capsys.readouterr().err


def test_error_line_is_single_line():
    error = BistabilityError("operating point did not converge;\npossibly bistable", (1.0, 2.0))
    line = error_line(error)
    assert "\n" not in line
    assert line.startswith("error code=4 kind=BistabilityError message=operating point")


@pytest.mark.slow
def test_memory_outputs_are_byte_identical(write_config, tmp_path):
    path = write_config()
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main(["memory", "--config", path, "--out", str(out), "--dt", "2e-10"]) == 0
        outputs.append({p.name: p.read_bytes() for p in out.iterdir() if p.name != "resolved_config.txt"})
    assert outputs[0].keys() == outputs[1].keys()
    assert outputs[0] == outputs[1]
    stem = _stem(path, "memory", tmp_path / "first", "dt_s=2e-10")
    summary = pd.read_csv(tmp_path / "first" / f"{stem}_summary.csv")
    assert summary["retrieval_efficiency"].iloc[0] > 0
    trajectory = pd.read_csv(tmp_path / "first" / f"{stem}_trajectory.csv")
    assert list(trajectory.columns[:3]) == ["t_s", "re_Q0c", "im_Q0c"]
    assert list(trajectory.columns[-4:]) == ["p_out_left_probe_norm", "phonon_norm", "p_out_right_s_norm", "p_out_right_as_norm"]


@pytest.mark.slow
def test_verify_passes(write_config, tmp_path):
    out = tmp_path / "verify"
    path = write_config()
    assert main(["verify", "--config", path, "--out", str(out)]) == 0
    frame = pd.read_csv(out / f"{_stem(path, 'verify', out)}_verify.csv")
    assert list(frame["check"]) == ["stationarity", "analytic_vs_envelope", "envelope_vs_full", "routh_vs_eigen", "rk4_order"]
    assert frame["passed"].all()
