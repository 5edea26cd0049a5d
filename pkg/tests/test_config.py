import pytest
from numpy.testing import assert_allclose

from config import DEFAULT_THREADS, RunConfig, parse_config, parse_config_text, scan_threads
from errors import ConfigError
from params import TWO_PI, coupling_from_geometry
from steady_state import solve_operating_point


def _line_of(text, prefix):
    return next(number for number, line in enumerate(text.splitlines(), start=1) if line.startswith(prefix))


def test_base_config_values(base_config):
    assert base_config.power_l_w == 1e-3
    assert base_config.t_read_s == 3.0e-6
    assert base_config.beta == 2
    assert base_config.tau_r_s == base_config.tau_l_s
    assert base_config.lambda_r_m == base_config.lambda_l_m
    assert base_config.detuning_reference == "bare"
    assert_allclose(base_config.sweep_range, (TWO_PI * (51.8e6 - 4.5e6), TWO_PI * (51.8e6 + 4.5e6)), rtol=1e-15)


def test_read_time_defaults_to_fixed_delay(base_config_text):
    config = parse_config_text(base_config_text.replace("t_read_s = 3.0e-6\n", ""))
    assert_allclose(config.t_read_s - config.t_write_s, 1.5e-6, rtol=1e-12)


def test_unknown_key_suggestion(write_config):
    with pytest.raises(ConfigError) as info:
        parse_config(write_config(extra="kapa1_hz = 1.5e6\n"))
    assert info.value.suggestion == "kappa1_hz"
    assert "did you mean 'kappa1_hz'" in str(info.value)
    assert info.value.exit_code == 2


def test_unit_suffix_mismatch(base_config_text):
    with pytest.raises(ConfigError) as info:
        parse_config_text(base_config_text + "tau_p_us = 0.3\n")
    assert "unit suffix" in str(info.value)
    assert info.value.suggestion == "tau_p_s"
    assert info.value.line == len(base_config_text.splitlines()) + 1


def test_missing_required_key(base_config_text):
    with pytest.raises(ConfigError) as info:
        parse_config_text(base_config_text.replace("power_p_w = 1e-7\n", ""))
    assert info.value.key == "power_p_w"
    assert "missing required key" in str(info.value)


def test_duplicate_key(base_config_text):
    with pytest.raises(ConfigError) as info:
        parse_config_text(base_config_text + "gamma_m_hz = 40e3\n")
    assert "duplicate" in str(info.value)


def test_invalid_value_reports_its_line(base_config_text):
    text = base_config_text.replace("gamma_m_hz = 41e3", "gamma_m_hz = -41e3")
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    assert info.value.key == "gamma_m_hz"
    assert info.value.line == _line_of(text, "gamma_m_hz")
    assert str(info.value).startswith(f"line {info.value.line}:")


def test_unparsable_number(base_config_text):
    with pytest.raises(ConfigError) as info:
        parse_config_text(base_config_text.replace("mass_kg = 2.0e-11", "mass_kg = heavy"))
    assert "unparsable number" in str(info.value)


def test_gaussian_shape_needs_beta_two(base_config_text):
    text = base_config_text + "beta = 4\n"
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    assert info.value.key == "beta"
    assert info.value.line == _line_of(text, "beta")


def test_coupling_or_length_required(base_config_text):
    with pytest.raises(ConfigError) as info:
        parse_config_text(base_config_text.replace("g1_hz = 1.55e3\n", ""))
    assert info.value.key == "g1_hz"


def test_coupling_from_cavity_length(base_config_text):
    config = parse_config_text(base_config_text.replace("g1_hz = 1.55e3\n", "length1_m = 1e-3\n"))
    params = config.system_params()
    expected = coupling_from_geometry(config.omega_L + TWO_PI * 51.8e6, 1e-3, 2.0e-11, TWO_PI * 51.8e6)
    assert params.g1 == expected
    assert params.g2 == TWO_PI * 1.55e3


def test_effective_detuning_reference(base_config):
    config = base_config.with_overrides(detuning_reference="effective")
    op = solve_operating_point(config.system_params(), config.drive_config())
    assert_allclose(op.Delta1, TWO_PI * 51.8e6, rtol=1e-7)
    assert_allclose(op.Delta2, TWO_PI * 51.8e6, rtol=1e-7)
    bare = base_config.system_params()
    assert config.system_params().omega1 != bare.omega1


def test_overrides(base_config_text):
    config = parse_config_text(base_config_text, ["power_r_w=1e-3", "detuning_case = blue"])
    assert config.power_r_w == 1e-3
    assert config.detuning_case == "blue"
    with pytest.raises(ConfigError) as info:
        parse_config_text(base_config_text, ["power_r_w"])
    assert info.value.line == 0
    with pytest.raises(ConfigError) as info:
        parse_config_text(base_config_text, ["power_q_w=1"])
    assert info.value.line == 0


def test_with_overrides_recomputes_derived_keys(base_config):
    assert base_config.with_overrides(tau_l_s=0.2e-6).tau_r_s == 0.2e-6
    assert base_config.with_overrides(tau_l_s=0.2e-6, tau_r_s=0.5e-6).tau_r_s == 0.5e-6
    assert base_config.with_overrides(shape="supergaussian").beta == 4
    assert base_config.with_overrides(omega_m_hz=40e6).sweep_min_hz == 40e6 - 4.5e6


def test_with_overrides_keeps_supplied_keys(base_config_text):
    config = parse_config_text(base_config_text + "tau_r_s = 0.5e-6\nlambda_r_m = 775e-9\n")
    assert config.with_overrides(t_write_s=1.0e-6).t_read_s == 3.0e-6
    assert config.with_overrides(tau_l_s=0.2e-6).tau_r_s == 0.5e-6
    assert config.with_overrides(lambda_l_m=780e-9).lambda_r_m == 775e-9


def test_filled_keys_stay_derived_through_copies(base_config_text):
    config = parse_config_text(base_config_text.replace("t_read_s = 3.0e-6\n", ""))
    copied = config.with_overrides(power_p_w=2e-7).with_overrides(seed=7)
    assert_allclose(copied.with_overrides(t_write_s=1.0e-6).t_read_s, 2.5e-6, rtol=1e-12)
    assert copied.with_overrides(tau_l_s=0.2e-6).tau_r_s == 0.2e-6
    assert copied.with_overrides(lambda_l_m=780e-9).lambda_r_m == 780e-9


def test_resolved_config_lists_derived_keys_as_comments(base_config):
    text = base_config.resolved_config_text()
    assert "\nt_read_s = 3e-06\n" in text
    assert "\n# tau_r_s = 3e-07 (derived)\n" in text


def test_scan_keys(base_config):
    config = base_config.with_overrides(scan_key="power_r_w", scan_values="0.4e-3, 1.0e-3")
    assert config.scan_value_list() == [0.4e-3, 1.0e-3]
    with pytest.raises(ValueError):
        base_config.with_overrides(scan_key="power_r_w")
    with pytest.raises(ValueError):
        base_config.with_overrides(scan_key="shape", scan_values="1")


def test_resolved_config_reproduces_config(base_config):
    config = base_config.with_overrides(scan_key="t_read_s", scan_values="2e-6, 3e-6", out_dir="runs/a")
    assert parse_config_text(config.resolved_config_text()) == config


def test_config_hash(base_config):
    assert base_config.with_overrides(out_dir="elsewhere").config_hash() == base_config.config_hash()
    assert base_config.with_overrides(power_p_w=2e-7).config_hash() != base_config.config_hash()
    assert len(base_config.config_hash()) == 12


def test_missing_file():
    with pytest.raises(ConfigError):
        parse_config("/nonexistent/run.conf")


def test_extra_fields_forbidden(base_config):
    with pytest.raises(ValueError):
        RunConfig(**{**base_config.model_dump(), "colour": "red"})


@pytest.mark.parametrize("raw, expected", [("2", 2), ("0", 1), ("many", DEFAULT_THREADS)])
def test_scan_threads(monkeypatch, raw, expected):
    monkeypatch.setenv("OMSIM_THREADS", raw)
    assert scan_threads() == expected
