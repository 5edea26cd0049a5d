import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import EigenSolverError
from stability import (
    LinearizedSystem,
    characteristic_polynomial,
    eigenvalues,
    is_stable_eigen,
    is_stable_routh_hurwitz,
    linearize,
    max_growth_rate,
    routh_array,
)
from steady_state import solve_operating_point


def _system(matrix, omega_m=1.0):
    return LinearizedSystem(matrix=np.asarray(matrix, dtype=float), operating_point=None, omega_m=omega_m)


def test_characteristic_polynomial_matches_numpy(base_config, base_params):
    system = linearize(base_params, solve_operating_point(base_params, base_config.drive_config()))
    coefficients = characteristic_polynomial(system.matrix)
    assert len(coefficients) == 7 and coefficients[0] == 1.0
    assert_allclose(np.real(np.poly(eigenvalues(system))), coefficients, rtol=1e-6)


def test_jacobian_without_coupling_is_block_diagonal(base_config, base_params):
    params = base_params.model_copy(update={"g1": 0.0, "g2": 0.0})
    system = linearize(params, solve_operating_point(params, base_config.drive_config()))
    assert not np.any(system.matrix[:2, 2:]) and not np.any(system.matrix[2:, :2])
    growth = eigenvalues(system).real
    assert_allclose(sorted(growth), sorted([-params.gamma_m / 2] * 2 + [-params.kappa1] * 2 + [-params.kappa2] * 2), rtol=1e-9)


def test_reference_operating_point_is_stable(base_config, base_params):
    system = linearize(base_params, solve_operating_point(base_params, base_config.drive_config()))
    report = is_stable_routh_hurwitz(system)
    assert report.verdict == "stable" and report.stable
    assert report.margin > 0
    assert len(report.first_column) == 7
    assert is_stable_eigen(system)


def test_blue_detuned_read_drive_is_unstable(base_config):
    # cavity 2 placed below the read laser pumps the mechanics instead of cooling it
    config = base_config.with_overrides(power_l_w=0.0, power_p_w=0.0, detuning2_hz=-base_config.omega_m_hz)
    params = config.system_params()
    system = linearize(params, solve_operating_point(params, config.drive_config()))
    assert is_stable_routh_hurwitz(system).verdict == "unstable"
    assert not is_stable_eigen(system)
    assert max_growth_rate(system) > 0


def _reference_and_blue_points(base_config):
    blue = base_config.with_overrides(power_l_w=0.0, power_p_w=0.0, detuning2_hz=-base_config.omega_m_hz)
    points = []
    for config in (base_config, blue):
        params = config.system_params()
        points.append((params, solve_operating_point(params, config.drive_config())))
    return points


def test_trace_is_total_damping(base_config):
    for params, op in _reference_and_blue_points(base_config):
        trace = np.trace(linearize(params, op).matrix)
        assert_allclose(trace, -params.gamma_m - 2 * params.kappa1 - 2 * params.kappa2, rtol=1e-12)


@pytest.mark.parametrize("phase1, phase2", [(0.7, 0.0), (0.0, -2.1), (np.pi, 1.3)])
def test_drive_phases_do_not_change_stability(base_config, phase1, phase2):
    for params, op in _reference_and_blue_points(base_config):
        rotated = dataclasses.replace(op, a10=op.a10 * np.exp(1j * phase1), a20=op.a20 * np.exp(1j * phase2))
        system, turned = linearize(params, op), linearize(params, rotated)
        assert is_stable_routh_hurwitz(turned).verdict == is_stable_routh_hurwitz(system).verdict
        assert is_stable_eigen(turned) == is_stable_eigen(system)
        assert_allclose(characteristic_polynomial(turned.matrix), characteristic_polynomial(system.matrix), rtol=1e-8)
        assert_allclose(max_growth_rate(turned), max_growth_rate(system), rtol=1e-6)


def test_undamped_oscillator_is_marginal():
    system = _system([[0.0, 1.0], [-1.0, 0.0]])
    report = is_stable_routh_hurwitz(system)
    assert report.verdict == "marginal"
    assert not report.stable


def test_zero_pivot_is_replaced_by_epsilon():
    # s^4 + s^3 + 2 s^2 + 2 s + 3 has a zero in the first column of its third row
    table, degenerate = routh_array([1.0, 1.0, 2.0, 2.0, 3.0])
    assert not degenerate
    assert 0 < table[2, 0] < 1e-8
    assert table[3, 0] < 0


def test_routh_counts_sign_changes():
    # (s + 1)(s + 2)(s - 3)
    table, _ = routh_array(np.poly([-1.0, -2.0, 3.0]))
    signs = np.sign(table[:, 0])
    assert np.count_nonzero(signs[:-1] != signs[1:]) == 1


def test_routh_agrees_with_eigenvalues_on_companion_matrices():
    rng = np.random.default_rng(7)
    for _ in range(200):
        roots = rng.uniform(-3.0, 1.0, size=3) + 1j * rng.uniform(-5.0, 5.0, size=3)
        roots = np.concatenate([roots, roots.conj()])
        if np.min(np.abs(roots.real)) < 1e-3:
            continue
        coefficients = np.real(np.poly(roots))
        companion = np.zeros((6, 6))
        companion[0, :] = -coefficients[1:]
        companion[1:, :-1] = np.eye(5)
        system = _system(companion)
        assert is_stable_routh_hurwitz(system).stable == is_stable_eigen(system)


def test_eigen_solver_rejects_non_finite_matrix():
    with pytest.raises(EigenSolverError):
        eigenvalues(_system([[np.nan, 0.0], [0.0, -1.0]]))


def test_eigen_margin_scales_with_omega_m():
    system = _system([[-1e-12, 0.0], [0.0, -1.0]], omega_m=1.0)
    assert not is_stable_eigen(system)
    assert is_stable_eigen(_system(system.matrix, omega_m=1e-6))
