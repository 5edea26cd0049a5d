import numpy as np
import pytest

from dynamics import EnvelopeState
from verify import (
    ORACLE_TOLERANCE,
    check_analytic_vs_envelope,
    check_routh_vs_eigen,
    check_stationarity,
    compare_stability_verdicts,
    random_operating_points,
    state_deviation,
)


def test_state_deviation_uses_family_scale():
    reference = EnvelopeState(Q0c=10.0, a10=100.0, a1plus=1.0, a2plus=1e-12)
    assert state_deviation(reference, reference) == 0.0
    nudged = EnvelopeState(Q0c=10.0, a10=100.0, a1plus=1.0, a2plus=2e-12)
    # a2plus is negligible next to a1plus: its error is measured against the family floor, not its own size
    assert np.isclose(state_deviation(nudged, reference), 1e-3)
    assert np.isclose(state_deviation(EnvelopeState(Q0c=10.1, a10=100.0, a1plus=1.0, a2plus=1e-12), reference), 0.01)


def test_resting_momentum_is_judged_against_displacement():
    reference = EnvelopeState(Q0c=20.0, a10=800.0, Qplus=1e-3, Pplus=-1e-3j, a1plus=1.0)
    settled = EnvelopeState(Q0c=20.0, P0c=-1.5e-12 + 0j, a10=800.0, Qplus=1e-3, Pplus=-1e-3j, a1plus=1.0)
    assert state_deviation(settled, reference) < 1e-12
    drifted = EnvelopeState(Q0c=20.0, P0c=2e-4 + 0j, a10=800.0, Qplus=1e-3, Pplus=-1e-3j, a1plus=1.0)
    assert np.isclose(state_deviation(drifted, reference), 1e-5)


def test_stationarity_check(base_config):
    result = check_stationarity(base_config)
    assert result.passed and result.value < result.tolerance


def test_random_points_cover_both_verdicts(base_params):
    points = random_operating_points(base_params, np.random.default_rng(3), 300)
    disagreements, marginal, stable = compare_stability_verdicts(base_params, points)
    assert disagreements == 0
    assert 0 < stable < len(points) - marginal


def test_routh_check_is_seeded(base_config):
    config = base_config.with_overrides(verify_draws=100)
    first = check_routh_vs_eigen(config, np.random.default_rng(config.seed))
    second = check_routh_vs_eigen(config, np.random.default_rng(config.seed))
    assert first == second
    assert first.passed


@pytest.mark.slow
def test_envelope_settles_onto_analytic_state_at_random_points(base_config):
    result = check_analytic_vs_envelope(base_config, np.random.default_rng(base_config.seed), count=8)
    assert result.passed, result.detail
    assert result.value < ORACLE_TOLERANCE
