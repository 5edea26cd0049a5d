"""Built-in oracle suite: each check pits one model against an independent one."""

import logging
from dataclasses import dataclass

import numpy as np

from dynamics import (
    EnvelopeState,
    analytic_state,
    convergence_order,
    default_full_dt,
    demodulate,
    integrate_rk4,
    reconstruct_field,
    settle_to_stationary,
    simulate_full,
    stationarity_residual,
)
from errors import SimulationError
from params import TWO_PI
from stability import is_stable_eigen, is_stable_routh_hurwitz, linearize, max_growth_rate
from steady_state import OperatingPoint, probe_response, solve_operating_point

STATIONARITY_TOLERANCE = 1e-9
ORACLE_TOLERANCE = 1e-6
FULL_MODEL_TOLERANCE = 1e-2
FULL_MODEL_PROBE_RATIO = 1e-4
ORDER_RANGE = (3.7, 4.3)
MARGINAL_BAND = 1e-6
STEADY_STATE_DRAWS = 50
DEMODULATION_PERIODS = 10
# (components, floor relative to the family scale); P0c is zero at rest and its
# roundoff follows the force balance, so it is judged against |Q0c|
STATE_FAMILIES = (
    (("Q0c", "P0c"), 1.0),
    (("Qplus", "Pplus"), 1e-9),
    (("a10", "a20"), 1e-9),
    (("a1plus", "a1minus", "a2plus", "a2minus"), 1e-9),
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


def state_deviation(state, reference):
    """Largest per-component relative deviation; components below their family floor use the floor."""
    worst = 0.0
    for family, floor in STATE_FAMILIES:
        scale = max(abs(getattr(reference, name)) for name in family)
        for name in family:
            diff = abs(getattr(state, name) - getattr(reference, name))
            if diff == 0.0:
                continue
            denominator = max(abs(getattr(reference, name)), floor * scale)
            worst = max(worst, diff / denominator if denominator > 0 else float("inf"))
    return worst


def randomized_stable_configs(config, rng, count, max_attempts=None):
    """Constant-drive configurations jittered around ``config`` whose operating point is well damped.

    Every kept draw relaxes at least at a quarter of the intrinsic mechanical rate,
    which bounds the settling horizon.
    """
    max_attempts = max_attempts or 20 * count
    drawn = []
    for _ in range(max_attempts):
        if len(drawn) == count:
            break
        power_l = config.power_l_w * 10 ** rng.uniform(-0.7, 0.3)
        candidate = config.with_overrides(
            detuning_reference="bare",
            power_l_w=power_l,
            power_p_w=FULL_MODEL_PROBE_RATIO * power_l,
            power_r_w=config.power_r_w * rng.uniform(0.0, 1.0),
            detuning1_hz=config.omega_m_hz * rng.uniform(0.9, 1.1),
            detuning2_hz=config.omega_m_hz * rng.uniform(0.9, 1.1),
            delta_hz=config.omega_m_hz + config.kappa1_hz * rng.uniform(-2.0, 2.0),
        )
        params = candidate.system_params()
        drives = candidate.drive_config()
        op = solve_operating_point(params, drives)
        if max_growth_rate(linearize(params, op)) < -params.gamma_m / 4:
            drawn.append((params, drives, op))
    return drawn


def random_operating_points(params, rng, count):
    """Operating points with random photon numbers, phases and effective detunings.

    Any such point is reachable by choosing the drive amplitudes and bare detunings,
    so the draws span both stable and unstable regions.
    """
    points = []
    for _ in range(count):
        n1, n2 = 10 ** rng.uniform(2.0, 7.5, size=2)
        phase1, phase2 = rng.uniform(0.0, TWO_PI, size=2)
        delta1, delta2 = params.omega_m * rng.uniform(-2.0, 2.0, size=2)
        points.append(
            OperatingPoint(
                a10=complex(np.sqrt(n1) * np.exp(1j * phase1)),
                a20=complex(np.sqrt(n2) * np.exp(1j * phase2)),
                Q0=(params.g1 * n1 - params.g2 * n2) / params.omega_m,
                Delta1=float(delta1),
                Delta2=float(delta2),
            )
        )
    return points


def compare_stability_verdicts(params, points):
    """(disagreements outside the marginal band, draws inside it, stable draws)."""
    disagreements, marginal, stable = 0, 0, 0
    for op in points:
        system = linearize(params, op)
        growth = max_growth_rate(system)
        routh = is_stable_routh_hurwitz(system)
        eigen = is_stable_eigen(system)
        stable += eigen
        if abs(growth) <= MARGINAL_BAND * params.omega_m:
            marginal += 1
            continue
        if routh.stable != eigen:
            logging.error(f"Routh-Hurwitz ({routh.verdict}) and eigenvalue verdicts disagree, max Re = {growth:.4e}")
            disagreements += 1
    return disagreements, marginal, stable


def check_stationarity(config):
    params = config.system_params()
    drives = config.drive_config()
    op = solve_operating_point(params, drives)
    state = analytic_state(op, probe_response(op, params, drives, drives.delta), params)
    residual = stationarity_residual(state, params, drives)
    return CheckResult("stationarity", residual < STATIONARITY_TOLERANCE, residual, STATIONARITY_TOLERANCE)


def check_analytic_vs_envelope(config, rng, count=STEADY_STATE_DRAWS):
    worst = 0.0
    draws = randomized_stable_configs(config, rng, count)
    for params, drives, op in draws:
        reference = analytic_state(op, probe_response(op, params, drives, drives.delta), params)
        worst = max(worst, state_deviation(settle_to_stationary(params, drives, op), reference))
    return CheckResult(
        "analytic_vs_envelope", worst < ORACLE_TOLERANCE and len(draws) == count, worst, ORACLE_TOLERANCE,
        f"{len(draws)} stable configurations",
    )


def envelope_vs_full_deviation(params, drives, t0, t1):
    """Deviation of the demodulated full-model a1 sideband from the envelope one, relative to its peak."""
    dt = default_full_dt(drives)
    envelope_run = integrate_rk4(EnvelopeState(), t0, t1, dt, params, drives, record_every=1)
    full_run = simulate_full(params, drives, dt, t0, t1, record_every=1)
    window = DEMODULATION_PERIODS * TWO_PI / abs(drives.delta)
    rebuilt = reconstruct_field(
        envelope_run.times,
        envelope_run.component("a10"),
        envelope_run.component("a1plus"),
        envelope_run.component("a1minus"),
        drives.delta,
    )
    from_envelope = demodulate(envelope_run.times, rebuilt, drives.delta, window).components[1]
    from_full = demodulate(full_run.times, full_run.a1, drives.delta, window).components[1]
    return float(np.max(np.abs(from_full - from_envelope)) / np.max(np.abs(from_envelope)))


def check_envelope_vs_full(config):
    point = config.with_overrides(power_p_w=FULL_MODEL_PROBE_RATIO * config.power_l_w)
    params = point.system_params()
    drives = point.memory_drives(params)
    env = drives.envelope_L
    deviation = envelope_vs_full_deviation(params, drives, env.t_wr - 5.0 * env.tau, env.t_wr + 3.0 * env.tau)
    return CheckResult("envelope_vs_full", deviation < FULL_MODEL_TOLERANCE, deviation, FULL_MODEL_TOLERANCE)


def check_routh_vs_eigen(config, rng):
    params = config.system_params()
    disagreements, marginal, stable = compare_stability_verdicts(
        params, random_operating_points(params, rng, config.verify_draws)
    )
    return CheckResult(
        "routh_vs_eigen", disagreements == 0, float(disagreements), 0.0,
        f"{config.verify_draws} draws, {stable} stable, {marginal} in the marginal band",
    )


def check_convergence_order(config):
    params = config.system_params()
    drives = config.memory_drives(params)
    env = drives.envelope_L
    order = convergence_order(
        EnvelopeState(), env.t_wr - 5.0 * env.tau, env.t_rd + 5.0 * env.tau, 0.2 / params.omega_m, params, drives
    )
    low, high = ORDER_RANGE
    return CheckResult("rk4_order", low <= order <= high, order, high - low, f"expected within [{low}, {high}]")


def run_verification(config):
    rng = np.random.default_rng(config.seed)
    checks = (
        ("stationarity", lambda: check_stationarity(config)),
        ("analytic_vs_envelope", lambda: check_analytic_vs_envelope(config, rng)),
        ("envelope_vs_full", lambda: check_envelope_vs_full(config)),
        ("routh_vs_eigen", lambda: check_routh_vs_eigen(config, rng)),
        ("rk4_order", lambda: check_convergence_order(config)),
    )
    results = []
    for name, check in checks:
        try:
            result = check()
        except SimulationError as e:
            logging.error(f"Verification check {name} raised: {e}")
            result = CheckResult(name, False, float("nan"), float("nan"), str(e))
        level = logging.INFO if result.passed else logging.WARNING
        logging.log(level, f"Check {name}: {'PASS' if result.passed else 'FAIL'} (value {result.value:.4e})")
        results.append(result)
    return results
