"""Analytic steady state: zeroth-order operating point and first-order probe response.

The response is the first-order harmonic-balance solution of the semiclassical
equations, written for the sign convention of the shared mirror
(force g1|a1|^2 - g2|a2|^2). Sideband "+" is the e^{-i delta t} component
(frequency omega + delta), "-" the e^{+i delta t} component.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import BistabilityError, InvalidParameterError, SimulationError
from params import drive_amplitudes

RELAXATION = 0.5
MAX_ITERATIONS = 10_000
TOLERANCE = 1e-12
PROBE_RATIO_LIMIT = 0.1
SINGULAR_FRACTION = 1e-6


@dataclass(frozen=True)
class OperatingPoint:
    a10: complex
    a20: complex
    Q0: float
    Delta1: float
    Delta2: float
    iterations: int = 0
    residual: float = 0.0

    @property
    def n1(self):
        return abs(self.a10) ** 2

    @property
    def n2(self):
        return abs(self.a20) ** 2


@dataclass(frozen=True)
class ProbeResponse:
    delta: float
    Qplus: complex
    d: complex
    a1plus: complex
    a1minus: complex
    a2plus: complex
    a2minus: complex
    probe_amplitude: float


@dataclass(frozen=True)
class OutputComponents:
    left_probe: complex
    left_conjugate: complex
    right_antistokes: complex
    right_stokes: complex
    omega_left_probe: float
    omega_left_conjugate: float
    omega_right_antistokes: float
    omega_right_stokes: float

    def normalized_powers(self, probe_amplitude):
        """(left probe, right anti-Stokes, right Stokes) powers over |E_p|^2; zero without a probe."""
        if probe_amplitude == 0:
            return 0.0, 0.0, 0.0
        scale = abs(probe_amplitude) ** 2
        return (
            abs(self.left_probe) ** 2 / scale,
            abs(self.right_antistokes) ** 2 / scale,
            abs(self.right_stokes) ** 2 / scale,
        )


@dataclass(frozen=True)
class SweepRow:
    delta: float
    response: Optional[ProbeResponse] = None
    outputs: Optional[OutputComponents] = None
    error: Optional[str] = None


def _photon_numbers(params, E_L, E_R, detune1, detune2, q0):
    delta1 = detune1 - params.g1 * q0
    delta2 = detune2 + params.g2 * q0
    n1 = E_L**2 / (params.kappa1**2 + delta1**2)
    n2 = E_R**2 / (params.kappa2**2 + delta2**2)
    return n1, n2


def solve_operating_point(params, drives, max_iterations=MAX_ITERATIONS, tolerance=TOLERANCE):
    """Self-consistent (a10, a20, Q0, Delta1, Delta2) under constant coupling lasers.

    Q0 enters the detunings, so Q0 = (g1|a10|^2 - g2|a20|^2)/omega_m is a scalar
    fixed point, solved by damped iteration from Q0 = 0.
    """
    if drives.pulsed:
        raise InvalidParameterError("solve_operating_point needs constant drives; use drives.constant()")
    E_L, E_R, _ = drive_amplitudes(params, drives)
    detune1 = params.omega1 - drives.omega_L
    detune2 = params.omega2 - drives.omega_R

    def radiation_pressure(q0):
        n1, n2 = _photon_numbers(params, E_L, E_R, detune1, detune2, q0)
        return (params.g1 * n1 - params.g2 * n2) / params.omega_m

    q0 = 0.0
    previous = 0.0
    for iteration in range(1, max_iterations + 1):
        updated = (1.0 - RELAXATION) * q0 + RELAXATION * radiation_pressure(q0)
        if abs(updated - q0) <= tolerance * abs(updated):
            q0 = updated
            break
        previous, q0 = q0, updated
    else:
        logging.error(f"Operating point did not converge after {max_iterations} iterations")
        raise BistabilityError("operating point did not converge; possibly bistable", (previous, q0))

    delta1 = detune1 - params.g1 * q0
    delta2 = detune2 + params.g2 * q0
    a10 = complex(E_L / complex(params.kappa1, delta1))
    a20 = complex(E_R / complex(params.kappa2, delta2))
    target = radiation_pressure(q0)
    residual = abs(target - q0) / abs(q0) if q0 != 0 else abs(target)
    logging.info(f"Operating point: Q0={q0:.6e}, |a10|^2={abs(a10) ** 2:.4e}, |a20|^2={abs(a20) ** 2:.4e} after {iteration} iterations")
    return OperatingPoint(a10=a10, a20=a20, Q0=q0, Delta1=delta1, Delta2=delta2, iterations=iteration, residual=residual)


def denominator(op, params, delta):
    """d(delta): optical-spring sum over both cavities minus the bare mechanical response."""
    delta = np.complex128(delta)
    total = np.complex128(0.0)
    for g, n, detuning, kappa in (
        (params.g1, op.n1, op.Delta1, params.kappa1),
        (params.g2, op.n2, op.Delta2, params.kappa2),
    ):
        total += 2.0 * detuning * g**2 * n / ((kappa - 1j * delta) ** 2 + detuning**2)
    mechanical = (params.omega_m**2 - delta**2 - 1j * delta * params.gamma_m) / params.omega_m
    return complex(total - mechanical)


def probe_response(op, params, drives, delta):
    """First-order sideband amplitudes at probe detuning ``delta``."""
    E_L, _, E_p = drive_amplitudes(params, drives)
    if E_p > PROBE_RATIO_LIMIT * E_L:
        logging.warning(f"Probe not weak: |E_p|/|E_L|={E_p / E_L if E_L else float('inf'):.3g} exceeds {PROBE_RATIO_LIMIT}")
    d = np.complex128(denominator(op, params, delta))
    if abs(d) < SINGULAR_FRACTION * params.omega_m:
        logging.warning(f"Near-singular response at delta={delta:.6e}: |d|={abs(d):.3e}")

    g1, g2 = params.g1, params.g2
    a10, a20 = np.complex128(op.a10), np.complex128(op.a20)
    c1p = params.kappa1 + 1j * (op.Delta1 - delta)
    c1m = params.kappa1 + 1j * (op.Delta1 + delta)
    c2p = params.kappa2 + 1j * (op.Delta2 - delta)
    c2m = params.kappa2 + 1j * (op.Delta2 + delta)
    with np.errstate(divide="ignore", invalid="ignore"):
        qplus = -g1 * np.conj(a10) * E_p / (d * c1p)
        a1plus = (1j * g1 * a10 * qplus + E_p) / c1p
        a1minus = 1j * g1 * a10 * np.conj(qplus) / c1m
        a2plus = -1j * g2 * a20 * qplus / c2p
        a2minus = -1j * g2 * a20 * np.conj(qplus) / c2m
    return ProbeResponse(
        delta=float(delta),
        Qplus=complex(qplus),
        d=complex(d),
        a1plus=complex(a1plus),
        a1minus=complex(a1minus),
        a2plus=complex(a2plus),
        a2minus=complex(a2minus),
        probe_amplitude=E_p,
    )


def output_fields(resp, params, drives):
    """Spectral components of the left (cavity 1) and right (cavity 2) output fields."""
    return OutputComponents(
        left_probe=2.0 * params.kappa1 * resp.a1plus - resp.probe_amplitude,
        left_conjugate=2.0 * params.kappa1 * resp.a1minus,
        right_antistokes=2.0 * params.kappa2 * resp.a2plus,
        right_stokes=2.0 * params.kappa2 * resp.a2minus,
        omega_left_probe=drives.omega_L + resp.delta,
        omega_left_conjugate=drives.omega_L - resp.delta,
        omega_right_antistokes=drives.omega_R + resp.delta,
        omega_right_stokes=drives.omega_R - resp.delta,
    )


def eit_width(op, params):
    return params.gamma_m / 2.0 + params.g1**2 * op.n1 / params.kappa1


def spectrum_sweep(params, drives, delta_range, n_points):
    """Probe response on a uniform grid of detunings, one row per point in increasing order.

    A failing point becomes a row carrying the error text; the sweep goes on.
    """
    low, high = delta_range
    if n_points < 1:
        raise InvalidParameterError(f"n_points must be >= 1, got {n_points}")
    if high < low:
        raise InvalidParameterError(f"delta range must be increasing, got ({low!r}, {high!r})")
    op = solve_operating_point(params, drives)
    rows = []
    for delta in np.linspace(low, high, n_points):
        delta = float(delta)
        try:
            resp = probe_response(op, params, drives, delta)
            rows.append(SweepRow(delta=delta, response=resp, outputs=output_fields(resp, params, drives)))
        except (SimulationError, ArithmeticError) as e:
            logging.error(f"Sweep point delta={delta:.6e} failed: {e}")
            rows.append(SweepRow(delta=delta, error=str(e)))
    logging.info(f"Spectrum sweep finished: {n_points} points over [{low:.6e}, {high:.6e}] rad/s")
    return rows


def dip_fwhm(rows):
    """(centre, FWHM) in rad/s of the transparency dip in the normalised left probe output.

    The dip depth is measured from the largest value in the sweep; the half-depth
    crossings on either side of the minimum are linearly interpolated.
    """
    good = [row for row in rows if row.error is None]
    deltas = np.array([row.delta for row in good])
    power = np.array([row.outputs.normalized_powers(row.response.probe_amplitude)[0] for row in good])
    depth = power.max() - power
    centre_index = int(np.argmax(depth))
    half = depth[centre_index] / 2.0

    def crossing(indices):
        previous = centre_index
        for index in indices:
            if depth[index] <= half:
                x0, x1 = deltas[previous], deltas[index]
                y0, y1 = depth[previous], depth[index]
                return x0 + (half - y0) * (x1 - x0) / (y1 - y0)
            previous = index
        raise InvalidParameterError("sweep range does not contain both half-depth crossings of the dip")

    left = crossing(range(centre_index - 1, -1, -1))
    right = crossing(range(centre_index + 1, len(depth)))
    return float(deltas[centre_index]), float(right - left)
