"""Time-domain integration: harmonic-balance envelopes and the full nonlinear model.

Every field X is expanded as X0(t) + X+(t) e^{-i delta t} + X-(t) e^{+i delta t}
and truncated at first order in the probe. The full model integrates the
mirror-coupled equations directly and is only used to cross-check the envelopes.
"""

import logging
import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from errors import IntegrationDivergedError, InvalidParameterError
from params import TWO_PI, drive_amplitudes
from stability import linearize, max_growth_rate

MAX_STEPS = 10**8
MAX_ROWS = 10**6
TARGET_ROWS = 1000
STEP_FRACTION = 50.0
DRIFT_TOLERANCE = 1e-8
UNIFORM_TOLERANCE = 1e-9
# periods of the probe beat a lock-in window must span
MIN_WINDOW_PERIODS = 3.0
# e-folds of the slowest linearized mode before a state counts as settled
SETTLING_EFOLDS = math.log(1e12)
CHUNK_STEPS = 1 << 16


@dataclass(frozen=True)
class EnvelopeState:
    Q0c: complex = 0j
    P0c: complex = 0j
    Qplus: complex = 0j
    Pplus: complex = 0j
    a10: complex = 0j
    a1plus: complex = 0j
    a1minus: complex = 0j
    a20: complex = 0j
    a2plus: complex = 0j
    a2minus: complex = 0j

    @classmethod
    def field_names(cls):
        return tuple(field.name for field in fields(cls))

    @classmethod
    def from_array(cls, values):
        return cls(*(complex(value) for value in values))

    def to_array(self):
        return np.array([getattr(self, name) for name in self.field_names()], dtype=complex)


def analytic_state(op, resp, params):
    """Envelope state built from the analytic operating point and probe response."""
    if resp is None:
        return EnvelopeState(Q0c=op.Q0, a10=op.a10, a20=op.a20)
    # stationary Qplus equation: i delta Qplus + omega_m Pplus = 0
    pplus = -1j * resp.delta * resp.Qplus / params.omega_m
    return EnvelopeState(
        Q0c=op.Q0,
        P0c=0j,
        Qplus=resp.Qplus,
        Pplus=pplus,
        a10=op.a10,
        a1plus=resp.a1plus,
        a1minus=resp.a1minus,
        a20=op.a20,
        a2plus=resp.a2plus,
        a2minus=resp.a2minus,
    )


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    probe: np.ndarray
    probe_peak: float
    kappa1: float
    kappa2: float
    final_time: float
    final_state: EnvelopeState

    def component(self, name):
        return self.states[:, EnvelopeState.field_names().index(name)]

    def _normalized(self, values):
        if self.probe_peak == 0:
            return np.zeros(len(self.times))
        return np.abs(values / self.probe_peak) ** 2

    @property
    def left_output_power(self):
        return self._normalized(2.0 * self.kappa1 * self.component("a1plus") - self.probe)

    @property
    def phonon_signal(self):
        return self._normalized(self.kappa1 * self.component("Qplus"))

    @property
    def right_stokes_power(self):
        return self._normalized(2.0 * self.kappa2 * self.component("a2minus"))

    @property
    def right_antistokes_power(self):
        return self._normalized(2.0 * self.kappa2 * self.component("a2plus"))


@dataclass
class FullSeries:
    times: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    a1: np.ndarray
    a2: np.ndarray


@dataclass
class Demodulated:
    times: np.ndarray
    components: dict
    window: float


def envelope(t, env, which=None):
    """exp(-1/2 ((t - t_c)/tau)^beta) summed over the selected lobes, times the peak amplitude."""
    which = which or env.lobes
    t = np.asarray(t, dtype=float)
    centres = []
    if which in ("write", "both"):
        centres.append(env.t_wr)
    if which in ("read", "both") and env.t_rd is not None:
        centres.append(env.t_rd)
    elif which == "read":
        raise InvalidParameterError("read lobe requested but the envelope has no t_rd")
    profile = np.zeros_like(t)
    for centre in centres:
        profile = profile + np.exp(-0.5 * ((t - centre) / env.tau) ** env.beta)
    return env.peak_amplitude * profile


def drive_profiles(params, drives, times):
    """(E_L(t), E_R(t), E_p(t)) sampled on ``times``; constant drives are broadcast."""
    times = np.asarray(times, dtype=float)
    constants = drive_amplitudes(params, drives)
    profiles = []
    for env, constant in zip((drives.envelope_L, drives.envelope_R, drives.envelope_p), constants):
        profiles.append(envelope(times, env) if env is not None else np.full(times.shape, constant))
    return tuple(profiles)


def probe_peak(params, drives):
    if drives.envelope_p is not None:
        return drives.envelope_p.peak_amplitude
    return drive_amplitudes(params, drives)[2]


def _envelope_rhs(params, drives):
    g1, g2 = params.g1, params.g2
    wm, gm = params.omega_m, params.gamma_m
    k1, k2 = params.kappa1, params.kappa2
    det1 = params.omega1 - drives.omega_L
    det2 = params.omega2 - drives.omega_R
    idelta = 1j * drives.delta

    def rhs(y, eL, eR, ep):
        q0, p0, qp, pp, a10, a1p, a1m, a20, a2p, a2m = y.tolist()
        c1 = k1 + 1j * (det1 - g1 * q0)
        c2 = k2 + 1j * (det2 + g2 * q0)
        a10c, a20c, qpc = a10.conjugate(), a20.conjugate(), qp.conjugate()
        force0 = g1 * (a10 * a10c) - g2 * (a20 * a20c)
        forcep = g1 * (a10c * a1p + a10 * a1m.conjugate()) - g2 * (a20c * a2p + a20 * a2m.conjugate())
        return np.array(
            [
                wm * p0,
                force0 - wm * q0 - gm * p0,
                idelta * qp + wm * pp,
                idelta * pp + forcep - wm * qp - gm * pp,
                -c1 * a10 + eL,
                (idelta - c1) * a1p + 1j * g1 * a10 * qp + ep,
                (-idelta - c1) * a1m + 1j * g1 * a10 * qpc,
                -c2 * a20 + eR,
                (idelta - c2) * a2p - 1j * g2 * a20 * qp,
                (-idelta - c2) * a2m - 1j * g2 * a20 * qpc,
            ]
        )

    return rhs


def _full_rhs(params, drives):
    g1, g2 = params.g1, params.g2
    wm, gm = params.omega_m, params.gamma_m
    k1, k2 = params.kappa1, params.kappa2
    det1 = params.omega1 - drives.omega_L
    det2 = params.omega2 - drives.omega_R

    def rhs(y, eL, eR, ep):
        q, p, a1, a2 = y.tolist()
        force = g1 * abs(a1) ** 2 - g2 * abs(a2) ** 2
        return np.array(
            [
                wm * p,
                force - wm * q - gm * p,
                -(k1 + 1j * (det1 - g1 * q)) * a1 + eL + ep,
                -(k2 + 1j * (det2 + g2 * q)) * a2 + eR,
            ]
        )

    return rhs


def envelope_derivatives(state, t, params, drives):
    """d(EnvelopeState)/dt at time ``t``."""
    eL, eR, ep = (float(profile[0]) for profile in drive_profiles(params, drives, [t]))
    rhs = _envelope_rhs(params, drives)
    return EnvelopeState.from_array(rhs(state.to_array(), eL, eR, ep))


def term_scales(state, params, drives, eL, eR, ep):
    """Per-component sum of the magnitudes of the terms entering each derivative."""
    s = state
    delta = abs(drives.delta)
    wm, gm = params.omega_m, params.gamma_m
    d1 = abs(params.omega1 - drives.omega_L - params.g1 * s.Q0c)
    d2 = abs(params.omega2 - drives.omega_R + params.g2 * s.Q0c)
    k1, k2, g1, g2 = params.kappa1, params.kappa2, params.g1, params.g2
    forcep = g1 * abs(s.a10) * (abs(s.a1plus) + abs(s.a1minus)) + g2 * abs(s.a20) * (abs(s.a2plus) + abs(s.a2minus))
    return np.array(
        [
            wm * (abs(s.P0c) + abs(s.Q0c)),
            g1 * abs(s.a10) ** 2 + g2 * abs(s.a20) ** 2 + wm * abs(s.Q0c) + gm * abs(s.P0c),
            delta * abs(s.Qplus) + wm * abs(s.Pplus),
            (delta + gm) * abs(s.Pplus) + forcep + wm * abs(s.Qplus),
            (k1 + d1) * abs(s.a10) + abs(eL),
            (delta + k1 + d1) * abs(s.a1plus) + g1 * abs(s.a10) * abs(s.Qplus) + abs(ep),
            (delta + k1 + d1) * abs(s.a1minus) + g1 * abs(s.a10) * abs(s.Qplus),
            (k2 + d2) * abs(s.a20) + abs(eR),
            (delta + k2 + d2) * abs(s.a2plus) + g2 * abs(s.a20) * abs(s.Qplus),
            (delta + k2 + d2) * abs(s.a2minus) + g2 * abs(s.a20) * abs(s.Qplus),
        ]
    )


def stationarity_residual(state, params, drives):
    """Largest |dX/dt| relative to the size of the terms that make it up, constant drives."""
    eL, eR, ep = drive_amplitudes(params, drives)
    derivative = _envelope_rhs(params, drives)(state.to_array(), eL, eR, ep)
    scales = term_scales(state, params, drives, eL, eR, ep)
    ratios = [abs(value) / scale for value, scale in zip(derivative, scales) if scale > 0]
    return max(ratios, default=0.0)


def default_envelope_dt(params, drives):
    tau_p = drives.envelope_p.tau if drives.envelope_p is not None else math.inf
    kappa_max = max(params.kappa1, params.kappa2)
    return min(tau_p, 1.0 / kappa_max, 1.0 / params.omega_m) / STEP_FRACTION


def default_full_dt(drives):
    return TWO_PI / (100.0 * abs(drives.delta))


def coarse_stable_dt(params, drives, op):
    """Largest step keeping every retained envelope frequency inside the RK4 stability region."""
    delta = abs(drives.delta)
    fastest = max(delta + abs(op.Delta1), delta + abs(op.Delta2), params.omega_m + delta)
    return 2.0 / fastest


def settling_time(params, op):
    """Time for the slowest mode of the linearized system to decay by a factor 1e12.

    The sideband equations are the same linearization in a frame rotating at delta,
    so their decay rates match the operating point's eigenvalues.
    """
    rate = max_growth_rate(linearize(params, op))
    if not rate < 0:
        raise InvalidParameterError(f"operating point does not relax (max Re lambda = {rate:.4e} s^-1)")
    return SETTLING_EFOLDS / -rate


def _step_count(t0, t1, dt):
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt!r}")
    if not t1 > t0:
        raise InvalidParameterError(f"integration span must be positive, got [{t0!r}, {t1!r}]")
    n_steps = math.ceil((t1 - t0) / dt - 1e-9)
    if n_steps > MAX_STEPS:
        raise InvalidParameterError(f"{n_steps} steps exceed the limit of {MAX_STEPS}; increase dt")
    return max(1, n_steps)


def _record_stride(n_steps, record_every):
    stride = record_every or max(1, n_steps // TARGET_ROWS)
    if n_steps // stride + 1 > MAX_ROWS:
        stride = math.ceil(n_steps / (MAX_ROWS - 1))
    return stride


def _rk4(rhs, y, t0, h, n_steps, sample, stride):
    """Fixed-step RK4; ``sample(times)`` gives each drive on the half-step grid t0 + k h/2.

    The grid is sampled CHUNK_STEPS steps at a time.
    """
    half, sixth = 0.5 * h, h / 6.0
    recorded_steps, recorded = [0], [y]
    for first in range(0, n_steps, CHUNK_STEPS):
        count = min(CHUNK_STEPS, n_steps - first)
        grid = t0 + 0.5 * h * np.arange(2 * first, 2 * (first + count) + 1)
        eL, eR, ep = (profile.tolist() for profile in sample(grid))
        for offset in range(count):
            i, step = 2 * offset, first + offset
            k1 = rhs(y, eL[i], eR[i], ep[i])
            k2 = rhs(y + half * k1, eL[i + 1], eR[i + 1], ep[i + 1])
            k3 = rhs(y + half * k2, eL[i + 1], eR[i + 1], ep[i + 1])
            k4 = rhs(y + h * k3, eL[i + 2], eR[i + 2], ep[i + 2])
            y = y + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.isfinite(y.sum()):
                logging.error(f"Integration diverged at step {step + 1} of {n_steps}")
                raise IntegrationDivergedError(t0 + (step + 1) * h)
            if (step + 1) % stride == 0:
                recorded_steps.append(step + 1)
                recorded.append(y)
    return np.array(recorded_steps), np.array(recorded), y


def integrate_rk4(initial, t0, t1, dt, params, drives, record_every=None):
    """Envelope equations from ``t0`` to ``t1`` with fixed-step RK4."""
    n_steps = _step_count(t0, t1, dt)
    h = (t1 - t0) / n_steps
    stride = _record_stride(n_steps, record_every)
    logging.info(f"Envelope RK4: {n_steps} steps of {h:.4e} s over [{t0:.4e}, {t1:.4e}] s")

    steps, states, final = _rk4(
        _envelope_rhs(params, drives), initial.to_array(), t0, h, n_steps,
        lambda times: drive_profiles(params, drives, times), stride,
    )
    times = t0 + h * steps
    _check_imaginary_drift(states, times)
    return Trajectory(
        times=times,
        states=states,
        probe=drive_profiles(params, drives, times)[2],
        probe_peak=probe_peak(params, drives),
        kappa1=params.kappa1,
        kappa2=params.kappa2,
        final_time=t1,
        final_state=EnvelopeState.from_array(final),
    )


def _check_imaginary_drift(states, times):
    q0, p0 = states[:, 0], states[:, 1]
    drift = np.maximum(np.abs(q0.imag), np.abs(p0.imag)) - DRIFT_TOLERANCE * (1.0 + np.abs(q0))
    if np.any(drift > 0):
        index = int(np.argmax(drift > 0))
        logging.warning(f"Imaginary part of the DC mechanical pair drifted at t={times[index]:.6e} s")


def simulate_full(params, drives, dt, t0, t1, initial=None, record_every=1):
    """Full nonlinear model (Q, P, a1, a2) in the coupling-laser frame, probe as E_p e^{-i delta t}."""
    limit = TWO_PI / (50.0 * abs(drives.delta)) if drives.delta else math.inf
    if dt > limit * (1 + 1e-12):
        raise InvalidParameterError(f"dt={dt:.4e} s does not resolve the probe beat (needs <= {limit:.4e} s)")
    n_steps = _step_count(t0, t1, dt)
    h = (t1 - t0) / n_steps
    stride = _record_stride(n_steps, record_every)
    def sample(times):
        eL, eR, ep = drive_profiles(params, drives, times)
        return eL, eR, ep * np.exp(-1j * drives.delta * times)

    y0 = np.zeros(4, dtype=complex) if initial is None else np.asarray(initial, dtype=complex)
    logging.info(f"Full-model RK4: {n_steps} steps of {h:.4e} s")

    steps, states, _ = _rk4(_full_rhs(params, drives), y0, t0, h, n_steps, sample, stride)
    return FullSeries(
        times=t0 + h * steps,
        Q=states[:, 0].real,
        P=states[:, 1].real,
        a1=states[:, 2],
        a2=states[:, 3],
    )


def demodulate(times, signal, delta, window):
    """Sliding lock-in: A_n(t) = mean of X e^{+i n delta t'} over [t - window/2, t + window/2].

    Returns components n = -1, 0, +1 on the interior points where the window fits.
    """
    times = np.asarray(times, dtype=float)
    signal = np.asarray(signal, dtype=complex)
    period = TWO_PI / abs(delta)
    if window < MIN_WINDOW_PERIODS * period:
        raise InvalidParameterError(
            f"window {window:.4e} s is shorter than {MIN_WINDOW_PERIODS:g} probe periods ({MIN_WINDOW_PERIODS * period:.4e} s)"
        )
    steps = np.diff(times)
    dt = steps.mean()
    if np.max(np.abs(steps - dt)) > UNIFORM_TOLERANCE * dt:
        raise InvalidParameterError("demodulation needs a uniform time grid")
    m = int(round(window / (2.0 * dt)))
    if 2 * m >= len(times):
        raise InvalidParameterError("series is shorter than the demodulation window")

    components = {}
    for n in (-1, 0, 1):
        running = cumulative_trapezoid(signal * np.exp(1j * n * delta * times), times, initial=0)
        components[n] = (running[2 * m :] - running[: -2 * m]) / (2 * m * dt)
    return Demodulated(times=times[m : len(times) - m], components=components, window=2 * m * dt)


def reconstruct_field(times, zeroth, plus, minus, delta):
    """X(t) = X0 + X+ e^{-i delta t} + X- e^{+i delta t}."""
    phase = np.exp(-1j * delta * np.asarray(times))
    return zeroth + plus * phase + minus * np.conj(phase)


def convergence_order(initial, t0, t1, dt, params, drives):
    """Observed RK4 order from final states at n, 2n and 4n steps."""
    n_steps = _step_count(t0, t1, dt)
    span = t1 - t0
    finals = []
    for factor in (1, 2, 4):
        count = n_steps * factor
        trajectory = integrate_rk4(initial, t0, t1, span / count, params, drives, record_every=count)
        finals.append(trajectory.final_state.to_array())
    coarse = np.linalg.norm(finals[0] - finals[1])
    fine = np.linalg.norm(finals[1] - finals[2])
    order = math.log2(coarse / fine)
    logging.info(f"Observed RK4 order {order:.3f} from {n_steps}, {2 * n_steps}, {4 * n_steps} steps")
    return order


def settle_to_stationary(params, drives, op, initial=None, duration: Optional[float] = None):
    """Run constant drives from ``initial`` (default: analytic operating point, no sidebands) until settled."""
    initial = initial or analytic_state(op, None, params)
    duration = duration or settling_time(params, op)
    dt = coarse_stable_dt(params, drives, op)
    trajectory = integrate_rk4(initial, 0.0, duration, dt, params, drives, record_every=_step_count(0.0, duration, dt))
    return trajectory.final_state
