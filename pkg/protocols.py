"""Pulsed experiments: single-cavity memory and double-cavity transduction, plus parameter scans."""

import concurrent.futures
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from config import scan_threads
from dynamics import EnvelopeState, Trajectory, default_envelope_dt, integrate_rk4
from errors import InstabilityError, InvalidParameterError, SimulationError
from stability import is_stable_routh_hurwitz, linearize, max_growth_rate
from steady_state import eit_width, solve_operating_point

DEFAULT_MAX_TRANSIENT_GAIN = 9.2
LEAD_WIDTHS = 5.0
WINDOW_WIDTHS = 3.0
CASE_DETUNING = {"red": 1.0, "resonant": 0.0, "blue": -1.0}


@dataclass
class MemoryResult:
    trajectory: Trajectory
    retrieval_efficiency: float
    storage_peak: float
    t_wr: float
    t_rd: float
    read_window: Tuple[float, float]


@dataclass
class TransductionResult:
    trajectory: Trajectory
    stokes_peak: float
    antistokes_peak: float
    phonon_read_peak: float
    detuning_case: str
    omega_antistokes: float
    omega_stokes: float
    read_window: Tuple[float, float]

    @property
    def dominant_peak(self):
        return max(self.stokes_peak, self.antistokes_peak)


@dataclass
class ScanRow:
    index: int
    value: float
    metrics: dict = field(default_factory=dict)
    error: Optional[str] = None


def check_stage(params, stage_drives, tau, label, max_transient_gain=DEFAULT_MAX_TRANSIENT_GAIN):
    """Stability gate for one drive stage held at its peak powers.

    An unstable stage is still run when the drive lobe is too short for the
    instability to grow far: the growth rate follows the drive power, whose lobe
    integrates to sqrt(pi) tau.
    """
    op = solve_operating_point(params, stage_drives)
    system = linearize(params, op)
    report = is_stable_routh_hurwitz(system)
    if report.stable:
        return report
    if report.verdict == "marginal":
        logging.warning(f"{label} stage is marginally stable; running anyway")
        return report
    gain = max(max_growth_rate(system), 0.0) * math.sqrt(math.pi) * tau
    if gain > max_transient_gain:
        logging.error(f"{label} stage unstable: transient gain exponent {gain:.3f} exceeds {max_transient_gain:.3f}")
        raise InstabilityError(
            f"{label} stage is unstable (Routh-Hurwitz verdict {report.verdict}, margin {report.margin:.4e}, "
            f"transient gain exponent {gain:.3f} > {max_transient_gain:.3f})",
            report,
        )
    logging.warning(
        f"{label} stage is unstable under constant drive; accepting transient gain exponent {gain:.3f} for the pulsed run"
    )
    return report


def _window_peak(trajectory, values, window):
    inside = (trajectory.times >= window[0]) & (trajectory.times <= window[1])
    if not np.any(inside):
        raise InvalidParameterError("read window contains no recorded samples; lower record_every")
    return float(np.max(values[inside]))


def _memory_regime_checks(params, drives):
    op = solve_operating_point(params, drives.constant())
    width = eit_width(op, params)
    if drives.envelope_p is not None and 1.0 / drives.envelope_p.tau >= width:
        logging.warning(f"Probe bandwidth 1/tau_p={1.0 / drives.envelope_p.tau:.4e} s^-1 is not below the EIT width {width:.4e} rad/s")
    if abs(op.Delta1 - params.omega_m) > params.kappa1:
        logging.warning(f"Coupling laser is not red-detuned by omega_m: Delta1={op.Delta1:.6e} rad/s")
    if abs(drives.delta - params.omega_m) > params.kappa1:
        logging.warning(f"Probe is not on the mechanical sideband: delta={drives.delta:.6e} rad/s")


def run_memory(params, drives, dt=None, record_every=None, max_transient_gain=DEFAULT_MAX_TRANSIENT_GAIN):
    """Write a probe pulse into phonons with the first coupling lobe, read it back with the second."""
    if drives.power_R != 0 or drives.envelope_R is not None:
        raise InvalidParameterError("the memory protocol uses cavity 1 only; cavity 2 must be undriven")
    env_L = drives.envelope_L
    if env_L is None or env_L.t_rd is None or drives.envelope_p is None:
        raise InvalidParameterError("the memory protocol needs a two-lobe coupling envelope and a probe envelope")

    _memory_regime_checks(params, drives)
    check_stage(params, drives.constant(), env_L.tau, "write/read", max_transient_gain)

    t_wr, t_rd, tau_L = env_L.t_wr, env_L.t_rd, env_L.tau
    t0, t1 = t_wr - LEAD_WIDTHS * tau_L, t_rd + LEAD_WIDTHS * tau_L
    trajectory = integrate_rk4(
        EnvelopeState(), t0, t1, dt or default_envelope_dt(params, drives), params, drives, record_every
    )
    window = (t_rd - WINDOW_WIDTHS * tau_L, t_rd + WINDOW_WIDTHS * tau_L)
    result = MemoryResult(
        trajectory=trajectory,
        retrieval_efficiency=_window_peak(trajectory, trajectory.left_output_power, window),
        storage_peak=float(np.max(trajectory.phonon_signal)),
        t_wr=t_wr,
        t_rd=t_rd,
        read_window=window,
    )
    logging.info(
        f"Memory run: retrieval efficiency {result.retrieval_efficiency:.4f}, storage peak {result.storage_peak:.4e}"
    )
    return result


def run_transduction(params, drives, detuning_case, dt=None, record_every=None,
                     max_transient_gain=DEFAULT_MAX_TRANSIENT_GAIN):
    """Write through cavity 1, read the stored phonons out through cavity 2.

    The bare cavity-2 frequency is placed at omega_R + omega_m (red), omega_R
    (resonant) or omega_R - omega_m (blue).
    """
    if detuning_case not in CASE_DETUNING:
        raise InvalidParameterError(f"detuning case must be one of {sorted(CASE_DETUNING)}, got {detuning_case!r}")
    env_L, env_R = drives.envelope_L, drives.envelope_R
    if env_L is None or env_R is None or env_R.t_rd is None or drives.envelope_p is None:
        raise InvalidParameterError("transduction needs write, read and probe envelopes")

    params = params.model_copy(update={"omega2": drives.omega_R + CASE_DETUNING[detuning_case] * params.omega_m})
    check_stage(params, drives.constant(power_R=0.0), env_L.tau, "write", max_transient_gain)
    check_stage(params, drives.constant(power_L=0.0), env_R.tau, "read", max_transient_gain)

    t_rd = env_R.t_rd
    t0, t1 = env_L.t_wr - LEAD_WIDTHS * env_L.tau, t_rd + LEAD_WIDTHS * env_R.tau
    trajectory = integrate_rk4(
        EnvelopeState(), t0, t1, dt or default_envelope_dt(params, drives), params, drives, record_every
    )
    window = (t_rd - WINDOW_WIDTHS * env_R.tau, t_rd + WINDOW_WIDTHS * env_R.tau)
    result = TransductionResult(
        trajectory=trajectory,
        stokes_peak=_window_peak(trajectory, trajectory.right_stokes_power, window),
        antistokes_peak=_window_peak(trajectory, trajectory.right_antistokes_power, window),
        phonon_read_peak=_window_peak(trajectory, trajectory.phonon_signal, window),
        detuning_case=detuning_case,
        omega_antistokes=drives.omega_R + drives.delta,
        omega_stokes=drives.omega_R - drives.delta,
        read_window=window,
    )
    logging.info(
        f"Transduction ({detuning_case}): anti-Stokes peak {result.antistokes_peak:.4e}, Stokes peak {result.stokes_peak:.4e}"
    )
    return result


def run_configured(config, protocol):
    """Run ``memory`` or ``transduction`` from a RunConfig."""
    params = config.system_params()
    options = {"dt": config.dt_s, "record_every": config.record_every, "max_transient_gain": config.max_transient_gain}
    if protocol == "memory":
        return run_memory(params, config.memory_drives(params), **options)
    if protocol == "transduction":
        return run_transduction(params, config.transduction_drives(params), config.detuning_case, **options)
    raise InvalidParameterError(f"unknown protocol {protocol!r}")


def result_metrics(result):
    if isinstance(result, MemoryResult):
        return {"retrieval_efficiency": result.retrieval_efficiency, "storage_peak": result.storage_peak}
    return {
        "antistokes_peak": result.antistokes_peak,
        "stokes_peak": result.stokes_peak,
        "phonon_read_peak": result.phonon_read_peak,
    }


def _scan_point(config, scan_key, index, value, protocol):
    point = config.with_overrides(**{scan_key: value})
    return ScanRow(index=index, value=value, metrics=result_metrics(run_configured(point, protocol)))


def efficiency_scan(config, scan_key, values, protocol=None, threads=None):
    """Repeat a protocol for each value of one numeric config key.

    Points run in thread batches; rows come back in input order and a failed
    point becomes a row with its error text.
    """
    protocol = protocol or config.scan_protocol
    threads = threads or scan_threads()
    values = list(values)
    rows = [None] * len(values)
    for start in range(0, len(values), threads):
        batch = list(enumerate(values))[start : start + threads]
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
            future_to_index = {
                executor.submit(_scan_point, config, scan_key, index, value, protocol): (index, value)
                for index, value in batch
            }
            for future in concurrent.futures.as_completed(future_to_index):
                index, value = future_to_index[future]
                try:
                    rows[index] = future.result()
                except (SimulationError, ValueError) as e:
                    logging.error(f"Scan point {scan_key}={value!r} failed: {e}")
                    rows[index] = ScanRow(index=index, value=value, error=str(e))
        logging.info(f"Scan batch {start // threads + 1} finished ({min(start + threads, len(values))}/{len(values)} points)")
    return rows
