"""Physical parameters of the double-cavity device and the fields that drive it.

Units: every frequency and rate is angular (rad/s); amplitudes E carry s^-1 so
that |a|^2 is an intracavity photon number. Config files quote ordinary
frequencies in Hz; the conversion happens in config.RunConfig.
"""

import logging
import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from errors import InvalidParameterError

HBAR = 1.0545718e-34
C_LIGHT = 2.99792458e8
TWO_PI = 2.0 * math.pi

# Fourier-limited Gaussian time-bandwidth product
TIME_BANDWIDTH_PRODUCT = 0.44


def _require_finite(**values):
    for name, value in values.items():
        if not math.isfinite(value):
            raise InvalidParameterError(f"{name} must be finite, got {value!r}")


def drive_amplitude(kappa, power, omega):
    """E = sqrt(2 kappa P / (hbar omega)) for a laser of power P feeding a cavity of decay kappa."""
    _require_finite(kappa=kappa, power=power, omega=omega)
    if kappa <= 0 or omega <= 0:
        raise InvalidParameterError(f"kappa and omega must be positive (kappa={kappa!r}, omega={omega!r})")
    if power < 0:
        raise InvalidParameterError(f"power must be non-negative, got {power!r}")
    return math.sqrt(2.0 * kappa * power / (HBAR * omega))


def coupling_from_geometry(omega_i, length, mass, omega_m):
    """Single-photon coupling g_i = (omega_i / L_i) sqrt(hbar / (2 m omega_m))."""
    _require_finite(omega_i=omega_i, length=length, mass=mass, omega_m=omega_m)
    if length <= 0:
        raise InvalidParameterError(f"cavity length must be positive, got {length!r}")
    if omega_i <= 0 or mass <= 0 or omega_m <= 0:
        raise InvalidParameterError("omega_i, mass and omega_m must be positive")
    return (omega_i / length) * math.sqrt(HBAR / (2.0 * mass * omega_m))


def pulse_bandwidth(tau_p):
    """Angular spectral width 0.44 / tau_p of a Fourier-limited Gaussian pulse."""
    if not tau_p > 0:
        raise InvalidParameterError(f"tau_p must be positive, got {tau_p!r}")
    return TIME_BANDWIDTH_PRODUCT / tau_p


def angular_frequency(wavelength):
    if not wavelength > 0:
        raise InvalidParameterError(f"wavelength must be positive, got {wavelength!r}")
    return TWO_PI * C_LIGHT / wavelength


def bare_cavity_frequencies(omega_m, kappa1, kappa2, g1, g2, omega_L, omega_R, E_L, E_R, Delta1, Delta2):
    """Bare cavity frequencies that put the effective detunings at (Delta1, Delta2).

    With the effective detunings fixed the photon numbers, and hence Q0, are
    explicit, so no iteration is needed.
    """
    n1 = E_L**2 / (kappa1**2 + Delta1**2)
    n2 = E_R**2 / (kappa2**2 + Delta2**2)
    q0 = (g1 * n1 - g2 * n2) / omega_m
    return omega_L + Delta1 + g1 * q0, omega_R + Delta2 - g2 * q0


class SystemParams(BaseModel):
    """Mechanical and optical constants of the two-cavity device."""

    model_config = ConfigDict(frozen=True)

    mass: float = Field(gt=0)
    omega_m: float = Field(gt=0)
    gamma_m: float = Field(gt=0)
    kappa1: float = Field(gt=0)
    kappa2: float = Field(gt=0)
    # zero is allowed: it expresses the decoupled limit
    g1: float = Field(ge=0)
    g2: float = Field(ge=0)
    omega1: float = Field(gt=0)
    omega2: float = Field(gt=0)

    @field_validator("*")
    @classmethod
    def _finite(cls, value, info):
        if not math.isfinite(value):
            raise ValueError(f"{info.field_name} must be finite")
        return value

    @model_validator(mode="after")
    def _resolved_sideband(self):
        kappa_max = max(self.kappa1, self.kappa2)
        if self.omega_m <= 10.0 * kappa_max:
            logging.warning(
                f"Outside the resolved-sideband regime: omega_m={self.omega_m:.4e} rad/s "
                f"is not > 10*max(kappa)={10.0 * kappa_max:.4e} rad/s"
            )
        return self


class PulseEnvelope(BaseModel):
    """exp(-1/2 ((t - t_c)/tau)^beta) lobes centred on the write and (optionally) read times.

    ``lobes`` selects which lobes the drive carries when no explicit choice is made.
    """

    model_config = ConfigDict(frozen=True)

    peak_amplitude: float = Field(ge=0)
    t_wr: float
    t_rd: Optional[float] = None
    tau: float = Field(gt=0)
    beta: int = 2
    lobes: Literal["write", "read", "both"] = "both"

    @field_validator("beta")
    @classmethod
    def _even_beta(cls, value):
        if value < 2 or value % 2:
            raise ValueError(f"beta must be an even integer >= 2, got {value}")
        return value

    @model_validator(mode="after")
    def _read_lobe_needs_time(self):
        if self.lobes == "read" and self.t_rd is None:
            raise ValueError("a read-only envelope needs t_rd")
        return self


class DriveConfig(BaseModel):
    """Coupling lasers (L on cavity 1, R on cavity 2) and the weak probe on cavity 1."""

    model_config = ConfigDict(frozen=True)

    omega_L: float = Field(gt=0)
    omega_R: float = Field(gt=0)
    omega_p: float = Field(gt=0)
    power_L: float = Field(ge=0)
    power_R: float = Field(ge=0)
    power_p: float = Field(ge=0)
    delta: float
    envelope_L: Optional[PulseEnvelope] = None
    envelope_R: Optional[PulseEnvelope] = None
    envelope_p: Optional[PulseEnvelope] = None

    @model_validator(mode="after")
    def _delta_matches(self):
        # delta is stored redundantly; it must agree to the last few ulps of omega_p
        mismatch = abs(self.omega_p - self.omega_L - self.delta)
        if mismatch > 8.0 * math.ulp(max(self.omega_p, self.omega_L)):
            raise ValueError(
                f"delta={self.delta!r} disagrees with omega_p - omega_L={self.omega_p - self.omega_L!r}"
            )
        return self

    @property
    def pulsed(self):
        return any(env is not None for env in (self.envelope_L, self.envelope_R, self.envelope_p))

    def constant(self, **powers):
        """Copy with envelopes dropped (peak powers held constant), optionally replacing powers."""
        update = {"envelope_L": None, "envelope_R": None, "envelope_p": None}
        update.update(powers)
        return self.model_copy(update=update)


def drive_amplitudes(params, drives):
    """Peak (or constant) amplitudes (E_L, E_R, E_p) in s^-1."""
    return (
        drive_amplitude(params.kappa1, drives.power_L, drives.omega_L),
        drive_amplitude(params.kappa2, drives.power_R, drives.omega_R),
        drive_amplitude(params.kappa1, drives.power_p, drives.omega_p),
    )
