import difflib
import hashlib
import io
import logging
import os
from typing import Literal, Optional

from dotenv import load_dotenv
from dotenv.parser import parse_stream
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from errors import ConfigError
from params import (
    TWO_PI,
    DriveConfig,
    PulseEnvelope,
    SystemParams,
    angular_frequency,
    bare_cavity_frequencies,
    coupling_from_geometry,
    drive_amplitude,
)

load_dotenv()

DEFAULT_THREADS = 3
DEFAULT_READ_DELAY = 1.5e-6
UNIT_SUFFIXES = ("kg", "hz", "m", "w", "s")
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"


def scan_threads():
    """Worker cap for scans, from OMSIM_THREADS."""
    raw = os.getenv("OMSIM_THREADS")
    if raw is None:
        return DEFAULT_THREADS
    try:
        threads = int(raw)
    except ValueError:
        logging.warning(f"Ignoring OMSIM_THREADS={raw!r}: not an integer")
        return DEFAULT_THREADS
    return max(1, threads)


def configure_logging(level=None):
    level = level or os.getenv("OMSIM_LOG_LEVEL", "INFO")
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO), format=LOG_FORMAT)


class RunConfig(BaseModel):
    """Everything a run needs, in config-file units (ordinary Hz, W, s, m, kg)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mass_kg: float = Field(gt=0)
    omega_m_hz: float = Field(gt=0)
    gamma_m_hz: float = Field(gt=0)
    kappa1_hz: float = Field(gt=0)
    kappa2_hz: float = Field(gt=0)
    g1_hz: Optional[float] = Field(default=None, ge=0)
    g2_hz: Optional[float] = Field(default=None, ge=0)
    length1_m: Optional[float] = Field(default=None, gt=0)
    length2_m: Optional[float] = Field(default=None, gt=0)
    lambda_l_m: float = Field(gt=0)
    lambda_r_m: Optional[float] = Field(default=None, gt=0)
    power_l_w: float = Field(ge=0)
    power_r_w: float = Field(ge=0)
    power_p_w: float = Field(ge=0)
    delta_hz: float
    detuning1_hz: float
    detuning2_hz: float
    detuning_reference: Literal["bare", "effective"] = "bare"

    tau_p_s: float = Field(default=0.3e-6, gt=0)
    tau_l_s: float = Field(default=0.3e-6, gt=0)
    tau_r_s: Optional[float] = Field(default=None, gt=0)
    t_write_s: float = 1.5e-6
    t_read_s: Optional[float] = None
    shape: Literal["gaussian", "supergaussian"] = "gaussian"
    beta: Optional[int] = None

    dt_s: Optional[float] = Field(default=None, gt=0)
    record_every: Optional[int] = Field(default=None, ge=1)
    seed: int = 12345
    detuning_case: Literal["red", "resonant", "blue"] = "red"
    n_points: int = Field(default=401, ge=1)
    sweep_min_hz: Optional[float] = None
    sweep_max_hz: Optional[float] = None
    scan_key: Optional[str] = None
    scan_values: Optional[str] = None
    scan_protocol: Literal["memory", "transduction"] = "memory"
    max_transient_gain: float = Field(default=9.2, gt=0)
    verify_draws: int = Field(default=1000, ge=1)
    out_dir: str = "out"

    # keys filled in from other keys rather than supplied
    _derived: frozenset = PrivateAttr(default_factory=frozenset)

    @model_validator(mode="wrap")
    @classmethod
    def _fill_defaults(cls, data, handler):
        if not isinstance(data, dict):
            return handler(data)
        data = dict(data)
        supplied = {key for key, value in data.items() if value is not None}
        t_write = data.get("t_write_s", 1.5e-6)
        if data.get("t_read_s") is None and isinstance(t_write, (int, float)):
            data["t_read_s"] = t_write + DEFAULT_READ_DELAY
        if data.get("tau_r_s") is None:
            data["tau_r_s"] = data.get("tau_l_s", 0.3e-6)
        if data.get("lambda_r_m") is None and data.get("lambda_l_m") is not None:
            data["lambda_r_m"] = data["lambda_l_m"]
        if data.get("beta") is None:
            data["beta"] = 4 if data.get("shape") == "supergaussian" else 2
        omega_m, kappa1 = data.get("omega_m_hz"), data.get("kappa1_hz")
        if isinstance(omega_m, (int, float)) and isinstance(kappa1, (int, float)):
            if data.get("sweep_min_hz") is None:
                data["sweep_min_hz"] = omega_m - 3.0 * kappa1
            if data.get("sweep_max_hz") is None:
                data["sweep_max_hz"] = omega_m + 3.0 * kappa1
        config = handler(data)
        config._derived = frozenset(key for key in DERIVED_FROM if key not in supplied)
        return config

    @model_validator(mode="after")
    def _consistent(self):
        if self.g1_hz is None and self.length1_m is None:
            raise ValueError("g1_hz: either g1_hz or length1_m is required")
        if self.g2_hz is None and self.length2_m is None:
            raise ValueError("g2_hz: either g2_hz or length2_m is required")
        if self.shape == "gaussian" and self.beta != 2:
            raise ValueError(f"beta: shape 'gaussian' needs beta = 2, got {self.beta}")
        if self.beta < 2 or self.beta % 2:
            raise ValueError(f"beta: must be an even integer >= 2, got {self.beta}")
        if self.t_read_s <= self.t_write_s:
            raise ValueError("t_read_s: read pulse must come after the write pulse")
        if self.sweep_max_hz < self.sweep_min_hz:
            raise ValueError("sweep_max_hz: sweep range must be increasing")
        if (self.scan_key is None) != (self.scan_values is None):
            raise ValueError("scan_key: scan_key and scan_values go together")
        if self.scan_key is not None:
            if self.scan_key not in NUMERIC_KEYS:
                raise ValueError(f"scan_key: '{self.scan_key}' is not a numeric config key")
            self.scan_value_list()
        return self

    # Angular quantities used by the physics modules

    @property
    def omega_L(self):
        return angular_frequency(self.lambda_l_m)

    @property
    def omega_R(self):
        return angular_frequency(self.lambda_r_m)

    @property
    def delta(self):
        return TWO_PI * self.delta_hz

    @property
    def sweep_range(self):
        return TWO_PI * self.sweep_min_hz, TWO_PI * self.sweep_max_hz

    def scan_value_list(self):
        if self.scan_values is None:
            return []
        try:
            return [float(item) for item in self.scan_values.split(",") if item.strip()]
        except ValueError:
            raise ValueError(f"scan_values: unparsable number list {self.scan_values!r}") from None

    def system_params(self):
        omega_m = TWO_PI * self.omega_m_hz
        kappa1 = TWO_PI * self.kappa1_hz
        kappa2 = TWO_PI * self.kappa2_hz
        delta1 = TWO_PI * self.detuning1_hz
        delta2 = TWO_PI * self.detuning2_hz
        omega_L, omega_R = self.omega_L, self.omega_R

        # geometry couplings use the laser-referenced cavity frequency; g*Q0 is far below its precision
        g1 = TWO_PI * self.g1_hz if self.g1_hz is not None else coupling_from_geometry(
            omega_L + delta1, self.length1_m, self.mass_kg, omega_m
        )
        g2 = TWO_PI * self.g2_hz if self.g2_hz is not None else coupling_from_geometry(
            omega_R + delta2, self.length2_m, self.mass_kg, omega_m
        )
        if self.detuning_reference == "bare":
            omega1, omega2 = omega_L + delta1, omega_R + delta2
        else:
            E_L = drive_amplitude(kappa1, self.power_l_w, omega_L)
            E_R = drive_amplitude(kappa2, self.power_r_w, omega_R)
            omega1, omega2 = bare_cavity_frequencies(
                omega_m, kappa1, kappa2, g1, g2, omega_L, omega_R, E_L, E_R, delta1, delta2
            )
        return SystemParams(
            mass=self.mass_kg,
            omega_m=omega_m,
            gamma_m=TWO_PI * self.gamma_m_hz,
            kappa1=kappa1,
            kappa2=kappa2,
            g1=g1,
            g2=g2,
            omega1=omega1,
            omega2=omega2,
        )

    def drive_config(self, **powers):
        """Constant drives at the configured powers, optionally overriding some of them."""
        values = {"power_L": self.power_l_w, "power_R": self.power_r_w, "power_p": self.power_p_w}
        values.update(powers)
        return DriveConfig(
            omega_L=self.omega_L,
            omega_R=self.omega_R,
            omega_p=self.omega_L + self.delta,
            delta=self.delta,
            **values,
        )

    def memory_drives(self, params):
        """Two-lobe coupling pulse plus a Gaussian probe on cavity 1; cavity 2 undriven."""
        drives = self.drive_config(power_R=0.0)
        return drives.model_copy(
            update={
                "envelope_L": PulseEnvelope(
                    peak_amplitude=drive_amplitude(params.kappa1, self.power_l_w, drives.omega_L),
                    t_wr=self.t_write_s,
                    t_rd=self.t_read_s,
                    tau=self.tau_l_s,
                    beta=self.beta,
                    lobes="both",
                ),
                "envelope_p": self._probe_envelope(params, drives),
            }
        )

    def transduction_drives(self, params):
        """Write lobe on cavity 1 (coupling plus probe), read lobe on cavity 2 only."""
        drives = self.drive_config()
        return drives.model_copy(
            update={
                "envelope_L": PulseEnvelope(
                    peak_amplitude=drive_amplitude(params.kappa1, self.power_l_w, drives.omega_L),
                    t_wr=self.t_write_s,
                    tau=self.tau_l_s,
                    beta=self.beta,
                    lobes="write",
                ),
                "envelope_R": PulseEnvelope(
                    peak_amplitude=drive_amplitude(params.kappa2, self.power_r_w, drives.omega_R),
                    t_wr=self.t_write_s,
                    t_rd=self.t_read_s,
                    tau=self.tau_r_s,
                    beta=self.beta,
                    lobes="read",
                ),
                "envelope_p": self._probe_envelope(params, drives),
            }
        )

    def _probe_envelope(self, params, drives):
        # the probe stays Gaussian whatever the coupling shape
        return PulseEnvelope(
            peak_amplitude=drive_amplitude(params.kappa1, self.power_p_w, drives.omega_p),
            t_wr=self.t_write_s,
            tau=self.tau_p_s,
            beta=2,
            lobes="write",
        )

    def with_overrides(self, **values):
        """Re-validated copy with some keys replaced.

        Keys that were filled in from other keys are filled in again, so they
        follow a replaced source; keys the config supplied keep their values.
        """
        data = self.model_dump()
        for derived in self._derived:
            if derived not in values:
                data.pop(derived)
        data.update(values)
        return RunConfig(**data)

    def resolved_config_text(self):
        """Config text reproducing this run; filled-in keys are listed as comments."""
        lines = ["# resolved configuration"]
        for key, value in self.model_dump().items():
            if value is None:
                continue
            line = f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}"
            lines.append(f"# {line} (derived)" if key in self._derived else line)
        return "\n".join(lines) + "\n"

    def config_hash(self):
        text = "\n".join(line for line in self.resolved_config_text().splitlines() if not line.startswith("out_dir"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


KNOWN_KEYS = tuple(RunConfig.model_fields)
INT_KEYS = ("beta", "record_every", "seed", "n_points", "verify_draws")
STRING_KEYS = ("detuning_reference", "shape", "detuning_case", "scan_key", "scan_values", "scan_protocol", "out_dir")
NUMERIC_KEYS = tuple(key for key in KNOWN_KEYS if key not in STRING_KEYS and key not in INT_KEYS)
REQUIRED_KEYS = (
    "mass_kg", "omega_m_hz", "gamma_m_hz", "kappa1_hz", "kappa2_hz", "lambda_l_m",
    "power_l_w", "power_r_w", "power_p_w", "delta_hz", "detuning1_hz", "detuning2_hz",
)
# filled from other keys when absent, see RunConfig._fill_defaults
DERIVED_FROM = {
    "t_read_s": ("t_write_s",),
    "tau_r_s": ("tau_l_s",),
    "lambda_r_m": ("lambda_l_m",),
    "beta": ("shape",),
    "sweep_min_hz": ("omega_m_hz", "kappa1_hz"),
    "sweep_max_hz": ("omega_m_hz", "kappa1_hz"),
}


def _check_key(key, line):
    if key in KNOWN_KEYS:
        return
    stem, sep, suffix = key.rpartition("_")
    for known in KNOWN_KEYS:
        known_stem, _, known_suffix = known.rpartition("_")
        if known_suffix not in UNIT_SUFFIXES:
            continue
        if key == known_stem or (sep and stem == known_stem and suffix != known_suffix):
            raise ConfigError(
                f"unit suffix mismatch for '{key}': expected '_{known_suffix}'", line=line, key=key, suggestion=known
            )
    matches = difflib.get_close_matches(key, KNOWN_KEYS, n=1)
    raise ConfigError(f"unknown key '{key}'", line=line, key=key, suggestion=matches[0] if matches else None)


def _convert(key, raw, line):
    if raw is None or raw.strip() == "":
        raise ConfigError(f"missing value for '{key}'", line=line, key=key)
    raw = raw.strip()
    if key in STRING_KEYS:
        return raw
    try:
        return int(raw) if key in INT_KEYS else float(raw)
    except ValueError:
        raise ConfigError(f"unparsable number for '{key}': {raw!r}", line=line, key=key) from None


def _parse_override(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise ConfigError(f"override must look like key=value, got {text!r}", line=0)
    return key.strip(), value.strip()


def parse_config_text(text, overrides=(), source="<config>"):
    values, lines = {}, {}
    last_line = 1
    for binding in parse_stream(io.StringIO(text)):
        last_line = binding.original.line
        if binding.error:
            raise ConfigError(f"malformed line in {source}: {binding.original.string.strip()!r}", line=binding.original.line)
        if binding.key is None:
            continue
        key = binding.key
        _check_key(key, binding.original.line)
        if key in values:
            raise ConfigError(f"duplicate key '{key}'", line=binding.original.line, key=key)
        values[key] = _convert(key, binding.value, binding.original.line)
        lines[key] = binding.original.line

    for override in overrides:
        key, raw = _parse_override(override)
        _check_key(key, 0)
        values[key] = _convert(key, raw, 0)
        lines[key] = 0

    for key in REQUIRED_KEYS:
        if key not in values:
            raise ConfigError(f"missing required key '{key}' (end of {source})", line=last_line, key=key)

    try:
        config = RunConfig(**values)
    except ValidationError as e:
        first = e.errors()[0]
        key = first["loc"][0] if first["loc"] else None
        message = first["msg"]
        if key is None and ":" in message:
            # model-level checks name the offending key before the colon
            candidate = message.split(",", 1)[-1].split(":", 1)[0].strip()
            key = candidate if candidate in KNOWN_KEYS else None
        logging.error(f"Config validation failed in {source}: {message}")
        raise ConfigError(f"invalid value for '{key}': {message}", line=lines.get(key, last_line), key=key) from None
    return config


def parse_config(path, overrides=()):
    """Read and validate a flat key = value config file; overrides are 'key=value' strings."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from None
    config = parse_config_text(text, overrides, source=str(path))
    logging.info(f"Loaded config {path} (hash {config.config_hash()})")
    return config
