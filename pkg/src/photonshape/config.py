"""Experiment configuration: one INI file drives every pipeline command.

The configuration is a flat set of sections — device, schedule, simulation,
analysis, output — whose defaults reproduce the reference experiment: a
20 MHz-linewidth cavity read out at the 7.445 GHz operating point, a 50 ns
time-symmetric target packet truncated at the 600 ns lifetime ceiling, and
the matching measurement settings.  `load_config` with no path returns
exactly these defaults; a file overrides only the keys it names.  Every
numeric field is validated here so commands can assume a sane config.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .device import DeviceParams
from .exceptions import ConfigError
from .units import NS, US, ghz_to_angular, make_grid, mhz_to_angular

_DEFAULT_TEXT = """\
[device]
# cavity linewidth and the anchor operating point (lower dressed branch)
kappa_mhz = 20.0
anchor_ghz = 7.445
anchor_t1_ns = 45.0
omega_max1_ghz = 8.2
omega_max2_ghz = 8.0
coupler_rate_mhz = 250.0
g_bar_mhz = 120.0
coupling_asymmetry = 0.05
flux_gain1 = -0.004
flux_gain2 = 0.004
cross_talk = 0.1
v1_min = 0.0
v1_max = 1.2
n_calibration = 7

[schedule]
# time-symmetric exponential target: half-life constant and lifetime ceiling
tau_ns = 50.0
t1_max_ns = 600.0
grid_start_ns = -500.0
grid_stop_ns = 500.0
grid_step_ns = 0.5

[simulation]
# mode: oracle | master | mc  (emission); transfer_mode: fock | drive | mc
mode = master
transfer_mode = drive
fock_cutoff = 3
n_traj = 1000
seed = 1234
rtol = 1e-8
atol = 1e-10
t_perp_us = inf, 5, 1
phase_drift_deg = 5.0

[analysis]
noise_sigma = 0.004
n_avg = 1
amplitude_floor = 0.1
injected_drift_khz = 0.0
chevron_v1 = 0.6
chevron_v2_start = 0.2
chevron_v2_stop = 1.1
chevron_v2_step = 0.05

[output]
directory = out
"""


@dataclass
class ExperimentConfig:
    """Validated, typed view of one experiment configuration."""

    # device
    kappa_mhz: float = 20.0
    anchor_ghz: float = 7.445
    anchor_t1_ns: float = 45.0
    omega_max1_ghz: float = 8.2
    omega_max2_ghz: float = 8.0
    coupler_rate_mhz: float = 250.0
    g_bar_mhz: float = 120.0
    coupling_asymmetry: float = 0.05
    flux_gain1: float = -0.004
    flux_gain2: float = 0.004
    cross_talk: float = 0.1
    v1_min: float = 0.0
    v1_max: float = 1.2
    n_calibration: int = 7
    # schedule
    tau_ns: float = 50.0
    t1_max_ns: float = 600.0
    grid_start_ns: float = -500.0
    grid_stop_ns: float = 500.0
    grid_step_ns: float = 0.5
    # simulation
    mode: str = "master"
    transfer_mode: str = "drive"
    fock_cutoff: int = 3
    n_traj: int = 1000
    seed: int | None = 1234
    rtol: float = 1e-8
    atol: float = 1e-10
    t_perp_us: tuple = (np.inf, 5.0, 1.0)
    phase_drift_deg: float = 5.0
    # analysis
    noise_sigma: float = 0.004
    n_avg: int = 1
    amplitude_floor: float = 0.1
    injected_drift_khz: float = 0.0
    chevron_v1: float = 0.6
    chevron_v2_start: float = 0.2
    chevron_v2_stop: float = 1.1
    chevron_v2_step: float = 0.05
    # output
    directory: str = "out"
    # provenance of overridden keys, for manifests
    overrides: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        positive = (
            "kappa_mhz anchor_ghz anchor_t1_ns omega_max1_ghz omega_max2_ghz "
            "coupler_rate_mhz g_bar_mhz tau_ns t1_max_ns grid_step_ns rtol "
            "atol n_avg noise_sigma chevron_v2_step"
        ).split()
        for name in positive:
            val = getattr(self, name)
            if name == "noise_sigma":
                ok = val >= 0
            else:
                ok = val > 0
            if not ok:
                raise ConfigError(f"{name} must be positive, got {val}")
        if self.grid_stop_ns <= self.grid_start_ns:
            raise ConfigError("grid_stop_ns must exceed grid_start_ns")
        if not 0 <= self.coupling_asymmetry < 1:
            raise ConfigError("coupling_asymmetry must be in [0, 1)")
        if self.mode not in ("oracle", "master", "mc"):
            raise ConfigError(f"mode must be oracle|master|mc, got {self.mode!r}")
        if self.transfer_mode not in ("fock", "drive", "mc"):
            raise ConfigError(
                f"transfer_mode must be fock|drive|mc, got {self.transfer_mode!r}"
            )
        if self.fock_cutoff < 1:
            raise ConfigError("fock_cutoff must be at least 1")
        if self.n_traj < 1:
            raise ConfigError("n_traj must be at least 1")
        stochastic = self.mode == "mc" or self.transfer_mode == "mc" or self.noise_sigma > 0
        if stochastic and self.seed is None:
            raise ConfigError("seed is required for stochastic runs")
        if any(tp <= 0 for tp in self.t_perp_us):
            raise ConfigError("t_perp_us entries must be positive (use inf)")

    # -- derived objects ----------------------------------------------------

    def device(self) -> DeviceParams:
        return DeviceParams(
            omega_max1=ghz_to_angular(self.omega_max1_ghz),
            omega_max2=ghz_to_angular(self.omega_max2_ghz),
            coupler_rate=mhz_to_angular(self.coupler_rate_mhz),
            g_bar=mhz_to_angular(self.g_bar_mhz),
            coupling_asymmetry=self.coupling_asymmetry,
            kappa=mhz_to_angular(self.kappa_mhz),
            anchor_omega=ghz_to_angular(self.anchor_ghz),
            anchor_t1=self.anchor_t1_ns * NS,
            flux_gain1=self.flux_gain1,
            flux_gain2=self.flux_gain2,
            cross_talk=self.cross_talk,
            v1_window=(self.v1_min, self.v1_max),
            n_calibration=self.n_calibration,
        )

    def grid(self) -> np.ndarray:
        return make_grid(self.grid_start_ns, self.grid_stop_ns, self.grid_step_ns)

    def kappa(self) -> float:
        return mhz_to_angular(self.kappa_mhz)

    def tau(self) -> float:
        return self.tau_ns * NS

    def t1_max(self) -> float:
        return self.t1_max_ns * NS

    def t_perp_values(self) -> tuple:
        return tuple(np.inf if np.isinf(tp) else tp * US for tp in self.t_perp_us)

    def summary(self) -> dict:
        """Manifest-ready flat dict of every setting (JSON-safe values)."""
        out = {}
        for name in self.__dataclass_fields__:
            if name == "overrides":
                continue
            val = getattr(self, name)
            if isinstance(val, tuple):
                val = ["inf" if np.isinf(v) else v for v in val]
            elif isinstance(val, float) and np.isinf(val):
                val = "inf"
            out[name] = val
        out["overridden_keys"] = sorted(self.overrides)
        return out


def _parse_scalar(name: str, raw: str, like) -> object:
    raw = raw.strip()
    try:
        if name == "seed":
            return None if raw.lower() in ("", "none") else int(raw)
        if name == "t_perp_us":
            vals = tuple(
                np.inf if v.strip().lower() in ("inf", "infinity") else float(v)
                for v in raw.split(",")
                if v.strip()
            )
            if not vals:
                raise ValueError("empty list")
            return vals
        if isinstance(like, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(like, int) and not isinstance(like, bool):
            return int(raw)
        if isinstance(like, float):
            return np.inf if raw.lower() in ("inf", "infinity") else float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse {name} = {raw!r}: {exc}") from exc


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a config from defaults, an optional INI file, and overrides.

    `overrides` maps field names to already-typed values (used by CLI
    flags); they are applied after the file and recorded in the config's
    `overrides` attribute for the manifest.
    """
    defaults = ExperimentConfig()
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        read = parser.read(str(path))
        if not read:
            raise ConfigError(f"config file not found: {path}")
        known = set(defaults.__dataclass_fields__) - {"overrides"}
        for section in parser.sections():
            for key, raw in parser.items(section):
                if key not in known:
                    raise ConfigError(f"unknown config key [{section}] {key}")
                values[key] = _parse_scalar(key, raw, getattr(defaults, key))
    cli = dict(overrides or {})
    values.update(cli)
    try:
        return ExperimentConfig(**values, overrides=cli)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def write_example_config(path: str | Path) -> None:
    """Write the shipped example configuration (the built-in defaults)."""
    Path(path).write_text(_DEFAULT_TEXT)
