"""Synthetic homodyne records and the analysis toolbox built on them.

A homodyne record is the pair of demodulated quadrature voltages an
experimenter would log while a travelling field beats against a local
oscillator.  The synthesis model is deliberately minimal: a single global
gain converts field amplitude to volts, mixing with a detuned local
oscillator rotates the complex envelope at the detuning frequency, the
amplifier chain adds white Gaussian noise whose deviation shrinks with the
square root of the averaging count, and the qubit excitation pulse leaks a
large stylized spike into the quadrature channel.  Everything downstream —
exponential fits, rise/fall symmetry metrics, phase-drift estimates,
coupler-bias scans and lifetime curves — consumes these records (or raw
flux profiles) and reports plain numbers, so voltages never need absolute
calibration: only ratios, time constants and phases carry meaning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .device import GHZ, DeviceParams, tcq_spectrum
from .dynamics import SQRT_NS, FieldRecord, emit
from .exceptions import (
    FitFailureError,
    InfeasibleScheduleError,
    InvalidSpecError,
    NoSignalError,
)
from .schedule import CSV_FMT, MHZ, FluxProfile, Schedule, _read_csv, _write_csv
from .units import NS, TWO_PI, snap_serialized

# volts per unit field amplitude; with field amplitude in photons^(1/2)/s^(1/2)
# this makes |v_i + i v_q|^2 the photon flux per nanosecond, so a shaped
# packet peaks near 0.1 V.  Arbitrary but fixed: analysis uses only ratios.
GAIN_DEFAULT = SQRT_NS

_MIN_FIT_SAMPLES = 10


# ---------------------------------------------------------------------------
# record synthesis


@dataclass
class HomodyneRecord:
    """Demodulated quadrature voltages of one averaged measurement run.

    `v_i + 1j*v_q` equals gain times the field envelope rotated at the
    local-oscillator detuning, plus per-quadrature Gaussian noise of
    deviation `noise_sigma / sqrt(n_avg)`, plus (inside `pulse_window`)
    the stylized excitation-pulse spike on the quadrature channel.
    """

    t: np.ndarray
    v_i: np.ndarray
    v_q: np.ndarray
    lo_detuning: float = 0.0
    noise_sigma: float = 0.0
    n_avg: int = 1
    seed: int | None = None
    pulse_window: tuple | None = None
    gain: float = GAIN_DEFAULT

    def __post_init__(self) -> None:
        self.t = snap_serialized(np.asarray(self.t, dtype=float), NS)
        self.v_i = np.asarray(self.v_i, dtype=float)
        self.v_q = np.asarray(self.v_q, dtype=float)
        self.lo_detuning = snap_serialized(float(self.lo_detuning), MHZ)
        self.gain = snap_serialized(float(self.gain), SQRT_NS)
        if self.pulse_window is not None:
            self.pulse_window = (
                snap_serialized(float(self.pulse_window[0]), NS),
                snap_serialized(float(self.pulse_window[1]), NS),
            )
        if self.v_i.shape != self.t.shape or self.v_q.shape != self.t.shape:
            raise InvalidSpecError("quadrature arrays must match the time grid")

    @property
    def iq(self) -> np.ndarray:
        """Complex record v_i + i v_q."""
        return self.v_i + 1j * self.v_q

    def power(self) -> np.ndarray:
        """Instantaneous signal power |v_i + i v_q|^2 (volts^2)."""
        return self.v_i**2 + self.v_q**2

    def to_csv(self, path) -> None:
        meta = {
            "lo_detuning_MHz": self.lo_detuning / MHZ,
            "noise_sigma": float(self.noise_sigma),
            "n_avg": int(self.n_avg),
            "seed": "none" if self.seed is None else int(self.seed),
            "gain_per_sqrt_ns": self.gain / SQRT_NS,
        }
        if self.pulse_window is not None:
            meta["pulse_start_ns"] = self.pulse_window[0] / NS
            meta["pulse_end_ns"] = self.pulse_window[1] / NS
        _write_csv(
            path,
            header="time_ns,v_i,v_q",
            columns=(self.t / NS, self.v_i, self.v_q),
            meta=meta,
        )

    @classmethod
    def from_csv(cls, path) -> "HomodyneRecord":
        meta, data = _read_csv(path, 3)
        window = None
        if "pulse_start_ns" in meta:
            window = (
                float(meta["pulse_start_ns"]) * NS,
                float(meta["pulse_end_ns"]) * NS,
            )
        seed = meta.get("seed", "none")
        return cls(
            t=data[0] * NS,
            v_i=data[1],
            v_q=data[2],
            lo_detuning=float(meta.get("lo_detuning_MHz", 0.0)) * MHZ,
            noise_sigma=float(meta.get("noise_sigma", 0.0)),
            n_avg=int(meta.get("n_avg", 1)),
            seed=None if seed == "none" else int(seed),
            pulse_window=window,
            gain=float(meta.get("gain_per_sqrt_ns", 1.0)) * SQRT_NS,
        )


def synthesize_homodyne(
    fieldrec: FieldRecord,
    lo_detuning: float = 0.0,
    noise_sigma: float = 0.0,
    n_avg: int = 1,
    seed: int | None = None,
    pulse_window: tuple | None = None,
    gain: float = GAIN_DEFAULT,
    pulse_height: float = 30.0,
    slow_ramp: float = 0.0,
) -> HomodyneRecord:
    """Mix a field record down to quadrature voltages.

    Args:
        fieldrec: travelling-field envelope to measure.
        lo_detuning: local-oscillator offset from the emission frame, rad/s;
            the complex record rotates at this rate.
        noise_sigma: amplifier noise deviation in volts for a single shot;
            each quadrature receives independent Gaussian noise of deviation
            ``noise_sigma / sqrt(n_avg)``.
        n_avg: number of averaged repetitions (>= 1).
        seed: RNG seed for the noise realization; same seed, same record.
            The in-phase channel is drawn first, then the quadrature channel.
        pulse_window: optional (start, end) seconds; inside it a smooth spike
            of `pulse_height` times the peak signal is added to v_q only,
            mimicking excitation-pulse leakage.  Strictly zero outside.
        gain: volts per unit field amplitude.
        pulse_height: spike amplitude relative to the peak signal voltage.
        slow_ramp: optional late-time baseline drift, volts per microsecond,
            applied to v_i beyond t = 1 us (off at 0.0; models a pulse
            programmer holding its last sample instead of returning to zero).
    """
    if noise_sigma < 0:
        raise InvalidSpecError("noise_sigma must be non-negative")
    if int(n_avg) < 1:
        raise InvalidSpecError("n_avg must be at least 1")
    n_avg = int(n_avg)
    t = fieldrec.t
    z = gain * np.exp(1j * lo_detuning * t) * fieldrec.amp
    v_i = z.real.copy()
    v_q = z.imag.copy()
    if pulse_window is not None:
        lo, hi = float(pulse_window[0]), float(pulse_window[1])
        if not hi > lo:
            raise InvalidSpecError("pulse_window must satisfy start < end")
        inside = (t >= lo) & (t <= hi)
        centre, width = 0.5 * (lo + hi), (hi - lo) / 8.0
        peak = float(np.max(np.abs(z))) or 1.0
        spike = pulse_height * peak * np.exp(-0.5 * ((t - centre) / width) ** 2)
        v_q[inside] += spike[inside]
    if slow_ramp != 0.0:
        v_i += slow_ramp * np.clip(t - 1e-6, 0.0, None) / 1e-6
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        sig = noise_sigma / np.sqrt(n_avg)
        v_i += rng.normal(0.0, sig, t.size)
        v_q += rng.normal(0.0, sig, t.size)
    return HomodyneRecord(
        t, v_i, v_q, lo_detuning, noise_sigma, n_avg, seed, pulse_window, gain
    )


# ---------------------------------------------------------------------------
# exponential fitting


@dataclass
class FitResult:
    """Exponential-decay fit ``A * exp(-t/tau) + c`` over one window.

    `amplitude` refers to the start of the fitted window.  The 95%
    confidence interval on the time constant comes from the parameter
    covariance of the least-squares fit.
    """

    amplitude: float
    time_constant: float
    offset: float
    ci95: tuple
    rms_residual: float
    window: tuple = (0.0, 0.0)

    def __post_init__(self) -> None:
        lo, hi = self.ci95
        if not lo <= self.time_constant <= hi:
            raise InvalidSpecError("confidence interval must contain the estimate")
        if self.rms_residual < 0:
            raise InvalidSpecError("rms residual must be non-negative")

    def ci_contains(self, tau: float) -> bool:
        return self.ci95[0] <= tau <= self.ci95[1]

    def summary(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "time_constant_ns": self.time_constant / NS,
            "offset": self.offset,
            "ci95_ns": [self.ci95[0] / NS, self.ci95[1] / NS],
            "rms_residual": self.rms_residual,
        }


def _fit_decay(t: np.ndarray, y: np.ndarray) -> FitResult:
    """Least-squares ``A exp(-t/tau) + c`` on one window (internals in ns)."""
    tns = (t - t[0]) / NS
    span = float(tns[-1])
    a0 = float(y[0] - y[-1]) or float(np.ptp(y)) or 1.0
    p0 = (a0, max(span / 3.0, 1e-3), float(y[-1]))

    def model(x, a, tau, c):
        return a * np.exp(-x / tau) + c

    try:
        popt, pcov = curve_fit(
            model,
            tns,
            y,
            p0=p0,
            bounds=([-np.inf, 1e-6, -np.inf], [np.inf, np.inf, np.inf]),
            maxfev=20000,
        )
    except (RuntimeError, ValueError) as exc:
        rms = float(np.sqrt(np.mean((y - model(tns, *p0)) ** 2)))
        raise FitFailureError(
            f"exponential fit did not converge (rms at start point {rms:.3g})"
        ) from exc
    resid = y - model(tns, *popt)
    rms = float(np.sqrt(np.mean(resid**2)))
    var_tau = float(pcov[1, 1])
    if not np.isfinite(var_tau):
        raise FitFailureError(
            f"exponential fit covariance is singular (rms residual {rms:.3g})"
        )
    se = np.sqrt(var_tau)
    tau = float(popt[1])
    return FitResult(
        amplitude=float(popt[0]),
        time_constant=tau * NS,
        offset=float(popt[2]),
        ci95=((tau - 1.96 * se) * NS, (tau + 1.96 * se) * NS),
        rms_residual=rms,
        window=(float(t[0]), float(t[-1])),
    )


def _channel_values(rec: HomodyneRecord, channel: str) -> np.ndarray:
    if channel == "v_i":
        return rec.v_i
    if channel == "v_q":
        return rec.v_q
    if channel == "abs":
        return np.abs(rec.iq)
    if channel == "power":
        return rec.power()
    raise InvalidSpecError(f"unknown channel {channel!r}")


def fit_exponential(
    rec: HomodyneRecord, channel: str = "v_i", window: tuple | None = None
) -> FitResult:
    """Fit ``A exp(-t/tau) + c`` to one channel of a record.

    `channel` is one of "v_i", "v_q", "abs" (envelope) or "power"
    (envelope squared; decays at 1/T1 for radiative decay so its time
    constant is the lifetime itself).  `window` restricts the fit to
    (start, end) seconds and must keep at least 10 samples.
    """
    y = _channel_values(rec, channel)
    t = rec.t
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, y = t[sel], y[sel]
    if t.size < _MIN_FIT_SAMPLES:
        raise InvalidSpecError(
            f"fit window holds {t.size} samples; need at least {_MIN_FIT_SAMPLES}"
        )
    return _fit_decay(t, y)


# ---------------------------------------------------------------------------
# shape symmetry


@dataclass
class SymmetryReport:
    """Rise/fall comparison of an emission envelope.

    The rising half is mirrored about the split instant and both halves are
    fitted with independent exponential decays; `mirror_rms` is the RMS
    mismatch between the mirrored rise and the fall over their common
    length, normalized by the envelope peak.
    """

    tau_rise: FitResult
    tau_fall: FitResult
    mirror_rms: float
    split_time: float

    def __iter__(self):
        return iter((self.tau_rise, self.tau_fall, self.mirror_rms))

    def summary(self) -> dict:
        return {
            "tau_rise_ns": self.tau_rise.time_constant / NS,
            "tau_fall_ns": self.tau_fall.time_constant / NS,
            "rise_ci95_ns": [c / NS for c in self.tau_rise.ci95],
            "fall_ci95_ns": [c / NS for c in self.tau_fall.ci95],
            "mirror_rms": self.mirror_rms,
            "split_time_ns": self.split_time / NS,
        }


def _envelope_samples(source) -> tuple:
    """Extract (t, envelope-power) from a record, flux profile or pair."""
    if isinstance(source, HomodyneRecord):
        return source.t, source.power()
    if isinstance(source, FluxProfile):
        return source.t, source.Q
    if isinstance(source, FieldRecord):
        return source.t, source.flux()
    t, y = source
    return np.asarray(t, dtype=float), np.asarray(y, dtype=float)


def _smoothed(y: np.ndarray) -> np.ndarray:
    width = max(3, y.size // 100)
    width += 1 - width % 2  # odd
    kernel = np.ones(width) / width
    return np.convolve(y, kernel, mode="same")


def symmetry_report(
    source,
    split_time: float | None = None,
    amplitude_floor: float = 0.1,
) -> SymmetryReport:
    """Quantify time symmetry of an emission envelope.

    The analysis window is bounded by the first and last samples whose
    envelope exceeds `amplitude_floor` times the peak.  The default split
    is the peak of a lightly smoothed envelope (the smoothing guards peak
    detection against noise; the fits use the raw samples).  A custom
    `split_time` is snapped to the nearest sample so the mirrored rise and
    the fall share sample offsets.
    """
    t, y = _envelope_samples(source)
    if t.size < 2 * _MIN_FIT_SAMPLES:
        raise InvalidSpecError("record too short for a symmetry analysis")
    smooth = _smoothed(y)
    peak = float(np.max(smooth))
    if peak <= 0:
        raise NoSignalError("envelope has no positive samples")
    above = np.nonzero(smooth >= amplitude_floor * peak)[0]
    if above.size < 2 * _MIN_FIT_SAMPLES:
        raise InvalidSpecError("emission window too short above the floor")
    i0, i1 = int(above[0]), int(above[-1])
    if split_time is None:
        i_split = i0 + int(np.argmax(smooth[i0 : i1 + 1]))
    else:
        i_split = int(np.argmin(np.abs(t - split_time)))
        if not i0 < i_split < i1:
            raise InvalidSpecError("split_time outside the detected window")
    split = float(t[i_split])

    rise_t = split - t[i0 : i_split + 1][::-1]
    rise_y = y[i0 : i_split + 1][::-1]
    fall_t = t[i_split : i1 + 1] - split
    fall_y = y[i_split : i1 + 1]
    if min(rise_t.size, fall_t.size) < _MIN_FIT_SAMPLES:
        raise InvalidSpecError("one half of the window is too short to fit")
    n = min(rise_y.size, fall_y.size)
    mirror_rms = float(np.sqrt(np.mean((rise_y[:n] - fall_y[:n]) ** 2)) / np.max(y))
    return SymmetryReport(
        tau_rise=_fit_decay(rise_t, rise_y),
        tau_fall=_fit_decay(fall_t, fall_y),
        mirror_rms=mirror_rms,
        split_time=split,
    )


# ---------------------------------------------------------------------------
# phase drift


@dataclass
class PhaseDriftReport:
    """Linear phase trend of a record over its analysis window.

    `phi` holds the unwrapped phase of the above-floor samples at times
    `t`; `drift_angle_deg` is the least-squares slope of that phase times
    the full requested window span, i.e. the edge-to-edge excursion a
    perfectly linear drift of the fitted rate would accumulate.
    """

    drift_angle_deg: float
    t: np.ndarray
    phi: np.ndarray
    amplitude_floor: float

    def summary(self) -> dict:
        return {
            "drift_angle_deg": self.drift_angle_deg,
            "n_samples": int(self.t.size),
            "amplitude_floor": self.amplitude_floor,
        }


def _coherent_smooth(z: np.ndarray) -> np.ndarray:
    """Short moving average of a complex record (edge windows renormalized).

    Noise averages down while a slowly rotating signal adds coherently, so
    the phase of the smoothed record is reliable wherever the raw phase
    would hop by pi between adjacent low-amplitude samples.  A linear
    phase ramp passes through with its slope intact.
    """
    width = int(np.clip(z.size // 200, 1, 25))
    width += 1 - width % 2
    if width == 1:
        return z
    kernel = np.ones(width)
    norm = np.convolve(np.ones(z.size), kernel, mode="same")
    return np.convolve(z, kernel, mode="same") / norm


def phase_drift(
    rec: HomodyneRecord,
    window: tuple | None = None,
    amplitude_floor: float = 0.1,
) -> PhaseDriftReport:
    """Estimate the phase drift of a record across a window.

    The record is lightly smoothed before the phase is unwrapped (pure
    noise at low amplitude would otherwise alias whole turns into the
    unwrapping); only samples whose smoothed magnitude exceeds
    `amplitude_floor` times the in-window peak enter the least-squares
    trend, and the drift angle extrapolates the fitted rate across the
    whole requested window.  Rescaling every voltage by a common factor
    leaves the result unchanged.
    """
    t, z = rec.t, rec.iq
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, z = t[sel], z[sel]
    if t.size == 0:
        raise InvalidSpecError("window contains no samples")
    zs = _coherent_smooth(z)
    mag = np.abs(zs)
    peak = float(mag.max())
    if peak <= 0:
        raise NoSignalError("all samples are zero in the analysis window")
    keep = mag >= amplitude_floor * peak
    if not np.any(keep):
        raise NoSignalError("no samples above the amplitude floor")
    ts, phi = t[keep], np.unwrap(np.angle(zs[keep]))
    if ts.size < 2:
        raise NoSignalError("need at least two above-floor samples")
    slope = np.polyfit(ts, phi, 1)[0]
    span = float(t[-1] - t[0])
    return PhaseDriftReport(
        drift_angle_deg=float(np.degrees(slope * span)),
        t=ts,
        phi=phi,
        amplitude_floor=amplitude_floor,
    )


# ---------------------------------------------------------------------------
# coupler-bias scan


def _weighted_phase_slope(t: np.ndarray, z: np.ndarray) -> float:
    """Energy-weighted linear phase rate of a complex record, rad/s."""
    w = np.abs(z) ** 2
    if not np.any(w > 0):
        return 0.0
    phi = np.unwrap(np.angle(z))
    tbar = np.sum(w * t) / np.sum(w)
    pbar = np.sum(w * phi) / np.sum(w)
    denom = np.sum(w * (t - tbar) ** 2)
    if denom == 0:
        return 0.0
    return float(np.sum(w * (t - tbar) * (phi - pbar)) / denom)


def _fringe_power_fraction(dt: float, row: np.ndarray) -> float:
    """Normalized spectral second moment of a real row, (rad/s)^2.

    Zero only for a DC row; an envelope contributes its bandwidth, a
    detuned fringe adds the squared fringe frequency on top, so the
    resonant row minimizes it.
    """
    windowed = row * np.hanning(row.size)
    spec = np.abs(np.fft.rfft(windowed)) ** 2
    freqs = TWO_PI * np.fft.rfftfreq(row.size, dt)
    total = float(np.sum(spec))
    if total == 0:
        return 0.0
    return float(np.sum(spec * freqs**2) / total)


@dataclass
class ChevronMap:
    """Stacked emission records across a coupler-bias sweep.

    One row per second-bias voltage: the in-phase voltage of a constant
    operating-point emission mixed against a fixed local oscillator.  Rows
    off the resonant bias beat at their detuning (the chevron fringes);
    `resonant_v2` is the row with the least spectral weight away from zero
    frequency.
    """

    v1: float
    omega_lo: float
    v2: np.ndarray
    t: np.ndarray
    signal: np.ndarray
    detuning: np.ndarray
    fringe_freq: np.ndarray
    fringe_power: np.ndarray
    resonant_v2: float

    def __post_init__(self) -> None:
        self.v2 = np.asarray(self.v2, dtype=float)
        self.t = snap_serialized(np.asarray(self.t, dtype=float), NS)
        self.signal = np.asarray(self.signal, dtype=float)
        self.detuning = snap_serialized(np.asarray(self.detuning, dtype=float), MHZ)
        self.fringe_freq = snap_serialized(
            np.asarray(self.fringe_freq, dtype=float), MHZ
        )
        self.fringe_power = np.asarray(self.fringe_power, dtype=float)
        self.omega_lo = snap_serialized(float(self.omega_lo), GHZ)
        if self.signal.shape != (self.v2.size, self.t.size):
            raise InvalidSpecError("signal matrix must be (len(v2), len(t))")
        for name in ("detuning", "fringe_freq", "fringe_power"):
            if getattr(self, name).shape != self.v2.shape:
                raise InvalidSpecError(f"{name} must have one entry per row")

    def to_csv(self, path) -> None:
        """Write the signal matrix to `path` and axis metadata to `path`.json."""
        with open(path, "w") as fh:
            np.savetxt(fh, self.signal, fmt=CSV_FMT, delimiter=",")
        meta = {
            "v1": self.v1,
            "omega_lo_GHz": self.omega_lo / GHZ,
            "resonant_v2": self.resonant_v2,
            "v2": list(self.v2),
            "time_ns": list(self.t / NS),
            "detuning_MHz": list(self.detuning / MHZ),
            "fringe_freq_MHz": list(self.fringe_freq / MHZ),
            "fringe_power": list(self.fringe_power),
        }
        with open(str(path) + ".json", "w") as fh:
            json.dump(meta, fh, indent=1)

    @classmethod
    def from_csv(cls, path) -> "ChevronMap":
        signal = np.atleast_2d(np.loadtxt(path, delimiter=","))
        with open(str(path) + ".json") as fh:
            meta = json.load(fh)
        return cls(
            v1=float(meta["v1"]),
            omega_lo=float(meta["omega_lo_GHz"]) * GHZ,
            v2=np.asarray(meta["v2"], dtype=float),
            t=np.asarray(meta["time_ns"], dtype=float) * NS,
            signal=signal,
            detuning=np.asarray(meta["detuning_MHz"], dtype=float) * MHZ,
            fringe_freq=np.asarray(meta["fringe_freq_MHz"], dtype=float) * MHZ,
            fringe_power=np.asarray(meta["fringe_power"], dtype=float),
            resonant_v2=float(meta["resonant_v2"]),
        )


def chevron_scan(
    dev: DeviceParams,
    v1: float,
    v2_range: np.ndarray,
    omega_lo: float | None = None,
    grid: np.ndarray | None = None,
    noise_sigma: float = 0.0,
    n_avg: int = 1,
    seed: int | None = None,
) -> ChevronMap:
    """Sweep the second bias at fixed first bias and record each emission.

    Every row prepares the qubit excited at its constant operating point,
    lets it emit through the cavity, and demodulates against a local
    oscillator at `omega_lo` (default: the device anchor frequency).  The
    fringe frequency of each row is the energy-weighted phase rate of its
    complex record; the resonant bias minimizes the spectral weight away
    from zero frequency.  Rows whose coupling exceeds the cavity-limited
    maximum are rejected as out of range.
    """
    if omega_lo is None:
        omega_lo = dev.anchor_omega
    v2_range = np.atleast_1d(np.asarray(v2_range, dtype=float))
    if grid is None:
        grid = np.arange(0.0, 600.0, 1.0) * NS
    pts = tcq_spectrum(dev, v1, v2_range)
    g_max = dev.kappa / np.sqrt(8.0)
    bad = pts.g_eff >= g_max
    if np.any(bad):
        raise InfeasibleScheduleError(
            f"coupling exceeds the cavity limit at v2 = {v2_range[bad][:3]}; "
            "narrow v2_range"
        )
    dt = float(grid[1] - grid[0])
    rows, freqs, powers = [], [], []
    detuning = pts.omega_lower - omega_lo
    for i, v2 in enumerate(v2_range):
        sched = Schedule.constant(float(pts.g_eff[i]), dev.kappa, grid)
        em = emit(sched, mode="oracle")
        rec = synthesize_homodyne(
            em.field,
            lo_detuning=float(detuning[i]),
            noise_sigma=noise_sigma,
            n_avg=n_avg,
            seed=None if seed is None else seed + i,
        )
        rows.append(rec.v_i)
        freqs.append(abs(_weighted_phase_slope(rec.t, rec.iq)))
        powers.append(_fringe_power_fraction(dt, rec.v_i))
    powers = np.asarray(powers)
    return ChevronMap(
        v1=float(v1),
        omega_lo=float(omega_lo),
        v2=v2_range,
        t=grid,
        signal=np.asarray(rows),
        detuning=detuning,
        fringe_freq=np.asarray(freqs),
        fringe_power=powers,
        resonant_v2=float(v2_range[int(np.argmin(powers))]),
    )


# ---------------------------------------------------------------------------
# lifetime curve along a calibration contour


@dataclass
class T1Curve:
    """Fitted radiative lifetime at each sampled contour point.

    Points whose fit failed (or whose model lifetime is outside the range
    an emission run can resolve) carry NaN and `fit_ok=False`; the curve
    is still returned in full.
    """

    v1: np.ndarray
    v2: np.ndarray
    g_eff: np.ndarray
    t1_model: np.ndarray
    t1_fit: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    fit_ok: np.ndarray

    def __post_init__(self) -> None:
        n = np.asarray(self.v1).size
        for name in ("v2", "g_eff", "t1_model", "t1_fit", "ci_lo", "ci_hi", "fit_ok"):
            if np.asarray(getattr(self, name)).size != n:
                raise InvalidSpecError(f"{name} must have one entry per point")

    def to_csv(self, path) -> None:
        _write_csv(
            path,
            header="v1,v2,g_MHz,T1_model_ns,T1_fit_ns,ci_lo_ns,ci_hi_ns,fit_ok",
            columns=(
                self.v1,
                self.v2,
                self.g_eff / MHZ,
                self.t1_model / NS,
                self.t1_fit / NS,
                self.ci_lo / NS,
                self.ci_hi / NS,
                self.fit_ok.astype(float),
            ),
            meta={},
        )


def t1_curve(
    contour,
    noise_sigma: float = 0.0,
    n_avg: int = 1,
    seed: int | None = None,
    t1_ceiling: float = 5e-6,
    samples_per_point: int = 1200,
) -> T1Curve:
    """Extract the radiative lifetime at each point of a bias contour.

    Each feasible point runs a constant-coupling emission, demodulates it
    on resonance, and fits the record's power with an exponential decay;
    the power of a radiatively decaying packet falls at the lifetime
    itself.  The time grid of each run spans six model lifetimes, so both
    the fast and the slow ends of the contour resolve cleanly.  Points
    beyond `t1_ceiling` (or at infeasibly strong coupling) are skipped
    with `fit_ok=False`.
    """
    v1 = np.atleast_1d(np.asarray(contour.v1, dtype=float))
    v2 = np.atleast_1d(np.asarray(contour.v2, dtype=float))
    g = np.atleast_1d(np.asarray(contour.g_eff, dtype=float))
    kappa = getattr(contour, "kappa", None)
    if kappa is None:
        # each contour row satisfies t1 = kappa / (4 g^2); recover kappa
        # from the finite rows
        prod = 4.0 * g**2 * np.atleast_1d(np.asarray(contour.t1, dtype=float))
        finite = prod[np.isfinite(prod) & (prod > 0)]
        if finite.size == 0:
            raise InvalidSpecError("contour carries no finite lifetime points")
        kappa = float(np.median(finite))
    t1_model = np.where(g > 0, kappa / (4.0 * g**2), np.inf)
    n = v1.size
    t1_fit = np.full(n, np.nan)
    ci_lo = np.full(n, np.nan)
    ci_hi = np.full(n, np.nan)
    fit_ok = np.zeros(n, dtype=bool)
    g_max = kappa / np.sqrt(8.0)
    for i in range(n):
        if not np.isfinite(t1_model[i]) or t1_model[i] > t1_ceiling or g[i] >= g_max:
            continue
        span = 6.0 * t1_model[i]
        grid = np.linspace(0.0, span, samples_per_point)
        try:
            em = emit(Schedule.constant(float(g[i]), kappa, grid), mode="oracle")
            rec = synthesize_homodyne(
                em.field,
                noise_sigma=noise_sigma,
                n_avg=n_avg,
                seed=None if seed is None else seed + i,
            )
            fit = fit_exponential(rec, channel="power")
        except (FitFailureError, InfeasibleScheduleError):
            continue
        t1_fit[i] = fit.time_constant
        ci_lo[i], ci_hi[i] = fit.ci95
        fit_ok[i] = True
    return T1Curve(v1, v2, g, t1_model, t1_fit, ci_lo, ci_hi, fit_ok)
