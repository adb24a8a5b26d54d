"""Toy model of a voltage-tuned two-mode superconducting qubit.

Two flux-tunable modes hybridize through a fixed coupler; the lower branch
of the doublet is the operating qubit. A pair of bias voltages moves the two
bare frequencies, so along a contour of constant qubit frequency the branch
mixing angle, and with it the qubit's effective cavity coupling, can still be
steered. Because the two bare modes see the cavity with slightly different
strengths (`coupling_asymmetry`), their contributions interfere; at one bias
the interference is fully destructive, the effective coupling dips toward
zero and the radiative lifetime T1 = kappa/(4 g_eff^2) peaks. That interior
peak is what makes lifetime-versus-bias data along the contour non-monotonic;
with the asymmetry switched off the destructive point sits outside the
calibrated window and the same scan is monotonic.

Conventions: bare mode frequencies follow the usual tunable-transmon form
omega_max * sqrt(|cos(pi * phi)|); flux phi_j responds linearly to both
voltages (own gain plus a cross-talk fraction of the other channel). The
model is deliberately smooth and cheap: it exists to give the calibration
and scheduling routines realistic non-trivial curves to chew on, not to fit
a specific chip.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    ContourGapError,
    InfeasibleScheduleError,
    InvalidSpecError,
)
from .schedule import KAPPA_DEFAULT, MHZ, Schedule, _read_csv, _write_csv
from .units import NS, TWO_PI, ghz_to_angular, snap_serialized

GHZ = TWO_PI * 1e9  # rad/s per (f/2pi) GHz, the contour CSV column unit


@dataclass
class DeviceParams:
    """Static description of the toy device plus its anchor calibration.

    The flux offsets are not free parameters: they are solved in closed form
    so that at zero applied voltage the lower branch sits exactly at
    `anchor_omega` with radiative lifetime `anchor_t1`. Among the two bias
    detunings compatible with the anchor coupling, the constructor picks the
    smallest positive one, which places the zero-voltage pose between bare
    resonance and the destructive-interference point; sweeping the first
    voltage up then walks the bias through that point.
    """

    omega_max1: float = ghz_to_angular(8.2)
    omega_max2: float = ghz_to_angular(8.0)
    coupler_rate: float = TWO_PI * 250e6
    g_bar: float = TWO_PI * 120e6
    coupling_asymmetry: float = 0.05
    kappa: float = KAPPA_DEFAULT
    anchor_omega: float = ghz_to_angular(7.445)
    anchor_t1: float = 45.0 * NS
    flux_gain1: float = -0.004
    flux_gain2: float = 0.004
    cross_talk: float = 0.1
    v1_window: tuple = (0.0, 1.2)
    n_calibration: int = 7
    v2_bracket: tuple = (-3.0, 3.0)
    # derived at construction
    g1: float = field(init=False)
    g2: float = field(init=False)
    phi0_1: float = field(init=False)
    phi0_2: float = field(init=False)

    def __post_init__(self) -> None:
        p = self.coupling_asymmetry
        if not 0 <= p < 1:
            raise InvalidSpecError("coupling_asymmetry must be in [0, 1)")
        if self.anchor_t1 <= 2.0 / self.kappa:
            raise InvalidSpecError("anchor lifetime below the cavity limit")
        self.g1 = self.g_bar * (1.0 + p)
        self.g2 = self.g_bar * (1.0 - p)
        g_anchor = np.sqrt(self.kappa / (4.0 * self.anchor_t1))
        if g_anchor >= self.g2:
            raise InvalidSpecError("anchor coupling exceeds the bare couplings")
        # mixing parametrized by w > 0: detuning = J (w - 1/w); the effective
        # coupling |g1 - g2 w| / sqrt(1 + w^2) = g_anchor has two roots
        disc = g_anchor * np.sqrt(self.g1**2 + self.g2**2 - g_anchor**2)
        den = self.g2**2 - g_anchor**2
        roots = [(self.g1 * self.g2 + disc) / den, (self.g1 * self.g2 - disc) / den]
        deltas = [self.coupler_rate * (w - 1.0 / w) for w in roots]
        positive = [d for d in deltas if d > 0]
        if not positive:
            raise InvalidSpecError("anchor pose has no positive-detuning solution")
        delta0 = min(positive)
        big_r = np.sqrt(self.coupler_rate**2 + 0.25 * delta0**2)
        mean = self.anchor_omega + big_r
        w1, w2 = mean + 0.5 * delta0, mean - 0.5 * delta0
        for w, wmax in ((w1, self.omega_max1), (w2, self.omega_max2)):
            if not 0 < w < wmax:
                raise InvalidSpecError("anchor frequency outside the tuning range")
        self.phi0_1 = float(np.arccos((w1 / self.omega_max1) ** 2) / np.pi)
        self.phi0_2 = float(np.arccos((w2 / self.omega_max2) ** 2) / np.pi)

    def fluxes(self, v1, v2):
        phi1 = self.phi0_1 + self.flux_gain1 * (np.asarray(v1) + self.cross_talk * np.asarray(v2))
        phi2 = self.phi0_2 + self.flux_gain2 * (np.asarray(v2) + self.cross_talk * np.asarray(v1))
        return phi1, phi2


@dataclass
class SpectrumPoint:
    """Hybridized-mode observables at one or more bias points."""

    omega_lower: np.ndarray
    omega_upper: np.ndarray
    g_eff: np.ndarray
    t1: np.ndarray


def tcq_spectrum(dev: DeviceParams, v1, v2) -> SpectrumPoint:
    """Lower/upper branch frequencies, effective coupling and T1 at a bias.

    Accepts scalars or broadcastable arrays. The lower branch is the qubit;
    its effective cavity coupling mixes the two bare couplings with the
    branch eigenvector, and T1 is the radiative lifetime kappa/(4 g_eff^2)
    (returned as inf exactly at a destructive-interference zero).
    """
    phi1, phi2 = dev.fluxes(v1, v2)
    w1 = dev.omega_max1 * np.sqrt(np.abs(np.cos(np.pi * phi1)))
    w2 = dev.omega_max2 * np.sqrt(np.abs(np.cos(np.pi * phi2)))
    delta = w1 - w2
    mean = 0.5 * (w1 + w2)
    big_r = np.sqrt(dev.coupler_rate**2 + 0.25 * delta**2)
    # lower-branch eigenvector is (J, -(R + delta/2)) up to normalization
    comp = big_r + 0.5 * delta
    norm = np.sqrt(dev.coupler_rate**2 + comp**2)
    g_eff = np.abs(dev.g1 * dev.coupler_rate - dev.g2 * comp) / norm
    with np.errstate(divide="ignore"):
        t1 = np.where(g_eff > 0, dev.kappa / (4.0 * g_eff**2), np.inf)
    return SpectrumPoint(mean - big_r, mean + big_r, g_eff, t1)


def _bisect_vec(f, lo, hi, iters: int = 80):
    """Vectorized bisection; assumes f(lo) and f(hi) straddle zero."""
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    f_lo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        take_lo = np.sign(f_mid) == np.sign(f_lo)
        lo = np.where(take_lo, mid, lo)
        f_lo = np.where(take_lo, f_mid, f_lo)
        hi = np.where(take_lo, hi, mid)
    return 0.5 * (lo + hi)


@dataclass
class ContourResult:
    """Sampled constant-frequency contour: bias pairs plus observables there.

    The calibration contract is that only the sampled rows are trusted;
    feasibility decisions downstream compare against these samples, not
    against interpolations between them.
    """

    v1: np.ndarray
    v2: np.ndarray
    omega: np.ndarray
    g_eff: np.ndarray
    t1: np.ndarray
    omega_target: float = 0.0

    def __post_init__(self) -> None:
        self.v1 = np.asarray(self.v1, dtype=float)
        self.v2 = np.asarray(self.v2, dtype=float)
        self.omega = snap_serialized(np.asarray(self.omega, dtype=float), GHZ)
        self.g_eff = snap_serialized(np.asarray(self.g_eff, dtype=float), MHZ)
        self.t1 = snap_serialized(np.asarray(self.t1, dtype=float), NS)
        self.omega_target = snap_serialized(float(self.omega_target), GHZ)

    def to_csv(self, path) -> None:
        _write_csv(
            path,
            header="v1,v2,omega_GHz,g_MHz,T1_ns",
            columns=(self.v1, self.v2, self.omega / GHZ, self.g_eff / MHZ, self.t1 / NS),
            meta={"omega_target_GHz": self.omega_target / GHZ},
        )

    @classmethod
    def from_csv(cls, path) -> "ContourResult":
        meta, data = _read_csv(path, 5)
        return cls(
            v1=data[0],
            v2=data[1],
            omega=data[2] * GHZ,
            g_eff=data[3] * MHZ,
            t1=data[4] * NS,
            omega_target=float(meta.get("omega_target_GHz", 0.0)) * GHZ,
        )


def constant_frequency_contour(
    dev: DeviceParams,
    omega_target: float | None = None,
    v1: np.ndarray | None = None,
) -> ContourResult:
    """Solve v2(v1) holding the lower branch at a fixed frequency.

    The branch frequency is strictly decreasing in v2 throughout the
    operating window, so each column is a clean bisection. Points where the
    target frequency cannot be bracketed inside `dev.v2_bracket` raise
    ContourGapError rather than silently extrapolating.
    """
    if omega_target is None:
        omega_target = dev.anchor_omega
    if v1 is None:
        v1 = np.linspace(dev.v1_window[0], dev.v1_window[1], dev.n_calibration)
    v1 = np.atleast_1d(np.asarray(v1, dtype=float))
    lo = np.full(v1.shape, dev.v2_bracket[0])
    hi = np.full(v1.shape, dev.v2_bracket[1])

    def freq_miss(v2):
        return tcq_spectrum(dev, v1, v2).omega_lower - omega_target

    f_lo, f_hi = freq_miss(lo), freq_miss(hi)
    bad = np.sign(f_lo) == np.sign(f_hi)
    if bad.any():
        raise ContourGapError(
            f"target frequency not reachable at v1 = {v1[bad][:3]} "
            f"within v2 bracket {dev.v2_bracket}"
        )
    v2 = _bisect_vec(freq_miss, lo, hi)
    pt = tcq_spectrum(dev, v1, v2)
    return ContourResult(v1, v2, pt.omega_lower, pt.g_eff, pt.t1, omega_target)


@dataclass
class VoltageWaveforms:
    """Bias waveforms realizing a coupling schedule on a device."""

    t: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    g_target: np.ndarray
    g_realized: np.ndarray
    parked: np.ndarray  # samples held at the maximum-lifetime bias

    def __post_init__(self) -> None:
        self.t = snap_serialized(np.asarray(self.t, dtype=float), NS)

    def to_csv(self, path) -> None:
        _write_csv(
            path,
            header="time_ns,v1,v2",
            columns=(self.t / NS, self.v1, self.v2),
            meta={},
        )


def schedule_to_voltages(
    s: Schedule,
    dev: DeviceParams,
    contour: ContourResult | None = None,
) -> VoltageWaveforms:
    """Invert a coupling schedule into bias-voltage waveforms.

    Works on the contour branch running from zero bias to the sampled
    coupling minimum; the effective coupling is strictly decreasing there, so
    each schedule sample is a nested bisection (outer over v1, inner over v2
    to stay on the frequency contour). Samples at the schedule's holding
    level park at the sampled maximum-lifetime bias.

    Demands outside the calibrated range raise InfeasibleScheduleError: a
    coupling above the zero-bias value, or a coupling weaker than the
    sampled minimum, i.e. a lifetime demand beyond the largest T1 the
    calibration actually observed.
    """
    if contour is None:
        contour = constant_frequency_contour(dev)
    i_min = int(np.argmin(contour.g_eff))
    g_hi, g_lo = contour.g_eff[0], contour.g_eff[i_min]
    if i_min == 0:
        raise InfeasibleScheduleError("contour has no usable dynamic range")
    active = s.g > s.g_min
    g_act = s.g[active]
    if g_act.size == 0:
        raise InfeasibleScheduleError("schedule never rises above its holding level")
    if g_act.max() > g_hi:
        raise InfeasibleScheduleError(
            f"schedule demands g/2pi = {g_act.max() / MHZ:.3f} MHz, above the "
            f"zero-bias maximum {g_hi / MHZ:.3f} MHz"
        )
    if g_act.min() < g_lo:
        raise InfeasibleScheduleError(
            f"schedule demands T1 up to {dev.kappa / (4 * g_act.min() ** 2) / NS:.0f} ns "
            f"but the calibrated contour reaches only {contour.t1[i_min] / NS:.0f} ns"
        )

    targets = g_act
    lo = np.zeros(targets.shape)
    hi = np.full(targets.shape, contour.v1[i_min])

    def g_miss(v1_arr):
        lo2 = np.full(v1_arr.shape, dev.v2_bracket[0])
        hi2 = np.full(v1_arr.shape, dev.v2_bracket[1])

        def freq_miss(v2):
            return tcq_spectrum(dev, v1_arr, v2).omega_lower - contour.omega_target

        v2_arr = _bisect_vec(freq_miss, lo2, hi2, iters=60)
        return tcq_spectrum(dev, v1_arr, v2_arr).g_eff - targets

    v1_sol = _bisect_vec(g_miss, lo, hi, iters=60)
    # recover the matching v2 and realized coupling at the solution
    lo2 = np.full(v1_sol.shape, dev.v2_bracket[0])
    hi2 = np.full(v1_sol.shape, dev.v2_bracket[1])
    v2_sol = _bisect_vec(
        lambda v2: tcq_spectrum(dev, v1_sol, v2).omega_lower - contour.omega_target,
        lo2,
        hi2,
    )
    realized = tcq_spectrum(dev, v1_sol, v2_sol).g_eff

    v1_full = np.full(s.t.shape, contour.v1[i_min])
    v2_full = np.full(s.t.shape, contour.v2[i_min])
    g_real_full = np.full(s.t.shape, g_lo)
    v1_full[active] = v1_sol
    v2_full[active] = v2_sol
    g_real_full[active] = realized
    return VoltageWaveforms(
        t=s.t,
        v1=v1_full,
        v2=v2_full,
        g_target=s.g.copy(),
        g_realized=g_real_full,
        parked=~active,
    )
