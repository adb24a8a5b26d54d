"""Emission and absorption dynamics for shaped single-photon wave packets.

The emitter/absorber is a qubit exchanging one excitation with a leaky
cavity (loss rate kappa) under a time-dependent coupling schedule. Three
integration routes cover every result, deliberately independent so they can
cross-check each other:

* amplitude oracle: in the single-excitation sector the full problem closes
  over two complex amplitudes (qubit excited, photon in cavity), integrated
  directly. Fast and exact for shaping and transfer runs.
* density-matrix propagation: full Lindblad evolution on a truncated Fock
  space, for mixed states, dephasing, and coherent drives.
* quantum trajectories: stochastic unravelling of the same Lindblad
  generator, averaging pure-state trajectories with jump counting.

Rate bookkeeping: a schedule sample g demands instantaneous emission rate
4 g^2 / kappa, an adiabatic statement that ignores both the pull of the
cavity line on the decay pole and the cavity's lag behind a ramping
coupling. Schedule-built Hamiltonians therefore use the exact inversion of
the emission cascade (`_exact_emission_profile`): the internal coupling is
solved so the radiated flux equals the design flux sample for sample. For a
flat schedule the solution collapses to the slow-pole placement

    g_int^2 = g^2 * (1 - (2 g / kappa)^2),

and during ramps it adds the cavity-lag compensation (a term proportional
to the log-derivative of the flux). Feasibility needs g < kappa / sqrt(8),
i.e. lifetimes above the cavity-limited floor of 2/kappa; faster demands
raise InfeasibleScheduleError. A time-reversed schedule (an absorber) plays
the exact mirror of its forward twin's calibrated coupling. Hamiltonians
built by hand (rather than from a schedule) are propagated exactly as given.

Field convention: an emission run records amp(t) = i sqrt(kappa) c_cav(t),
the outgoing temporal mode amplitude, normalized so |amp|^2 is photon flux
in 1/s; a ground-start emission thus has a real, non-negative amp. Feeding
a record back into an absorber (as a quantum wave packet or as an equivalent
coherent drive) inverts the same convention, so phases survive a full
emit/reverse/absorb cycle.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import (
    GridMismatchError,
    InfeasibleScheduleError,
    InvalidSpecError,
)
from .hilbert import (
    FOCK_CUTOFF_EMISSION,
    DensityMatrix,
    HilbertSpec,
    build_operators,
)
from .integrate import ATOL_DEFAULT, RTOL_DEFAULT, DormandPrince, integrate_to_grid
from .schedule import (
    Schedule,
    _cumtrapz,
    _read_csv,
    _SegmentedCumulative,
    _segmented_derivative,
    _write_csv,
)
from .units import NS, snap_serialized

SQRT_NS = float(np.sqrt(NS))  # field amplitudes serialize in 1/sqrt(ns)
DEG = np.pi / 180.0


def _internal_coupling(g: np.ndarray, kappa: float) -> np.ndarray:
    """Map constant demanded-coupling samples onto the internal coupling.

    Solves for the coupling whose slow decay pole sits at 4 g^2 / kappa.
    Exact for flat schedules only; time-dependent schedules go through
    `_exact_emission_profile`, which reduces to this formula wherever the
    demanded flux decays at the instantaneous rate. Raises when a sample
    demands a lifetime below the cavity-limited floor 2/kappa.
    """
    arg = 1.0 - (2.0 * np.asarray(g) / kappa) ** 2
    if np.any(arg <= 0):
        raise InfeasibleScheduleError(
            "schedule demands lifetimes below the cavity-limited floor 2/kappa"
        )
    return g * np.sqrt(arg)


def _exact_emission_profile(s: Schedule):
    """Invert the emission cascade for a forward schedule, exactly.

    The schedule fixes the design flux Q(t) = (4 g^2/kappa) P(t). Writing the
    emitter state as real amplitudes (p, q) with c_e = p, c_cav = -i q and
    output amplitude sqrt(kappa) q, demanding sqrt(kappa) q = sqrt(Q) pins

        q = sqrt(Q / kappa),   p = sqrt(P - q^2),

    and the cavity equation dq/dt = g_int p - (kappa/2) q solves for the one
    internal coupling that realizes the design flux with no adiabatic error:

        g_int = (dq/dt + (kappa/2) q) / p.

    For a flat schedule this collapses to g sqrt(1 - (2g/kappa)^2), the
    slow-pole placement of `_internal_coupling`; during ramps the dq/dt term
    compensates the cavity lag that the pole formula ignores.

    Returns (g_int samples, design population P, q) on the schedule grid.
    P here is total remaining excitation, evaluated in closed form (not by
    grid quadrature), so deep-decay grids stay strictly positive.
    """
    # same lifetime floor as the flat-schedule calibration
    _internal_coupling(s.g, s.kappa)
    gsq = s.g**2
    P = s.residual_population * np.exp(-(4.0 / s.kappa) * _cumtrapz(s.t, gsq))
    Q = (4.0 * gsq / s.kappa) * P
    q = np.sqrt(Q / s.kappa)
    psq = P - q**2
    if np.any(psq <= 0):
        raise InfeasibleScheduleError(
            "design flux exceeds what the remaining population can supply"
        )
    p = np.sqrt(psq)
    bps = set(s.breakpoints)
    if s.t_start is not None:
        # the flux switches on discontinuously at the truncation instant
        bps.add(float(s.t[np.searchsorted(s.t, s.t_start)]))
    qdot = _segmented_derivative(s.t, q, tuple(sorted(bps)))
    num = qdot + 0.5 * s.kappa * q
    if np.any(num < -1e-9 * s.kappa * q.max(initial=0.0)):
        raise InfeasibleScheduleError(
            "design flux falls faster than the cavity can drain"
        )
    g_int = np.where(q > 0, np.clip(num, 0.0, None) / p, 0.0)
    return g_int, P, q


def _schedule_internal_coupling(s: Schedule) -> np.ndarray:
    """Internal coupling samples realizing a schedule's design flux.

    Forward schedules are inverted exactly; a time-reversed schedule (an
    absorber) plays the mirror of its forward twin's calibrated coupling,
    the same pulse the matched-capture calibration would land on.
    """
    if s.time_reversed:
        return _schedule_internal_coupling(reverse_schedule(s))[::-1].copy()
    return _exact_emission_profile(s)[0]


@dataclass
class FieldRecord:
    """Sampled complex amplitude of a travelling field envelope.

    |amp|^2 is instantaneous photon flux (1/s); the integral of |amp|^2 over
    the record is the radiated energy in photon units.
    """

    t: np.ndarray
    amp: np.ndarray

    def __post_init__(self) -> None:
        self.t = snap_serialized(np.asarray(self.t, dtype=float), NS)
        amp = np.asarray(self.amp, dtype=complex)
        self.amp = (
            snap_serialized(amp.real.copy(), SQRT_NS, mode="mul")
            + 1j * snap_serialized(amp.imag.copy(), SQRT_NS, mode="mul")
        )
        if self.amp.shape != self.t.shape:
            raise InvalidSpecError("amp must match the grid shape")

    def energy(self) -> float:
        """Total radiated energy in photon units (trapezoid)."""
        return float(np.trapezoid(np.abs(self.amp) ** 2, self.t))

    def flux(self) -> np.ndarray:
        return np.abs(self.amp) ** 2

    def with_phase_ramp(self, total_deg: float) -> "FieldRecord":
        """Apply a linear phase drift, centered so the mid-record phase is 0.

        `total_deg` is the edge-to-edge phase excursion across the record,
        the same convention the homodyne drift estimator reports.
        """
        span = self.t[-1] - self.t[0]
        mid = 0.5 * (self.t[0] + self.t[-1])
        phase = DEG * total_deg * (self.t - mid) / span
        return FieldRecord(self.t, self.amp * np.exp(1j * phase))

    def to_csv(self, path) -> None:
        _write_csv(
            path,
            header="time_ns,re_amp,im_amp",
            columns=(self.t / NS, self.amp.real * SQRT_NS, self.amp.imag * SQRT_NS),
            meta={"amp_unit": "per_sqrt_ns"},
        )

    @classmethod
    def from_csv(cls, path) -> "FieldRecord":
        _, data = _read_csv(path, 3)
        return cls(data[0] * NS, (data[1] + 1j * data[2]) / SQRT_NS)


def jc_hamiltonian(
    s: Schedule,
    spec: HilbertSpec,
    detuning: float = 0.0,
    drive: "FieldRecord | None" = None,
):
    """Build the rotating-frame Hamiltonian callable for a schedule.

    H(t) = detuning * (qubit projector) + g_int(t) (a sigma+ + a^dag sigma-)
    with the exactly calibrated internal coupling interpolated linearly
    between schedule samples. An optional field record adds the coherent
    drive eps(t) a^dag + eps*(t) a with eps = -sqrt(kappa) * amp, the
    matched-sign classical stand-in for an incoming wave packet.
    """
    ops = build_operators(spec)
    h_coup = ops["adag"] @ ops["sm"] + ops["a"] @ ops["sp"]
    h_static = detuning * ops["p_excited"]
    g_int = _schedule_internal_coupling(s)
    tgrid = s.t
    if drive is None:

        def hamiltonian(t: float) -> np.ndarray:
            g = np.interp(t, tgrid, g_int)
            return h_static + g * h_coup

    else:
        if drive.t.shape != tgrid.shape or not np.array_equal(drive.t, tgrid):
            raise GridMismatchError("drive record grid differs from schedule grid")
        eps = -np.sqrt(s.kappa) * drive.amp
        adag, a = ops["adag"], ops["a"]

        def hamiltonian(t: float) -> np.ndarray:
            g = np.interp(t, tgrid, g_int)
            e_re = np.interp(t, tgrid, eps.real)
            e_im = np.interp(t, tgrid, eps.imag)
            e = e_re + 1j * e_im
            return h_static + g * h_coup + e * adag + np.conj(e) * a

    return hamiltonian


@dataclass
class DensityTrajectory:
    """Density-matrix history on a fixed output grid."""

    t: np.ndarray
    rhos: np.ndarray  # (n_t, d, d)
    spec: HilbertSpec

    def expectation(self, op: np.ndarray) -> np.ndarray:
        vals = np.einsum("tij,ji->t", self.rhos, op)
        return vals

    def final(self) -> DensityMatrix:
        return DensityMatrix(self.spec, self.rhos[-1])

    def check(self, every: int = 500) -> None:
        """Validate hermiticity/trace/positivity on a subsample of the grid."""
        for k in range(0, self.t.size, max(1, every)):
            DensityMatrix(self.spec, self.rhos[k]).check()
        DensityMatrix(self.spec, self.rhos[-1]).check()


def evolve_master(
    rho0,
    tgrid: np.ndarray,
    hamiltonian,
    collapse_ops=(),
    spec: HilbertSpec | None = None,
    rtol: float = RTOL_DEFAULT,
    atol: float = ATOL_DEFAULT,
) -> DensityTrajectory:
    """Propagate a Lindblad master equation onto an output grid.

    `hamiltonian` is either a constant matrix or a callable t -> matrix; it
    is used exactly as supplied. `rho0` may be a DensityMatrix or a raw
    matrix. Collapse operators enter as D[L] rho = L rho L^dag -
    {L^dag L, rho}/2.
    """
    if isinstance(rho0, DensityMatrix):
        spec = spec or rho0.spec
        rho0 = rho0.matrix
    rho0 = np.asarray(rho0, dtype=complex)
    d = rho0.shape[0]
    if spec is None:
        raise InvalidSpecError("spec required when rho0 is a raw matrix")
    if rho0.shape != (d, d) or d != spec.dim:
        raise InvalidSpecError("rho0 shape does not match the Hilbert spec")
    h_of_t = hamiltonian if callable(hamiltonian) else (lambda t, _h=hamiltonian: _h)
    ls = [np.asarray(L, dtype=complex) for L in collapse_ops]
    ldl = [L.conj().T @ L for L in ls]

    def rhs(t, y):
        rho = y.reshape(d, d)
        h = h_of_t(t)
        out = -1j * (h @ rho - rho @ h)
        for L, LdL in zip(ls, ldl):
            out += L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)
        return out.ravel()

    ys = integrate_to_grid(rhs, rho0.ravel(), tgrid, rtol=rtol, atol=atol)
    return DensityTrajectory(np.asarray(tgrid, dtype=float), ys.reshape(-1, d, d), spec)


def fidelity_trace(traj: DensityTrajectory) -> np.ndarray:
    """Transfer-fidelity history against the equal superposition.

    Evaluates Tr(rho(t) F) with F projecting the qubit onto
    (|g> + |e>)/sqrt(2) and ignoring the cavity. Values land in [0, 1] up
    to integrator roundoff, which is clipped.
    """
    vals = traj.expectation(build_operators(traj.spec)["fidelity_op"]).real
    return np.clip(vals, 0.0, 1.0)


@dataclass
class TrajectoryEnsemble:
    """Averages over stochastic pure-state trajectories.

    `means`/`stderrs` hold the requested observable traces; `rho_mean` is
    the trajectory-averaged density matrix, comparable directly against a
    master-equation run with the same generator.
    """

    t: np.ndarray
    rho_mean: np.ndarray
    means: dict
    stderrs: dict
    n_traj: int
    seed: int
    n_jumps: np.ndarray
    spec: HilbertSpec


def _run_trajectory_batch(args):
    (
        idx_range,
        seed,
        psi0,
        tgrid,
        g_samples,
        h_parts,
        ls,
        e_ops,
        rtol,
        atol,
    ) = args
    # rebuild the Hamiltonian callable from its interpolation table
    h_static, h_coup, drive_tab = h_parts
    adag = None
    if drive_tab is not None:
        drive_re, drive_im, adag, a = drive_tab

    def h_of_t(t):
        g = np.interp(t, tgrid, g_samples)
        h = h_static + g * h_coup
        if drive_tab is not None:
            e = np.interp(t, tgrid, drive_re) + 1j * np.interp(t, tgrid, drive_im)
            h = h + e * adag + np.conj(e) * a
        return h

    ldl = [L.conj().T @ L for L in ls]
    h_eff_extra = -0.5 * sum(ldl) if ls else None
    d = psi0.size
    n_t = tgrid.size

    def rhs(t, y):
        dy = (-1j) * (h_of_t(t) @ y)
        if h_eff_extra is not None:
            dy = dy + h_eff_extra @ y
        return dy

    sum_rho = np.zeros((n_t, d, d), dtype=complex)
    sums = {k: np.zeros(n_t) for k in e_ops}
    sumsq = {k: np.zeros(n_t) for k in e_ops}
    n_jumps = np.zeros(len(ls), dtype=np.int64)

    for idx in idx_range:
        rng = np.random.default_rng([seed, idx])
        states = np.empty((n_t, d), dtype=complex)
        states[0] = psi0
        threshold = rng.random()
        stepper = DormandPrince(rhs, tgrid[0], psi0.astype(complex), rtol, atol)
        grid_pos = 1
        while grid_pos < n_t:
            t_prev, nrm_prev = stepper.t, float(np.vdot(stepper.y, stepper.y).real)
            stepper.step(tgrid[-1])
            nrm_now = float(np.vdot(stepper.y, stepper.y).real)
            if nrm_now <= threshold:
                # jump inside (t_prev, stepper.t]: bisect the dense output
                lo, hi = t_prev, stepper.t
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    y_mid = stepper.interpolate(np.array([mid]))[0]
                    if float(np.vdot(y_mid, y_mid).real) > threshold:
                        lo = mid
                    else:
                        hi = mid
                t_jump = 0.5 * (lo + hi)
                psi_j = stepper.interpolate(np.array([t_jump]))[0]
                while grid_pos < n_t and tgrid[grid_pos] <= t_jump:
                    ys = stepper.interpolate(np.array([tgrid[grid_pos]]))[0]
                    states[grid_pos] = ys / np.linalg.norm(ys)
                    grid_pos += 1
                weights = np.array(
                    [float(np.vdot(psi_j, LdL @ psi_j).real) for LdL in ldl]
                )
                k = int(rng.choice(len(ls), p=weights / weights.sum()))
                n_jumps[k] += 1
                psi_new = ls[k] @ psi_j
                psi_new /= np.linalg.norm(psi_new)
                threshold = rng.random()
                stepper = DormandPrince(rhs, t_jump, psi_new, rtol, atol)
                continue
            while grid_pos < n_t and tgrid[grid_pos] <= stepper.t + 1e-30:
                ys = stepper.interpolate(np.array([tgrid[grid_pos]]))[0]
                states[grid_pos] = ys / np.linalg.norm(ys)
                grid_pos += 1
        sum_rho += np.einsum("ti,tj->tij", states, states.conj())
        for name, op in e_ops.items():
            vals = np.einsum("ti,ij,tj->t", states.conj(), op, states).real
            sums[name] += vals
            sumsq[name] += vals**2
    return sum_rho, sums, sumsq, n_jumps


def mc_trajectories(
    psi0: np.ndarray,
    tgrid: np.ndarray,
    schedule: Schedule,
    spec: HilbertSpec,
    collapse_ops,
    e_ops: dict,
    n_traj: int = 400,
    seed: int = 1234,
    detuning: float = 0.0,
    drive: FieldRecord | None = None,
    rtol: float = RTOL_DEFAULT,
    atol: float = ATOL_DEFAULT,
) -> TrajectoryEnsemble:
    """Quantum-trajectory unravelling of the schedule-built Lindblad dynamics.

    Each trajectory draws its own random stream from (seed, index), so the
    ensemble is bit-reproducible regardless of how trajectories are batched.
    Set the PHOTONSHAPE_WORKERS environment variable above 1 to spread
    batches over processes; results are reduced in fixed batch order, so a
    given worker count always reproduces itself.

    Between jumps the state evolves under the non-Hermitian effective
    Hamiltonian; jump times are located where the squared norm crosses a
    uniform threshold, refined by bisection on the integrator's dense output.
    """
    ops = build_operators(spec)
    h_static = detuning * ops["p_excited"]
    h_coup = ops["adag"] @ ops["sm"] + ops["a"] @ ops["sp"]
    g_int = _schedule_internal_coupling(schedule)
    drive_tab = None
    if drive is not None:
        if not np.array_equal(drive.t, schedule.t):
            raise GridMismatchError("drive record grid differs from schedule grid")
        eps = -np.sqrt(schedule.kappa) * drive.amp
        drive_tab = (eps.real.copy(), eps.imag.copy(), ops["adag"], ops["a"])
    ls = [np.asarray(L, dtype=complex) for L in collapse_ops]
    tgrid = np.asarray(tgrid, dtype=float)
    if not np.array_equal(tgrid, schedule.t):
        raise GridMismatchError("output grid must match the schedule grid")

    workers = int(os.environ.get("PHOTONSHAPE_WORKERS", "1"))
    h_parts = (h_static, h_coup, drive_tab)
    batches = []
    if workers > 1:
        bounds = np.linspace(0, n_traj, workers + 1, dtype=int)
        for b0, b1 in zip(bounds[:-1], bounds[1:]):
            if b1 > b0:
                batches.append(range(b0, b1))
    else:
        batches.append(range(n_traj))
    args = [
        (b, seed, np.asarray(psi0, dtype=complex), tgrid, g_int, h_parts, ls, e_ops, rtol, atol)
        for b in batches
    ]
    if workers > 1 and len(batches) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trajectory_batch, args))
    else:
        results = [_run_trajectory_batch(a) for a in args]

    sum_rho = sum(r[0] for r in results)
    n_jumps = sum(r[3] for r in results)
    means, stderrs = {}, {}
    for name in e_ops:
        tot = sum(r[1][name] for r in results)
        totsq = sum(r[2][name] for r in results)
        mean = tot / n_traj
        var = np.maximum(totsq / n_traj - mean**2, 0.0)
        means[name] = mean
        stderrs[name] = np.sqrt(var / max(n_traj - 1, 1))
    return TrajectoryEnsemble(
        t=tgrid,
        rho_mean=sum_rho / n_traj,
        means=means,
        stderrs=stderrs,
        n_traj=n_traj,
        seed=seed,
        n_jumps=n_jumps,
        spec=spec,
    )


def _amplitude_rhs(tgrid, g_int, kappa, gamma_perp, drive_amp=None):
    """Single-excitation amplitude equations, optionally driven.

    y = (qubit excited amplitude, cavity photon amplitude). The drive column
    is the physical input amplitude hitting the cavity port.
    """
    if drive_amp is None:

        def rhs(t, y):
            g = np.interp(t, tgrid, g_int)
            return np.array(
                [
                    -1j * g * y[1] - 0.5 * gamma_perp * y[0],
                    -1j * g * y[0] - 0.5 * kappa * y[1],
                ]
            )

    else:
        re, im = drive_amp.real.copy(), drive_amp.imag.copy()
        sq = np.sqrt(kappa)

        def rhs(t, y):
            g = np.interp(t, tgrid, g_int)
            xi = np.interp(t, tgrid, re) + 1j * np.interp(t, tgrid, im)
            return np.array(
                [
                    -1j * g * y[1] - 0.5 * gamma_perp * y[0],
                    -1j * g * y[0] - 0.5 * kappa * y[1] - sq * xi,
                ]
            )

    return rhs


@dataclass
class EmissionResult:
    """Outcome of an emission run: field record plus population bookkeeping.

    `emitted` integrates the flux over the active window only (from the
    truncation edge onward), so it balances the excitation ledger exactly:
    population + cavity photon at the end, plus `emitted`, equals the
    excitation at the start.
    """

    schedule: Schedule
    mode: str
    field: FieldRecord
    population: np.ndarray  # qubit excited probability
    cavity: np.ndarray  # mean cavity photon number
    emitted: float  # integrated flux over the active window, photon units
    stderr: dict = field(default_factory=dict)

    def flux(self) -> np.ndarray:
        return self.field.flux()

    def conservation_defect(self) -> float:
        """|excitation(end) + radiated - excitation(start)|, ideally zero."""
        start = float(self.population[0] + self.cavity[0])
        end = float(self.population[-1] + self.cavity[-1])
        return abs(end + self.emitted - start)

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "emitted_energy": self.emitted,
            "residual_population_target": self.schedule.residual_population,
            "final_population": float(self.population[-1]),
        }


def emit(
    s: Schedule,
    mode: str = "oracle",
    spec: HilbertSpec | None = None,
    detuning: float = 0.0,
    t_perp: float | None = None,
    excited_prob: float = 1.0,
    n_traj: int = 400,
    seed: int = 1234,
    rtol: float = RTOL_DEFAULT,
    atol: float = ATOL_DEFAULT,
) -> EmissionResult:
    """Emit a shaped photon by running a coupling schedule.

    Integration starts at the first active sample (the truncation edge for a
    truncated schedule, the grid start otherwise) in the established emission
    state of the design: qubit amplitude sqrt(P - Q/kappa) and cavity
    amplitude sqrt(Q/kappa), so the radiated flux equals the design flux from
    the first instant. The clipped rising tail of a truncated design is
    treated as already radiated, so the emitted energy lands at the design
    residual rather than at 1. Before the edge the reported populations hold
    the residual in the qubit and the field record is zero.

    `excited_prob` is the emitter's initial excited-state probability: 1 for
    a fully inverted qubit, 0.5 for an equal superposition, 0 for the ground
    state. The single-excitation branch is linear, so a partial excitation
    scales every amplitude by its square root exactly (flux, populations and
    emitted energy scale linearly); the remaining weight sits inertly in the
    ground state.

    Modes: "oracle" integrates the two single-excitation amplitudes (phase
    faithful, used by the transfer pipeline); "master" propagates the full
    density matrix and records the flux envelope sqrt(kappa <n>) (real by
    construction); "mc" averages quantum trajectories of the same generator.
    """
    spec = spec or HilbertSpec(fock_cutoff=FOCK_CUTOFF_EMISSION)
    if not 0.0 <= excited_prob <= 1.0:
        raise InvalidSpecError("excited_prob must be in [0, 1]")
    gamma_perp = 0.0 if t_perp is None else 1.0 / t_perp
    if s.time_reversed or s.t_start is None:
        i0 = 0
    else:
        i0 = int(np.searchsorted(s.t, s.t_start))
    tsub = s.t[i0:]
    ssub = replace(s, t=tsub, g=s.g[i0:]) if i0 else s
    if s.time_reversed:
        # a mirrored absorber run as an emitter has no pre-established
        # design trajectory; start it cold from the grid start
        g_int = _schedule_internal_coupling(s)
        q0 = 0.0
        excitation0 = s.residual_population
    else:
        g_int, P_d, q_d = _exact_emission_profile(ssub)
        q0 = float(q_d[0])
        excitation0 = float(P_d[0])
    # scale the single-excitation branch for a partially excited emitter
    q0 *= np.sqrt(excited_prob)
    excitation0 *= excited_prob
    p0 = np.sqrt(max(excitation0 - q0**2, 0.0))

    def padded(arr, fill=0.0):
        if i0 == 0:
            return arr
        out = np.full(s.t.shape, fill, dtype=arr.dtype)
        out[i0:] = arr
        return out

    def radiated(flux_sub):
        # spline-accurate total so the excitation ledger closes to
        # integrator accuracy, not to grid-quadrature accuracy
        bps = tuple(b for b in s.breakpoints if tsub[0] < b < tsub[-1])
        return float(_SegmentedCumulative(tsub, flux_sub, bps).nodes[-1])

    if mode == "oracle":
        if detuning != 0.0:
            raise InvalidSpecError("oracle emission is defined on resonance")
        rhs = _amplitude_rhs(tsub, g_int, s.kappa, gamma_perp)
        ys = integrate_to_grid(
            rhs, np.array([p0 + 0j, -1j * q0]), tsub, rtol, atol
        )
        c_e, c_c = ys[:, 0], ys[:, 1]
        amp = 1j * np.sqrt(s.kappa) * c_c
        fieldrec = FieldRecord(s.t, padded(amp))
        return EmissionResult(
            schedule=s,
            mode=mode,
            field=fieldrec,
            population=padded(np.abs(c_e) ** 2, fill=excitation0),
            cavity=padded(np.abs(c_c) ** 2),
            emitted=radiated(np.abs(amp) ** 2),
        )
    ops = build_operators(spec)
    collapse = [np.sqrt(s.kappa) * ops["a"]]
    if gamma_perp > 0:
        collapse.append(np.sqrt(gamma_perp / 2.0) * ops["sz"])
    # single-excitation branch of the initial state; the remaining weight
    # sits inertly in |g, 0>
    phi = np.zeros(spec.dim, dtype=complex)
    phi[spec.cavity_dim] = p0  # |e, 0> in qubit-major ordering
    phi[1] = -1j * q0  # |g, 1>
    if mode == "master":
        rho0 = np.outer(phi, phi.conj())
        rho0[0, 0] += 1.0 - excitation0
        traj = evolve_master(
            rho0, tsub, jc_hamiltonian(ssub, spec, detuning), collapse, spec, rtol, atol
        )
        n_cav = traj.expectation(ops["n_cav"]).real
        p_e = traj.expectation(ops["p_excited"]).real
        amp = np.sqrt(np.clip(s.kappa * n_cav, 0.0, None))
        fieldrec = FieldRecord(s.t, padded(amp.astype(complex)))
        return EmissionResult(
            s,
            mode,
            fieldrec,
            padded(p_e, fill=excitation0),
            padded(n_cav),
            radiated(s.kappa * np.clip(n_cav, 0.0, None)),
        )
    if mode == "mc":
        if excitation0 == 0.0:
            # nothing to excite: trajectories would all sit in the ground
            # state, so sample the conditioned dynamics from |g,0> directly
            psi0 = np.zeros(spec.dim, dtype=complex)
            psi0[0] = 1.0
        else:
            psi0 = phi / np.sqrt(excitation0)
        ens = mc_trajectories(
            psi0,
            tsub,
            ssub,
            spec,
            collapse,
            e_ops={"p_excited": ops["p_excited"], "n_cav": ops["n_cav"]},
            n_traj=n_traj,
            seed=seed,
            detuning=detuning,
            rtol=rtol,
            atol=atol,
        )
        r = excitation0
        p_e = r * ens.means["p_excited"]
        n_cav = r * ens.means["n_cav"]
        amp = np.sqrt(np.clip(s.kappa * n_cav, 0.0, None))
        fieldrec = FieldRecord(s.t, padded(amp.astype(complex)))
        return EmissionResult(
            s,
            mode,
            fieldrec,
            padded(p_e, fill=excitation0),
            padded(n_cav),
            radiated(s.kappa * np.clip(n_cav, 0.0, None)),
            stderr={k: padded(r * v) for k, v in ens.stderrs.items()},
        )
    raise InvalidSpecError(f"unknown emission mode {mode!r}")


def reverse_schedule(s: Schedule, t0: float | None = None) -> Schedule:
    """Mirror a schedule in time: g'(t) = g(t0 - t).

    By default t0 = t_first + t_last, which maps the grid onto itself (a
    centered grid reverses in place, bit for bit). Truncation metadata is
    mirrored along: the truncation instant maps to t0 - t_start, where the
    reversed schedule drops back to its holding level.
    """
    if t0 is None:
        t0 = s.t[0] + s.t[-1]
    t_new = (t0 - s.t)[::-1]
    if t_new.shape == s.t.shape and np.allclose(t_new, s.t, rtol=0, atol=1e-20):
        t_new = s.t.copy()
    return Schedule(
        t=t_new,
        g=s.g[::-1].copy(),
        kappa=s.kappa,
        tau=s.tau,
        t_start=None if s.t_start is None else t0 - s.t_start,
        residual_population=s.residual_population,
        g_min=s.g_min,
        p_start=s.p_start,
        breakpoints=tuple(sorted(t0 - b for b in s.breakpoints)),
        truncated=s.truncated,
        time_reversed=not s.time_reversed,
    )


@dataclass
class TransferResult:
    """Outcome of absorbing a wave packet: state-transfer fidelity history.

    The fidelity is measured against the source qubit state (amplitude
    sqrt(1 - source_excited_prob) on ground, sqrt(source_excited_prob) on
    excited); it starts at 1 - source_excited_prob + |...|^2 = the vacuum
    overlap (exactly 0.5 for an equal superposition) and climbs as the
    absorber picks up the packet.
    """

    t: np.ndarray
    fidelity: np.ndarray
    mode: str
    source_excited_prob: float
    stderr: np.ndarray | None = None
    absorbed: float = 0.0  # excited-state probability gained by the absorber

    @property
    def final_fidelity(self) -> float:
        return float(self.fidelity[-1])

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "final_fidelity": self.final_fidelity,
            "source_excited_prob": self.source_excited_prob,
            "absorbed_population": self.absorbed,
        }

    def to_csv(self, path) -> None:
        err = self.stderr if self.stderr is not None else np.zeros_like(self.fidelity)
        _write_csv(
            path,
            header="time_ns,fidelity,stderr",
            columns=(self.t / NS, self.fidelity, err),
            meta={
                "mode": self.mode,
                "source_excited_prob": self.source_excited_prob,
                "final_fidelity": self.final_fidelity,
            },
        )


def _align_field(fieldrec: FieldRecord, tgrid: np.ndarray) -> FieldRecord:
    """Resample a field record onto a schedule grid, guarding energy loss."""
    if np.array_equal(fieldrec.t, tgrid):
        return fieldrec
    total = fieldrec.energy()
    inside = (fieldrec.t >= tgrid[0]) & (fieldrec.t <= tgrid[-1])
    covered = float(
        np.trapezoid(np.abs(fieldrec.amp[inside]) ** 2, fieldrec.t[inside])
    )
    if total > 0 and covered < 0.9 * total:
        raise GridMismatchError(
            f"schedule grid covers only {covered / total:.1%} of the field energy"
        )
    warnings.warn("field record resampled onto the schedule grid", stacklevel=3)
    re = np.interp(tgrid, fieldrec.t, fieldrec.amp.real, left=0.0, right=0.0)
    im = np.interp(tgrid, fieldrec.t, fieldrec.amp.imag, left=0.0, right=0.0)
    return FieldRecord(tgrid, re + 1j * im)


def absorb(
    fieldrec: FieldRecord,
    s: Schedule,
    mode: str = "fock",
    source_excited_prob: float = 0.5,
    t_perp: float | None = None,
    phase_drift_deg: float = 0.0,
    spec: HilbertSpec | None = None,
    n_traj: int = 400,
    seed: int = 1234,
    rtol: float = RTOL_DEFAULT,
    atol: float = ATOL_DEFAULT,
) -> TransferResult:
    """Run a coupling schedule against an incoming wave packet.

    The incoming record is the emission of a source qubit prepared in the
    superposition sqrt(1-p)|g> + sqrt(p)|e> with p = `source_excited_prob`
    (the emitted one-photon amplitude scales with sqrt(p); the record itself
    is the full-excitation envelope). The fidelity trace compares the
    absorber qubit against that source state.

    Modes: "fock" treats the input as a quantum single-photon wave packet
    feeding a cascaded single-excitation model, exact for the transfer
    figure; "drive" replaces the packet with a coherent pulse of the same
    amplitude (the classical calibration stand-in) on the full density
    matrix; "mc" unravels the drive-mode generator into trajectories.
    `phase_drift_deg` imposes a centered linear phase ramp on the incoming
    field; `t_perp` adds transverse qubit decoherence.
    """
    if not 0.0 <= source_excited_prob <= 1.0:
        raise InvalidSpecError("source_excited_prob must be in [0, 1]")
    alpha = np.sqrt(1.0 - source_excited_prob)
    beta = np.sqrt(source_excited_prob)
    fieldrec = _align_field(fieldrec, s.t)
    if phase_drift_deg != 0.0:
        fieldrec = fieldrec.with_phase_ramp(phase_drift_deg)
    gamma_perp = 0.0 if t_perp is None else 1.0 / t_perp
    tgrid = s.t

    if mode == "fock":
        g_int = _schedule_internal_coupling(s)
        # physical input amplitude: invert the stored i*sqrt(kappa)*c_cav
        xi = -1j * beta * fieldrec.amp
        rhs = _amplitude_rhs(tgrid, g_int, s.kappa, gamma_perp, drive_amp=xi)
        ys = integrate_to_grid(rhs, np.array([0j, 0j]), tgrid, rtol, atol)
        c_e = ys[:, 0]
        fid = (
            (1.0 - source_excited_prob)
            + 2.0 * (1.0 - source_excited_prob) * beta * c_e.real
            + (source_excited_prob - (1.0 - source_excited_prob)) * np.abs(c_e) ** 2
        )
        return TransferResult(
            t=tgrid,
            fidelity=fid,
            mode=mode,
            source_excited_prob=source_excited_prob,
            absorbed=float(np.abs(c_e[-1]) ** 2),
        )

    spec = spec or HilbertSpec(fock_cutoff=FOCK_CUTOFF_EMISSION)
    ops = build_operators(spec)
    collapse = [np.sqrt(s.kappa) * ops["a"]]
    if gamma_perp > 0:
        collapse.append(np.sqrt(gamma_perp / 2.0) * ops["sz"])
    scaled = FieldRecord(fieldrec.t, beta * fieldrec.amp)
    sp = ops["sp"]

    def fid_from(coh, p_e):
        # qubit fidelity against alpha|g> + beta|e> from coherence <sigma+>
        # and excited population
        return (
            (1.0 - source_excited_prob) * (1.0 - p_e)
            + source_excited_prob * p_e
            + 2.0 * alpha * beta * coh.real
        )

    if mode == "drive":
        rho0 = np.zeros((spec.dim, spec.dim), dtype=complex)
        rho0[0, 0] = 1.0
        traj = evolve_master(
            rho0,
            tgrid,
            jc_hamiltonian(s, spec, 0.0, drive=scaled),
            collapse,
            spec,
            rtol,
            atol,
        )
        coh = traj.expectation(sp)
        p_e = traj.expectation(ops["p_excited"]).real
        fid = fid_from(coh, p_e)
        return TransferResult(
            t=tgrid,
            fidelity=fid,
            mode=mode,
            source_excited_prob=source_excited_prob,
            absorbed=float(p_e[-1]),
        )
    if mode == "mc":
        psi0 = np.zeros(spec.dim, dtype=complex)
        psi0[0] = 1.0
        ens = mc_trajectories(
            psi0,
            tgrid,
            s,
            spec,
            collapse,
            e_ops={
                "p_excited": ops["p_excited"],
                "sx_half": 0.5 * (ops["sp"] + ops["sm"]),
            },
            n_traj=n_traj,
            seed=seed,
            drive=scaled,
            rtol=rtol,
            atol=atol,
        )
        p_e = ens.means["p_excited"]
        coh = ens.means["sx_half"].astype(complex)
        fid = fid_from(coh, p_e)
        err = np.sqrt(
            ((2 * alpha * beta) * ens.stderrs["sx_half"]) ** 2
            + ((2 * source_excited_prob - 1) * ens.stderrs["p_excited"]) ** 2
        )
        return TransferResult(
            t=tgrid,
            fidelity=fid,
            mode=mode,
            source_excited_prob=source_excited_prob,
            stderr=err,
            absorbed=float(p_e[-1]),
        )
    raise InvalidSpecError(f"unknown absorption mode {mode!r}")
