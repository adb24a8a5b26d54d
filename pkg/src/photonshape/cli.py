"""Command-line pipeline runner.

Subcommands mirror the experiment sequence: ``synthesize`` derives the
coupling schedule and bias waveforms for the target packet, ``emit`` runs
the emission and the record analysis, ``transfer`` replays the packet into
a time-reversed absorber for each configured dephasing time, ``calibrate``
produces the bias-scan artifacts (contour, chevron map, lifetime curve),
and ``all`` chains the four.  Every command reads one INI config (built-in
defaults when omitted), writes plot-ready CSVs plus a JSON manifest naming
the settings it actually used, and is deterministic byte-for-byte given
the config and seed.

Exit codes: 0 success, 2 configuration problem, 3 infeasible physics
(schedule, contour or flux demands that cannot be met), 4 numerical
failure (integration or fitting).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config, write_example_config
from .device import constant_frequency_contour, schedule_to_voltages
from .dynamics import absorb, emit, reverse_schedule
from .exceptions import (
    ConfigError,
    ContourGapError,
    DepletedPopulationError,
    FitFailureError,
    InfeasibleScheduleError,
    IntegratorError,
    InvalidFluxError,
    InvalidSpecError,
    NoSignalError,
    PhotonshapeError,
)
from .homodyne import chevron_scan, phase_drift, symmetry_report, synthesize_homodyne, t1_curve
from .schedule import MHZ, coupling_from_flux, symmetric_exponential_flux, truncate_schedule
from .schedule import _write_csv
from .units import NS, TWO_PI, US

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4

_INFEASIBLE = (
    InfeasibleScheduleError,
    ContourGapError,
    DepletedPopulationError,
    InvalidFluxError,
)
_NUMERICAL = (IntegratorError, FitFailureError, NoSignalError)


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, cfg: ExperimentConfig, derived: dict, outputs: list) -> Path:
    path = out / f"{command}-manifest.json"
    doc = {
        "command": command,
        "config": cfg.summary(),
        "derived": derived,
        "outputs": sorted(str(p) for p in outputs),
        "tolerances": {"rtol": cfg.rtol, "atol": cfg.atol},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    return path


def _build_schedule(cfg: ExperimentConfig):
    fp = symmetric_exponential_flux(cfg.tau(), cfg.grid())
    s = coupling_from_flux(fp, cfg.kappa())
    if np.isfinite(cfg.t1_max()):
        s = truncate_schedule(s, cfg.t1_max())
    return fp, s


def cmd_synthesize(cfg: ExperimentConfig) -> dict:
    """Derive the flux target, coupling schedule and bias waveforms."""
    out = _outdir(cfg)
    fp, sched = _build_schedule(cfg)
    dev = cfg.device()
    waves = schedule_to_voltages(sched, dev)
    files = [out / "flux.csv", out / "schedule.csv", out / "voltages.csv"]
    fp.to_csv(files[0])
    sched.to_csv(files[1])
    waves.to_csv(files[2])
    derived = {
        "t_start_ns": None if sched.t_start is None else sched.t_start / NS,
        "residual_population": sched.residual_population,
        "peak_coupling_mhz": float(sched.g.max() / MHZ),
        "truncated": bool(sched.truncated),
    }
    manifest = _write_manifest(out, "synthesize", cfg, derived, files)
    return {"derived": derived, "manifest": manifest, "outputs": files}


def cmd_emit(cfg: ExperimentConfig) -> dict:
    """Run the shaped emission and analyze its synthesized record."""
    out = _outdir(cfg)
    _, sched = _build_schedule(cfg)
    em = emit(
        sched,
        mode=cfg.mode,
        n_traj=cfg.n_traj,
        seed=cfg.seed if cfg.seed is not None else 1234,
        rtol=cfg.rtol,
        atol=cfg.atol,
    )
    rec = synthesize_homodyne(
        em.field,
        lo_detuning=TWO_PI * cfg.injected_drift_khz * 1e3,
        noise_sigma=cfg.noise_sigma,
        n_avg=cfg.n_avg,
        seed=cfg.seed,
    )
    sym = symmetry_report(rec, amplitude_floor=cfg.amplitude_floor)
    drift = phase_drift(rec, amplitude_floor=cfg.amplitude_floor)
    files = [out / "emission.csv", out / "field.csv", out / "homodyne.csv"]
    _write_csv(
        files[0],
        header="time_ns,flux_per_ns,population,cavity",
        columns=(em.field.t / NS, em.flux() * NS, em.population, em.cavity),
        meta={"mode": em.mode, "emitted": em.emitted},
    )
    em.field.to_csv(files[1])
    rec.to_csv(files[2])
    derived = {
        "emitted_energy": em.emitted,
        "conservation_defect": em.conservation_defect(),
        "symmetry": sym.summary(),
        "phase": drift.summary(),
    }
    report_path = out / "emit-report.json"
    with open(report_path, "w") as fh:
        json.dump(derived, fh, indent=1, sort_keys=True)
    files.append(report_path)
    manifest = _write_manifest(out, "emit", cfg, derived, files)
    return {"derived": derived, "manifest": manifest, "outputs": files}


def _t_perp_label(tp: float) -> str:
    return "inf" if np.isinf(tp) else f"{tp / US:g}us"


def cmd_transfer(cfg: ExperimentConfig) -> dict:
    """Replay the emitted packet into a time-reversed absorber per T-perp."""
    out = _outdir(cfg)
    _, sched = _build_schedule(cfg)
    em = emit(sched, mode="oracle", rtol=cfg.rtol, atol=cfg.atol)
    rev = reverse_schedule(sched)
    entries = []
    files = []
    # descending dephasing time, infinity first
    values = sorted(cfg.t_perp_values(), key=lambda v: (0 if np.isinf(v) else 1, -v))
    for tp in values:
        tr = absorb(
            em.field,
            rev,
            mode=cfg.transfer_mode,
            t_perp=None if np.isinf(tp) else tp,
            phase_drift_deg=cfg.phase_drift_deg,
            n_traj=cfg.n_traj,
            seed=cfg.seed if cfg.seed is not None else 1234,
            rtol=cfg.rtol,
            atol=cfg.atol,
        )
        label = _t_perp_label(tp)
        path = out / f"transfer_T{label}.csv"
        tr.to_csv(path)
        files.append(path)
        entries.append(
            {
                "t_perp_us": "inf" if np.isinf(tp) else tp / US,
                "max_fidelity": float(tr.fidelity.max()),
                "final_fidelity": tr.final_fidelity,
                "trace": str(path),
            }
        )
    derived = {"mode": cfg.transfer_mode, "per_t_perp": entries}
    summary_path = out / "transfer-summary.json"
    with open(summary_path, "w") as fh:
        json.dump(derived, fh, indent=1, sort_keys=True)
    files.append(summary_path)
    manifest = _write_manifest(out, "transfer", cfg, derived, files)
    return {"derived": derived, "manifest": manifest, "outputs": files}


def cmd_calibrate(cfg: ExperimentConfig) -> dict:
    """Produce the contour, chevron map and lifetime curve."""
    out = _outdir(cfg)
    dev = cfg.device()
    contour = constant_frequency_contour(dev)
    n_steps = int(round((cfg.chevron_v2_stop - cfg.chevron_v2_start) / cfg.chevron_v2_step))
    v2_range = cfg.chevron_v2_start + cfg.chevron_v2_step * np.arange(n_steps + 1)
    chev = chevron_scan(
        dev,
        cfg.chevron_v1,
        v2_range,
        noise_sigma=cfg.noise_sigma,
        n_avg=cfg.n_avg,
        seed=cfg.seed,
    )
    curve = t1_curve(contour, noise_sigma=cfg.noise_sigma, n_avg=cfg.n_avg, seed=cfg.seed)
    files = [out / "contour.csv", out / "chevron.csv", out / "t1_curve.csv"]
    contour.to_csv(files[0])
    chev.to_csv(files[1])
    curve.to_csv(files[2])
    files.append(Path(str(files[1]) + ".json"))
    root = constant_frequency_contour(dev, v1=np.array([cfg.chevron_v1]))
    root_v2 = float(root.v2[0])
    derived = {
        "chevron_resonant_v2": chev.resonant_v2,
        "contour_root_v2": root_v2,
        "agree_within_step": bool(abs(chev.resonant_v2 - root_v2) <= cfg.chevron_v2_step),
        "t1_fit_min_ns": float(np.nanmin(curve.t1_fit) / NS),
        "t1_fit_max_ns": float(np.nanmax(curve.t1_fit) / NS),
        "n_fit_failures": int(np.sum(~curve.fit_ok)),
    }
    manifest = _write_manifest(out, "calibrate", cfg, derived, files)
    return {"derived": derived, "manifest": manifest, "outputs": files}


def cmd_all(cfg: ExperimentConfig) -> dict:
    results = {
        "synthesize": cmd_synthesize(cfg),
        "emit": cmd_emit(cfg),
        "transfer": cmd_transfer(cfg),
        "calibrate": cmd_calibrate(cfg),
    }
    return results


_COMMANDS = {
    "synthesize": cmd_synthesize,
    "emit": cmd_emit,
    "transfer": cmd_transfer,
    "calibrate": cmd_calibrate,
    "all": cmd_all,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photonshape",
        description="Shaped single-photon emission pipeline",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS), help="pipeline stage to run")
    parser.add_argument("--config", help="INI config file (defaults built in)")
    parser.add_argument("--seed", type=int, help="override the RNG seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument(
        "--mode",
        choices=["oracle", "master", "mc", "fock", "drive"],
        help="emission mode (oracle|master|mc) or transfer mode (fock|drive|mc)",
    )
    parser.add_argument("--traj", type=int, help="override the trajectory count")
    parser.add_argument(
        "--write-example-config",
        metavar="PATH",
        help="write the default config to PATH and exit",
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.write_example_config:
        write_example_config(args.write_example_config)
        print(f"wrote {args.write_example_config}")
        return EXIT_OK
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["directory"] = args.out
    if args.traj is not None:
        overrides["n_traj"] = args.traj
    if args.mode is not None:
        if args.command == "transfer":
            key = "transfer_mode"
            if args.mode == "oracle":
                raise SystemExit("transfer mode must be fock, drive or mc")
        else:
            key = "mode"
            if args.mode in ("fock", "drive"):
                overrides["transfer_mode"] = args.mode
                key = None
        if key:
            overrides[key] = args.mode
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _INFEASIBLE as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except _NUMERICAL as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InvalidSpecError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhotonshapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.command == "all":
        for name, res in result.items():
            print(f"{name}: manifest {res['manifest']}")
    else:
        print(f"manifest: {result['manifest']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
