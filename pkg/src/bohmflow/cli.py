"""Command-line entry point ``bohmflow``.

Every subcommand writes plot-ready CSV files plus ``manifest.json`` into the
output directory. Exit codes: 0 success, 1 computation failure, 2 invalid
configuration, 3 failed verification. Errors are also reported as one JSON
line on standard error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import analysis as an
from . import detection as de
from . import fields as fe
from . import packet as single
from . import superposition as sp
from .config import CONFIG_VERSION, RunConfig, parse_config
from .errors import BohmflowError, ConfigError
from .scenarios import Scenario
from .trajectories import check_non_crossing
from .verify import run_verify, swarm_for

FORMAT_VERSION = 1
COMMANDS = ("fields", "trajectories", "detect", "analyze", "verify")


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def write_manifest(out: Path, cfg: RunConfig, command: str, artifacts) -> Path:
    digests = {}
    for path in sorted(artifacts, key=lambda p: p.name):
        digests[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    manifest = {
        "format_version": FORMAT_VERSION,
        "config_version": CONFIG_VERSION,
        "command": command,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "artifacts": digests,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def cmd_fields(cfg: RunConfig, out: Path) -> list:
    """x,t,rho,flux,velocity,Q,K on the configured grid at each time.

    rho and flux are normalized closed forms; Q (and, for the superposition, K)
    come from the field engine and are NaN where the density underflows.
    """
    scen = Scenario.from_config(cfg)
    x = cfg.grid_points
    rows = []
    for t in cfg.times:
        rho = scen.rho(x, t)
        flux = scen.flux(x, t)
        v = scen.velocity_or_nan(x, t)
        if scen.two_slit is None:
            q = single.quantum_potential(scen.packet, x, t)
            k = single.kinetic_term(scen.packet, x, t)
        else:
            sample = fe.fields_at(scen.wavefunction(), x, t, on_node="nan")
            q = sample.quantum_potential
            k = 0.5 * scen.packet.mass * v**2
        rows.extend(zip(x, np.full_like(x, t), rho, flux, v, q, k))
    return [write_csv(out / "fields.csv", ["x", "t", "rho", "flux", "velocity", "Q", "K"], rows)]


def cmd_trajectories(cfg: RunConfig, out: Path) -> list:
    scen = Scenario.from_config(cfg)
    swarm = swarm_for(cfg, scen)
    rows = []
    for i in range(len(swarm)):
        rows.extend((i, t, x) for t, x in zip(swarm.times, swarm.positions[i]))
    traj = write_csv(out / "trajectories.csv", ["traj_id", "t", "x"], rows)
    report = check_non_crossing(swarm)
    ok = swarm.completed & (swarm.initial_positions != 0)
    flips = int(np.sum(np.sign(swarm.positions[ok]) != np.sign(swarm.initial_positions[ok])[:, None]))
    t_bad, i_bad, j_bad = report.first_violation or ("", "", "")
    nc = write_csv(out / "non_crossing.csv",
                   ["ordered", "first_violation_t", "traj_i", "traj_j", "sign_flips",
                    "n_completed", "n_trajectories"],
                   [(report.ordered, t_bad, i_bad, j_bad, flips, int(swarm.completed.sum()), len(swarm))])
    status = write_csv(out / "trajectory_status.csv", ["traj_id", "x0", "status"],
                       [(i, x0, s) for i, (x0, s) in enumerate(zip(swarm.initial_positions, swarm.status))])
    return [traj, nc, status]


def _fringe_points(scen: Scenario, t: float):
    """Central maxima (orders -1, 0, 1) and the minima around them."""
    min_rate, _ = sp.fringe_rates(scen.two_slit, np.array([-2, -1, 0, 1]))
    _, max_rate = sp.fringe_rates(scen.two_slit, np.array([-1, 0, 1]))
    return max_rate * t, min_rate * t


def cmd_detect(cfg: RunConfig, out: Path) -> list:
    scen = Scenario.from_config(cfg)
    d = cfg.detection
    grid = de.PixelGrid(d.x_min, d.x_max, d.n_pixels)
    frames = de.exposure_series(lambda x: scen.rho(x, d.time), grid, d.counts, d.noise_rate, cfg.seed)
    paths, summary = [], []
    centers = grid.centers
    for k, frame in enumerate(frames):
        paths.append(write_csv(out / f"frame_{k:03d}.csv", ["index", "x_center", "count"],
                               zip(range(grid.n_pixels), centers, frame.counts)))
        vis, err = np.nan, np.nan
        if scen.two_slit is not None and d.time > 0:
            maxima, minima = _fringe_points(scen, d.time)
            vis, err = de.fringe_visibility(frame, grid, maxima, minima, scen.fringe_spacing(d.time) / 4)
        summary.append((k, d.counts[k], frame.n_events, frame.n_noise, frame.n_discarded, vis, err))
    paths.append(write_csv(out / "detection_summary.csv",
                           ["frame", "signal_requested", "n_events", "n_noise", "n_discarded",
                            "visibility", "visibility_stderr"], summary))
    return paths


def _analysis_grid(cfg: RunConfig, scen: Scenario, t: float):
    lo, hi = scen.support(t, width=3.0)
    return np.linspace(lo, hi, cfg.analysis.n_points)


def cmd_analyze(cfg: RunConfig, out: Path) -> list:
    scen = Scenario.from_config(cfg)
    t = cfg.analysis.time
    grid = _analysis_grid(cfg, scen, t)
    report = an.find_extrema(scen.rho, grid, t, fringe_spacing=scen.fringe_spacing(t))
    rows = sorted([("min", x, False) for x in report.minima]
                  + [("max", x, x in set(report.plateau)) for x in report.maxima], key=lambda r: r[1])
    paths = [write_csv(out / "extrema.csv", ["kind", "t", "x", "plateau"],
                       [(kind, t, x, flag) for kind, x, flag in rows])]
    if scen.two_slit is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ladder = an.channel_ladder_extract(scen.velocity, t, grid, scen.rho, tau=scen.tau,
                                               fringe_spacing=scen.fringe_spacing(t))
        step = scen.two_slit.ladder_step
        paths.append(write_csv(out / "ladder.csv", ["nu", "x_lo", "x_hi", "mean_velocity", "target"],
                               [(c.nu, c.interval[0], c.interval[1], c.mean_velocity, c.nu * step)
                                for c in ladder.channels if abs(c.nu) <= cfg.analysis.max_channel]))
    energy = []
    source = scen.packet if scen.two_slit is None else scen.two_slit
    for tt in cfg.times:
        lo, hi = scen.support(tt, width=12.0)
        e = an.energy_decomposition(source, tt, np.linspace(lo, hi, 20001))
        regime = an.dispersion_regime(scen.packet, tt)
        energy.append((tt, e.mean_K, e.mean_Q, e.total, regime))
    paths.append(write_csv(out / "energy.csv", ["t", "mean_K", "mean_Q", "total", "regime"], energy))
    return paths


def cmd_verify(cfg: RunConfig, out: Path):
    checks = run_verify(cfg)
    path = write_csv(out / "verify.csv", ["check", "passed", "value", "threshold"],
                     [(c.name, c.passed, c.value, c.threshold) for c in checks])
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} value={c.value:.3e} threshold={c.threshold:.3e}")
    return [path], all(c.passed for c in checks)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bohmflow", description="Bohmian flow analysis of free "
                                     "Gaussian packets and two-packet interference.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="YAML run configuration")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field, e.g. physics.sigma0=0.4 (repeatable)")
    common.add_argument("--seed", type=int, help="random seed (overrides config)")
    common.add_argument("--output-dir", help="output directory (overrides config and environment)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _error(kind: str, message: str, **extra):
    print(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, args.overrides, seed=args.seed, output_dir=args.output_dir)
    except ConfigError as exc:
        _error("ConfigError", str(exc), path=exc.path, reason=exc.reason)
        return 2
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        passed = True
        if args.command == "verify":
            paths, passed = cmd_verify(cfg, out)
        else:
            paths = {"fields": cmd_fields, "trajectories": cmd_trajectories, "detect": cmd_detect,
                     "analyze": cmd_analyze}[args.command](cfg, out)
        write_manifest(out, cfg, args.command, paths)
    except (BohmflowError, ArithmeticError, ValueError, OSError) as exc:
        _error(type(exc).__name__, str(exc))
        return 1
    if not passed:
        _error("VerificationFailed", "one or more invariant checks failed")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
