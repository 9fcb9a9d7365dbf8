"""Command-line front end: ``garnetspin <command> --config run.ini``.

Each ``cmd_*`` function takes a resolved :class:`RunConfig` and returns
``(output_text, summary_text, exit_code)``; :func:`main` does the
argument handling and routes the two texts. With ``--out`` the output
goes to that file and the summary to stdout; otherwise the output goes
to stdout and the summary to stderr.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bathcluster import ClusterSampler, ClusterSpec, cluster_dd_signal
from .config import COMMAND_SECTIONS, RunConfig, load_config
from .crystal import FieldSpec, GTensor
from .dynamics import NoiseModel, analytic_coherence, run_sequence, sequence_template
from .errors import ConfigError, InputError
from .fitting import MODEL_PARAMS, fit
from .pumping import PumpModel, pump_train, steady_state_polarization
from .signals import fmt, read_signal, signal_to_csv, write_table
from .spectrum import LineShape, group_lines, odmr_spectrum, transition_frequencies, zeeman_sweep

EXIT_OK, EXIT_VALIDATION, EXIT_NONCONVERGED, EXIT_IO = 0, 1, 2, 3

# config key -> fit parameter name
_GUESS_KEYS = {"guess_A": "A", "guess_c": "c", "guess_tau_ns": "tau", "guess_f_mhz": "f",
               "guess_phi_rad": "phi", "guess_p": "p"}


def _g(cfg: RunConfig) -> GTensor:
    c = cfg.section("crystal")
    return GTensor(c["gx"], c["gy"], c["gz"])


def _direction(vec, key):
    v = np.asarray(vec, dtype=float)
    if not np.linalg.norm(v) > 0:
        raise ConfigError(f"{key} must be a nonzero vector")
    return v / np.linalg.norm(v)


def _grid(start, stop, points, what):
    if points == 1:
        return np.array([start])
    if not stop > start:
        raise ConfigError(f"{what}: stop must exceed start")
    return np.linspace(start, stop, points)


def _config_relative(cfg: RunConfig, name: str) -> Path:
    """Relative paths in a config file are taken from the file's directory."""
    path = Path(name)
    if not path.is_absolute() and cfg.source not in ("<config>", ""):
        path = Path(cfg.source).parent / path
    return path


def _provenance(cfg: RunConfig, command: str):
    return cfg.resolved(COMMAND_SECTIONS[command])


def cmd_spectrum(cfg: RunConfig):
    s = cfg.section("spectrum")
    field = FieldSpec(s["field_gauss"], _direction(s["direction"], "spectrum.direction"))
    g = _g(cfg)
    shape = LineShape(s["lineshape"], s["fwhm_mhz"])
    if s["f_points"] < 2:
        raise ConfigError("spectrum.f_points must be >= 2")
    grid = _grid(s["f_start_mhz"], s["f_stop_mhz"], s["f_points"], "spectrum frequency grid")
    signal = odmr_spectrum(field, g, shape, grid, weights=s["weights"])
    lines = transition_frequencies(field, g, s["weights"])
    summary = [f"site {ln.site_id}: {ln.frequency:.3f} MHz" for ln in lines]
    summary.append("distinct lines:")
    for freq, sites in group_lines(lines, rtol=1e-9, atol=1e-9):
        summary.append(f"  {freq:.3f} MHz x{len(sites)} (sites {' '.join(map(str, sites))})")
    return signal_to_csv(signal, _provenance(cfg, "spectrum")), "\n".join(summary) + "\n", EXIT_OK


def cmd_zeeman(cfg: RunConfig):
    s = cfg.section("zeeman")
    fan = zeeman_sweep(_direction(s["direction"], "zeeman.direction"), _g(cfg),
                       _grid(s["b_start_gauss"], s["b_stop_gauss"], s["b_points"], "zeeman field grid"))
    columns = {"field_gauss": fan.b}
    for i, row in enumerate(fan.frequencies, start=1):
        columns[f"site{i}_mhz"] = row
    meta = {"slopes_mhz_per_gauss": " ".join(fmt(v) for v in fan.slopes)}
    summary = [f"site {i}: slope {v:.5f} MHz/G" for i, v in enumerate(fan.slopes, start=1)]
    text = write_table(columns, meta, _provenance(cfg, "zeeman"))
    return text, "\n".join(summary) + "\n", EXIT_OK


def cmd_pump(cfg: RunConfig):
    s = cfg.section("pump")
    model = PumpModel(s["branching_ratio"], s["excitation_prob"], s["sigma_plus_fraction"],
                      s["thermal_polarization"])
    traj = pump_train(model, s["n_pulses"])
    steady = steady_state_polarization(model)
    final = float(traj.polarization[-1])
    meta = {"steady_state_polarization": steady, "final_polarization": final}
    summary = (f"polarization after {s['n_pulses']} pulses: {final:.6f}\n"
               f"steady-state polarization: {steady:.6f}\n")
    return traj.to_csv(meta, _provenance(cfg, "pump")), summary, EXIT_OK


def _sequence(s: dict):
    swept = None if s["swept"] == "default" else s["swept"]
    return sequence_template(s["sequence"], s["rabi_mhz"], n_pulses=s["n_pulses"],
                             tau_ns=s["tau_ns"], cycles=s["cycles"], swept=swept,
                             ideal_pulses=s["ideal_pulses"], detuning_mhz=s["detuning_mhz"])


def _require_seed(cfg: RunConfig, command: str) -> int:
    seed = cfg.get("run", "seed")
    if seed is None:
        raise ConfigError(f"{command} needs a seed: set [run] seed or pass --seed")
    return seed


def _analytic_column(seq, s, noise, grid):
    """Ideal-ensemble readout for fid/hahn/cpmg, or None when no oracle applies."""
    if (s["sequence"] not in ("fid", "hahn", "cpmg") or noise.kind == "none"
            or s["detuning_mhz"] != 0 or seq.readout_axis != "z"):
        return None
    n = s["n_pulses"] if s["sequence"] == "cpmg" else 1
    return np.array([0.5 * (1 + analytic_coherence(noise, s["sequence"], seq.free_time(v), n))
                     for v in grid])


def cmd_simulate(cfg: RunConfig):
    s = cfg.section("simulate")
    seed = _require_seed(cfg, "simulate")
    seq = _sequence(s)
    if s["readout_axis"] != "z":
        seq = replace(seq, readout_axis=s["readout_axis"])
    noise = NoiseModel(s["noise"], s["sigma_mhz"], s["tau_c_ns"], s["t1_ns"])
    grid = _grid(s["sweep_start"], s["sweep_stop"], s["sweep_points"], "simulate sweep grid")
    signal = run_sequence(seq, noise, grid, s["n_trajectories"], seed, cfg.get("run", "threads"))
    analytic = _analytic_column(seq, s, noise, grid)
    if analytic is not None:
        signal.extras["analytic"] = analytic
    summary = (f"{seq.name}: {len(grid)} points, {signal.metadata['n_trajectories']} trajectories, "
               f"seed {seed}\n")
    return signal_to_csv(signal, _provenance(cfg, "simulate")), summary, EXIT_OK


def _cluster_source(cfg: RunConfig, s: dict):
    if s["source"] == "file":
        if not s["cluster_file"]:
            raise ConfigError("cluster.source = file needs cluster.cluster_file")
        path = _config_relative(cfg, s["cluster_file"])
        spec = ClusterSpec.from_text(path.read_text(), str(path))
        if s["max_coupling_mhz"] > 0:
            spec = spec.scaled(s["max_coupling_mhz"] / np.max(np.abs(spec.couplings)))
        return spec
    field = FieldSpec(s["field_gauss"], _direction(s["direction"], "cluster.direction"))
    return ClusterSampler(s["concentration"], s["n_spins"], field, _g(cfg),
                          s["max_coupling_mhz"] or None)


def cmd_cluster(cfg: RunConfig):
    s = cfg.section("cluster")
    seed = _require_seed(cfg, "cluster")
    source = _cluster_source(cfg, s)
    seq = _sequence(s)
    grid = _grid(s["sweep_start"], s["sweep_stop"], s["sweep_points"], "cluster sweep grid")
    n_configs = s["n_configs"] if isinstance(source, ClusterSampler) else 1
    signal = cluster_dd_signal(source, seq, grid, n_configs, seed, cfg.get("run", "threads"))
    summary = (f"{seq.name} on {signal.metadata['n_spins']} spins, {n_configs} configuration(s): "
               f"coherence at {fmt(grid[-1])} = {signal.y[-1]:.6f}\n")
    return signal_to_csv(signal, _provenance(cfg, "cluster")), summary, EXIT_OK


def cmd_fit(cfg: RunConfig, as_csv: bool = False):
    s = cfg.section("fit")
    if not s["input"]:
        raise ConfigError("fit needs an input CSV (fit.input or a positional path)")
    signal = read_signal(_config_relative(cfg, s["input"]))
    names = MODEL_PARAMS[s["model"]]
    guess = {}
    for key, name in _GUESS_KEYS.items():
        if s[key] is not None:
            if name not in names:
                raise ConfigError(f"fit.{key} does not apply to {s['model']}")
            guess[name] = s[key]
    fixed = {}
    for name in s["fixed"].split():
        if name not in names:
            raise ConfigError(f"fit.fixed: {s['model']} has no parameter {name!r}")
        if name not in guess:
            raise ConfigError(f"fit.fixed: give a guess for {name!r} to fix it at")
        fixed[name] = guess[name]
    result = fit(signal, s["model"], guess or None, fixed=fixed or None, max_iter=s["max_iter"])
    if as_csv:
        cols, vals = result.csv_columns()
        text = ",".join(cols) + "\n" + ",".join(vals) + "\n"
    else:
        text = result.to_text()
    if result.converged:
        summary = f"{s['model']}: tau = {result.decay_time:.6g} ns\n"
        return text, summary, EXIT_OK
    return text, f"fit did not converge: {result.message}\n", EXIT_NONCONVERGED


COMMANDS = {"spectrum": cmd_spectrum, "zeeman": cmd_zeeman, "pump": cmd_pump,
            "simulate": cmd_simulate, "cluster": cmd_cluster, "fit": cmd_fit}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="garnetspin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="run configuration file")
        p.add_argument("--out", help="write the output here instead of stdout")
        p.add_argument("--seed", type=int, help="overrides [run] seed")
        p.add_argument("--threads", type=int, help="overrides [run] threads")
        if name == "fit":
            p.add_argument("input", nargs="?", help="signal CSV (overrides fit.input)")
            p.add_argument("--model", choices=sorted(MODEL_PARAMS), help="overrides fit.model")
            p.add_argument("--csv", action="store_true", help="emit a CSV row instead of key=value")
    return parser


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be >= 0")
            cfg.set("run", "seed", args.seed)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            cfg.set("run", "threads", args.threads)
        if args.command == "fit":
            if args.input:
                cfg.set("fit", "input", str(Path(args.input).resolve()))
            if args.model:
                cfg.set("fit", "model", args.model)
            text, summary, code = cmd_fit(cfg, as_csv=args.csv)
        else:
            text, summary, code = COMMANDS[args.command](cfg)
        if args.out:
            Path(args.out).write_text(text)
            stdout.write(summary)
        else:
            stdout.write(text)
            stderr.write(summary)
        return code
    except (ConfigError, InputError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except OSError as exc:
        stderr.write(f"I/O error: {exc}\n")
        return EXIT_IO


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
