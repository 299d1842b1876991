"""Command-line experiment runner.

    gshs propagate --config cfg.yaml --out results/ [--seed N]
    gshs estimate  --config cfg.yaml --out results/ [--seed N]
    gshs compare   --config cfg.yaml --out results/ [--seed N]

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import build_model
from .config import ConfigError, RunConfig, load_config
from .dgrd import dump_path, write_dgrd
from .errors import NumericalError
from .experiments import (
    aggregate_errors,
    run_compare_propagation,
    run_estimation,
    run_particle_filter,
    run_propagation,
)
from .grid import AbsoluteThreshold, PeakFractionThreshold
from .splitting import build_split_generators

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _write_manifest(out: Path, command: str, cfg: RunConfig, seed: int, extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "package_version": __version__,
        "seed": seed,
        "config": cfg.raw,
        "resolved": {
            "model": cfg.model,
            "dt": cfg.dt,
            "horizon": cfg.horizon,
            "grid": {
                "counts": list(cfg.resolved_grid().counts),
                "lengths": list(cfg.resolved_grid().lengths),
                "offsets": list(cfg.resolved_grid().offsets),
            },
            "initial": cfg.initial,
            "threshold": _threshold_json(cfg.threshold),
            "params": cfg.params,
        },
    }
    if cfg.model == "dubins":
        from .benchmarks import DubinsParams

        params = DubinsParams(**{k: v for k, v in cfg.params.items()}) if cfg.params else DubinsParams()
        manifest["model_meta"] = {
            "obstacles": [list(o) for o in params.obstacles],
            "obstacle_radius": params.d,
            "lidar": list(params.lidar),
        }
    if extra:
        manifest.update(extra)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)


def _threshold_json(threshold):
    if threshold is None:
        return None
    if isinstance(threshold, AbsoluteThreshold):
        return {"absolute": threshold.value}
    if isinstance(threshold, PeakFractionThreshold):
        return {"peak_fraction": threshold.fraction}
    return str(threshold)


def _estimate_header(num_axes: int, num_modes: int, meas_len: int, with_truth: bool, meas_axes) -> list[str]:
    cols = ["time"]
    if with_truth:
        cols += [f"truth_r{k}" for k in range(num_axes)] + ["truth_mode"]
    cols += [f"meas_{j}" for j in range(meas_len)]
    # measurement components that observe a state axis directly get a second,
    # axis-named column so plots can overlay them on that axis
    cols += [f"meas_r{axis}" for axis in meas_axes]
    cols += [f"mean_r{k}" for k in range(num_axes)]
    cols += [f"map_r{k}" for k in range(num_axes)] + ["map_mode"]
    cols += [f"std_r{k}" for k in range(num_axes)]
    cols += [f"mode_marginal_{s}" for s in range(num_modes)]
    return cols


def _write_estimates_csv(path, run, model, dt: float) -> None:
    truth = run.truth
    meas_by_step = {int(round(t / dt)): z for t, z in run.measurements}
    first_z = next(iter(meas_by_step.values()), None)
    meas_len = np.size(first_z) if first_z is not None else 0
    meas_axes = ()
    if meas_len and model.measurement_state_axes:
        meas_axes = model.measurement_state_axes[:meas_len]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            _estimate_header(model.num_axes, model.num_modes, meas_len, truth is not None, meas_axes)
        )
        for i, est in enumerate(run.result.estimates):
            t = run.result.times[i]
            k = int(round(t / dt))
            row = [f"{t:.6f}"]
            if truth is not None:
                row += [repr(float(x)) for x in truth.states_r[k]] + [int(truth.states_s[k])]
            z = meas_by_step.get(k)
            zvals = np.ravel(z) if z is not None else np.full(meas_len, np.nan)
            row += [repr(float(x)) for x in zvals]
            row += [repr(float(zvals[j])) for j in range(len(meas_axes))]
            row += [repr(float(x)) for x in est.mean]
            row += [repr(float(x)) for x in est.map_state.r] + [est.map_state.s]
            row += [repr(float(x)) for x in est.std]
            row += [repr(float(x)) for x in est.mode_marginal]
            writer.writerow(row)


def _read_measurements_csv(path, dt: float) -> list[tuple[float, object]]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#") or row[0] == "time":
                continue
            t = float(row[0])
            z = np.array([float(x) for x in row[1:]])
            out.append((t, z if z.size > 1 else float(z[0])))
    return out


def cmd_propagate(cfg: RunConfig, out: Path, seed: int) -> int:
    grid = cfg.resolved_grid()
    model = build_model(cfg.model, grid, cfg.params, cfg.initial)
    output_times = cfg.output_times or [cfg.horizon]
    result = run_propagation(model, grid, cfg.dt, cfg.horizon, cfg.threshold, output_times)
    out.mkdir(parents=True, exist_ok=True)
    for dens in result.densities:
        write_dgrd(dump_path(out, dens.time), dens)
    with open(out / "timings.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "seconds"])
        for k, sec in enumerate(result.step_seconds):
            writer.writerow([k, repr(float(sec))])
    _write_manifest(out, "propagate", cfg, seed)
    mean_step = float(np.mean(result.step_seconds)) if result.step_seconds.size else 0.0
    print(f"propagated {cfg.model} to t={cfg.horizon:g}s in {result.step_seconds.sum():.2f}s "
          f"({mean_step * 1e3:.2f} ms/step); wrote {len(result.densities)} dumps to {out}")
    return 0


def cmd_estimate(cfg: RunConfig, out: Path, seed: int) -> int:
    grid = cfg.resolved_grid()
    model = build_model(cfg.model, grid, cfg.params, cfg.initial)
    if cfg.measurements is None:
        raise ConfigError("estimate needs a measurements block")
    out.mkdir(parents=True, exist_ok=True)
    gens = build_split_generators(model, grid)

    runs = []
    if cfg.measurements["source"] == "file":
        from .estimator import run_filter

        measurements = _read_measurements_csv(cfg.measurements["file"], cfg.dt)
        result = run_filter(gens, model.initial_density, measurements, cfg.dt,
                            horizon=cfg.horizon, record_times=cfg.output_times)
        from .experiments import EstimationRun

        run = EstimationRun(None, measurements, result,
                            np.full(model.num_axes, np.nan), np.full(model.num_axes, np.nan), np.nan)
        _write_estimates_csv(out / "run00_estimates.csv", run, model, cfg.dt)
        for dens in result.posteriors:
            write_dgrd(dump_path(out, dens.time), dens)
        _write_manifest(out, "estimate", cfg, seed)
        print(f"replayed {len(measurements)} measurements; estimates in {out}")
        return 0

    for i in range(cfg.runs):
        run = run_estimation(model, grid, cfg.dt, cfg.horizon, seed + i, cfg.measurements["every"],
                             gens=gens, record_times=cfg.output_times if i == 0 else ())
        runs.append(run)
        _write_estimates_csv(out / f"run{i:02d}_estimates.csv", run, model, cfg.dt)
        if i == 0:
            for dens in run.result.posteriors:
                write_dgrd(dump_path(out, dens.time), dens)
    table = aggregate_errors(runs)
    with open(out / "errors.json", "w") as fh:
        json.dump(table, fh, indent=2)
    _write_manifest(out, "estimate", cfg, seed, extra={"errors": table})
    print(f"{cfg.model}: {cfg.runs} runs")
    for k in range(model.num_axes):
        print(f"  axis {k}: mean-estimate error {table['mean_error_avg'][k]:.4f} "
              f"+/- {table['mean_error_std'][k]:.4f}, MAP error {table['map_error_avg'][k]:.4f}")
    print(f"  mode error: {100 * table['mode_error_avg']:.2f}% ; "
          f"step time {table['step_seconds_avg'] * 1e3:.2f} ms")
    return 0


def cmd_compare(cfg: RunConfig, out: Path, seed: int) -> int:
    grid = cfg.resolved_grid()
    model = build_model(cfg.model, grid, cfg.params, cfg.initial)
    out.mkdir(parents=True, exist_ok=True)
    gens = build_split_generators(model, grid)
    report: dict = {"model": cfg.model, "baselines": cfg.baselines}

    if "montecarlo" in cfg.baselines:
        cmp = run_compare_propagation(
            model, grid, cfg.dt, cfg.horizon, cfg.threshold,
            cfg.output_times or [cfg.horizon], cfg.montecarlo["paths"], seed, gens=gens,
            mc_substeps=cfg.montecarlo.get("substeps", 1),
        )
        report["l1_distances"] = {f"{t:g}": v for t, v in cmp.l1_distances.items()}
        report["spectral_step_seconds"] = cmp.spectral_step_seconds
        report["montecarlo_step_seconds"] = cmp.montecarlo_step_seconds
        report["montecarlo_paths"] = cfg.montecarlo["paths"]
        report["step_time_ratio"] = cmp.step_time_ratio
        print("L1 density distances (spectral vs Monte Carlo):")
        for t, v in cmp.l1_distances.items():
            print(f"  t={t:g}s: {v:.4f}")
        print(f"step time: spectral {cmp.spectral_step_seconds * 1e3:.2f} ms, "
              f"Monte Carlo {cmp.montecarlo_step_seconds * 1e3:.2f} ms "
              f"(ratio {cmp.step_time_ratio:.3f})")
    else:
        result = run_propagation(model, grid, cfg.dt, cfg.horizon, cfg.threshold,
                                 cfg.output_times or [cfg.horizon], gens=gens)
        report["spectral_step_seconds"] = float(np.mean(result.step_seconds))
        print(f"spectral step time {report['spectral_step_seconds'] * 1e3:.2f} ms (no baselines)")

    if "particle" in cfg.baselines:
        if cfg.measurements is None:
            raise ConfigError("particle baseline needs a measurements block")
        spectral_runs, particle_runs = [], []
        for i in range(cfg.runs):
            srun = run_estimation(model, grid, cfg.dt, cfg.horizon, seed + i,
                                  cfg.measurements["every"], gens=gens)
            prun = run_particle_filter(model, grid, cfg.dt, cfg.horizon, seed + i,
                                       cfg.particle["count"], srun.truth, srun.measurements,
                                       prior=model.initial_density)
            spectral_runs.append(srun)
            particle_runs.append(prun)
        report["spectral_errors"] = aggregate_errors(spectral_runs)
        report["particle_errors"] = aggregate_errors(particle_runs)
        print("estimation errors (spectral | particle):")
        for k in range(model.num_axes):
            print(f"  axis {k}: {report['spectral_errors']['mean_error_avg'][k]:.4f} | "
                  f"{report['particle_errors']['mean_error_avg'][k]:.4f}")
        print(f"  mode: {100 * report['spectral_errors']['mode_error_avg']:.2f}% | "
              f"{100 * report['particle_errors']['mode_error_avg']:.2f}%")

    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    _write_manifest(out, "compare", cfg, seed, extra={"report": report})
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gshs", description="Hybrid-system density propagation and estimation")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("propagate", "estimate", "compare"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="base RNG seed (overrides config)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        seed = cfg.seed if args.seed is None else args.seed
        out = Path(args.out)
        if args.command == "propagate":
            return cmd_propagate(cfg, out, seed)
        if args.command == "estimate":
            return cmd_estimate(cfg, out, seed)
        return cmd_compare(cfg, out, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
