"""Run configuration: a YAML mapping mirroring the experiment parameter tables.

Schema (keys marked * are required):

    model*:        bouncing-ball | dubins
    params:        mapping of model parameter overrides
    grid:          {counts: [..], lengths: [..], offsets: [..]}   # model default if absent
    dt*:           step size in seconds
    horizon*:      total propagated time, an integer multiple of dt
    threshold:     {absolute: x} | {peak_fraction: x} | null
    initial:       propagation | uniform
    output_times:  [t, ...] times at which densities are dumped
    measurements:  {source: simulate|file, every: k, file: path}
    runs:          number of seeded estimation runs
    baselines:     subset of [montecarlo, particle]
    montecarlo:    {paths: n}
    particle:      {count: n}
    seed:          base RNG seed (overridden by --seed)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import yaml

from .benchmarks import MODEL_NAMES, default_grid
from .grid import AbsoluteThreshold, GridSpec, PeakFractionThreshold

__all__ = ["ConfigError", "RunConfig", "load_config"]


class ConfigError(Exception):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    model: str
    dt: float
    horizon: float
    params: dict = field(default_factory=dict)
    grid: Optional[GridSpec] = None
    threshold: object = None
    initial: str = "propagation"
    output_times: list = field(default_factory=list)
    measurements: Optional[dict] = None
    runs: int = 1
    baselines: list = field(default_factory=list)
    montecarlo: dict = field(default_factory=lambda: {"paths": 100_000, "substeps": 1})
    particle: dict = field(default_factory=lambda: {"count": 100_000})
    seed: int = 0
    raw: dict = field(default_factory=dict)

    def resolved_grid(self) -> GridSpec:
        return self.grid if self.grid is not None else default_grid(self.model)


def _require(mapping: dict, key: str):
    if key not in mapping:
        raise ConfigError(f"missing required config key {key!r}")
    return mapping[key]


def _parse_grid(spec: dict, mode_count: int) -> GridSpec:
    try:
        counts = tuple(int(n) for n in _require(spec, "counts"))
        lengths = tuple(float(x) for x in _require(spec, "lengths"))
        offsets = tuple(float(x) for x in _require(spec, "offsets"))
        return GridSpec(counts, lengths, offsets, mode_count)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc


def _parse_threshold(spec):
    if spec is None:
        return None
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError("threshold must be {absolute: x} or {peak_fraction: x}")
    try:
        if "absolute" in spec:
            return AbsoluteThreshold(float(spec["absolute"]))
        if "peak_fraction" in spec:
            return PeakFractionThreshold(float(spec["peak_fraction"]))
    except ValueError as exc:
        raise ConfigError(f"invalid threshold: {exc}") from exc
    raise ConfigError(f"unknown threshold policy {spec!r}")


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")

    model = str(_require(raw, "model"))
    if model not in MODEL_NAMES:
        raise ConfigError(f"unknown model {model!r}; available: {', '.join(MODEL_NAMES)}")
    try:
        dt = float(_require(raw, "dt"))
        horizon = float(_require(raw, "horizon"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid dt/horizon: {exc}") from exc
    if dt <= 0 or horizon < 0:
        raise ConfigError("dt must be positive and horizon nonnegative")
    steps = horizon / dt
    if abs(steps - round(steps)) > 1e-9:
        raise ConfigError("horizon must be an integer multiple of dt")

    mode_count = 1 if model == "bouncing-ball" else 3
    grid = _parse_grid(raw["grid"], mode_count) if raw.get("grid") else None
    initial = str(raw.get("initial", "propagation"))
    if initial not in ("propagation", "uniform"):
        raise ConfigError(f"unknown initial distribution {initial!r}")

    measurements = raw.get("measurements")
    if measurements is not None:
        if not isinstance(measurements, dict):
            raise ConfigError("measurements must be a mapping")
        source = measurements.get("source", "simulate")
        if source not in ("simulate", "file"):
            raise ConfigError(f"unknown measurement source {source!r}")
        if source == "file" and not measurements.get("file"):
            raise ConfigError("measurement source 'file' needs a 'file' path")
        measurements = {
            "source": source,
            "every": int(measurements.get("every", 1)),
            "file": measurements.get("file"),
        }
        if measurements["every"] < 1:
            raise ConfigError("measurements.every must be >= 1")

    baselines = list(raw.get("baselines", []))
    for b in baselines:
        if b not in ("montecarlo", "particle"):
            raise ConfigError(f"unknown baseline {b!r}")

    cfg = RunConfig(
        model=model,
        dt=dt,
        horizon=horizon,
        params=dict(raw.get("params") or {}),
        grid=grid,
        threshold=_parse_threshold(raw.get("threshold")),
        initial=initial,
        output_times=[float(t) for t in raw.get("output_times", [])],
        measurements=measurements,
        runs=int(raw.get("runs", 1)),
        baselines=baselines,
        montecarlo={
            "paths": int((raw.get("montecarlo") or {}).get("paths", 100_000)),
            "substeps": int((raw.get("montecarlo") or {}).get("substeps", 1)),
        },
        particle={"count": int((raw.get("particle") or {}).get("count", 100_000))},
        seed=int(raw.get("seed", 0)),
        raw=raw,
    )
    if cfg.runs < 1:
        raise ConfigError("runs must be >= 1")
    return cfg
