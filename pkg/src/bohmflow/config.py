"""Run configuration: YAML schema, defaults, overrides and validation.

Precedence, lowest to highest: built-in defaults, the YAML file, the
``BOHMFLOW_OUTPUT_DIR`` environment variable (output directory only), and
command-line flags (``--set section.key=value``, ``--seed``,
``--output-dir``). Unknown keys are rejected.
"""
from __future__ import annotations

import copy
import math
import os
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .errors import ConfigError
from .packet import PacketParams
from .superposition import SuperpositionConfig

CONFIG_VERSION = 1
OUTPUT_DIR_ENV = "BOHMFLOW_OUTPUT_DIR"
SCENARIOS = ("single_packet", "two_slit")


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot, like 1e-6."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                    |[-+]?\.(?:inf|Inf|INF)
                    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def _load_yaml(text: str):
    return yaml.load(text, Loader=_Loader)


@dataclass
class PhysicsSection:
    mass: float = 1.0
    hbar: float = 1.0
    sigma0: float = 0.5
    half_separation: float = 5.0
    center: float = 0.0
    drift_momentum: float = 0.0


@dataclass
class GridSection:
    x_min: float = -40.0
    x_max: float = 40.0
    n_points: int = 1601


@dataclass
class SwarmSection:
    n_trajectories: int = 200
    t0: float = 0.0
    t1: float = 10.0
    sampling: str = "equidistant_quantiles"
    n_output_times: int = 500
    rtol: float = 1e-8
    atol: float = 1e-10
    min_completed_fraction: float = 0.95


@dataclass
class DetectionSection:
    time: float = 10.0
    x_min: float = -40.0
    x_max: float = 40.0
    n_pixels: int = 256
    counts: list = field(default_factory=lambda: [100, 10_000, 1_000_000])
    noise_rate: float = 1.0


@dataclass
class AnalysisSection:
    time: float = 10.0
    n_points: int = 6001
    max_channel: int = 3


@dataclass
class TolerancesSection:
    energy: float = 1e-6
    zero_flux: float = 1e-14
    continuity: float = 1e-4
    hamilton_jacobi: float = 1e-3
    transport: float = 0.03
    transport_samples: int = 100_000


@dataclass
class RunConfig:
    """Fully validated configuration of one run.

    Defaults are the two-slit parameter set m = hbar = 1, sigma0 = 0.5,
    x0 = 5 observed up to t = 10.
    """

    scenario: str = "two_slit"
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    grid: GridSection = field(default_factory=GridSection)
    times: list = field(default_factory=lambda: [0.0, 2.5, 5.0, 7.5, 10.0])
    swarm: SwarmSection = field(default_factory=SwarmSection)
    detection: DetectionSection = field(default_factory=DetectionSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    tolerances: TolerancesSection = field(default_factory=TolerancesSection)
    seed: int = 0
    output_dir: str = "bohmflow_out"

    @property
    def packet(self) -> PacketParams:
        ph = self.physics
        return PacketParams(ph.mass, ph.hbar, ph.sigma0, ph.center, ph.drift_momentum)

    @property
    def superposition(self) -> Optional[SuperpositionConfig]:
        if self.scenario != "two_slit":
            return None
        return SuperpositionConfig(self.packet, self.physics.half_separation)

    @property
    def grid_points(self) -> np.ndarray:
        g = self.grid
        return np.linspace(g.x_min, g.x_max, g.n_points)

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "physics": PhysicsSection,
    "grid": GridSection,
    "swarm": SwarmSection,
    "detection": DetectionSection,
    "analysis": AnalysisSection,
    "tolerances": TolerancesSection,
}


def _coerce(path, value, template):
    """Convert ``value`` to the type of ``template`` or raise ConfigError."""
    if isinstance(template, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, "expected a boolean")
        return value
    if isinstance(template, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(path, "expected an integer")
        return int(value)
    if isinstance(template, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, "expected a number")
        if not math.isfinite(value):
            raise ConfigError(path, "must be finite")
        return float(value)
    if isinstance(template, str):
        if not isinstance(value, str):
            raise ConfigError(path, "expected a string")
        return value
    if isinstance(template, list):
        if not isinstance(value, list):
            raise ConfigError(path, "expected a list")
        return [_coerce(f"{path}[{i}]", v, 0.0) for i, v in enumerate(value)]
    raise ConfigError(path, "unsupported value")


def _merge(base: dict, update: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        path = f"{prefix}{key}"
        if key not in out:
            raise ConfigError(path, "unknown key")
        if isinstance(out[key], dict):
            if value is None:
                continue
            if not isinstance(value, dict):
                raise ConfigError(path, "expected a mapping")
            out[key] = _merge(out[key], value, prefix=f"{path}.")
        else:
            out[key] = value
    return out


def _build(raw: dict) -> RunConfig:
    kwargs = {}
    for f in fields(RunConfig):
        value = raw[f.name]
        if f.name in _SECTIONS:
            cls = _SECTIONS[f.name]
            section = {}
            for sf in fields(cls):
                template = getattr(cls(), sf.name)
                section[sf.name] = _coerce(f"{f.name}.{sf.name}", value[sf.name], template)
            kwargs[f.name] = cls(**section)
        else:
            kwargs[f.name] = _coerce(f.name, value, getattr(RunConfig(), f.name))
    return RunConfig(**kwargs)


def _positive(path, value):
    if not value > 0:
        raise ConfigError(path, f"must be positive, got {value!r}")


def validate(cfg: RunConfig) -> RunConfig:
    """Check every field invariant; raise ConfigError naming the first bad field."""
    if cfg.scenario not in SCENARIOS:
        raise ConfigError("scenario", f"must be one of {', '.join(SCENARIOS)}")
    ph = cfg.physics
    for name in ("mass", "hbar", "sigma0"):
        _positive(f"physics.{name}", getattr(ph, name))
    if cfg.scenario == "two_slit":
        _positive("physics.half_separation", ph.half_separation)
        if ph.center != 0.0 or ph.drift_momentum != 0.0:
            raise ConfigError("physics.center", "the two-slit scenario is centered and at rest")
    g = cfg.grid
    if g.n_points < 2:
        raise ConfigError("grid.n_points", "need at least 2 points")
    if not g.x_max > g.x_min:
        raise ConfigError("grid.x_max", "must exceed grid.x_min")
    if not cfg.times:
        raise ConfigError("times", "need at least one time")
    if any(t < 0 for t in cfg.times):
        raise ConfigError("times", "times must be non-negative")
    sw = cfg.swarm
    if sw.n_trajectories < 1:
        raise ConfigError("swarm.n_trajectories", "must be at least 1")
    if not sw.t1 > sw.t0 >= 0:
        raise ConfigError("swarm.t1", "need t1 > t0 >= 0")
    if sw.sampling not in ("equidistant_quantiles", "iid_from_rho"):
        raise ConfigError("swarm.sampling", "must be equidistant_quantiles or iid_from_rho")
    if sw.n_output_times < 2:
        raise ConfigError("swarm.n_output_times", "need at least 2 output times")
    _positive("swarm.rtol", sw.rtol)
    _positive("swarm.atol", sw.atol)
    if not 0 < sw.min_completed_fraction <= 1:
        raise ConfigError("swarm.min_completed_fraction", "must lie in (0, 1]")
    d = cfg.detection
    if d.time < 0:
        raise ConfigError("detection.time", "must be non-negative")
    if not d.x_max > d.x_min:
        raise ConfigError("detection.x_max", "must exceed detection.x_min")
    if d.n_pixels < 1:
        raise ConfigError("detection.n_pixels", "must be at least 1")
    if not d.counts:
        raise ConfigError("detection.counts", "need at least one count")
    counts = [int(c) for c in d.counts]
    if any(c != float(c0) for c, c0 in zip(counts, d.counts)) or any(c < 0 for c in counts):
        raise ConfigError("detection.counts", "counts must be non-negative integers")
    if any(b < a for a, b in zip(counts, counts[1:])):
        raise ConfigError("detection.counts", "counts must be ascending")
    d.counts = counts
    if d.noise_rate < 0:
        raise ConfigError("detection.noise_rate", "must be non-negative")
    a = cfg.analysis
    if a.time < 0:
        raise ConfigError("analysis.time", "must be non-negative")
    if a.n_points < 3:
        raise ConfigError("analysis.n_points", "need at least 3 points")
    if a.max_channel < 0:
        raise ConfigError("analysis.max_channel", "must be non-negative")
    for f in fields(TolerancesSection):
        _positive(f"tolerances.{f.name}", getattr(cfg.tolerances, f.name))
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed", "must be a 64-bit unsigned integer")
    if not cfg.output_dir:
        raise ConfigError("output_dir", "must not be empty")
    return cfg


def parse_override(item: str) -> dict:
    """Turn ``a.b=value`` into ``{"a": {"b": value}}`` with a YAML-parsed value."""
    if "=" not in item:
        raise ConfigError(item, "override must look like key=value")
    key, text = item.split("=", 1)
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError(key, "malformed key")
    try:
        value = _load_yaml(text)
    except yaml.YAMLError as exc:
        raise ConfigError(key, f"unparsable value: {exc}") from None
    out = value
    for part in reversed(parts):
        out = {part: out}
    return out


def load_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("<file>", f"config file {str(path)!r} not found")
    try:
        data = _load_yaml(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"invalid YAML: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("<file>", "top level must be a mapping")
    return data


def parse_config(path=None, overrides=(), seed: Optional[int] = None,
                 output_dir: Optional[str] = None, environ=None) -> RunConfig:
    """Assemble and validate a RunConfig.

    Parameters
    ----------
    path : path-like, optional
        YAML file; an empty file yields the defaults.
    overrides : iterable of str
        ``section.key=value`` items, applied in order.
    seed, output_dir : optional
        Flag values; they beat everything else.
    environ : mapping, optional
        Environment to read ``BOHMFLOW_OUTPUT_DIR`` from (default ``os.environ``).
    """
    environ = os.environ if environ is None else environ
    raw = RunConfig().to_dict()
    if path is not None:
        raw = _merge(raw, load_file(path))
    env_dir = environ.get(OUTPUT_DIR_ENV)
    if env_dir:
        raw["output_dir"] = env_dir
    for item in overrides:
        raw = _merge(raw, parse_override(item))
    if seed is not None:
        raw["seed"] = seed
    if output_dir is not None:
        raw["output_dir"] = output_dir
    return validate(_build(raw))
