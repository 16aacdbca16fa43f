"""Experiment configuration: parsing, validation, canonical serialization, seeds.

Configs are plain-text ``section.key = value`` files (``#`` comments allowed);
a JSON file with the same nested structure is accepted as an alternative.
Unknown keys are rejected, missing keys take the documented defaults, and
physics validation names the offending field.  The config hash is computed
from the canonical JSON form with sorted keys, so it is stable under key
reordering in the source file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .evolve import EvolutionParams
from .probe import Boundary, CouplingParams, ParticleParams
from .schwinger import MeasuredRegion, SchwingerParams


@dataclass
class PacketParams:
    """Apparatus packet overrides; None means the geometry-derived default."""

    center: float | None = None
    width: float | None = None
    momentum: float = 0.0

    def validate(self, prefix: str = "packet") -> None:
        if self.width is not None and self.width <= 0:
            raise ValueError(f"{prefix}.width: must be > 0")


@dataclass
class ExperimentConfig:
    schwinger: SchwingerParams = field(default_factory=SchwingerParams)
    particles: ParticleParams = field(default_factory=ParticleParams)
    couplings: CouplingParams = field(default_factory=CouplingParams)
    evolution: EvolutionParams = field(default_factory=EvolutionParams)
    packet: PacketParams = field(default_factory=PacketParams)
    seed: int = 20240915
    n_random: int = 5
    measured_region: MeasuredRegion = MeasuredRegion.ALL_BUT_BOTTOM_TWO
    sweep: tuple | None = None
    probe_time: float | None = None

    def validate(self) -> None:
        self.schwinger.validate("schwinger")
        self.particles.validate("particles")
        self.couplings.validate("couplings")
        self.evolution.validate("evolution")
        self.packet.validate("packet")
        if self.n_random < 0:
            raise ValueError("n_random: must be >= 0")
        if self.sweep is not None:
            if not self.sweep:
                raise ValueError("sweep: must list at least one size")
            for s in self.sweep:
                if s < 3:
                    raise ValueError("sweep: every size must be >= 3")
        if self.probe_time is not None and self.probe_time < 0:
            raise ValueError("probe_time: must be >= 0")


# (section, key) -> (attribute path, type tag)
_SCHEMA = {
    "schwinger.n_sites": int,
    "schwinger.spacing": float,
    "schwinger.mass": float,
    "schwinger.coupling": float,
    "schwinger.background_field": float,
    "particles.n_points": int,
    "particles.lattice_spacing": float,
    "particles.mass_apparatus": float,
    "particles.mass_environment": float,
    "particles.boundary": Boundary,
    "couplings.g_sa": float,
    "couplings.g_ae": float,
    "couplings.sigma": float,
    "evolution.dt": float,
    "evolution.t_max": float,
    "evolution.krylov_dim": int,
    "evolution.tol": float,
    "evolution.record_every": int,
    "packet.center": (float, None),
    "packet.width": (float, None),
    "packet.momentum": float,
    "seed": int,
    "n_random": int,
    "measured_region": MeasuredRegion,
    "sweep": (tuple, None),
    "probe_time": (float, None),
}

_SECTION_FIELDS = {
    "schwinger": ("n_sites", "spacing", "mass", "coupling", "background_field"),
    "particles": (
        "n_points",
        "lattice_spacing",
        "mass_apparatus",
        "mass_environment",
        "boundary",
    ),
    "couplings": ("g_sa", "g_ae", "sigma"),
    "evolution": ("dt", "t_max", "krylov_dim", "tol", "record_every"),
    "packet": ("center", "width", "momentum"),
}


def _coerce(key: str, spec, value):
    optional = isinstance(spec, tuple)
    if optional:
        base = spec[0]
        if value is None or (isinstance(value, str) and value.lower() in ("none", "")):
            return None
    else:
        base = spec
    try:
        if base is int:
            if isinstance(value, float) and value != int(value):
                raise ValueError
            if isinstance(value, str):
                value = value.strip()
            return int(value)
        if base is float:
            return float(value)
        if base is Boundary:
            return value if isinstance(value, Boundary) else Boundary(str(value).strip().lower())
        if base is MeasuredRegion:
            return (
                value
                if isinstance(value, MeasuredRegion)
                else MeasuredRegion(str(value).strip().lower())
            )
        if base is tuple:  # sweep: comma-separated sizes or a JSON list
            if isinstance(value, (list, tuple)):
                return tuple(int(v) for v in value)
            return tuple(int(v) for v in str(value).replace(" ", "").split(",") if v)
    except (TypeError, ValueError):
        pass
    raise ValueError(f"{key}: cannot parse {value!r} as {getattr(base, '__name__', base)}")


def _assign(config: ExperimentConfig, key: str, value) -> None:
    if key not in _SCHEMA:
        raise ValueError(f"unknown configuration key {key!r}")
    value = _coerce(key, _SCHEMA[key], value)
    if "." in key:
        section, attr = key.split(".", 1)
        setattr(getattr(config, section), attr, value)
    else:
        setattr(config, key, value)


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build a validated config from a (possibly nested) dict; strict keys."""
    config = ExperimentConfig()
    for key, value in data.items():
        if isinstance(value, dict):
            for sub, subval in value.items():
                _assign(config, f"{key}.{sub}", subval)
        else:
            _assign(config, key, value)
    config.validate()
    return config


def parse_config_text(text: str) -> ExperimentConfig:
    if text.lstrip().startswith("{"):
        return config_from_dict(json.loads(text))
    config = ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        _assign(config, key, value)
    config.validate()
    return config


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def config_to_dict(config: ExperimentConfig) -> dict:
    out = {}
    for section, fields in _SECTION_FIELDS.items():
        obj = getattr(config, section)
        out[section] = {}
        for f in fields:
            v = getattr(obj, f)
            if isinstance(v, (Boundary, MeasuredRegion)):
                v = v.value
            out[section][f] = v
    out["seed"] = config.seed
    out["n_random"] = config.n_random
    out["measured_region"] = config.measured_region.value
    out["sweep"] = None if config.sweep is None else list(config.sweep)
    out["probe_time"] = config.probe_time
    return out


def serialize_config(config: ExperimentConfig) -> str:
    """Canonical key = value text; parsing it reproduces an equal config."""
    lines = []
    data = config_to_dict(config)
    for section in sorted(_SECTION_FIELDS):
        for f in _SECTION_FIELDS[section]:
            v = data[section][f]
            lines.append(f"{section}.{f} = {'none' if v is None else v}")
    for key in ("seed", "n_random", "measured_region", "probe_time"):
        v = data[key]
        lines.append(f"{key} = {'none' if v is None else v}")
    sweep = data["sweep"]
    lines.append(f"sweep = {'none' if sweep is None else ','.join(map(str, sweep))}")
    return "\n".join(lines) + "\n"


def config_hash(config: ExperimentConfig) -> str:
    canon = json.dumps(config_to_dict(config), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def derive_seed(master: int, label: str) -> int:
    """Per-trajectory seed from the master seed and a stable label."""
    digest = hashlib.sha256(f"{master}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")
