"""Run configuration: ``[section]`` headers and ``key = value`` lines.

Physical quantities carry their unit in the key name. Unknown sections
and keys are errors, as are duplicates; every error names its line.
Values are typed by the schema below, and the resolved configuration
(defaults filled in) renders back to text that parses to the same thing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .dynamics.calibration import CALIBRATED_NOISE
from .errors import ConfigError
from .signals import fmt


class _Kind:
    name = "value"

    def parse(self, text: str):
        raise NotImplementedError

    def render(self, value) -> str:
        return fmt(value)


class Float(_Kind):
    name = "number"

    def __init__(self, lo=-math.inf, hi=math.inf, lo_open=False, allow_inf=False):
        self.lo, self.hi, self.lo_open, self.allow_inf = lo, hi, lo_open, allow_inf

    def parse(self, text):
        v = float(text)
        if math.isnan(v) or (math.isinf(v) and not self.allow_inf):
            raise ValueError(f"{text!r} is not a finite number")
        if v < self.lo or v > self.hi or (self.lo_open and v == self.lo):
            lo = "(" if self.lo_open else "["
            raise ValueError(f"{text} outside {lo}{self.lo}, {self.hi}]")
        return v


class Int(_Kind):
    name = "integer"

    def __init__(self, lo=None, hi=None):
        self.lo, self.hi = lo, hi

    def parse(self, text):
        v = int(text)
        if (self.lo is not None and v < self.lo) or (self.hi is not None and v > self.hi):
            raise ValueError(f"{v} outside [{self.lo}, {self.hi}]")
        return v


class Bool(_Kind):
    name = "boolean"

    def parse(self, text):
        t = text.lower()
        if t in ("true", "yes", "1"):
            return True
        if t in ("false", "no", "0"):
            return False
        raise ValueError(f"{text!r} is not true/false")


class Choice(_Kind):
    def __init__(self, *options):
        self.options = options
        self.name = "one of " + "|".join(options)

    def parse(self, text):
        if text not in self.options:
            raise ValueError(f"{text!r} is not {self.name}")
        return text

    def render(self, value):
        return value


class Text(_Kind):
    name = "text"

    def parse(self, text):
        return text

    def render(self, value):
        return value


class Vector(_Kind):
    """Whitespace-separated numbers; ``length`` fixes the count."""

    def __init__(self, length=None, nonneg=False):
        self.length, self.nonneg = length, nonneg
        self.name = f"{length} numbers" if length else "a list of numbers"

    def parse(self, text):
        v = tuple(float(s) for s in text.replace(",", " ").split())
        if self.length is not None and len(v) != self.length:
            raise ValueError(f"expected {self.length} numbers, got {len(v)}")
        if not all(math.isfinite(x) for x in v):
            raise ValueError("numbers must be finite")
        if self.nonneg and any(x < 0 for x in v):
            raise ValueError("numbers must be >= 0")
        return v

    def render(self, value):
        return " ".join(fmt(x) for x in value)


_SEQUENCE_KEYS = {
    "sequence": (Choice("rabi", "fid", "hahn", "cpmg", "wahuha"), "hahn"),
    "swept": (Choice("default", "drive_ns", "delay_ns", "tau_ns", "total_ns", "cycles"), "default"),
    "rabi_mhz": (Float(0, lo_open=True), 50.0),
    "n_pulses": (Int(1), 1),
    "tau_ns": (Float(0, lo_open=True), 10.0),
    "cycles": (Int(0), 1),
    "ideal_pulses": (Bool(), False),
    "detuning_mhz": (Float(), 0.0),
    # sweep bounds are in the unit of the swept identifier
    "sweep_start": (Float(0), 0.0),
    "sweep_stop": (Float(0), 800.0),
    "sweep_points": (Int(1), 81),
}

SCHEMA: dict[str, dict[str, tuple]] = {
    "run": {
        "seed": (Int(0), None),
        "threads": (Int(1), 1),
    },
    "crystal": {
        "gx": (Float(0, lo_open=True), 1.87),
        "gy": (Float(0, lo_open=True), 0.91),
        "gz": (Float(0, lo_open=True), 2.74),
    },
    "spectrum": {
        "field_gauss": (Float(0), 310.0),
        "direction": (Vector(3), (1.0, 1.0, 0.0)),
        "lineshape": (Choice("lorentzian", "gaussian"), "lorentzian"),
        "fwhm_mhz": (Float(0, lo_open=True), 20.0),
        "f_start_mhz": (Float(), 200.0),
        "f_stop_mhz": (Float(), 1200.0),
        "f_points": (Int(1), 1001),
        "weights": (Vector(6, nonneg=True), (1.0,) * 6),
    },
    "zeeman": {
        "direction": (Vector(3), (1.0, 1.0, 0.0)),
        "b_start_gauss": (Float(0), 0.0),
        "b_stop_gauss": (Float(0), 400.0),
        "b_points": (Int(1), 81),
    },
    "pump": {
        "branching_ratio": (Float(1, lo_open=True), 1331.0),
        "excitation_prob": (Float(0, 1, lo_open=True), 0.03),
        "sigma_plus_fraction": (Float(0.5, 1), 1.0),
        "thermal_polarization": (Float(-1, 1), 0.0),
        "n_pulses": (Int(1), 500),
    },
    "simulate": {
        **_SEQUENCE_KEYS,
        "readout_axis": (Choice("z", "x", "y"), "z"),
        "noise": (Choice("none", "quasi_static_gaussian", "ornstein_uhlenbeck"), "ornstein_uhlenbeck"),
        "sigma_mhz": (Float(0), CALIBRATED_NOISE.sigma_mhz),
        "tau_c_ns": (Float(0, lo_open=True, allow_inf=True), CALIBRATED_NOISE.tau_c_ns),
        "t1_ns": (Float(0, lo_open=True, allow_inf=True), CALIBRATED_NOISE.t1_ns),
        "n_trajectories": (Int(1), 2000),
    },
    "cluster": {
        **_SEQUENCE_KEYS,
        "sequence": (Choice("fid", "hahn", "cpmg", "wahuha"), "wahuha"),
        "sweep_stop": (Float(0), 800.0),
        "sweep_points": (Int(1), 11),
        "source": (Choice("sampled", "file"), "sampled"),
        "cluster_file": (Text(), ""),
        "concentration": (Float(0, 1, lo_open=True), 0.001),
        "n_spins": (Int(2), 5),
        "n_configs": (Int(1), 1),
        "max_coupling_mhz": (Float(0), 0.0),
        "field_gauss": (Float(0), 310.0),
        "direction": (Vector(3), (1.0, 1.0, 0.0)),
    },
    "fit": {
        "input": (Text(), ""),
        "model": (Choice("exp_cosine", "gaussian_decay", "exp_decay", "stretched_exp"),
                  "gaussian_decay"),
        "guess_A": (Float(), None),
        "guess_c": (Float(), None),
        "guess_tau_ns": (Float(0, lo_open=True), None),
        "guess_f_mhz": (Float(), None),
        "guess_phi_rad": (Float(), None),
        "guess_p": (Float(0.5, 4), None),
        "fixed": (Text(), ""),
        "max_iter": (Int(1), 500),
    },
}

#: Sections each command reads, in provenance order.
COMMAND_SECTIONS = {
    "spectrum": ("run", "crystal", "spectrum"),
    "zeeman": ("run", "crystal", "zeeman"),
    "pump": ("run", "pump"),
    "simulate": ("run", "simulate"),
    "cluster": ("run", "crystal", "cluster"),
    "fit": ("run", "fit"),
}


@dataclass
class RunConfig:
    """Parsed values by section; absent keys fall back to the schema default."""

    values: dict = field(default_factory=dict)
    source: str = "<config>"

    def get(self, section: str, key: str):
        if key not in SCHEMA[section]:
            raise KeyError(f"{section}.{key}")
        return self.values.get(section, {}).get(key, SCHEMA[section][key][1])

    def section(self, name: str) -> dict:
        return {k: self.get(name, k) for k in SCHEMA[name]}

    def set(self, section: str, key: str, value) -> None:
        self.values.setdefault(section, {})[key] = value

    def resolved(self, sections) -> dict[str, dict[str, str]]:
        """Text form of every key with a value, for provenance headers."""
        out = {}
        for name in sections:
            entries = {}
            for key, (kind, _) in SCHEMA[name].items():
                value = self.get(name, key)
                if value is None:
                    continue
                entries[key] = kind.render(value)
            out[name] = entries
        return out

    def to_text(self, sections=None) -> str:
        sections = sections or [s for s in SCHEMA if s in self.values]
        lines = []
        for name, entries in self.resolved(sections).items():
            lines.append(f"[{name}]")
            lines += [f"{k} = {v}" for k, v in entries.items()]
            lines.append("")
        return "\n".join(lines)

    def same_as(self, other: "RunConfig", sections) -> bool:
        return self.resolved(sections) == other.resolved(sections)


def _parse_value(section, key, text, lineno, source):
    if section not in SCHEMA:
        raise ConfigError(f"unknown section [{section}]", lineno, source)
    if key not in SCHEMA[section]:
        raise ConfigError(f"unknown key {key!r} in [{section}]", lineno, source)
    kind = SCHEMA[section][key][0]
    try:
        return kind.parse(text)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: {exc} (expected {kind.name})", lineno, source) from None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cfg = RunConfig(source=source)
    section = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"malformed section header {line!r}", lineno, source)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno, source)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno, source)
        if section is None:
            raise ConfigError("key outside any [section]", lineno, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if (section, key) in seen:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno, source)
        seen.add((section, key))
        cfg.set(section, key, _parse_value(section, key, value, lineno, source))
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


def config_from_provenance(entries, source: str = "<csv>") -> RunConfig:
    """Rebuild a RunConfig from ``(lineno, section, key, value)`` header entries."""
    cfg = RunConfig(source=source)
    for lineno, section, key, value in entries:
        cfg.set(section, key, _parse_value(section, key, value, lineno, source))
    return cfg
