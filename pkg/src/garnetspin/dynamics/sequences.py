"""Pulse elements, sequences with one swept parameter, and canonical templates.

Durations are in ns, Rabi frequencies and detunings in MHz (cycles per
microsecond), phases in radians. A drive of duration t rotates by
2*pi*rabi_mhz*t*1e-3 radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from ..errors import ConfigError, InputError

#: radians accumulated per MHz per ns
CYCLE = 2 * math.pi * 1e-3

SWEEPS = ("drive_ns", "delay_ns", "tau_ns", "total_ns", "cycles")
TEMPLATES = ("rabi", "fid", "hahn", "cpmg", "wahuha")

X, Y, MX, MY = 0.0, math.pi / 2, math.pi, -math.pi / 2


@dataclass(frozen=True)
class PulseElement:
    """One control segment.

    The realised duration is ``duration_ns + sweep_scale * value`` for the
    sequence's swept value. A drive with ``ideal_angle`` set and zero
    duration is an instantaneous rotation by that angle.
    """

    kind: str
    duration_ns: float = 0.0
    rabi_mhz: float = 0.0
    phase: float = 0.0
    detuning_offset_mhz: float = 0.0
    sweep_scale: float = 0.0
    ideal_angle: float | None = None

    def __post_init__(self):
        if self.kind not in ("drive", "delay"):
            raise InputError(f"unknown element kind {self.kind!r}")
        if self.kind == "delay" and (self.rabi_mhz != 0 or self.ideal_angle is not None):
            raise InputError("delay elements carry no drive")
        if self.duration_ns < 0 or self.rabi_mhz < 0:
            raise InputError("durations and Rabi frequencies must be >= 0")

    @property
    def instantaneous(self) -> bool:
        return self.ideal_angle is not None and self.duration_ns == 0 and self.sweep_scale == 0

    def resolved(self, value: float) -> "PulseElement":
        if self.sweep_scale == 0:
            return self
        d = self.duration_ns + self.sweep_scale * value
        if d < 0:
            raise ConfigError("swept value gives a negative duration")
        return replace(self, duration_ns=d, sweep_scale=0.0)


def rotation(angle: float, phase: float, rabi_mhz: float, ideal: bool) -> PulseElement:
    if ideal:
        return PulseElement("drive", rabi_mhz=rabi_mhz, phase=phase, ideal_angle=angle)
    if not rabi_mhz > 0:
        raise InputError("finite pulses need rabi_mhz > 0")
    return PulseElement("drive", duration_ns=angle / (CYCLE * rabi_mhz), rabi_mhz=rabi_mhz,
                        phase=phase)


def delay(duration_ns=0.0, sweep_scale=0.0, detuning_offset_mhz=0.0) -> PulseElement:
    return PulseElement("delay", duration_ns=duration_ns, sweep_scale=sweep_scale,
                        detuning_offset_mhz=detuning_offset_mhz)


@dataclass(frozen=True)
class PulseSequence:
    """Element list with one swept parameter.

    ``block`` marks a half-open index range repeated ``repeats`` times.
    With ``swept == "cycles"`` the repeat count is the swept value; with
    ``repeat_from_sweep`` a time sweep sets the count to value divided by
    the block's elapsed duration.
    """

    name: str
    elements: tuple = field(default_factory=tuple)
    swept: str = "delay_ns"
    readout_axis: str = "z"
    block: tuple | None = None
    repeats: int = 1
    repeat_from_sweep: bool = False

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if self.block is not None:
            object.__setattr__(self, "block", tuple(int(i) for i in self.block))
        if self.readout_axis not in ("x", "y", "z"):
            raise InputError(f"unknown readout axis {self.readout_axis!r}")
        if self.repeats < 0:
            raise InputError("repeats must be >= 0")

    def validate(self) -> None:
        if self.swept not in SWEEPS:
            raise ConfigError(f"unknown swept identifier {self.swept!r}")
        if self.block is not None:
            i, j = self.block
            if not 0 <= i < j <= len(self.elements):
                raise ConfigError("repeat block out of range")
        if self.swept == "cycles":
            if self.block is None:
                raise ConfigError("a cycles sweep needs a repeat block")
        elif not (self.repeat_from_sweep or any(e.sweep_scale for e in self.elements)):
            raise ConfigError(f"no element depends on the swept value {self.swept!r}")
        if self.repeat_from_sweep and (self.block is None or self.block_duration() <= 0):
            raise ConfigError("repeat_from_sweep needs a block of fixed duration")

    def block_duration(self) -> float:
        """Elapsed time of one pass through the repeat block, pulses included."""
        i, j = self.block
        return sum(e.duration_ns for e in self.elements[i:j])

    def repeat_count(self, value: float) -> int:
        if self.swept == "cycles":
            n = value
        elif self.repeat_from_sweep:
            n = value / self.block_duration()
        else:
            return self.repeats
        k = round(n)
        if abs(n - k) > 1e-9 * max(1.0, abs(n)) or k < 0:
            raise ConfigError(f"swept value {value!r} is not a whole number of cycles")
        return int(k)

    def expand(self, value: float) -> list[PulseElement]:
        """Concrete element list for one sweep point."""
        self.validate()
        scale_value = 0.0 if self.swept == "cycles" else float(value)
        els = [e.resolved(scale_value) for e in self.elements]
        if self.block is None:
            return els
        i, j = self.block
        return els[:i] + els[i:j] * self.repeat_count(value) + els[j:]

    def free_time(self, value: float) -> float:
        return sum(e.duration_ns for e in self.expand(value) if e.kind == "delay")

    # -- text form ---------------------------------------------------------

    def to_text(self) -> str:
        lines = [
            f"name = {self.name}",
            f"swept = {self.swept}",
            f"readout_axis = {self.readout_axis}",
            f"repeats = {self.repeats}",
            f"repeat_from_sweep = {'true' if self.repeat_from_sweep else 'false'}",
        ]
        if self.block is not None:
            lines.append(f"block = {self.block[0]} {self.block[1]}")
        for k, e in enumerate(self.elements):
            parts = [e.kind, f"duration_ns={e.duration_ns!r}"]
            if e.kind == "drive":
                parts += [f"rabi_mhz={e.rabi_mhz!r}", f"phase={e.phase!r}"]
                if e.ideal_angle is not None:
                    parts.append(f"ideal_angle={e.ideal_angle!r}")
            if e.detuning_offset_mhz:
                parts.append(f"detuning_offset_mhz={e.detuning_offset_mhz!r}")
            if e.sweep_scale:
                parts.append(f"sweep_scale={e.sweep_scale!r}")
            lines.append(f"element.{k} = " + " ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, source: str = "<sequence>") -> "PulseSequence":
        fields: dict = {}
        elements: dict[int, PulseElement] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line or line.startswith("["):
                continue
            if "=" not in line:
                raise ConfigError("expected 'key = value'", lineno, source)
            key, value = (s.strip() for s in line.split("=", 1))
            try:
                if key.startswith("element."):
                    elements[int(key.split(".", 1)[1])] = _parse_element(value)
                elif key in ("name", "swept", "readout_axis"):
                    fields[key] = value
                elif key == "repeats":
                    fields[key] = int(value)
                elif key == "repeat_from_sweep":
                    fields[key] = _parse_bool(value)
                elif key == "block":
                    fields[key] = tuple(int(v) for v in value.split())
                else:
                    raise ConfigError(f"unknown key {key!r}")
            except ConfigError as exc:
                if exc.lineno is None:
                    raise ConfigError(str(exc), lineno, source) from None
                raise
            except (ValueError, InputError) as exc:
                raise ConfigError(str(exc), lineno, source) from None
        if sorted(elements) != list(range(len(elements))):
            raise ConfigError("element indices must be 0..n-1", source=source)
        if "name" not in fields:
            raise ConfigError("sequence has no name", source=source)
        seq = cls(elements=tuple(elements[k] for k in sorted(elements)), **fields)
        seq.validate()
        return seq


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_FLOAT_FIELDS = ("duration_ns", "rabi_mhz", "phase", "detuning_offset_mhz", "sweep_scale",
                 "ideal_angle")


def _parse_element(text: str) -> PulseElement:
    kind, *rest = text.split()
    kw = {}
    for item in rest:
        if "=" not in item:
            raise ValueError(f"bad element field {item!r}")
        k, v = item.split("=", 1)
        if k not in _FLOAT_FIELDS:
            raise ValueError(f"unknown element field {k!r}")
        kw[k] = float(v)
    return PulseElement(kind, **kw)


def sequence_template(name: str, rabi_mhz: float = 50.0, *, n_pulses: int = 1,
                      tau_ns: float = 10.0, cycles: int = 1, swept: str | None = None,
                      ideal_pulses: bool = False, detuning_mhz: float = 0.0) -> PulseSequence:
    """Build a canonical sequence.

    ``swept`` picks the sweep variable; defaults are ``drive_ns`` (rabi),
    ``delay_ns`` (fid) and ``total_ns`` (hahn, cpmg, wahuha). For hahn
    and cpmg ``total_ns`` is the summed free-evolution time; for wahuha
    it is the elapsed time of the repeated cycles, pulses included, and
    must be a whole number of cycles. Hahn and cpmg can also
    sweep ``tau_ns``; wahuha can also sweep ``cycles`` or ``tau_ns``
    (with ``cycles`` fixed). ``detuning_mhz`` is a static offset applied
    to every element.
    """
    if name not in TEMPLATES:
        raise ConfigError(f"unknown sequence template {name!r}")
    ideal = ideal_pulses

    def rot(angle, phase):
        return replace(rotation(angle, phase, rabi_mhz, ideal), detuning_offset_mhz=detuning_mhz)

    def wait(duration=0.0, scale=0.0):
        return delay(duration, scale, detuning_mhz)

    half, full = math.pi / 2, math.pi

    if name == "rabi":
        if not rabi_mhz > 0:
            raise InputError("rabi sequence needs rabi_mhz > 0")
        swept = swept or "drive_ns"
        if swept != "drive_ns":
            raise ConfigError("rabi sweeps drive_ns only")
        drive = PulseElement("drive", rabi_mhz=rabi_mhz, sweep_scale=1.0,
                             detuning_offset_mhz=detuning_mhz)
        return PulseSequence("rabi", (drive,), swept)

    if name == "fid":
        swept = swept or "delay_ns"
        if swept != "delay_ns":
            raise ConfigError("fid sweeps delay_ns only")
        return PulseSequence("fid", (rot(half, X), wait(scale=1.0), rot(half, X)), swept)

    if name in ("hahn", "cpmg"):
        n = 1 if name == "hahn" else int(n_pulses)
        if n < 1:
            raise InputError("cpmg needs at least one pi pulse")
        swept = swept or "total_ns"
        if swept == "total_ns":
            s = 1.0 / (2 * n)
        elif swept == "tau_ns":
            s = 1.0
        else:
            raise ConfigError(f"{name} sweeps total_ns or tau_ns")
        body = (wait(scale=s), rot(full, Y), wait(scale=s))
        return PulseSequence(name, (rot(half, X),) + body + (rot(half, X),), swept,
                             block=(1, 4), repeats=n)

    # wahuha: tau - (-x) - tau - (y) - 2tau - (-y) - tau - (x) - tau
    swept = swept or "total_ns"
    if swept in ("total_ns", "cycles"):
        if not tau_ns > 0:
            raise InputError("wahuha needs tau_ns > 0")
        d = lambda k: wait(k * tau_ns)
    elif swept == "tau_ns":
        d = lambda k: wait(scale=float(k))
    else:
        raise ConfigError("wahuha sweeps total_ns, cycles or tau_ns")
    cycle = (d(1), rot(half, MX), d(1), rot(half, Y), d(2), rot(half, MY), d(1),
             rot(half, X), d(1))
    return PulseSequence("wahuha", (rot(half, X),) + cycle + (rot(half, X),), swept,
                         block=(1, 1 + len(cycle)), repeats=int(cycles),
                         repeat_from_sweep=(swept == "total_ns"))
