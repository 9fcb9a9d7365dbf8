"""The sampled-curve exchange type and its CSV dialect.

CSV layout (bit-exact, used by golden-file tests)::

    # key=value          metadata, one per line
    # config.<section>.<key>=value   resolved run configuration
    x_label,y_label[,extra...]
    1.0,0.5
    ...

Numbers are written with ``repr`` so a value read back is bit-identical.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import InputError


def fmt(value) -> str:
    """Shortest round-trip text for a number."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


@dataclass
class Signal:
    """Sampled (x, y) curve with axis metadata and optional extra columns.

    ``extras`` holds further columns of the same length written after y
    (standard errors, analytic references, fit weights).
    """

    x: np.ndarray
    y: np.ndarray
    metadata: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 1 or self.x.shape != self.y.shape:
            raise InputError("x and y must be 1-D arrays of equal length")
        if len(self.x) < 2:
            raise InputError("a Signal needs at least two samples")
        if not np.all(np.diff(self.x) > 0):
            raise InputError("Signal x must be strictly increasing")
        self.extras = {k: np.asarray(v, dtype=float) for k, v in self.extras.items()}
        for k, v in self.extras.items():
            if v.shape != self.x.shape:
                raise InputError(f"extra column {k!r} has the wrong length")
        self.metadata = dict(self.metadata)
        self.metadata.setdefault("x_label", "x")
        self.metadata.setdefault("y_label", "y")

    @property
    def x_label(self) -> str:
        return str(self.metadata["x_label"])

    @property
    def y_label(self) -> str:
        return str(self.metadata["y_label"])

    def __len__(self):
        return len(self.x)


def header_lines(metadata: Mapping, provenance: Mapping | None = None) -> list[str]:
    lines = []
    for key, value in metadata.items():
        if key in ("x_label", "y_label"):
            continue
        lines.append(f"# {key}={value if isinstance(value, str) else fmt(value)}")
    if provenance:
        for section, entries in provenance.items():
            for key, value in entries.items():
                lines.append(f"# config.{section}.{key}={value}")
    return lines


def write_table(columns: Mapping[str, np.ndarray], metadata: Mapping | None = None,
                provenance: Mapping | None = None) -> str:
    """Render named columns as the package CSV dialect."""
    names = list(columns)
    data = [np.asarray(columns[n]) for n in names]
    out = io.StringIO()
    for line in header_lines(metadata or {}, provenance):
        out.write(line + "\n")
    out.write(",".join(names) + "\n")
    for row in zip(*data):
        out.write(",".join(fmt(v) for v in row) + "\n")
    return out.getvalue()


def signal_to_csv(signal: Signal, provenance: Mapping | None = None) -> str:
    columns = {signal.x_label: signal.x, signal.y_label: signal.y}
    for name, col in signal.extras.items():
        columns[name] = col
    return write_table(columns, signal.metadata, provenance)


def write_signal(signal: Signal, path, provenance: Mapping | None = None) -> None:
    Path(path).write_text(signal_to_csv(signal, provenance))


def parse_table(text: str, source: str = "<csv>"):
    """Parse the CSV dialect into (metadata, provenance_lines, names, array).

    ``provenance_lines`` are ``(lineno, section, key, value)`` tuples.
    Malformed input raises :class:`InputError` naming the offending line.
    """
    metadata: dict[str, str] = {}
    provenance = []
    names = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if names is not None:
                raise InputError(f"{source}:{lineno}: comment after the column header")
            body = line[1:].strip()
            if "=" not in body:
                continue
            key, value = (s.strip() for s in body.split("=", 1))
            if key.startswith("config."):
                parts = key.split(".", 2)
                if len(parts) != 3 or not parts[1] or not parts[2]:
                    raise InputError(f"{source}:{lineno}: malformed provenance key {key!r}")
                provenance.append((lineno, parts[1], parts[2], value))
            else:
                metadata[key] = value
            continue
        cells = [c.strip() for c in line.split(",")]
        if names is None:
            names = cells
            if len(set(names)) != len(names) or any(not n for n in names):
                raise InputError(f"{source}:{lineno}: bad column header")
            continue
        if len(cells) != len(names):
            raise InputError(
                f"{source}:{lineno}: expected {len(names)} fields, found {len(cells)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise InputError(f"{source}:{lineno}: non-numeric field") from None
    if names is None:
        raise InputError(f"{source}: no column header found")
    data = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return metadata, provenance, names, data


def read_signal(path_or_text, source: str | None = None) -> Signal:
    """Read a Signal; first column is x, second is y, the rest become extras."""
    if isinstance(path_or_text, Path) or (
            isinstance(path_or_text, str) and "\n" not in path_or_text):
        path = Path(path_or_text)
        text = path.read_text()
        source = source or str(path)
    else:
        text = path_or_text
        source = source or "<csv>"
    metadata, _, names, data = parse_table(text, source)
    if len(names) < 2:
        raise InputError(f"{source}: a signal needs at least two columns")
    metadata = dict(metadata, x_label=names[0], y_label=names[1])
    extras = {n: data[:, i] for i, n in enumerate(names[2:], start=2)}
    try:
        return Signal(data[:, 0], data[:, 1], metadata, extras)
    except InputError as exc:
        raise InputError(f"{source}: {exc}") from None
