"""Site-resolved transition frequencies, CW-ODMR spectra and Zeeman fans."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .crystal import BOHR_MHZ_PER_GAUSS, FieldSpec, GTensor, effective_g, site_frames
from .errors import InputError
from .signals import Signal


@dataclass(frozen=True)
class ResonanceLine:
    site_id: int
    frequency: float  # MHz
    weight: float = 1.0

    def __post_init__(self):
        if not self.frequency >= 0:
            raise InputError("frequency must be >= 0")
        if not self.weight >= 0:
            raise InputError("weight must be >= 0")


@dataclass(frozen=True)
class LineShape:
    """Unit-area lineshape; ``fwhm`` in MHz."""

    kind: str = "lorentzian"
    fwhm: float = 20.0

    def __post_init__(self):
        if self.kind not in ("lorentzian", "gaussian"):
            raise InputError(f"unknown lineshape {self.kind!r}")
        if not self.fwhm > 0:
            raise InputError("fwhm must be > 0")

    def __call__(self, df):
        df = np.asarray(df, dtype=float)
        if self.kind == "lorentzian":
            hw = self.fwhm / 2
            return (hw / np.pi) / (df**2 + hw**2)
        s = self.fwhm / (2 * np.sqrt(2 * np.log(2)))
        return np.exp(-0.5 * (df / s) ** 2) / (s * np.sqrt(2 * np.pi))


def transition_frequencies(field: FieldSpec, g: GTensor = GTensor(),
                           weights=None) -> list[ResonanceLine]:
    """Transition frequency of every site, f = g_eff * mu_B/h * B."""
    frames = site_frames()
    if weights is None:
        weights = [1.0] * len(frames)
    if len(weights) != len(frames):
        raise InputError("need one weight per site")
    scale = BOHR_MHZ_PER_GAUSS * field.magnitude
    return [
        ResonanceLine(fr.site_id, effective_g(fr, g, field.direction) * scale, float(w))
        for fr, w in zip(frames, weights)
    ]


def group_lines(lines, rtol=1e-9, atol=1e-9) -> list[tuple[float, list[int]]]:
    """Merge coincident lines into (frequency, [site ids]) sorted by frequency."""
    groups: list[tuple[float, list[int]]] = []
    for line in sorted(lines, key=lambda l: l.frequency):
        if groups and abs(line.frequency - groups[-1][0]) <= atol + rtol * line.frequency:
            groups[-1][1].append(line.site_id)
        else:
            groups.append((line.frequency, [line.site_id]))
    return groups


def _raw_spectrum(lines, shape, f):
    f = np.asarray(f, dtype=float)
    y = np.zeros_like(f)
    for line in lines:
        y += line.weight * shape(f - line.frequency)
    return y


def _peak_value(lines, shape) -> float:
    # Max of a sum of unimodal profiles lies within one fwhm of some line centre.
    best = 0.0
    for line in lines:
        if line.weight == 0:
            continue
        c = line.frequency
        res = minimize_scalar(lambda f: -_raw_spectrum(lines, shape, [f])[0],
                              bounds=(c - shape.fwhm, c + shape.fwhm), method="bounded",
                              options={"xatol": 1e-9 * max(1.0, shape.fwhm)})
        best = max(best, -float(res.fun), float(_raw_spectrum(lines, shape, [c])[0]))
    return best


def odmr_spectrum(field: FieldSpec, g: GTensor = GTensor(), shape: LineShape = LineShape(),
                  f_grid=None, weights=None) -> Signal:
    """Sum of site lineshapes on ``f_grid`` (MHz), scaled so the spectrum's peak is 1.

    The normalisation uses the maximum of the continuous spectrum, so a grid
    that misses every line yields values near zero rather than being
    stretched up to unity.
    """
    if f_grid is None or len(f_grid) == 0:
        raise InputError("frequency grid is empty")
    f = np.asarray(f_grid, dtype=float)
    if len(f) > 1 and not np.all(np.diff(f) > 0):
        raise InputError("frequency grid must be strictly increasing")
    lines = transition_frequencies(field, g, weights)
    peak = _peak_value(lines, shape)
    if peak <= 0:
        raise InputError("all site weights are zero")
    y = _raw_spectrum(lines, shape, f) / peak
    meta = {
        "x_label": "frequency_mhz",
        "y_label": "odmr",
        "field_gauss": field.magnitude,
        "direction": " ".join(repr(float(v)) for v in field.direction),
        "g_principal": " ".join(repr(float(v)) for v in g.principal),
        "lineshape": shape.kind,
        "fwhm_mhz": shape.fwhm,
        "normalization": peak,
    }
    return Signal(f, y, meta)


@dataclass(frozen=True)
class ZeemanFan:
    """Per-site transition frequency (MHz) against field magnitude (Gauss).

    ``frequencies`` has shape (6, len(b)); row i belongs to site i + 1.
    """

    direction: np.ndarray
    b: np.ndarray
    frequencies: np.ndarray
    slopes: np.ndarray  # MHz per Gauss

    def signals(self) -> list[Signal]:
        return [
            Signal(self.b, row, {"x_label": "field_gauss", "y_label": f"site{i + 1}_mhz"})
            for i, row in enumerate(self.frequencies)
        ]


def zeeman_sweep(direction, g: GTensor = GTensor(), b_grid=None) -> ZeemanFan:
    b = np.asarray(b_grid, dtype=float)
    if b.ndim != 1 or len(b) == 0:
        raise InputError("field grid is empty")
    if np.any(b < 0) or not np.all(np.diff(b) > 0):
        raise InputError("field grid must be strictly increasing and >= 0")
    n = np.asarray(direction, dtype=float)
    slopes = np.array([effective_g(fr, g, n) * BOHR_MHZ_PER_GAUSS for fr in site_frames()])
    return ZeemanFan(n, b, slopes[:, None] * b[None, :], slopes)
