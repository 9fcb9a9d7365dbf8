"""Ce3+ site geometry in the YAG lattice and the anisotropic g-tensor.

Ce substitutes for Y on the 24 dodecahedral (c) sites of the garnet
lattice. The local D2 frames fall into six magnetically inequivalent
orientations: the local z-axis lies along one of the cubic <100>
directions and x, y lie along the two <110> directions perpendicular
to it. The two members of each pair have x and y exchanged.

Frequencies follow f = g_eff * (mu_B / h) * B with spin-1/2 operators
S = sigma / 2, fields in Gauss and frequencies in MHz.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

#: Bohr magneton over Planck constant, MHz per Gauss (CODATA).
BOHR_MHZ_PER_GAUSS = 1.3996245

_ORTHO_TOL = 1e-12
_UNIT_TOL = 1e-9


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _check_unit(direction, tol=_UNIT_TOL) -> np.ndarray:
    n = np.asarray(direction, dtype=float)
    if n.shape != (3,):
        raise InputError(f"direction must be a 3-vector, got shape {n.shape}")
    norm = np.linalg.norm(n)
    if not abs(norm - 1.0) <= tol:
        raise InputError(f"direction must be a unit vector (|n| = {norm!r})")
    return n


@dataclass(frozen=True)
class GTensor:
    """Principal values of the effective g-tensor in the site frame."""

    gx: float = 1.87
    gy: float = 0.91
    gz: float = 2.74

    def __post_init__(self):
        for name in ("gx", "gy", "gz"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be strictly positive")

    @property
    def principal(self) -> np.ndarray:
        return np.array([self.gx, self.gy, self.gz])


@dataclass(frozen=True)
class SiteFrame:
    site_id: int
    x_axis: np.ndarray = field(repr=False)
    y_axis: np.ndarray = field(repr=False)
    z_axis: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 1 <= self.site_id <= 6:
            raise InputError("site_id must be in 1..6")
        R = self.rotation
        if np.max(np.abs(R.T @ R - np.eye(3))) > _ORTHO_TOL:
            raise InputError("site axes are not orthonormal")
        if np.max(np.abs(np.cross(self.x_axis, self.y_axis) - self.z_axis)) > _ORTHO_TOL:
            raise InputError("site frame is not right-handed")

    @property
    def rotation(self) -> np.ndarray:
        """Matrix whose columns are the frame axes in crystal coordinates."""
        return np.column_stack([self.x_axis, self.y_axis, self.z_axis])

    def direction_cosines(self, direction) -> np.ndarray:
        return self.rotation.T @ np.asarray(direction, dtype=float)


@dataclass(frozen=True)
class FieldSpec:
    """Static field: magnitude in Gauss along a unit crystal direction."""

    magnitude: float
    direction: np.ndarray

    def __post_init__(self):
        if not self.magnitude >= 0:
            raise InputError("field magnitude must be >= 0 Gauss")
        n = np.asarray(self.direction, dtype=float)
        if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > _ORTHO_TOL:
            raise InputError("field direction must be a unit 3-vector")
        object.__setattr__(self, "direction", n)

    @classmethod
    def along(cls, magnitude: float, vector) -> "FieldSpec":
        """Build from an arbitrary (non-zero) direction vector, e.g. ``[1, 1, 0]``."""
        v = np.asarray(vector, dtype=float)
        if v.shape != (3,) or not np.linalg.norm(v) > 0:
            raise InputError("field direction must be a non-zero 3-vector")
        return cls(float(magnitude), _unit(v))


def _frame(site_id, x, y) -> SiteFrame:
    x, y = _unit(x), _unit(y)
    return SiteFrame(site_id, x, y, np.cross(x, y))


def site_frames() -> list[SiteFrame]:
    """The six inequivalent D2 frames, numbered so site 1 has x || [110]."""
    return [
        _frame(1, [1, 1, 0], [-1, 1, 0]),
        _frame(2, [-1, 1, 0], [1, 1, 0]),
        _frame(3, [0, 1, 1], [0, -1, 1]),
        _frame(4, [0, -1, 1], [0, 1, 1]),
        _frame(5, [1, 0, 1], [1, 0, -1]),
        _frame(6, [1, 0, -1], [1, 0, 1]),
    ]


def effective_g(frame: SiteFrame, g: GTensor, direction) -> float:
    """Effective g-factor of a site for a unit field direction (crystal axes)."""
    n = _check_unit(direction)
    c = frame.direction_cosines(n)
    return float(np.sqrt(np.sum((g.principal * c) ** 2)))


def lab_g_matrix(frame: SiteFrame, g: GTensor) -> np.ndarray:
    R = frame.rotation
    return R @ np.diag(g.principal) @ R.T
