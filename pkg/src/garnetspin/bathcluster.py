"""Exact dynamics of a probe Ce spin in a small cluster of like Ce spins.

Spin 0 is the probe. In frequency units the Hamiltonian is

    H/h = sum_i (d_i / 2) Z_i
          + sum_{i<j} (b_ij / 4) (2 Z_i Z_j - X_i X_j - Y_i Y_j)

with b_ij = D (1 - 3 cos^2 theta_ij) / r_ij^3, the secular coupling of
like spins. Pulses are global: every spin in the cluster is rotated,
because bath and probe share the transition frequency.

Basis states are bit strings with spin 0 as the most significant bit;
bit value 0 is |up>.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import constants

from .crystal import FieldSpec, GTensor, effective_g, site_frames
from .errors import ConfigError, InputError
from .signals import Signal, fmt
from .dynamics.propagation import ideal_rotation
from .dynamics.sequences import CYCLE, PulseSequence

MAX_SPINS = 9

#: YAG cubic lattice constant, nm
YAG_LATTICE_NM = 1.2005

# 24c (dodecahedral) positions of Ia-3d in fractions of the cubic cell
_C_SITES = np.array([
    [1 / 8, 0, 1 / 4], [3 / 8, 0, 3 / 4], [1 / 4, 1 / 8, 0], [3 / 4, 3 / 8, 0],
    [0, 1 / 4, 1 / 8], [0, 3 / 4, 3 / 8], [7 / 8, 0, 3 / 4], [5 / 8, 0, 1 / 4],
    [3 / 4, 7 / 8, 0], [1 / 4, 5 / 8, 0], [0, 3 / 4, 7 / 8], [0, 1 / 4, 5 / 8],
])
DODECAHEDRAL_SITES = np.vstack([_C_SITES, (_C_SITES + 0.5) % 1.0])


def dipolar_prefactor(g_eff: float) -> float:
    """D in MHz nm^3 for spin-1/2 partners with effective g ``g_eff``.

    (mu0 / 4 pi) g^2 mu_B^2 / h, halved for the sigma-operator form above.
    """
    d = constants.mu_0 / (4 * math.pi) * (g_eff * constants.physical_constants["Bohr magneton"][0]) ** 2
    return d / constants.h / 2 * 1e27 / 1e6


def dipolar_coupling(prefactor: float, r_vec, direction) -> float:
    r_vec = np.asarray(r_vec, dtype=float)
    r = np.linalg.norm(r_vec)
    cos = float(np.dot(r_vec, direction)) / r
    return prefactor * (1 - 3 * cos * cos) / r**3


@dataclass(frozen=True)
class ClusterSpec:
    couplings: np.ndarray
    detunings: np.ndarray = None
    positions: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        b = np.array(self.couplings, dtype=float)
        n = b.shape[0] if b.ndim == 2 else 0
        if b.ndim != 2 or b.shape != (n, n):
            raise InputError("couplings must be a square matrix")
        if not 2 <= n <= MAX_SPINS:
            raise InputError(f"cluster size must be 2..{MAX_SPINS}, got {n}")
        if np.any(np.diag(b) != 0) or np.any(b != b.T):
            raise InputError("couplings must be symmetric with zero diagonal")
        d = np.zeros(n) if self.detunings is None else np.array(self.detunings, dtype=float)
        if d.shape != (n,):
            raise InputError("need one detuning per spin")
        b.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "couplings", b)
        object.__setattr__(self, "detunings", d)

    @property
    def n_spins(self) -> int:
        return self.couplings.shape[0]

    @property
    def dim(self) -> int:
        return 2**self.n_spins

    def scaled(self, factor: float) -> "ClusterSpec":
        return ClusterSpec(self.couplings * factor, self.detunings, self.positions)

    def to_text(self) -> str:
        lines = [f"n_spins = {self.n_spins}",
                 "detunings_mhz = " + " ".join(fmt(v) for v in self.detunings)]
        for i, row in enumerate(self.couplings):
            lines.append(f"coupling.{i} = " + " ".join(fmt(v) for v in row))
        if self.positions is not None:
            for i, p in enumerate(self.positions):
                lines.append(f"position_nm.{i} = " + " ".join(fmt(v) for v in p))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, source: str = "<cluster>") -> "ClusterSpec":
        n = None
        det = None
        rows: dict[int, list[float]] = {}
        pos: dict[int, list[float]] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("expected 'key = value'", lineno, source)
            key, value = (s.strip() for s in line.split("=", 1))
            try:
                nums = [float(v) for v in value.split()]
                if key == "n_spins":
                    n = int(value)
                elif key == "detunings_mhz":
                    det = nums
                elif key.startswith("coupling."):
                    rows[int(key.split(".", 1)[1])] = nums
                elif key.startswith("position_nm."):
                    pos[int(key.split(".", 1)[1])] = nums
                else:
                    raise ConfigError(f"unknown key {key!r}", lineno, source)
            except ValueError as exc:
                raise ConfigError(str(exc), lineno, source) from None
        if n is None or sorted(rows) != list(range(n)):
            raise ConfigError("need n_spins and one coupling row per spin", source=source)
        if n > MAX_SPINS:
            raise ConfigError(f"cluster size {n} exceeds the {MAX_SPINS}-spin cap", source=source)
        try:
            return cls(np.array([rows[i] for i in range(n)]), det,
                       np.array([pos[i] for i in range(n)]) if pos else None)
        except InputError as exc:
            raise ConfigError(str(exc), source=source) from None


# -- geometry sampling ------------------------------------------------------

@lru_cache(maxsize=4)
def _shells(radius_nm: float):
    """Dodecahedral sites within ``radius_nm`` of a site at the origin, by distance."""
    a = YAG_LATTICE_NM
    m = int(math.ceil(radius_nm / a)) + 1
    cells = np.array([(i, j, k) for i in range(-m, m + 1) for j in range(-m, m + 1)
                      for k in range(-m, m + 1)], dtype=float)
    pts = (cells[:, None, :] + DODECAHEDRAL_SITES[None, :, :]).reshape(-1, 3) * a
    pts -= DODECAHEDRAL_SITES[0] * a
    r = np.linalg.norm(pts, axis=1)
    keep = (r > 1e-9) & (r <= radius_nm)
    pts, r = pts[keep], r[keep]
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0], np.round(r, 9)))
    pts, r = pts[order], r[order]
    shell_id = np.cumsum(np.concatenate([[0], np.diff(np.round(r, 9)) > 0]))
    return pts, r, shell_id


def site_density() -> float:
    """Dodecahedral sites per nm^3."""
    return len(DODECAHEDRAL_SITES) / YAG_LATTICE_NM**3


def cluster_radius(concentration: float, n_spins: int) -> float:
    """Radius (nm) whose sphere holds n_spins - 1 Ce ions on average."""
    return (3 * (n_spins - 1) / (4 * math.pi * site_density() * concentration)) ** (1 / 3)


def coupling_prefactor(field: FieldSpec, g: GTensor) -> float:
    frame = site_frames()[1]
    return dipolar_prefactor(effective_g(frame, g, field.direction))


def sample_cluster(concentration: float, n_spins: int, rng_seed: int, field: FieldSpec,
                   g: GTensor = GTensor()) -> ClusterSpec:
    """Random cluster: the probe at the origin, bath ions on lattice sites nearby.

    Bath ions are drawn uniformly without replacement from the
    dodecahedral sites inside :func:`cluster_radius`.
    """
    if not 0 < concentration < 1:
        raise InputError("concentration must be in (0, 1)")
    if not 2 <= n_spins <= MAX_SPINS:
        raise InputError(f"cluster size must be 2..{MAX_SPINS}")
    radius = cluster_radius(concentration, n_spins)
    pts, _, _ = _shells(round(max(radius, 1.0), 6))
    if len(pts) < n_spins - 1:
        raise InputError("cluster radius holds too few lattice sites")
    rng = np.random.default_rng(rng_seed)
    chosen = pts[rng.choice(len(pts), n_spins - 1, replace=False)]
    positions = np.vstack([np.zeros(3), chosen])
    D = coupling_prefactor(field, g)
    b = np.zeros((n_spins, n_spins))
    for i in range(n_spins):
        for j in range(i + 1, n_spins):
            b[i, j] = b[j, i] = dipolar_coupling(D, positions[j] - positions[i], field.direction)
    return ClusterSpec(b, np.zeros(n_spins), positions)


def nearest_neighbor_couplings(concentration: float, n_samples: int, rng_seed: int,
                               field: FieldSpec, g: GTensor = GTensor()) -> np.ndarray:
    """Coupling (MHz) of a Ce ion to its nearest Ce neighbour, sampled.

    Sites are occupied independently with probability ``concentration``;
    the nearest occupied site falls in shell k with the geometric law, and
    is uniform among the sites of that shell.
    """
    if not 0 < concentration < 1:
        raise InputError("concentration must be in (0, 1)")
    radius = (40 / (4 / 3 * math.pi * site_density() * concentration)) ** (1 / 3)
    pts, _, shell_id = _shells(round(radius, 6))
    starts = np.searchsorted(shell_id, np.arange(shell_id[-1] + 1))
    ends = np.append(starts[1:], len(shell_id))
    rng = np.random.default_rng(rng_seed)
    D = coupling_prefactor(field, g)
    out = np.empty(n_samples)
    for s in range(n_samples):
        k = rng.geometric(concentration) - 1
        while k >= len(pts):
            k = rng.geometric(concentration) - 1
        sh = shell_id[k]
        idx = rng.integers(starts[sh], ends[sh])
        out[s] = dipolar_coupling(D, pts[idx], field.direction)
    return out


# -- exact evolution ----------------------------------------------------------

def _bits(n):
    idx = np.arange(2**n)
    return (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1


def cluster_hamiltonian(spec: ClusterSpec, extra_detuning: float = 0.0, rabi_mhz: float = 0.0,
                        phase: float = 0.0) -> np.ndarray:
    """Dense H/h in MHz, optionally with a global drive and common detuning."""
    n, dim = spec.n_spins, spec.dim
    bits = _bits(n)
    z = 1 - 2 * bits  # +1 for up
    diag = 0.5 * (z @ (spec.detunings + extra_detuning))
    H = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(dim)
    for i in range(n):
        for j in range(i + 1, n):
            b = spec.couplings[i, j]
            if b == 0:
                continue
            diag = diag + 0.5 * b * z[:, i] * z[:, j]
            differ = bits[:, i] != bits[:, j]
            partner = idx ^ ((1 << (n - 1 - i)) | (1 << (n - 1 - j)))
            H[partner[differ], idx[differ]] += -0.5 * b
    if rabi_mhz:
        for i in range(n):
            flipped = idx ^ (1 << (n - 1 - i))
            amp = np.where(bits[:, i] == 0, np.exp(1j * phase), np.exp(-1j * phase))
            H[flipped, idx] += 0.5 * rabi_mhz * amp
    H[idx, idx] += diag
    return H


def _propagator(H, duration_ns):
    E, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * CYCLE * E * duration_ns)) @ V.conj().T


def global_rotation(n: int, angle: float, phase: float) -> np.ndarray:
    R = ideal_rotation(angle, phase)
    U = np.ones((1, 1), dtype=complex)
    for _ in range(n):
        U = np.kron(U, R)
    return U


def evolve_cluster(state, spec: ClusterSpec, duration: float):
    """Free evolution for ``duration`` ns; ``state`` is a vector or a matrix of columns."""
    if duration < 0:
        raise InputError("duration must be >= 0")
    psi = np.asarray(state, dtype=complex)
    if psi.shape[0] != spec.dim:
        raise InputError(f"state dimension {psi.shape[0]} does not match cluster dimension {spec.dim}")
    return _propagator(cluster_hamiltonian(spec), duration) @ psi


class _Propagators:
    """Cache of element propagators for one cluster."""

    def __init__(self, spec: ClusterSpec):
        self.spec = spec
        self.cache: dict = {}

    def __call__(self, e):
        key = (e.kind, e.duration_ns, e.rabi_mhz, e.phase, e.detuning_offset_mhz, e.ideal_angle)
        U = self.cache.get(key)
        if U is None:
            if e.instantaneous:
                U = global_rotation(self.spec.n_spins, e.ideal_angle, e.phase)
            elif e.duration_ns == 0:
                U = np.eye(self.spec.dim, dtype=complex)
            else:
                H = cluster_hamiltonian(self.spec, e.detuning_offset_mhz,
                                        e.rabi_mhz if e.kind == "drive" else 0.0, e.phase)
                U = _propagator(H, e.duration_ns)
            self.cache[key] = U
        return U


def probe_coherence(spec: ClusterSpec, elements, props: _Propagators | None = None) -> float:
    """2 P_down(probe) - 1 after ``elements``, exactly averaged over the bath.

    The bath starts in the infinite-temperature state: every z-basis bath
    configuration with equal weight. The probe starts in |up>.
    """
    props = props or _Propagators(spec)
    half = spec.dim // 2
    psi = np.eye(spec.dim, half, dtype=complex)
    U = np.eye(spec.dim, dtype=complex)
    for e in elements:
        U = props(e) @ U
    psi = U @ psi
    p_down = float(np.sum(np.abs(psi[half:, :]) ** 2)) / half
    return 2 * p_down - 1


def _check_readout(seq: PulseSequence):
    if seq.readout_axis != "z":
        raise InputError("cluster signals read out the probe along z only")


@dataclass(frozen=True)
class ClusterSampler:
    """Recipe for random cluster geometries."""

    concentration: float
    n_spins: int
    field: FieldSpec
    g: GTensor = GTensor()
    max_coupling_mhz: float | None = None

    def draw(self, seed) -> ClusterSpec:
        spec = sample_cluster(self.concentration, self.n_spins, seed, self.field, self.g)
        if self.max_coupling_mhz:
            spec = spec.scaled(self.max_coupling_mhz / np.max(np.abs(spec.couplings)))
        return spec


def cluster_dd_signal(spec, seq: PulseSequence, sweep_grid, n_configs: int = 1,
                      rng_seed: int = 0, threads: int = 1) -> Signal:
    """Probe coherence against the swept value.

    ``spec`` is a fixed :class:`ClusterSpec` or a :class:`ClusterSampler`;
    a sampler is drawn ``n_configs`` times with seeds split from
    ``rng_seed`` and the coherences are averaged in draw order, so the
    result does not depend on ``threads``.
    """
    _check_readout(seq)
    grid = np.asarray(sweep_grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise InputError("sweep grid is empty")
    if n_configs < 1:
        raise InputError("n_configs must be >= 1")
    seq.validate()
    if isinstance(spec, ClusterSampler):
        seeds = np.random.SeedSequence(rng_seed).spawn(n_configs)
        specs = [spec.draw(np.random.default_rng(s)) for s in seeds]
    else:
        specs = [spec]
    def one(sp):
        props = _Propagators(sp)
        return np.array([probe_coherence(sp, seq.expand(v), props) for v in grid])

    if threads > 1 and len(specs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            curves = list(pool.map(one, specs))
    else:
        curves = [one(sp) for sp in specs]
    total = np.zeros(len(grid))
    for c in curves:
        total += c
    meta = {
        "x_label": seq.swept,
        "y_label": "coherence",
        "sequence": seq.name,
        "n_spins": specs[0].n_spins,
        "n_configs": len(specs),
        "seed": rng_seed,
    }
    return Signal(grid, total / len(specs), meta)
