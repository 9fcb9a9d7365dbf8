"""Rotating-frame two-level propagation.

Basis order is (|up>, |down>) with sigma_z |up> = +|up>. The Hamiltonian
in frequency units is

    H/h = (d/2) sigma_z + (W/2) (cos(phi) sigma_x + sin(phi) sigma_y)

and piecewise-constant segments use the closed SU(2) form
U = cos(theta/2) I - i sin(theta/2) n.sigma.
"""

from __future__ import annotations

import numpy as np

from ..errors import InputError
from .noise import NoiseModel
from .sequences import CYCLE, PulseElement

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)

UP = np.array([[1, 0], [0, 0]], dtype=complex)
DOWN = np.array([[0, 0], [0, 1]], dtype=complex)


def check_state(rho, tol=1e-12) -> np.ndarray:
    """Validate a 2x2 density matrix and return it as a complex array."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise InputError("spin state must be a 2x2 density matrix")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise InputError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise InputError("density matrix trace is not 1")
    if np.min(np.linalg.eigvalsh(rho)) < -tol:
        raise InputError("density matrix is not positive semidefinite")
    return rho


def pure(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def su2(detuning, rabi, phase, duration_ns):
    """Batched propagators, shape (..., 2, 2), for constant parameters.

    ``detuning`` may be an array (one value per trajectory); the drive
    is common to all.
    """
    d = np.asarray(detuning, dtype=float)
    w = float(rabi)
    omega = np.hypot(d, w)
    theta = CYCLE * duration_ns * omega
    c = np.cos(theta / 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        s_over = np.where(omega > 0, np.sin(theta / 2) / np.where(omega > 0, omega, 1.0), 0.0)
    nz = s_over * d
    nx = s_over * w * np.cos(phase)
    ny = s_over * w * np.sin(phase)
    U = np.empty(d.shape + (2, 2), dtype=complex)
    U[..., 0, 0] = c - 1j * nz
    U[..., 0, 1] = -1j * (nx - 1j * ny)
    U[..., 1, 0] = -1j * (nx + 1j * ny)
    U[..., 1, 1] = c + 1j * nz
    return U


def ideal_rotation(angle: float, phase: float) -> np.ndarray:
    """Instantaneous rotation by ``angle`` about the in-plane axis at ``phase``."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -1j * s * np.exp(-1j * phase)],
                     [-1j * s * np.exp(1j * phase), c]])


def relax(rho, gamma):
    """Longitudinal relaxation towards I/2 over a step with 1 - exp(-h/T1) = gamma."""
    out = rho.copy()
    keep = 1.0 - gamma
    out[..., 0, 0] = 0.5 + (rho[..., 0, 0] - 0.5) * keep
    out[..., 1, 1] = 1.0 - out[..., 0, 0]
    root = np.sqrt(keep)
    out[..., 0, 1] = rho[..., 0, 1] * root
    out[..., 1, 0] = rho[..., 1, 0] * root
    return out


def apply_unitary(rho, U):
    return U @ rho @ np.conj(np.swapaxes(U, -1, -2))


def readout(rho, axis: str = "z"):
    """(1 - <sigma_axis>) / 2; for ``z`` this is the |down> (bright) population."""
    if axis == "z":
        return rho[..., 1, 1].real
    if axis == "x":
        return 0.5 - rho[..., 0, 1].real
    return 0.5 + rho[..., 0, 1].imag


def propagate_element(state, elem: PulseElement, detuning_trajectory=None, *, t0: float = 0.0,
                      n_substeps: int = 1, noise: NoiseModel | None = None):
    """Evolve one density matrix through a concrete element.

    ``detuning_trajectory(t)`` gives the bath detuning in MHz at absolute
    time ``t`` (ns); it is sampled at the midpoint of each of
    ``n_substeps`` equal sub-steps and added to the element's static
    offset. ``noise`` only contributes its T1 channel here.
    """
    if n_substeps < 1:
        raise InputError("n_substeps must be positive")
    rho = np.asarray(state, dtype=complex)
    if elem.sweep_scale:
        raise InputError("element still depends on the swept value; call resolve first")
    if elem.instantaneous:
        return apply_unitary(rho, ideal_rotation(elem.ideal_angle, elem.phase))
    if elem.duration_ns == 0:
        return rho
    h = elem.duration_ns / n_substeps
    gamma = 0.0
    if noise is not None and noise.has_t1:
        gamma = -np.expm1(-h / noise.t1_ns)
    for k in range(n_substeps):
        d = elem.detuning_offset_mhz
        if detuning_trajectory is not None:
            d += float(detuning_trajectory(t0 + (k + 0.5) * h))
        rho = apply_unitary(rho, su2(d, elem.rabi_mhz, elem.phase, h))
        if gamma:
            rho = relax(rho, gamma)
    return rho
