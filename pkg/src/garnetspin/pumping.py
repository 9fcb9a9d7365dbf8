"""Optical spin initialisation by trains of circularly polarised pulses.

Four optical transitions connect the 4f(1) ground doublet to the 5d(1)
doublet. With sigma+ light the spin-flip transition from |down> is the
strong one (excitation probability ``excitation_prob`` per pulse); the
other three are weaker by ``branching_ratio``. A sigma- admixture mirrors
the pattern so that the strong transition starts from |up> instead. The
excited state decays before the next pulse, back to either ground state
with probability 1/2.

|up> is the dark state, |down> the bright one. Polarisation is
P = p_up - p_down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .signals import write_table


@dataclass(frozen=True)
class PumpModel:
    branching_ratio: float = 1331.0
    excitation_prob: float = 0.03
    sigma_plus_fraction: float = 1.0
    thermal_polarization: float = 0.0

    def __post_init__(self):
        rho, eps, pp = self.branching_ratio, self.excitation_prob, self.sigma_plus_fraction
        if not rho > 1:
            raise InputError("branching_ratio must be > 1")
        if not 0 < eps <= 1:
            raise InputError("excitation_prob must be in (0, 1]")
        if not 0.5 <= pp <= 1:
            raise InputError("sigma_plus_fraction must be in [0.5, 1]")
        if not -1 <= self.thermal_polarization <= 1:
            raise InputError("thermal_polarization must be in [-1, 1]")
        if eps * (1 + 1 / rho) > 1:
            raise InputError("excitation_prob * (1 + 1/branching_ratio) exceeds 1")

    def excitation(self) -> tuple[float, float]:
        """Per-pulse excitation probabilities out of (|up>, |down>)."""
        eps, weak, pp = self.excitation_prob, self.excitation_prob / self.branching_ratio, self.sigma_plus_fraction
        from_up = pp * 2 * weak + (1 - pp) * (eps + weak)
        from_down = pp * (eps + weak) + (1 - pp) * 2 * weak
        return from_up, from_down


@dataclass(frozen=True)
class PumpTrajectory:
    """Populations after each pulse and the fluorescence emitted during it."""

    p_up: np.ndarray
    p_down: np.ndarray
    fluorescence: np.ndarray  # expected photons per pulse, unnormalised

    @property
    def polarization(self) -> np.ndarray:
        return self.p_up - self.p_down

    @property
    def normalized_fluorescence(self) -> np.ndarray:
        return self.fluorescence / self.fluorescence[0]

    def to_csv(self, metadata=None, provenance=None) -> str:
        n = len(self.p_up)
        return write_table(
            {
                "pulse": np.arange(1, n + 1),
                "p_up": self.p_up,
                "polarization": self.polarization,
                "fluorescence": self.normalized_fluorescence,
            },
            metadata,
            provenance,
        )


def pump_step(model: PumpModel, p_up: float) -> tuple[float, float]:
    """Apply one laser pulse; returns (new p_up, fluorescence of this pulse)."""
    if not 0 <= p_up <= 1:
        raise InputError("p_up must be a probability")
    e_up, e_down = model.excitation()
    p_down = 1.0 - p_up
    excited_up, excited_down = e_up * p_up, e_down * p_down
    new_up = p_up - excited_up + 0.5 * (excited_up + excited_down)
    return min(max(new_up, 0.0), 1.0), excited_up + excited_down


def steady_state_polarization(model: PumpModel) -> float:
    """Fixed point of :func:`pump_step`, where pumping in and out balance.

    For sigma+ light only this is (rho - 1) / (rho + 3).
    """
    e_up, e_down = model.excitation()
    return (e_down - e_up) / (e_down + e_up)


def pump_train(model: PumpModel, n_pulses: int) -> PumpTrajectory:
    if n_pulses < 1:
        raise InputError("n_pulses must be >= 1")
    p = (1 + model.thermal_polarization) / 2
    ups = np.empty(n_pulses)
    fl = np.empty(n_pulses)
    for k in range(n_pulses):
        p, fl[k] = pump_step(model, p)
        ups[k] = p
    return PumpTrajectory(ups, 1.0 - ups, fl)
