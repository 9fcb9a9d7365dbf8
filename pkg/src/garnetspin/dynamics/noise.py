"""Classical detuning baths.

``sigma_mhz`` is the rms detuning in cycles: a spin with detuning d
accumulates phase 2*pi*d*t. ``t1_ns`` switches on longitudinal
relaxation towards the infinite-temperature state (populations relax
with 1/T1, coherences with 1/(2*T1)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InputError

KINDS = ("none", "quasi_static_gaussian", "ornstein_uhlenbeck")


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"
    sigma_mhz: float = 0.0
    tau_c_ns: float = math.inf
    t1_ns: float = math.inf

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown noise kind {self.kind!r}")
        if not self.sigma_mhz >= 0:
            raise InputError("sigma_mhz must be >= 0")
        if self.kind == "ornstein_uhlenbeck" and not self.tau_c_ns > 0:
            raise InputError("tau_c_ns must be > 0")
        if not self.t1_ns > 0:
            raise InputError("t1_ns must be > 0 (use inf to disable)")

    @property
    def has_t1(self) -> bool:
        return math.isfinite(self.t1_ns)

    def substeps(self, duration_ns: float, drive: bool) -> int:
        """Number of piecewise-constant sub-steps for an element."""
        if duration_ns <= 0:
            return 0
        if self.kind == "ornstein_uhlenbeck":
            h = max(duration_ns / 16, self.tau_c_ns / 20)
            return max(1, math.ceil(duration_ns / h - 1e-12))
        if drive and self.has_t1:
            return 16
        return 1


def _integral_variance_factor(a):
    """2a - 3 + 4 exp(-a) - exp(-2a), evaluated without cancellation."""
    a = np.asarray(a, dtype=float)
    series = a**3 * (2 / 3 + a * (-1 / 2 + a * (7 / 30 + a * (-1 / 12 + a * (31 / 1260 + a * (-1 / 160))))))
    direct = 2 * a - 3 + 4 * np.exp(-a) - np.exp(-2 * a)
    return np.where(a < 0.05, series, direct)


class NoiseStream:
    """Detuning realisations for a batch of trajectories.

    ``step(h)`` advances every trajectory by ``h`` ns and returns the mean
    detuning over that interval. For Ornstein-Uhlenbeck noise the end
    value and the time integral are drawn jointly from their exact
    Gaussian law, so the accumulated phase is exact for any step size.
    """

    def __init__(self, noise: NoiseModel, rng: np.random.Generator, n: int):
        self.noise = noise
        self.rng = rng
        self.n = n
        if noise.kind == "none" or noise.sigma_mhz == 0:
            self.x = np.zeros(n)
        else:
            self.x = noise.sigma_mhz * rng.standard_normal(n)

    def step(self, h: float) -> np.ndarray:
        if self.noise.kind != "ornstein_uhlenbeck" or self.noise.sigma_mhz == 0:
            return self.x
        s, tau = self.noise.sigma_mhz, self.noise.tau_c_ns
        a = h / tau
        decay = math.exp(-a)
        var_x = s * s * -math.expm1(-2 * a)
        var_i = s * s * tau * tau * float(_integral_variance_factor(a))
        cov = s * s * tau * math.expm1(-a) ** 2
        l11 = math.sqrt(var_x)
        l21 = cov / l11
        l22 = math.sqrt(max(var_i - l21 * l21, 0.0))
        z = self.rng.standard_normal((2, self.n))
        integral = self.x * tau * -math.expm1(-a) + l21 * z[0] + l22 * z[1]
        self.x = self.x * decay + l11 * z[0]
        return integral / h
