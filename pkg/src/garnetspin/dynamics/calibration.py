"""Tuning the OU bath so simulated fits land on target coherence times.

Each round bisects one parameter at a time in log space while holding
the others: sigma against the FID decay time, tau_c against the Hahn
decay time, and T1 against the Hahn stretch exponent. The simulator
runs with a fixed seed, so every objective is a deterministic function
of its parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..fitting import fit
from .engine import run_sequence
from .noise import NoiseModel
from .sequences import sequence_template

#: Output of :func:`calibrate` with the default targets and settings.
CALIBRATED_NOISE = NoiseModel("ornstein_uhlenbeck", sigma_mhz=5.0087, tau_c_ns=1231.1, t1_ns=219.5)

FID_GRID = np.linspace(0.0, 160.0, 81)
HAHN_GRID = np.linspace(0.0, 800.0, 81)


@dataclass(frozen=True)
class CalibrationTargets:
    fid_ns: float = 39.0
    hahn_ns: float = 194.0
    hahn_exponent: float = 2.0


def coherence_times(noise: NoiseModel, *, rabi_mhz: float = 50.0, n_trajectories: int = 4000,
                    rng_seed: int = 0, threads: int = 1) -> dict:
    """Fitted FID and Hahn times (Gaussian model) and the Hahn stretch exponent."""
    fid_sig = run_sequence(sequence_template("fid", rabi_mhz), noise, FID_GRID,
                           n_trajectories, rng_seed, threads)
    hahn_sig = run_sequence(sequence_template("hahn", rabi_mhz), noise, HAHN_GRID,
                            n_trajectories, rng_seed, threads)
    f = fit(fid_sig, "gaussian_decay")
    h = fit(hahn_sig, "gaussian_decay")
    s = fit(hahn_sig, "stretched_exp")
    return {
        "fid_ns": f.decay_time,
        "hahn_ns": h.decay_time,
        "hahn_exponent": s.model.params["p"],
        "converged": f.converged and h.converged and s.converged,
    }


def _bisect_log(func, target, x0, increasing, rel_tol, max_iter=40):
    """Solve func(x) = target for x > 0, func monotone, starting near x0."""
    def sign(x):
        d = func(x) - target
        return d if increasing else -d

    lo, hi = x0 / 1.5, x0 * 1.5
    s_lo, s_hi = sign(lo), sign(hi)
    for _ in range(30):
        if s_lo <= 0 <= s_hi:
            break
        if s_lo > 0:
            lo, hi, s_hi = lo / 2, lo, s_lo
            s_lo = sign(lo)
        else:
            lo, hi, s_lo = hi, hi * 2, s_hi
            s_hi = sign(hi)
    else:
        raise RuntimeError("could not bracket the calibration target")
    for _ in range(max_iter):
        if hi / lo - 1 < rel_tol:
            break
        mid = math.sqrt(lo * hi)
        if sign(mid) > 0:
            hi = mid
        else:
            lo = mid
    return math.sqrt(lo * hi)


def calibrate(targets: CalibrationTargets = CalibrationTargets(),
              start: NoiseModel = CALIBRATED_NOISE, *, rounds: int = 3, rel_tol: float = 2e-3,
              log=None, **sim) -> tuple[NoiseModel, dict]:
    """Alternating bisection; returns the tuned model and its fitted times."""
    noise = start

    def measure(key, **change):
        return coherence_times(replace(noise, **change), **sim)[key]

    for r in range(rounds):
        sigma = _bisect_log(lambda x: measure("fid_ns", sigma_mhz=x), targets.fid_ns,
                            noise.sigma_mhz, increasing=False, rel_tol=rel_tol)
        noise = replace(noise, sigma_mhz=sigma)
        tau = _bisect_log(lambda x: measure("hahn_ns", tau_c_ns=x), targets.hahn_ns,
                          noise.tau_c_ns, increasing=True, rel_tol=rel_tol)
        noise = replace(noise, tau_c_ns=tau)
        t1 = _bisect_log(lambda x: measure("hahn_exponent", t1_ns=x), targets.hahn_exponent,
                         noise.t1_ns, increasing=True, rel_tol=rel_tol)
        noise = replace(noise, t1_ns=t1)
        if log:
            log(f"round {r}: {noise} -> {coherence_times(noise, **sim)}")
    return noise, coherence_times(noise, **sim)
