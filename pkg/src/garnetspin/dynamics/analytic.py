"""Closed-form Gaussian-phase coherences used as Monte Carlo references.

For a detuning process with autocorrelation sigma^2 exp(-|s|/tau_c) and
a switching function y(t) = +-1 set by ideal pi pulses, the coherence is
exp(-chi / 2) with

    chi = (2 pi)^2 / pi * integral_0^inf S(w) |Y(w)|^2 dw,
    S(w) = 2 sigma^2 tau_c / (1 + w^2 tau_c^2),

where Y is the Fourier transform of y over the free-evolution window.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

from ..errors import InputError
from .noise import NoiseModel
from .sequences import CYCLE


def switching_segments(seq_kind: str, t: float, n: int = 1):
    """(start, stop, sign) intervals of the toggling-frame switching function."""
    if seq_kind == "fid":
        return [(0.0, t, 1.0)]
    if seq_kind == "hahn":
        n = 1
    elif seq_kind != "cpmg":
        raise InputError(f"no closed form for sequence {seq_kind!r}")
    if n < 1:
        raise InputError("cpmg needs N >= 1")
    edges = [0.0] + [t * (2 * k - 1) / (2 * n) for k in range(1, n + 1)] + [t]
    return [(edges[i], edges[i + 1], (-1.0) ** i) for i in range(len(edges) - 1)]


def filter_weight(w, segments):
    """|Y(w)|^2 for the piecewise-constant switching function."""
    w = np.asarray(w, dtype=float)[..., None]
    seg = np.asarray(segments, dtype=float)
    mid, length, sign = (seg[:, 0] + seg[:, 1]) / 2, seg[:, 1] - seg[:, 0], seg[:, 2]
    acc = np.sum(sign * length * np.exp(1j * w * mid) * np.sinc(w * length / (2 * np.pi)), axis=-1)
    return np.abs(acc) ** 2


def _ou_phase_variance(sigma, tau, segments, t):
    """Variance of the integrated detuning (MHz^2 ns^2) via the filter integral."""
    if t == 0:
        return 0.0
    n_seg = len(segments)
    w_lo = 1e-4 * min(1 / tau, 1 / t)
    w_hi = 2e3 * max(1 / tau, n_seg / t)
    # geometric panels below the first filter oscillation, then panels a few
    # oscillation periods wide
    w_mid = min(4 * np.pi / t, w_hi)
    step = max(8 * np.pi / t, (w_hi - w_mid) / 400)
    edges = np.concatenate([[0.0], np.geomspace(w_lo, w_mid, 41),
                            np.arange(w_mid + step, w_hi, step), [w_hi]])
    edges = np.unique(edges)
    # rough size of the result, so near-empty panels stop refining early
    scale = sigma**2 * t * t * min(t, tau)
    epsabs = 1e-13 * scale / len(edges)

    seg = np.asarray(segments, dtype=float)
    mid, length, sign = (seg[:, 0] + seg[:, 1]) / 2, seg[:, 1] - seg[:, 0], seg[:, 2]
    half = length / 2

    def f(w):
        # |Y(w)|^2 with 2 sin(w L / 2) / w written out for speed
        if w == 0:
            y = complex(np.dot(sign, length))
        else:
            y = complex(np.dot(sign * np.sin(w * half), np.exp(1j * w * mid))) * 2 / w
        return 2 * sigma**2 * tau / (1 + (w * tau) ** 2) * (y.real**2 + y.imag**2)

    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = quad(f, lo, hi, limit=200, epsabs=epsabs, epsrel=1e-10)
        total += val
    # tail beyond w_hi: |Y|^2 <= (2 n_seg / w)^2 and S ~ 2 sigma^2 / (tau w^2)
    total += 2 * sigma**2 / tau * (2 * n_seg) ** 2 / (3 * w_hi**3)
    return total / math.pi


def analytic_coherence(noise: NoiseModel, seq_kind: str, t: float, n: int = 1,
                       include_t1: bool = True) -> float:
    """Ensemble coherence after total free-evolution time ``t`` (ns).

    With ``include_t1`` the T1 channel's exp(-t / (2 T1)) factor is
    applied as well.
    """
    if noise.kind not in ("quasi_static_gaussian", "ornstein_uhlenbeck"):
        raise InputError("analytic coherence needs a Gaussian bath")
    if t < 0:
        raise InputError("t must be >= 0")
    segments = switching_segments(seq_kind, t, n)
    s = noise.sigma_mhz
    if noise.kind == "quasi_static_gaussian":
        chi = (CYCLE * s * t) ** 2 if seq_kind == "fid" else 0.0
    elif seq_kind == "fid":
        tau = noise.tau_c_ns
        a = t / tau
        chi = 2 * (CYCLE * s * tau) ** 2 * (a + math.expm1(-a))
    else:
        chi = CYCLE**2 * _ou_phase_variance(s, noise.tau_c_ns, segments, t)
    c = math.exp(-chi / 2)
    if include_t1 and noise.has_t1:
        c *= math.exp(-t / (2 * noise.t1_ns))
    return c
