"""Monte Carlo averaging of pulse sequences over noise realisations."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..errors import InputError
from ..signals import Signal
from .noise import NoiseModel, NoiseStream
from .propagation import UP, apply_unitary, ideal_rotation, readout, relax, su2
from .sequences import PulseSequence

BLOCK = 512


def simulate_batch(elements, noise: NoiseModel, rng: np.random.Generator, n: int,
                   readout_axis: str = "z", record: bool = False):
    """Propagate ``n`` trajectories from |up> through concrete ``elements``.

    Returns the per-trajectory readout, plus (when ``record``) the list of
    ``(element_index, t_start, h, detuning_array)`` sub-steps that were
    applied, for replay by an independent integrator.
    """
    stream = NoiseStream(noise, rng, n)
    rho = np.broadcast_to(UP, (n, 2, 2)).copy()
    history = [] if record else None
    t = 0.0
    for idx, e in enumerate(elements):
        if e.instantaneous:
            rho = apply_unitary(rho, ideal_rotation(e.ideal_angle, e.phase))
            continue
        m = noise.substeps(e.duration_ns, e.kind == "drive")
        if m == 0:
            continue
        h = e.duration_ns / m
        gamma = -math.expm1(-h / noise.t1_ns) if noise.has_t1 else 0.0
        for _ in range(m):
            d = stream.step(h) + e.detuning_offset_mhz
            if record:
                history.append((idx, t, h, np.array(d, copy=True)))
            U = su2(np.broadcast_to(d, (n,)), e.rabi_mhz, e.phase, h)
            rho = apply_unitary(rho, U)
            if gamma:
                rho = relax(rho, gamma)
            t += h
    values = readout(rho, readout_axis)
    return (values, history) if record else values


def _block_sizes(n_trajectories: int):
    full, rest = divmod(n_trajectories, BLOCK)
    return [BLOCK] * full + ([rest] if rest else [])


def run_sequence(seq: PulseSequence, noise: NoiseModel, sweep_grid, n_trajectories: int,
                 rng_seed: int, threads: int = 1) -> Signal:
    """Average readout over ``n_trajectories`` noise realisations per sweep point.

    Trajectories are split into fixed blocks, each with its own random
    stream derived from ``rng_seed`` and the block index. Every sweep
    point reuses the same streams, and blocks are reduced in index order,
    so the result does not depend on ``threads``.
    """
    grid = np.asarray(sweep_grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise InputError("sweep grid is empty")
    if n_trajectories < 1:
        raise InputError("n_trajectories must be >= 1")
    seq.validate()
    expanded = [seq.expand(v) for v in grid]
    sizes = _block_sizes(n_trajectories)
    if noise.kind == "none" or noise.sigma_mhz == 0:
        sizes = [1]
    deterministic = len(sizes) == 1 and sizes[0] == 1

    def task(point, block):
        rng = np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(block,)))
        return simulate_batch(expanded[point], noise, rng, sizes[block], seq.readout_axis)

    jobs = [(p, b) for p in range(len(grid)) for b in range(len(sizes))]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda pb: task(*pb), jobs))
    else:
        results = [task(p, b) for p, b in jobs]

    mean = np.empty(len(grid))
    stderr = np.empty(len(grid))
    nb = len(sizes)
    for p in range(len(grid)):
        vals = np.concatenate(results[p * nb:(p + 1) * nb])
        mean[p] = vals.mean()
        stderr[p] = vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0
    meta = {
        "x_label": seq.swept,
        "y_label": "signal",
        "sequence": seq.name,
        "readout_axis": seq.readout_axis,
        "noise": noise.kind,
        "sigma_mhz": noise.sigma_mhz,
        "tau_c_ns": noise.tau_c_ns,
        "t1_ns": noise.t1_ns,
        "n_trajectories": 1 if deterministic else n_trajectories,
        "seed": rng_seed,
    }
    return Signal(grid, mean, meta, {"stderr": stderr})
