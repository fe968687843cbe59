"""Monte Carlo of the fully dephased (classical) limit and an exhaustive oracle.

In the dephased limit each gate is followed by a Z measurement of its qubits,
so the state is a bit string: an active control flips its target with
probability ``sin^2(theta/2)`` and each reset pair is cleared with probability
``p``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .errors import BudgetExceeded
from .model import LAYER_LAYOUT, N_LAYERS, CircuitSpec, flip_prob
from .rng import CH_RESET, key_uniform

_LAYER_OFFSET = np.array([o for o, _ in LAYER_LAYOUT], dtype=np.int64)
_LAYER_CTRL_LEFT = np.array([c for _, c in LAYER_LAYOUT], dtype=np.bool_)


@dataclass
class BitLattice:
    bits: np.ndarray  # uint8, one entry per site of site_range
    site_range: tuple

    def __post_init__(self):
        lo, hi = self.site_range
        if len(self.bits) != hi - lo + 1:
            raise ValueError("bit array length does not match site_range")

    def is_zero(self):
        return not self.bits.any()

    def __getitem__(self, r):
        return int(self.bits[r - self.site_range[0]])

    def active_sites(self):
        return [int(i) + self.site_range[0] for i in np.flatnonzero(self.bits)]


@dataclass
class ObservableSeries:
    """Per-site densities and right-half totals for t = 0..t_max."""

    sites: np.ndarray
    density: np.ndarray  # (t_max + 1, n_sites)
    n_right: np.ndarray  # (t_max + 1,)
    origin: int = 0
    shot_count: Optional[int] = None
    n_right_se: Optional[np.ndarray] = None
    nr_samples: Optional[np.ndarray] = None  # (shots, t_max + 1)
    counts: Optional["EnsembleCounts"] = None

    @property
    def times(self):
        return np.arange(self.density.shape[0])

    @property
    def t_max(self):
        return self.density.shape[0] - 1

    def density_at(self, r, t):
        i = r - int(self.sites[0])
        if i < 0 or i >= len(self.sites):
            return 0.0
        return float(self.density[t, i])

    def right_sum(self):
        return self.density[:, self.sites >= self.origin].sum(axis=1)

    def n_right_map(self):
        return {int(t): float(v) for t, v in enumerate(self.n_right)}


@dataclass
class EnsembleCounts:
    """Integer accumulators; merging is exact and order-insensitive."""

    site_lo: int
    origin: int
    density: np.ndarray  # int64 (t_max + 1, n_sites)
    nr_sum: np.ndarray  # int64 (t_max + 1,)
    nr_sq: np.ndarray  # int64 (t_max + 1,)
    shots: int
    nr_samples: Optional[np.ndarray] = None
    shot_ids: Optional[np.ndarray] = field(default=None, repr=False)

    def merge(self, other):
        if other.site_lo != self.site_lo or other.density.shape != self.density.shape:
            raise ValueError("cannot merge counts over different lattices")
        samples = None
        ids = None
        if self.nr_samples is not None and other.nr_samples is not None:
            ids = np.concatenate([self.shot_ids, other.shot_ids])
            order = np.argsort(ids, kind="stable")
            samples = np.concatenate([self.nr_samples, other.nr_samples])[order]
            ids = ids[order]
        return EnsembleCounts(
            self.site_lo,
            self.origin,
            self.density + other.density,
            self.nr_sum + other.nr_sum,
            self.nr_sq + other.nr_sq,
            self.shots + other.shots,
            samples,
            ids,
        )

    def to_series(self):
        n = self.shots
        mean = self.nr_sum / n
        if n > 1:
            var = (self.nr_sq - n * mean**2) / (n - 1)
            se = np.sqrt(np.maximum(var, 0.0) / n)
        else:
            se = np.full_like(mean, np.nan)
        sites = np.arange(self.site_lo, self.site_lo + self.density.shape[1])
        return ObservableSeries(
            sites=sites,
            density=self.density / n,
            n_right=mean,
            origin=self.origin,
            shot_count=n,
            n_right_se=se,
            nr_samples=self.nr_samples,
            counts=self,
        )


@njit(cache=True, nogil=True)
def _run_block(
    seed, shot_lo, shot_hi, t_max, flip, p, site_lo, n_sites, origin_idx, start_zero,
    layer_offset, layer_ctrl_left, dens, nr_sum, nr_sq, nr_store, store, final_bits,
):
    bits = np.zeros(n_sites, dtype=np.uint8)
    for shot in range(shot_lo, shot_hi):
        row = shot - shot_lo
        bits[:] = 0
        if start_zero:
            lo, hi = 1, 0
        else:
            bits[origin_idx] = 1
            lo, hi = origin_idx, origin_idx
        nr = 0
        for i in range(lo, hi + 1):
            dens[0, i] += bits[i]
            if i >= origin_idx:
                nr += bits[i]
        nr_sum[0] += nr
        nr_sq[0] += nr * nr
        if store:
            nr_store[row, 0] = nr
        for t in range(1, t_max + 1):
            if lo > hi:
                break  # absorbed: every later observable is zero
            for layer in range(4):
                off = layer_offset[layer]
                a = lo - 1
                if (a + site_lo - off) % 2 != 0:
                    a = lo
                if a < 0:
                    a += 2
                new_lo, new_hi = lo, hi
                while a <= hi and a + 1 < n_sites:
                    if layer_ctrl_left[layer]:
                        c, tg = a, a + 1
                    else:
                        c, tg = a + 1, a
                    if bits[c] == 1:
                        if key_uniform(seed, shot, t, layer, a + site_lo) < flip:
                            bits[tg] ^= 1
                            if tg < new_lo:
                                new_lo = tg
                            if tg > new_hi:
                                new_hi = tg
                    a += 2
                lo, hi = new_lo, new_hi
            a = lo - ((lo + site_lo) % 2)
            if a < 0:
                a += 2
            while a <= hi and a + 1 < n_sites:
                if bits[a] | bits[a + 1]:
                    if key_uniform(seed, shot, t, 4, a + site_lo) < p:
                        bits[a] = 0
                        bits[a + 1] = 0
                a += 2
            while lo <= hi and bits[lo] == 0:
                lo += 1
            while hi >= lo and bits[hi] == 0:
                hi -= 1
            nr = 0
            for i in range(lo, hi + 1):
                dens[t, i] += bits[i]
                if i >= origin_idx:
                    nr += bits[i]
            nr_sum[t] += nr
            nr_sq[t] += nr * nr
            if store:
                nr_store[row, t] = nr
        if shot_hi - shot_lo == 1:
            final_bits[:] = bits


def _check_reset_channel():
    # the kernel hard-codes channel 4 for resets
    assert CH_RESET == 4


_check_reset_channel()


def _block_counts(circuit, theta, p, base_seed, shot_lo, shot_hi, store, start_zero=False):
    lo, hi = circuit.site_range
    n_sites = hi - lo + 1
    T = circuit.t_max + 1
    dens = np.zeros((T, n_sites), dtype=np.int64)
    nr_sum = np.zeros(T, dtype=np.int64)
    nr_sq = np.zeros(T, dtype=np.int64)
    n = shot_hi - shot_lo
    nr_store = np.zeros((n if store else 1, T), dtype=np.int32)
    final_bits = np.zeros(n_sites, dtype=np.uint8)
    _run_block(
        np.uint64(base_seed), shot_lo, shot_hi, circuit.t_max, flip_prob(theta), float(p),
        lo, n_sites, circuit.origin - lo, start_zero, _LAYER_OFFSET, _LAYER_CTRL_LEFT,
        dens, nr_sum, nr_sq, nr_store, store, final_bits,
    )
    counts = EnsembleCounts(
        lo, circuit.origin, dens, nr_sum, nr_sq, n,
        nr_store if store else None,
        np.arange(shot_lo, shot_hi) if store else None,
    )
    return counts, final_bits


@dataclass
class ShotResult:
    lattice: BitLattice
    n_right: np.ndarray  # per-period N_R, t = 0..t_max


def run_shot(circuit: CircuitSpec, theta, p, seed, shot=0, start_zero=False):
    """One trajectory; deterministic in ``(seed, shot)``."""
    counts, bits = _block_counts(circuit, theta, p, seed, shot, shot + 1, True, start_zero)
    return ShotResult(BitLattice(bits.copy(), circuit.site_range), counts.nr_samples[0].astype(np.int64))


def run_ensemble_counts(circuit, theta, p, shots, base_seed, *, store_shots=False,
                        threads=1, chunk=None, shot_offset=0):
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if chunk is None:
        chunk = max(1, min(shots, 20000))
    bounds = [(s, min(s + chunk, shots)) for s in range(0, shots, chunk)]

    def work(b):
        return _block_counts(circuit, theta, p, base_seed, shot_offset + b[0],
                             shot_offset + b[1], store_shots)[0]

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    total = parts[0]
    for part in parts[1:]:
        total = total.merge(part)
    return total


def run_ensemble(circuit, theta, p, shots, base_seed, *, store_shots=False, threads=1,
                 shot_offset=0):
    """Mean observables over ``shots`` trajectories with seeds ``(base_seed, shot)``."""
    return run_ensemble_counts(
        circuit, theta, p, shots, base_seed, store_shots=store_shots,
        threads=threads, shot_offset=shot_offset,
    ).to_series()


# -- exhaustive oracle ------------------------------------------------------


def _path_step(states, weights_for, budget, used):
    """Apply one stochastic element to every configuration in ``states``."""
    out = {}
    for cfg, prob in states.items():
        for new_cfg, w in weights_for(cfg):
            if w == 0.0:
                continue
            used[0] += 1
            if used[0] > budget:
                raise BudgetExceeded(f"more than {budget} branches")
            out[new_cfg] = out.get(new_cfg, 0.0) + prob * w
    return out


def exact_enumeration(circuit: CircuitSpec, theta, p, budget=10**7, start_zero=False):
    """Exact expectations by summing over every flip/reset branch."""
    lo, hi = circuit.site_range
    n_sites = hi - lo + 1
    origin_idx = circuit.origin - lo
    f = flip_prob(theta)
    init = [0] * n_sites
    if not start_zero:
        init[origin_idx] = 1
    states = {tuple(init): 1.0}
    used = [0]
    T = circuit.t_max + 1
    dens = np.zeros((T, n_sites))
    nr = np.zeros(T)

    def record(t):
        for cfg, prob in states.items():
            arr = np.array(cfg)
            dens[t] += prob * arr
            nr[t] += prob * arr[origin_idx:].sum()

    record(0)
    for t, period in enumerate(circuit.periods, start=1):
        for layer in period.gate_layers:
            for c, tg in layer:
                ci, ti = c - lo, tg - lo

                def gate(cfg, ci=ci, ti=ti):
                    if not cfg[ci]:
                        return [(cfg, 1.0)]
                    flipped = list(cfg)
                    flipped[ti] ^= 1
                    return [(tuple(flipped), f), (cfg, 1.0 - f)]

                states = _path_step(states, gate, budget, used)
        for (a, b), _ in period.reset_layer:
            ai, bi = a - lo, b - lo

            def reset(cfg, ai=ai, bi=bi):
                if not (cfg[ai] or cfg[bi]):
                    return [(cfg, 1.0)]
                cleared = list(cfg)
                cleared[ai] = cleared[bi] = 0
                return [(tuple(cleared), p), (cfg, 1.0 - p)]

            states = _path_step(states, reset, budget, used)
        record(t)
    return ObservableSeries(
        sites=np.arange(lo, hi + 1), density=dens, n_right=nr, origin=circuit.origin
    )


def replay_path(circuit: CircuitSpec, theta, p, uniform):
    """Follow the single branch selected by ``uniform(t, channel, site)``.

    Returns the final configuration and its path probability, using the same
    branch weights as :func:`exact_enumeration`.
    """
    lo, hi = circuit.site_range
    cfg = [0] * (hi - lo + 1)
    cfg[circuit.origin - lo] = 1
    f = flip_prob(theta)
    prob = 1.0
    for t, period in enumerate(circuit.periods, start=1):
        for layer_idx, layer in enumerate(period.gate_layers):
            for c, tg in layer:
                if not cfg[c - lo]:
                    continue
                left = min(c, tg)
                if uniform(t, layer_idx, left) < f:
                    cfg[tg - lo] ^= 1
                    prob *= f
                else:
                    prob *= 1.0 - f
        for (a, b), _ in period.reset_layer:
            if not (cfg[a - lo] or cfg[b - lo]):
                continue
            if uniform(t, CH_RESET, a) < p:
                cfg[a - lo] = cfg[b - lo] = 0
                prob *= p
            else:
                prob *= 1.0 - p
    return BitLattice(np.array(cfg, dtype=np.uint8), circuit.site_range), prob
