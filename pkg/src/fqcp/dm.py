"""Exact density-matrix evolution of the quantum contact process.

The production engine (:func:`simulate`) keeps only the currently live sites
in memory: a site is admitted in |0> right before its first non-trivial
operation and traced out right after its last one, once its Z-diagonal
expectations have been recorded.

It works in the frame rotated by ``S`` on every site.  ``S`` is diagonal, so
it commutes with the control projector, the reset channel and every Z-basis
observable, and it maps ``R_x(theta)`` to the real rotation
``[[c, s], [-s, c]]``.  The density matrix therefore stays real symmetric.

:func:`simulate_bruteforce` is the independent oracle: complex matrices in the
original frame, the whole cone in memory, gates applied by tensor contraction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .dephased import ObservableSeries
from .errors import InvariantViolation, WindowTooLarge
from .model import ModelParams, build_circuit

DEFAULT_LIVE_CAP = 13
TRACE_TOL = 1e-10


# -- schedule ---------------------------------------------------------------


@dataclass
class ReuseSchedule:
    """Linearized instruction list with qubit reuse.

    Instructions are tuples:
    ``("admit", site)``, ``("excite", site)``, ``("gate", t, layer, control, target)``,
    ``("reset", t, sites)``, ``("record", site, t)``, ``("retire", site)``.
    """

    instructions: list
    max_live: int
    t_max: int
    origin: int = 0

    def to_dict(self):
        return {
            "t_max": self.t_max,
            "origin": self.origin,
            "max_live": self.max_live,
            "instructions": [list(ins) for ins in self.instructions],
        }

    def gate_count(self):
        return sum(1 for ins in self.instructions if ins[0] == "gate")


def _active_ops(circuit):
    """Operations that can act non-trivially on the single-site initial state.

    A gate whose control has never been touched acts on |0> and is the
    identity; a reset on a pair with one untouched site is a one-site reset.
    """
    active = {circuit.origin}
    ops = []
    for t, period in enumerate(circuit.periods, start=1):
        for layer, pairs in enumerate(period.gate_layers):
            for c, tg in pairs:
                if c in active:
                    ops.append(("gate", t, layer, c, tg))
                    active.add(tg)
        for (a, b), _ in period.reset_layer:
            sites = tuple(s for s in (a, b) if s in active)
            if sites:
                ops.append(("reset", t, sites))
    return ops


def _op_sites(op):
    return op[3:5] if op[0] == "gate" else op[2]


def build_reuse_schedule(circuit):
    """Greedy linearization of the gate DAG that retires sites as early as possible.

    Among ready operations it prefers one that admits no new site, then the
    one touching the site with the fewest remaining operations, then the
    lowest site index.
    """
    ops = _active_ops(circuit)
    chains = {}
    for i, op in enumerate(ops):
        for s in _op_sites(op):
            chains.setdefault(s, []).append(i)
    ptr = dict.fromkeys(chains, 0)
    live = set()
    instructions = []
    max_live = 1
    origin = circuit.origin

    def is_ready(i):
        return all(chains[s][ptr[s]] == i for s in _op_sites(ops[i]))

    def priority(i):
        sites = _op_sites(ops[i])
        new = sum(1 for s in sites if s not in live)
        remaining = min(len(chains[s]) - ptr[s] for s in sites)
        return (new, remaining, min(sites), i)

    # the origin is live from the start and carries the t=0 record
    instructions.append(("admit", origin))
    instructions.append(("excite", origin))
    instructions.append(("record", origin, 0))
    live.add(origin)
    if origin not in chains:
        instructions.append(("retire", origin))
        return ReuseSchedule(instructions, 1, circuit.t_max, origin)

    ready = {i for i in range(len(ops)) if is_ready(i)}
    while ready:
        i = min(ready, key=priority)
        ready.remove(i)
        op = ops[i]
        sites = _op_sites(op)
        for s in sites:
            if s not in live:
                instructions.append(("admit", s))
                live.add(s)
        max_live = max(max_live, len(live))
        instructions.append(op)
        if op[0] == "reset":
            for s in sites:
                instructions.append(("record", s, op[1]))
        for s in sites:
            ptr[s] += 1
            if ptr[s] == len(chains[s]):
                instructions.append(("retire", s))
                live.discard(s)
            else:
                j = chains[s][ptr[s]]
                if is_ready(j):
                    ready.add(j)
    return ReuseSchedule(instructions, max_live, circuit.t_max, origin)


# -- flat-index kernels -----------------------------------------------------
# rho is stored flat as rho[i * dim + j]; live position k is bit k of i and j.


@njit(cache=True)
def _k_crot(rho, dim, cbit, tbit, c, s):
    cm = 1 << cbit
    tm = 1 << tbit
    for i0 in range(dim):
        if i0 & tm:
            continue
        i1 = i0 | tm
        ic = (i0 & cm) != 0
        for j0 in range(dim):
            if j0 & tm:
                continue
            j1 = j0 | tm
            jc = (j0 & cm) != 0
            if not ic and not jc:
                continue
            a00 = rho[i0 * dim + j0]
            a01 = rho[i0 * dim + j1]
            a10 = rho[i1 * dim + j0]
            a11 = rho[i1 * dim + j1]
            if ic:
                b00 = c * a00 + s * a10
                b01 = c * a01 + s * a11
                b10 = -s * a00 + c * a10
                b11 = -s * a01 + c * a11
                a00, a01, a10, a11 = b00, b01, b10, b11
            if jc:
                b00 = c * a00 + s * a01
                b01 = -s * a00 + c * a01
                b10 = c * a10 + s * a11
                b11 = -s * a10 + c * a11
                a00, a01, a10, a11 = b00, b01, b10, b11
            rho[i0 * dim + j0] = a00
            rho[i0 * dim + j1] = a01
            rho[i1 * dim + j0] = a10
            rho[i1 * dim + j1] = a11


@njit(cache=True)
def _k_reset(rho, dim, mask, p):
    q = 1.0 - p
    # enumerate the sub-masks of the reset sites
    subs = np.zeros(4, dtype=np.int64)
    n_sub = 0
    sub = 0
    while True:
        subs[n_sub] = sub
        n_sub += 1
        if sub == mask:
            break
        sub = (sub - mask) & mask
    for i in range(dim):
        if i & mask:
            continue
        for j in range(dim):
            if j & mask:
                continue
            tr = 0.0
            for k in range(n_sub):
                x = subs[k]
                tr += rho[(i | x) * dim + (j | x)]
            for k in range(n_sub):
                x = subs[k]
                for m in range(n_sub):
                    y = subs[m]
                    rho[(i | x) * dim + (j | y)] *= q
            rho[i * dim + j] += p * tr


@njit(cache=True)
def _k_partial_trace(rho, dim, bit):
    nd = dim // 2
    out = np.empty(nd * nd, dtype=rho.dtype)
    low = (1 << bit) - 1
    m = 1 << bit
    for a in range(nd):
        i0 = ((a >> bit) << (bit + 1)) | (a & low)
        for b in range(nd):
            j0 = ((b >> bit) << (bit + 1)) | (b & low)
            out[a * nd + b] = rho[i0 * dim + j0] + rho[(i0 | m) * dim + (j0 | m)]
    return out


@njit(cache=True)
def _k_admit(rho, dim):
    nd = dim * 2
    out = np.zeros(nd * nd, dtype=rho.dtype)
    for i in range(dim):
        for j in range(dim):
            out[i * nd + j] = rho[i * dim + j]
    return out


@njit(cache=True)
def _k_marginal(rho, dim, bit):
    m = 1 << bit
    acc = 0.0
    for i in range(dim):
        if i & m:
            acc += rho[i * dim + i]
    return acc


@njit(cache=True)
def _k_trace(rho, dim):
    acc = 0.0
    for i in range(dim):
        acc += rho[i * dim + i]
    return acc


@dataclass
class DensityWindow:
    """Real symmetric density matrix over the live sites (S-rotated frame)."""

    matrix: np.ndarray = field(default_factory=lambda: np.ones(1))
    live_sites: list = field(default_factory=list)
    recorded: dict = field(default_factory=dict)
    check_every: bool = True

    @property
    def dim(self):
        return 1 << len(self.live_sites)

    def as_matrix(self):
        return self.matrix.reshape(self.dim, self.dim)

    def bit(self, site):
        return self.live_sites.index(site)

    def admit(self, site):
        self.matrix = _k_admit(self.matrix, self.dim)
        self.live_sites.append(site)

    def excite(self, site):
        """Flip a freshly admitted site from |0> to |1>."""
        k = self.bit(site)
        m = self.as_matrix()
        if m[1 << k :: 2 << k].any() or m[:, 1 << k :: 2 << k].any():
            raise InvariantViolation("excite is only valid on a site still in |0>")
        perm = np.arange(self.dim) ^ (1 << k)
        self.matrix = np.ascontiguousarray(m[np.ix_(perm, perm)]).ravel()

    def crot(self, control, target, theta):
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        _k_crot(self.matrix, self.dim, self.bit(control), self.bit(target), c, s)
        self._check()

    def reset(self, sites, p):
        mask = 0
        for site in sites:
            mask |= 1 << self.bit(site)
        _k_reset(self.matrix, self.dim, mask, p)
        self._check()

    def expectation_n(self, site):
        return float(_k_marginal(self.matrix, self.dim, self.bit(site)))

    def record(self, site, t):
        self.recorded[(site, t)] = self.expectation_n(site)

    def retire(self, site):
        k = self.bit(site)
        self.matrix = _k_partial_trace(self.matrix, self.dim, k)
        del self.live_sites[k]
        self._check()

    def trace(self):
        return float(_k_trace(self.matrix, self.dim))

    def purity(self):
        return float(np.dot(self.matrix, self.matrix))

    def _check(self):
        if not self.check_every:
            return
        tr = self.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvariantViolation(f"trace drifted to {tr!r}")


def _series_from_records(recorded, circuit):
    lo, hi = circuit.site_range
    T = circuit.t_max + 1
    dens = np.zeros((T, hi - lo + 1))
    for (site, t), v in recorded.items():
        dens[t, site - lo] = v
    sites = np.arange(lo, hi + 1)
    nr = dens[:, sites >= circuit.origin].sum(axis=1)
    return ObservableSeries(sites=sites, density=dens, n_right=nr, origin=circuit.origin)


def run_schedule(schedule, theta, p, window=None, on_step=None):
    """Execute a reuse schedule; returns the final :class:`DensityWindow`."""
    w = window if window is not None else DensityWindow()
    for ins in schedule.instructions:
        kind = ins[0]
        if kind == "admit":
            w.admit(ins[1])
        elif kind == "excite":
            w.excite(ins[1])
        elif kind == "gate":
            w.crot(ins[3], ins[4], theta)
        elif kind == "reset":
            w.reset(ins[2], p)
        elif kind == "record":
            w.record(ins[1], ins[2])
        elif kind == "retire":
            w.retire(ins[1])
        if on_step is not None:
            on_step(ins, w)
    return w


def simulate(params: ModelParams, live_cap=DEFAULT_LIVE_CAP, check_every=True):
    """Exact densities and ``N_R(t)`` using the qubit-reuse schedule."""
    circuit = build_circuit(params)
    schedule = build_reuse_schedule(circuit)
    if schedule.max_live > live_cap:
        raise WindowTooLarge(
            f"schedule needs {schedule.max_live} live sites (cap {live_cap}) at t={params.t_max}"
        )
    w = run_schedule(schedule, params.theta, params.p, DensityWindow(check_every=check_every))
    return _series_from_records(w.recorded, circuit)


# -- brute-force oracle -----------------------------------------------------


def _crx(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    u = np.eye(4, dtype=complex)
    u[2:, 2:] = [[c, -1j * s], [-1j * s, c]]
    return u.reshape(2, 2, 2, 2)


def simulate_bruteforce(params: ModelParams, max_sites=13):
    """Same channel without reuse: the whole causal cone held as one complex matrix."""
    circuit = build_circuit(params)
    ops = _active_ops(circuit)
    sites = sorted({circuit.origin} | {s for op in ops for s in _op_sites(op)})
    n = len(sites)
    if n > max_sites:
        raise WindowTooLarge(f"cone has {n} sites (cap {max_sites})")
    pos = {s: k for k, s in enumerate(sites)}
    psi0 = np.zeros((2,) * n, dtype=complex)
    idx = [0] * n
    idx[pos[circuit.origin]] = 1
    psi0[tuple(idx)] = 1.0
    rho = np.multiply.outer(psi0, psi0.conj())
    u2 = _crx(params.theta)[1, :, 1, :]  # target block with the control set
    recorded = {}

    def marginal(site):
        k = pos[site]
        diag = np.real(np.einsum(rho.reshape(2**n, 2**n), [0, 0], [0])).reshape((2,) * n)
        return float(np.take(diag, 1, axis=k).sum())

    recorded[(circuit.origin, 0)] = marginal(circuit.origin)
    op_iter = iter(ops)
    pending = next(op_iter, None)
    for t in range(1, circuit.t_max + 1):
        while pending is not None and pending[1] == t:
            if pending[0] == "gate":
                a, b = pos[pending[3]], pos[pending[4]]
                _bf_crx(rho, n, a, b, u2)
                _bf_crx(rho, n, n + a, n + b, u2.conj())
            else:
                ks = [pos[s] for s in pending[2]]
                rho = _bf_reset(rho, n, ks, params.p)
            pending = next(op_iter, None)
        for s in sites:
            recorded[(s, t)] = marginal(s)
    return _series_from_records(recorded, circuit)


@njit(cache=True)
def _bf_pair_kernel(flat, cbit, tbit, m00, m01, m10, m11):
    for i in range(flat.size):
        if (i & cbit) and not (i & tbit):
            j = i | tbit
            a, b = flat[i], flat[j]
            flat[i] = m00 * a + m01 * b
            flat[j] = m10 * a + m11 * b


def _bf_crx(rho, n, c, t, m):
    """In place: apply ``m`` to axis ``t`` of the slab where axis ``c`` is 1."""
    top = 2 * n - 1  # axis k is bit (top - k) of the flat index
    _bf_pair_kernel(rho.reshape(-1), 1 << (top - c), 1 << (top - t),
                    m[0, 0], m[0, 1], m[1, 0], m[1, 1])


def _bf_reset(rho, n, ks, p):
    # tr over the reset sites, then re-attach them in |0...0><0...0|
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    sub = letters[:]
    for k in ks:
        sub[n + k] = sub[k]
    keep = [letters[i] for i in range(2 * n) if i not in ks and i - n not in ks]
    reduced = np.einsum("".join(sub) + "->" + "".join(keep), rho)
    idx = [slice(None)] * (2 * n)
    for k in ks:
        idx[k] = 0
        idx[n + k] = 0
    rho *= 1 - p
    rho[tuple(idx)] += p * reduced
    return rho
