"""Gadget-level trajectories of the encoded contact process on [[4,2,2]] blocks.

Block ``k`` holds sites ``2k`` (logical qubit 1) and ``2k+1`` (logical
qubit 2).  One period is

* ``crx_intra`` with control 1 then control 2 on every block (layers 1, 2),
* ``crx_inter`` on every neighbouring block pair (layers 3 and 4 fused),
* ``stab_meas`` on every block, then ``reset_00`` if a check fired or an
  injected reset is drawn.

In ``crx_inter`` block ``B`` is the left block with its qubits 2 and 3
swapped, so the gadget's first logical qubit on ``B`` is site ``2k+1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .adaptive import ShotRecord
from .code422.faults import propagate_pauli
from .code422.gadgets import Gadget, build_gadget
from .code422.pauli import UNDETECTABLE_LOGICAL, PauliString, classify_pauli
from .code422.statevector import (
    MAX_QUBITS,
    Fault,
    apply_gadget_statevector,
    encode_state,
    identify_pauli,
    kron_states,
)
from .errors import InvalidParams, TooManyQubits
from .rng import CH_INJECT, key_uniform

_B_PERM = (0, 2, 1, 3)  # crx_inter B-role qubit -> block-local qubit


def embed(g, qmap, n):
    """Relabel ``g`` onto an ``n``-qubit register through ``qmap`` (list)."""
    instrs = tuple(replace(ins, qubits=tuple(qmap[q] for q in ins.qubits)) for ins in g.instrs)
    roles = {k: tuple(qmap[q] for q in v) for k, v in g.roles.items()}
    return Gadget(g.name, n, roles, instrs, g.n_bits, dict(g.meta))


@dataclass(frozen=True)
class Layout:
    blocks: tuple  # block indices k, left to right
    site_lo: int
    origin: int

    @property
    def n_blocks(self):
        return len(self.blocks)

    @property
    def n_qubits(self):
        return 4 * self.n_blocks + 2

    @property
    def ancillas(self):
        return (4 * self.n_blocks, 4 * self.n_blocks + 1)

    def data(self, j):
        return tuple(range(4 * j, 4 * j + 4))

    def sites(self):
        return [s for k in self.blocks for s in (2 * k, 2 * k + 1)]


def layout_for(circuit):
    blocks = tuple(circuit.blocks())
    lay = Layout(blocks, circuit.site_range[0], circuit.origin)
    if lay.n_qubits > MAX_QUBITS:
        raise TooManyQubits(
            f"{lay.n_blocks} blocks need {lay.n_qubits} qubits (limit {MAX_QUBITS})")
    return lay


def period_gadgets(lay, theta):
    """Unitary gadgets of one period, embedded on the full register."""
    n = lay.n_qubits
    out = []
    for j in range(lay.n_blocks):
        for control in (1, 2):
            g = build_gadget("crx_intra", theta=theta, control=control)
            out.append(embed(g, list(lay.data(j)), n))
    g = build_gadget("crx_inter", theta=theta)
    for j in range(lay.n_blocks - 1):
        a, b = lay.data(j + 1), lay.data(j)
        out.append(embed(g, list(a) + [b[i] for i in _B_PERM], n))
    return out


def check_gadgets(lay, j):
    n = lay.n_qubits
    a0, a1 = lay.ancillas
    d = list(lay.data(j))
    stab = embed(build_gadget("stab_meas"), d + [a0, a1], n)
    reset = embed(build_gadget("reset_00"), d + [a0], n)
    return stab, reset


def initial_state(lay):
    """Ideal encoding with only the origin site active."""
    parts = []
    for k in lay.blocks:
        idx = 2 * int(lay.origin == 2 * k) + int(lay.origin == 2 * k + 1)
        parts.append(encode_state(np.eye(4)[idx]))
    parts.append(np.eye(4)[0])  # ancillas
    return kron_states(*parts)


def _parity_table(lay):
    """Per site, the +-1 eigenvalue of its logical Z on every basis index."""
    n = lay.n_qubits
    idx = np.arange(2**n)

    def bit(q):
        return (idx >> (n - 1 - q)) & 1

    out = []
    for j in range(lay.n_blocks):
        d = lay.data(j)
        out.append(bit(d[0]) ^ bit(d[2]))  # Z1 = Z Z on qubits 1, 3
        out.append(bit(d[0]) ^ bit(d[1]))  # Z2 = Z Z on qubits 1, 2
    return np.array(out, dtype=np.int8)


def site_densities(state, table):
    prob = np.abs(state) ** 2
    return table @ prob


@dataclass(frozen=True)
class NoiseParams:
    p1: float = 0.0  # depolarizing after single-qubit gates
    p2: float = 0.0  # depolarizing after two-qubit gates
    p_mem: float = 0.0  # Z on every data qubit before each gadget
    p_meas: float = 0.0  # classical flip of each measured bit

    def __post_init__(self):
        for k in ("p1", "p2", "p_mem", "p_meas"):
            v = getattr(self, k)
            if not 0.0 <= v <= 1.0:
                raise InvalidParams(f"{k}={v} outside [0, 1]")

    def is_zero(self):
        return not (self.p1 or self.p2 or self.p_mem or self.p_meas)


def sample_faults(g, noise, rng):
    """Stochastic Pauli faults for one execution of ``g``."""
    n = g.n_qubits
    faults = []
    if noise.p_mem:
        for q in g.data_qubits():
            if rng.random() < noise.p_mem:
                faults.append(Fault(-1, PauliString.single(n, q, "Z")))
    for i, ins in enumerate(g.instrs):
        if ins.op == "MZ":
            if noise.p_meas and rng.random() < noise.p_meas:
                faults.append(Fault(i, flip_bit=ins.bit))
        elif ins.op in ("I", "PREP"):
            continue
        else:
            rate = noise.p1 if len(ins.qubits) == 1 else noise.p2
            if rate and rng.random() < rate:
                combo = int(rng.integers(1, 4 ** len(ins.qubits)))
                terms = {q: "IXYZ"[(combo >> (2 * j)) & 3] for j, q in enumerate(ins.qubits)}
                faults.append(Fault(i, PauliString.on(n, {q: c for q, c in terms.items() if c != "I"})))
    return faults


def _run_one(g, state, faults, rng):
    (br,) = apply_gadget_statevector(g, state, faults, mode="sample", rng=rng)
    return br.state, br.bits


@dataclass
class PhysicalTrajectoryBackend:
    """Noisy gadget-level backend; same ``run`` contract as the synthetic one.

    ``n_right`` entries of a record are sampled from the state at each period
    without collapsing it, so they carry the correct per-period distribution
    but not the joint one across periods.
    """

    theta: float
    p1: float = 0.0
    p2: float = 0.0
    p_mem: float = 0.0
    p_meas: float = 0.0
    kind: str = "physical_trajectory"

    @property
    def noise(self):
        return NoiseParams(self.p1, self.p2, self.p_mem, self.p_meas)

    def run(self, circuit, injection, shots, seed, threads=1):
        lay = layout_for(circuit)
        inj = injection.as_array(circuit) if injection is not None else None
        table = _parity_table(lay)
        gates = period_gadgets(lay, self.theta)
        checks = [check_gadgets(lay, j) for j in range(lay.n_blocks)]
        noise = self.noise
        psi0 = initial_state(lay)
        sites = np.array(lay.sites())
        right = sites >= lay.origin
        records = []
        for shot in range(shots):
            rng = np.random.default_rng([int(seed), shot])
            psi = psi0
            events = {}
            nr = [int(right @ (table @ (np.abs(psi) ** 2) > 0.5))]
            for t in range(1, circuit.t_max + 1):
                for g in gates:
                    psi, _ = _run_one(g, psi, sample_faults(g, noise, rng), rng)
                for j, k in enumerate(lay.blocks):
                    stab, reset = checks[j]
                    psi, bits = _run_one(stab, psi, sample_faults(stab, noise, rng), rng)
                    kind = None
                    if bits[0]:
                        kind = "detected_sz"
                    elif bits[1]:
                        kind = "detected_sx"
                    elif inj is not None and key_uniform(seed, shot, t, CH_INJECT, k) < inj[t - 1, j]:
                        kind = "injected"
                    if kind is not None:
                        psi, _ = _run_one(reset, psi, sample_faults(reset, noise, rng), rng)
                        events[(k, t)] = kind
                bits = table[:, _sample_index(psi, rng)]
                nr.append(int(bits[right].sum()))
            final = {int(s): int(b) for s, b in zip(sites, bits)} if circuit.t_max else {
                int(s): int(s == lay.origin) for s in sites}
            records.append(ShotRecord(shot, int(seed), events, final, nr))
        return records


def _sample_index(psi, rng):
    prob = np.abs(psi) ** 2
    return int(min(np.searchsorted(np.cumsum(prob), rng.random() * prob.sum()), len(prob) - 1))


def exact_densities(circuit, theta, p_inject):
    """Noiseless logical densities ``{(site, t): <n>}`` with resets injected at ``p_inject``.

    Reset patterns and the reset gadget's measurement branches are summed
    depth first, so memory stays at a few statevectors.
    """
    lay = layout_for(circuit)
    table = _parity_table(lay)
    gates = period_gadgets(lay, theta)
    checks = [check_gadgets(lay, j) for j in range(lay.n_blocks)]
    sites = lay.sites()
    T = circuit.t_max
    acc = np.zeros((T + 1, len(sites)))
    acc[0] = site_densities(initial_state(lay), table)

    def period(psi, w, t):
        if t > T:
            return
        for g in gates:
            (br,) = apply_gadget_statevector(g, psi)
            psi = br.state
        for j in range(lay.n_blocks):
            (br,) = [b for b in apply_gadget_statevector(checks[j][0], psi) if b.prob > 1e-14]
            if any(br.bits):
                raise AssertionError("noiseless stabilizer check fired")
            psi = br.state
        resets(psi, w, t, 0)

    def resets(psi, w, t, j):
        if j == lay.n_blocks:
            acc[t] += w * site_densities(psi, table)
            period(psi, w, t + 1)
            return
        if p_inject < 1.0:
            resets(psi, w * (1.0 - p_inject), t, j + 1)
        if p_inject > 0.0:
            for br in apply_gadget_statevector(checks[j][1], psi):
                if br.prob > 1e-14:
                    resets(br.state, w * p_inject * br.prob, t, j + 1)

    period(initial_state(lay), 1.0, 1)
    return {(s, t): float(acc[t, i]) for t in range(T + 1) for i, s in enumerate(sites)}


# -- memory dephasing before crx_inter ---------------------------------------


def _random_logical(rng):
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    return encode_state(v / np.linalg.norm(v))


def _a_is_logical(residual):
    r = residual.restrict(tuple(range(4)))
    return classify_pauli(r).kind == UNDETECTABLE_LOGICAL


def dephasing_prediction(q, theta=math.pi):
    """Probability that block A ends with an undetectable logical error when
    each B qubit suffers Z with probability ``q`` right before ``crx_inter``."""
    g = build_gadget("crx_inter", theta=theta)
    total = 0.0
    for mask in range(1, 16):
        terms = {4 + i: "Z" for i in range(4) if mask >> i & 1}
        out = propagate_pauli(g, Fault(-1, PauliString.on(8, terms)))
        if _a_is_logical(out.residual["A"]):
            w = bin(mask).count("1")
            total += q**w * (1 - q) ** (4 - w)
    return total


def dephasing_trials(q, trials, seed=0, theta=math.pi):
    """Trajectory estimate of :func:`dephasing_prediction`.

    Each trial draws random encoded inputs, samples Z faults on B, runs the
    gadget with and without them on the statevector engine, and identifies
    the residual Pauli on A directly from the two output states.
    Returns ``(rate, standard error, hits)``.
    """
    g = build_gadget("crx_inter", theta=theta)
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(trials):
        mask = rng.random(4) < q
        if not mask.any():
            continue
        psi = np.kron(_random_logical(rng), _random_logical(rng))
        fault = Fault(-1, PauliString.on(8, {4 + i: "Z" for i in range(4) if mask[i]}))
        (clean,) = apply_gadget_statevector(g, psi)
        (dirty,) = apply_gadget_statevector(g, psi, (fault,))
        res = identify_pauli(clean.state, dirty.state, 8)
        if res is None:
            raise AssertionError("faulty output is not a Pauli image of the clean one")
        hits += _a_is_logical(res)
    rate = hits / trials
    return rate, math.sqrt(max(rate * (1 - rate), 1.0 / trials) / trials), hits
