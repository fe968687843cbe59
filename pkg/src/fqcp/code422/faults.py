"""Pauli-frame propagation through Clifford gadgets and single-fault FT checks.

The frame is propagated along the nominal branch: every classical bit is
taken to read 0 in the fault-free run, so repeat-until-success retries and
other conditioned instructions are skipped.  For ``reset_00`` this is the
accepted first attempt.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import NotClifford
from .gates import conjugate, is_clifford_op
from .pauli import (
    BENIGN,
    CLASSES,
    DETECTABLE,
    DETECTABLE_LOGICAL,
    UNDETECTABLE_LOGICAL,
    PauliString,
    classify_pauli,
)
from .statevector import Fault

PAULI_LETTERS = "XYZ"


@dataclass(frozen=True)
class FaultOutcome:
    fault: Fault
    residual: dict  # block name -> 4-qubit PauliString
    flips: tuple  # measured bits flipped relative to the fault-free run
    blocks: dict  # block name -> Classification
    flagged: bool  # some detection bit fired
    readout_flip: bool  # logical readout bits flipped consistently
    kind: str

    def to_dict(self):
        return {
            "fault": self.fault.describe(),
            "residual": {k: v.label() for k, v in self.residual.items()},
            "flips": list(self.flips),
            "blocks": {k: c.kind for k, c in self.blocks.items()},
            "flagged": self.flagged,
            "readout_flip": self.readout_flip,
            "kind": self.kind,
        }


def _nominal_active(g):
    return [ins.cond is None or ins.cond[1] == 0 for ins in g.instrs]


def _check_clifford(g):
    active = _nominal_active(g)
    for i, ins in enumerate(g.instrs):
        if active[i] and not is_clifford_op(ins.op, ins.angle):
            raise NotClifford(f"instruction {i} ({ins.text()}) is not Clifford")


def _frame_through(g, frame, start, flips):
    """Push ``frame`` through instructions ``start..end``; record bit flips."""
    active = _nominal_active(g)
    for i in range(start, len(g.instrs)):
        ins = g.instrs[i]
        if not active[i]:
            continue
        if ins.op == "MZ":
            q = ins.qubits[0]
            if (frame.x >> q) & 1:
                flips[ins.bit] ^= 1
            frame = PauliString(frame.n, frame.x, frame.z & ~(1 << q),
                                frame.k - ((frame.x & frame.z) >> q & 1))
        elif ins.op == "PREP":
            q = ins.qubits[0]
            y = (frame.x & frame.z) >> q & 1
            frame = PauliString(frame.n, frame.x & ~(1 << q), frame.z & ~(1 << q), frame.k - y)
        elif ins.op == "I":
            continue
        else:
            frame = conjugate(ins.op, ins.angle, ins.qubits, frame)
    return frame


def classify_outcome(g, fault, residual_full, flips):
    residual = {}
    blocks = {}
    for name, qs in g.blocks():
        r = residual_full.restrict(qs)
        residual[name] = r
        blocks[name] = classify_pauli(r, g.logicals(name))
    detect = set(g.meta.get("detect_bits", ()))
    flagged = any(flips[b] for b in detect)
    for group in g.meta.get("parity_groups", ()):
        if sum(flips[b] for b in group) % 2:
            flagged = True
    logical_bits = g.meta.get("logical_bits", ())
    readout_flip = bool(logical_bits) and all(flips[b] for b in logical_bits)
    kinds = {c.kind for c in blocks.values()}
    any_logical = readout_flip or any(c.logical for c in blocks.values())
    if not flagged and (UNDETECTABLE_LOGICAL in kinds or readout_flip):
        kind = UNDETECTABLE_LOGICAL
    elif flagged or any(c.detectable for c in blocks.values()):
        kind = DETECTABLE_LOGICAL if any_logical else DETECTABLE
    else:
        kind = BENIGN
    return FaultOutcome(fault, residual, tuple(i for i, f in enumerate(flips) if f),
                        blocks, flagged, readout_flip, kind)


def propagate_pauli(g, fault):
    """Propagate one fault to the end of ``g`` and classify what is left."""
    _check_clifford(g)
    flips = [0] * g.n_bits
    if fault.flip_bit is not None:
        flips[fault.flip_bit] ^= 1
    frame = fault.pauli if fault.pauli is not None else PauliString(g.n_qubits)
    if frame.n != g.n_qubits:
        raise ValueError("fault Pauli must span the gadget register")
    frame = _frame_through(g, frame, fault.after + 1, flips)
    return classify_outcome(g, fault, frame, flips)


def enumerate_faults(g, entry=True):
    """Single-fault locations of the circuit-level model used by :func:`ft_check`.

    After every gate: each non-identity Pauli on its support.  After a
    preparation: X on the prepared qubit.  After a measurement: a flip of its
    bit.  With ``entry``: every single-qubit Pauli on each data qubit before
    the first instruction (memory errors on the incoming blocks).
    """
    n = g.n_qubits
    active = [ins.cond is None or ins.cond[1] == 0 for ins in g.instrs]
    out = []
    if entry:
        for q in g.data_qubits():
            for letter in PAULI_LETTERS:
                out.append(Fault(-1, PauliString.single(n, q, letter)))
    for i, ins in enumerate(g.instrs):
        if not active[i]:
            continue
        if ins.op == "PREP":
            out.append(Fault(i, PauliString.single(n, ins.qubits[0], "X")))
        elif ins.op == "MZ":
            out.append(Fault(i, flip_bit=ins.bit))
        elif ins.op == "I":
            continue
        else:
            qs = ins.qubits
            for combo in range(1, 4 ** len(qs)):
                terms = {}
                for j, q in enumerate(qs):
                    letter = "I" + PAULI_LETTERS
                    ch = letter[(combo >> (2 * j)) & 3]
                    if ch != "I":
                        terms[q] = ch
                out.append(Fault(i, PauliString.on(n, terms)))
    return out


@dataclass
class FTReport:
    gadget: str
    counts: dict
    n_faults: int
    witnesses: list = field(default_factory=list)

    @property
    def fault_tolerant(self):
        return not self.witnesses

    def to_dict(self):
        return {
            "gadget": self.gadget,
            "fault_tolerant": self.fault_tolerant,
            "n_faults": self.n_faults,
            "counts": dict(self.counts),
            "witnesses": [w.to_dict() for w in self.witnesses],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def ft_check(g, entry=True):
    """Classify every single fault; FT iff none is an unflagged undetectable logical."""
    _check_clifford(g)
    counts = {c: 0 for c in CLASSES}
    witnesses = []
    faults = enumerate_faults(g, entry=entry)
    for f in faults:
        o = propagate_pauli(g, f)
        counts[o.kind] += 1
        if o.kind == UNDETECTABLE_LOGICAL:
            witnesses.append(o)
    return FTReport(g.name, counts, len(faults), witnesses)


def outcome_from_statevector(g, fault, data_inputs, rng=None):
    """Classify ``fault`` by running ``g`` twice on the statevector engine.

    ``data_inputs`` maps block name to a 4-qubit input state; ancillas start
    in ``|0>``.  The fault-free and faulty runs must each end on a single
    branch.  The data residual is the Pauli relating the two output data
    states (found exhaustively), so this route shares no propagation code
    with :func:`propagate_pauli`.
    """
    from .statevector import apply_gadget_statevector, identify_pauli, reduce_to
    import numpy as np

    n = g.n_qubits
    data = g.data_qubits()
    full = np.ones(1, dtype=complex)
    for name, _ in g.blocks():
        full = np.kron(full, data_inputs[name])
    # data qubits are the low indices 0..len(data)-1 in every gadget
    anc = n - len(data)
    full = np.kron(full, np.eye(2**anc)[0])
    psi = full

    def run(faults):
        brs = [b for b in apply_gadget_statevector(g, psi, faults) if b.prob > 1e-12]
        b = brs[0]
        out = reduce_to(b.state, n, data)
        # resets of data qubits split into branches that end in the same state
        for other in brs[1:]:
            same = abs(abs(np.vdot(out, reduce_to(other.state, n, data))) - 1) < 1e-9
            if other.bits != b.bits or not same:
                raise ValueError("gadget run is not deterministic on this input")
        return out, b.bits

    clean, bits0 = run(())
    dirty, bits1 = run((fault,))
    p = identify_pauli(clean, dirty, len(data))
    if p is None:
        raise ValueError("faulty output is not a Pauli image of the clean output")
    flips = [a ^ b for a, b in zip(bits0, bits1)]
    return classify_outcome(g, fault, p.embed(n, data), flips)
