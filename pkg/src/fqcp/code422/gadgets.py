"""Physical-level circuits realizing logical operations on [[4,2,2]] blocks.

Qubits inside one block are numbered 0..3 here (physical qubits 1..4 in the
usual notation).  Every gadget names its data blocks through ``roles`` so the
fault checker and the mitigation transforms know what to classify or wrap.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from ..errors import UnknownKind
from .gates import ALL_OPS, ROTATIONS, TWO_QUBIT, is_clifford_op
from .pauli import Z_LOGICALS

BLOCK_A = (0, 1, 2, 3)
BLOCK_B = (4, 5, 6, 7)


@dataclass(frozen=True)
class Instr:
    op: str
    qubits: tuple
    angle: float | None = None
    bit: int | None = None  # destination of MZ
    cond: tuple | None = None  # (bit, value): run only if bits[bit] == value
    tag: str = ""

    def arity(self):
        return len(self.qubits)

    def text(self):
        head = f"[c{self.cond[0]}=={self.cond[1]}] " if self.cond else ""
        args = " ".join(f"q{q}" for q in self.qubits)
        s = f"{head}{self.op} {args}"
        if self.angle is not None:
            s += f" ({self.angle:.12g})"
        if self.bit is not None:
            s += f" -> c{self.bit}"
        if self.tag:
            s += f"  # {self.tag}"
        return s


@dataclass(frozen=True)
class Gadget:
    name: str
    n_qubits: int
    roles: dict  # "A"/"B" -> data qubits of a block, "anc" -> ancillas
    instrs: tuple
    n_bits: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        defined = set()
        for i, ins in enumerate(self.instrs):
            if ins.op not in ALL_OPS:
                raise ValueError(f"instruction {i}: unknown op {ins.op}")
            want = 2 if ins.op in TWO_QUBIT else 1
            if ins.op == "I":
                want = len(ins.qubits) or 1
            if len(ins.qubits) != want or len(set(ins.qubits)) != len(ins.qubits):
                raise ValueError(f"instruction {i}: bad qubit list {ins.qubits}")
            if any(not 0 <= q < self.n_qubits for q in ins.qubits):
                raise ValueError(f"instruction {i}: qubit out of range")
            if ins.op in ROTATIONS and (ins.angle is None or not math.isfinite(ins.angle)):
                raise ValueError(f"instruction {i}: rotation needs a finite angle")
            if ins.cond is not None and ins.cond[0] not in defined:
                raise ValueError(f"instruction {i}: condition on undefined bit {ins.cond[0]}")
            if ins.op == "MZ":
                if ins.bit is None or not 0 <= ins.bit < self.n_bits or ins.bit in defined:
                    raise ValueError(f"instruction {i}: measurement bit invalid or reused")
                defined.add(ins.bit)

    # -- queries -----------------------------------------------------------

    def blocks(self):
        return [(name, self.roles[name]) for name in ("A", "B") if name in self.roles]

    def data_qubits(self):
        return [q for _, qs in self.blocks() for q in qs]

    def clifford_mask(self):
        return [is_clifford_op(ins.op, ins.angle) for ins in self.instrs]

    def is_clifford(self):
        return all(self.clifford_mask())

    def clifford_at_pi(self):
        """Indices of instructions that are Clifford once the gadget angle is pi."""
        return [i for i, (ins, ok) in enumerate(zip(self.instrs, self.clifford_mask()))
                if ok or ins.tag == "theta"]

    def logicals(self, block):
        return self.meta.get("logicals", {}).get(block)

    def netlist(self):
        lines = [f"gadget {self.name}", f"qubits {self.n_qubits}", f"bits {self.n_bits}"]
        for role, qs in sorted(self.roles.items()):
            lines.append(f"role {role} " + " ".join(f"q{q}" for q in qs))
        for i, ins in enumerate(self.instrs):
            lines.append(f"{i:4d}: {ins.text()}")
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {
            "name": self.name,
            "n_qubits": self.n_qubits,
            "n_bits": self.n_bits,
            "roles": {k: list(v) for k, v in self.roles.items()},
            "instrs": [
                {k: v for k, v in (("op", i.op), ("qubits", list(i.qubits)), ("angle", i.angle),
                                   ("bit", i.bit), ("cond", list(i.cond) if i.cond else None),
                                   ("tag", i.tag or None)) if v is not None}
                for i in self.instrs
            ],
            "meta": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.meta.items()},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _i(op, *qubits, angle=None, bit=None, cond=None, tag=""):
    return Instr(op, tuple(qubits), angle, bit, cond, tag)


# -- builders -----------------------------------------------------------------

def _stab_meas_instrs(d, a0, a1, b0, b1):
    d1, d2, d3, d4 = d
    return [
        _i("PREP", a0), _i("PREP", a1),
        _i("H", a1),
        _i("CX", a1, d1),
        _i("CX", d1, a0),
        _i("CX", d2, a0),
        _i("CX", a1, d2),
        _i("CX", a1, d3),
        _i("CX", d3, a0),
        _i("CX", d4, a0),
        _i("CX", a1, d4),
        _i("H", a1),
        _i("MZ", a0, bit=b0), _i("MZ", a1, bit=b1),
    ]


def _stab_meas():
    instrs = _stab_meas_instrs(BLOCK_A, 4, 5, 0, 1)
    return Gadget("stab_meas", 6, {"A": BLOCK_A, "anc": (4, 5)}, tuple(instrs), 2,
                  {"detect_bits": (0, 1), "syndrome_bits": {"s_z": 0, "s_x": 1}})


def _reset_attempt(bit, cond):
    d1, d2, d3, d4 = BLOCK_A
    anc = 4
    body = [
        _i("PREP", d1), _i("PREP", d2), _i("PREP", d3), _i("PREP", d4), _i("PREP", anc),
        _i("H", d2),
        _i("CX", d2, d3),
        _i("CX", d2, d1),
        _i("CX", d3, d4),
        _i("CX", d4, anc),
        _i("CX", d1, anc),
        _i("MZ", anc, bit=bit),
    ]
    return [replace(ins, cond=cond) for ins in body]


def _reset_00():
    first = _reset_attempt(0, None)
    second = _reset_attempt(1, (0, 1))
    return Gadget(
        "reset_00", 5, {"A": BLOCK_A, "anc": (4,)}, tuple(first + second), 2,
        {
            "detect_bits": (0, 1),
            "attempt_bits": (0, 1),
            "logicals": {"A": Z_LOGICALS},
            "accepted_branch": len(first),  # instructions of the first attempt
        },
    )


def _meas(which):
    d1, d2, d3, d4 = BLOCK_A
    a0, a1 = 4, 5
    pairs = ((d1, d3), (d2, d4)) if which == 1 else ((d1, d2), (d3, d4))
    instrs = [
        _i("PREP", a0), _i("PREP", a1),
        _i("CX", pairs[0][0], a0), _i("CX", pairs[0][1], a0), _i("MZ", a0, bit=0),
        _i("CX", pairs[1][0], a1), _i("CX", pairs[1][1], a1), _i("MZ", a1, bit=1),
    ]
    instrs += _stab_meas_instrs(BLOCK_A, a0, a1, 2, 3)
    return Gadget(
        f"meas_Z{which}", 6, {"A": BLOCK_A, "anc": (a0, a1)}, tuple(instrs), 4,
        {"detect_bits": (2, 3), "parity_groups": ((0, 1),), "logical_bits": (0, 1),
         "logical": f"Z{which}",
         # the measured Z logical acts trivially on the post-measurement state,
         # so commutation with its conjugate X logical is not a logical error
         "logicals": {"A": tuple(k for k in ("Z1", "Z2", "X1", "X2") if k != f"X{which}")}},
    )


def _crx_intra(control, theta):
    d1, d2, d3, d4 = BLOCK_A
    h = theta / 2
    if control == 2:
        instrs = [
            _i("S", d3), _i("S", d4),
            _i("XX", d1, d2, angle=h, tag="theta"), _i("XX", d3, d4, angle=h, tag="theta"),
            _i("SDG", d3), _i("SDG", d4),
        ]
    elif control == 1:
        instrs = [
            _i("XX", d1, d3, angle=h, tag="theta"),
            _i("S", d2), _i("S", d4),
            _i("XX", d2, d4, angle=h, tag="theta"),
            _i("SDG", d2), _i("SDG", d4),
        ]
    else:
        raise UnknownKind(f"crx_intra control must be 1 or 2, got {control}")
    return Gadget(f"crx_intra_c{control}", 4, {"A": BLOCK_A}, tuple(instrs), 0,
                  {"theta": theta, "control": control})


def _crx_inter(theta):
    a1, a2, a3, _ = BLOCK_A
    b1, b2, b3, _ = BLOCK_B
    h = theta / 2

    def czs():
        return [_i("CZ", a1, b1), _i("CZ", a2, b3), _i("CZ", a3, b2)]

    instrs = (
        [_i("XX", a1, a2, angle=h, tag="theta")]
        + czs()
        + [_i("XX", a1, a2, angle=-h, tag="theta"), _i("XX", b1, b2, angle=-h, tag="theta")]
        + czs()
        + [_i("XX", b1, b2, angle=h, tag="theta")]
    )
    return Gadget("crx_inter", 8, {"A": BLOCK_A, "B": BLOCK_B}, tuple(instrs), 0,
                  {"theta": theta})


def _idle(blocks=1):
    roles = {"A": BLOCK_A} if blocks == 1 else {"A": BLOCK_A, "B": BLOCK_B}
    qs = tuple(q for name in ("A", "B") if name in roles for q in roles[name])
    return Gadget("idle", 4 * blocks, roles, (_i("I", *qs, tag="memory"),), 0, {})


def build_gadget(kind, theta=None, control=None, blocks=1):
    """Build one gadget by name.

    ``kind`` is one of ``stab_meas``, ``reset_00``, ``meas_Z1``, ``meas_Z2``,
    ``crx_intra`` (needs ``control`` and ``theta``), ``crx_inter`` (needs
    ``theta``) or ``idle`` (a single memory slot, used for the identity check
    and for Clifford deformation).
    """
    if kind == "stab_meas":
        return _stab_meas()
    if kind == "reset_00":
        return _reset_00()
    if kind in ("meas_Z1", "meas_Z2"):
        return _meas(int(kind[-1]))
    if kind in ("crx_intra", "crx_inter"):
        if theta is None:
            raise UnknownKind(f"{kind} needs theta")
        if kind == "crx_intra":
            return _crx_intra(control, float(theta))
        return _crx_inter(float(theta))
    if kind == "idle":
        return _idle(blocks)
    raise UnknownKind(f"unknown gadget kind {kind!r}")


def accepted_branch(g):
    """Drop instructions conditioned on a retry (the fault-free path of ``reset_00``)."""
    keep = [ins for ins in g.instrs if ins.cond is None]
    return Gadget(g.name + "_accepted", g.n_qubits, g.roles, tuple(keep),
                  g.n_bits, dict(g.meta))


def compose(*gadgets, name=None):
    """Run gadgets back to back on the same register.

    Classical bits are renumbered consecutively.  ``meta["boundaries"]``
    lists the instruction indices after which one gadget ends, i.e. the
    points where every block is back in the code space.
    """
    if not gadgets:
        raise ValueError("nothing to compose")
    n = max(g.n_qubits for g in gadgets)
    roles = {}
    for g in gadgets:
        for k, v in g.roles.items():
            if k in roles and roles[k] != v and k != "anc":
                raise ValueError(f"role {k} differs between gadgets")
            roles[k] = tuple(sorted(set(roles.get(k, ())) | set(v)))
    instrs, boundaries = [], []
    offset = 0
    for g in gadgets:
        for ins in g.instrs:
            bit = None if ins.bit is None else ins.bit + offset
            cond = None if ins.cond is None else (ins.cond[0] + offset, ins.cond[1])
            instrs.append(replace(ins, bit=bit, cond=cond))
        offset += g.n_bits
        boundaries.append(len(instrs) - 1)
    return Gadget(name or "+".join(g.name for g in gadgets), n, roles, tuple(instrs), offset,
                  {"boundaries": tuple(boundaries[:-1])})


def with_instrs(g, instrs, name=None, **meta):
    m = dict(g.meta)
    m.pop("boundaries", None)  # instruction indices are no longer valid
    m.update(meta)
    return Gadget(name or g.name, g.n_qubits, g.roles, tuple(instrs), g.n_bits, m)


__all__ = [
    "Instr", "Gadget", "build_gadget", "compose", "accepted_branch", "with_instrs", "BLOCK_A", "BLOCK_B",
]
