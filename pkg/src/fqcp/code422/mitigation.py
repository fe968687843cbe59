"""Coherent-error mitigation transforms on [[4,2,2]] gadgets.

* Clifford deformation: store a block in the frame of
  ``D = I (x) I (x) H (x) SH`` so that memory ``Z`` errors on qubits 3 and 4
  surface as ``X`` and ``Y``.
* DFS relabeling: conjugate by ``X2 X3`` (logical ``X1 X2``) so the logical
  state favoured by resets lives in a decoherence-free subspace.
* Dynamical decoupling: insert the stabilizer ``XXXX`` between gadgets.
"""
import cmath
import itertools

import numpy as np

from .faults import propagate_pauli
from .gadgets import Instr, build_gadget, with_instrs
from .gates import conjugate
from .pauli import UNDETECTABLE_LOGICAL, PauliString
from .statevector import Fault, LOGICAL_BASIS, encode_state

DEFORM_QUBITS = (2, 3)

# time-ordered single-qubit layers, block-local qubit -> ops
_D_LAYER = {2: ("H",), 3: ("H", "S")}
_D_INV_LAYER = {2: ("H",), 3: ("SDG", "H")}


def clifford_deform_pauli(p, qubits=DEFORM_QUBITS, offset=0):
    """Image ``D P D^dagger`` of a Pauli under the deformation frame change."""
    out = p
    for q in qubits:
        for op in _D_LAYER[q]:
            out = conjugate(op, None, (q + offset,), out)
    return out


def _layer(table, blocks, qubits):
    instrs = []
    for _, qs in blocks:
        for local in qubits:
            for op in table[local]:
                instrs.append(Instr(op, (qs[local],), tag="deform"))
    return instrs


def clifford_deform(obj, qubits=DEFORM_QUBITS):
    """Deform a Pauli or a gadget.

    For a gadget every ``memory`` slot (an ``I`` instruction tagged
    ``memory``) is wrapped as ``D^dagger, slot, D``, so an error ``E``
    suffered in the slot reaches the rest of the circuit as ``D E D^dagger``.
    Passing ``qubits=()`` disables the deformation.
    """
    if isinstance(obj, PauliString):
        return clifford_deform_pauli(obj, qubits)
    g = obj
    new = []
    for ins in g.instrs:
        if ins.op == "I" and ins.tag == "memory":
            new += _layer(_D_INV_LAYER, g.blocks(), qubits)
            new.append(ins)
            new += _layer(_D_LAYER, g.blocks(), qubits)
        else:
            new.append(ins)
    return with_instrs(g, new, name=g.name + "_deformed", deformed=list(qubits))


def count_double_z_logical(deformed, qubits=DEFORM_QUBITS):
    """Number of the six weight-2 memory ``Z`` pairs that end undetectable-logical."""
    g = build_gadget("idle")
    if deformed:
        g = clifford_deform(g, qubits)
    slot = next(i for i, ins in enumerate(g.instrs) if ins.tag == "memory")
    count = 0
    for a, b in itertools.combinations(range(4), 2):
        fault = Fault(slot, PauliString.on(g.n_qubits, {a: "Z", b: "Z"}))
        if propagate_pauli(g, fault).kind == UNDETECTABLE_LOGICAL:
            count += 1
    return count


# -- decoherence-free relabeling ---------------------------------------------

DFS_QUBITS = (1, 2)  # physical qubits 2 and 3


def dfs_relabel(label):
    """Label in the relabeled basis of the state with old logical label ``label``."""
    return "".join("1" if c == "0" else "0" for c in label)


def dfs_basis_state(label, basis="original"):
    """Encoded 4-qubit basis state for ``label`` in the original or DFS basis."""
    if basis == "original":
        old = label
    elif basis == "dfs":
        old = dfs_relabel(label)
    else:
        raise ValueError(f"unknown basis {basis!r}")
    return encode_state(np.eye(4)[int(old, 2)])


def uniform_dephasing(theta, n=4):
    """Diagonal of ``prod_j exp(-i theta Z_j)`` over ``n`` qubits."""
    idx = np.arange(2**n)
    ones = np.array([bin(i).count("1") for i in idx])
    return np.exp(-1j * theta * (n - 2 * ones))


def dfs_phase(label, theta, basis="original"):
    """Relative phase the encoded basis state picks up under uniform dephasing.

    The state is ``(|u> + |v>)/sqrt(2)`` with ``u < v`` as bit strings; the
    return value is the phase of ``v`` divided by the phase of ``u``.
    """
    old = label if basis == "original" else dfs_relabel(label)
    u, v = sorted(LOGICAL_BASIS[old])
    d = uniform_dephasing(theta)
    psi = d * dfs_basis_state(label, basis)
    ru, rv = psi[int(u, 2)], psi[int(v, 2)]
    ph = rv / ru
    return complex(cmath.rect(1.0, cmath.phase(ph)))


def dfs_transform(g):
    """Conjugate ``g`` by ``X2 X3`` on every block."""
    layer = [Instr("X", (qs[q],), tag="dfs") for _, qs in g.blocks() for q in DFS_QUBITS]
    return with_instrs(g, layer + list(g.instrs) + layer, name=g.name + "_dfs")


# -- dynamical decoupling ----------------------------------------------------

def insert_dd(g, boundaries):
    """Insert ``XXXX`` on every block after each instruction index in ``boundaries``.

    ``-1`` means before the first instruction.  Consecutive pulses carry
    alternating phase tags ``dd+`` / ``dd-``.
    """
    bset = sorted(set(boundaries))
    for b in bset:
        if not -1 <= b < len(g.instrs):
            raise ValueError(f"boundary {b} outside instruction range")
    sign = "+"

    def pulse():
        nonlocal sign
        out = [Instr("X", (q,), tag="dd" + sign) for _, qs in g.blocks() for q in qs]
        sign = "-" if sign == "+" else "+"
        return out

    out = []
    if -1 in bset:
        out += pulse()
    for i, ins in enumerate(g.instrs):
        out.append(ins)
        if i in bset:
            out += pulse()
    return with_instrs(g, out, name=g.name + "_dd")


def dd_phases(g):
    """Phase tags of the DD pulses in instruction order (one per block pulse)."""
    tags = [ins.tag for ins in g.instrs if ins.tag in ("dd+", "dd-")]
    width = 4 * len(g.blocks())
    return [tags[i][-1] for i in range(0, len(tags), width)]
