"""Physical gate matrices and Clifford conjugation tables.

Two-qubit matrices use the first listed qubit as the most significant index.
``XX(phi) = exp(-i phi X(x)X / 2)`` and likewise for ``ZZ``.
"""
import functools
import math

import numpy as np

from ..errors import NotClifford
from .pauli import PauliString, decompose_pauli

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_S = np.diag([1, 1j])

ONE_QUBIT = {"I", "H", "S", "SDG", "X", "Y", "Z"}
TWO_QUBIT = {"CX", "CZ", "XX", "ZZ"}
ROTATIONS = {"XX", "ZZ"}
NON_UNITARY = {"PREP", "MZ"}
ALL_OPS = ONE_QUBIT | TWO_QUBIT | NON_UNITARY


def _fixed_1q(op):
    return {"I": _I2, "H": _H, "S": _S, "SDG": _S.conj().T, "X": _X, "Y": _Y, "Z": _Z}[op]


@functools.lru_cache(maxsize=256)
def gate_matrix(op, angle=None):
    if op in ONE_QUBIT:
        return _fixed_1q(op)
    if op == "CX":
        m = np.eye(4, dtype=complex)
        m[2:, 2:] = _X
        return m
    if op == "CZ":
        return np.diag([1, 1, 1, -1]).astype(complex)
    if op in ROTATIONS:
        p = np.kron(_X, _X) if op == "XX" else np.kron(_Z, _Z)
        return math.cos(angle / 2) * np.eye(4) - 1j * math.sin(angle / 2) * p
    raise ValueError(f"no matrix for {op}")


def is_clifford_angle(angle, tol=1e-9):
    r = (angle / (math.pi / 2)) % 1.0
    return min(r, 1.0 - r) < tol


def is_clifford_op(op, angle=None):
    if op in ROTATIONS:
        return is_clifford_angle(angle)
    return True


def _angle_key(angle):
    return None if angle is None else round(float(angle), 12)


@functools.lru_cache(maxsize=8192)
def _conjugate_local(op, angle, nq, x, z, k):
    u = gate_matrix(op, angle)
    p = PauliString(nq, x, z, k).to_matrix()
    return decompose_pauli(u @ p @ u.conj().T, nq)


def conjugate(op, angle, qubits, pauli):
    """``U P U^dagger`` for the gate ``op`` acting on ``qubits`` of ``pauli``."""
    if not is_clifford_op(op, angle):
        raise NotClifford(f"{op}({angle}) is not Clifford")
    local = pauli.restrict(qubits)
    if local.is_identity():
        return pauli
    img = _conjugate_local(op, _angle_key(angle), len(qubits), local.x, local.z, local.k)
    # swap the local factor of ``pauli`` for its image; restrict() moved the
    # Y-phases of the local factor into ``local.k``, so undo that bookkeeping
    mask = 0
    for q in qubits:
        mask |= 1 << q
    y_local = bin(pauli.x & pauli.z & mask).count("1")
    rest = PauliString(pauli.n, pauli.x & ~mask, pauli.z & ~mask, pauli.k - y_local)
    placed = img.embed(pauli.n, qubits)
    # rest and placed act on disjoint qubits so the product phase is additive
    return PauliString(pauli.n, rest.x | placed.x, rest.z | placed.z, rest.k + img.k)
