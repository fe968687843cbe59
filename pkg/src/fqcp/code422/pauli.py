"""Pauli strings in symplectic form and [[4,2,2]] block classification.

A :class:`PauliString` on ``n`` qubits stores bit masks ``x`` and ``z`` (bit
``j`` is qubit ``j``) and an exponent ``k`` so that the operator is
``i**k * prod_j X_j**x_j Z_j**z_j`` with X written left of Z on each qubit.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

_PHASE_LABELS = {0: "+", 1: "+i", 2: "-", 3: "-i"}
_PHASE_VALUES = {0: 1, 1: 1j, 2: -1, 3: -1j}


def _popcount(v):
    return bin(v).count("1")


@dataclass(frozen=True)
class PauliString:
    n: int
    x: int = 0
    z: int = 0
    k: int = 0

    def __post_init__(self):
        object.__setattr__(self, "k", self.k % 4)

    # -- construction ------------------------------------------------------

    @classmethod
    def identity(cls, n):
        return cls(n)

    @classmethod
    def from_label(cls, label):
        """Parse ``"XIZY"``, ``"-XX"`` or ``"+iZ"``; character ``j`` is qubit ``j``."""
        k = 0
        for prefix, val in (("+i", 1), ("-i", 3), ("i", 1), ("+", 0), ("-", 2)):
            if label.startswith(prefix):
                k = val
                label = label[len(prefix):]
                break
        x = z = 0
        for j, ch in enumerate(label):
            if ch in "XY":
                x |= 1 << j
            if ch in "ZY":
                z |= 1 << j
            if ch == "Y":
                k += 1  # Y = i X Z
            if ch not in "IXYZ_":
                raise ValueError(f"bad Pauli character {ch!r}")
        return cls(len(label), x, z, k)

    @classmethod
    def single(cls, n, qubit, letter):
        s = ["I"] * n
        s[qubit] = letter
        return cls.from_label("".join(s))

    @classmethod
    def on(cls, n, terms):
        """Product of single-qubit letters, e.g. ``on(4, {0: "Z", 2: "Z"})``."""
        s = ["I"] * n
        for q, letter in terms.items():
            s[q] = letter
        return cls.from_label("".join(s))

    # -- algebra -----------------------------------------------------------

    @property
    def phase(self):
        """Overall phase in front of the letter string (Y counted as a letter)."""
        return _PHASE_VALUES[(self.k - _popcount(self.x & self.z)) % 4]

    def letters(self):
        out = []
        for j in range(self.n):
            xb, zb = (self.x >> j) & 1, (self.z >> j) & 1
            out.append("IXZY"[xb + 2 * zb])
        return "".join(out)

    def label(self):
        kk = (self.k - _popcount(self.x & self.z)) % 4
        return _PHASE_LABELS[kk] + self.letters()

    def __repr__(self):
        return f"PauliString({self.label()!r})"

    def weight(self):
        return _popcount(self.x | self.z)

    def support(self):
        return [j for j in range(self.n) if ((self.x | self.z) >> j) & 1]

    def is_identity(self):
        return self.x == 0 and self.z == 0

    def __mul__(self, other):
        if self.n != other.n:
            raise ValueError("qubit count mismatch")
        # (X^x1 Z^z1)(X^x2 Z^z2) = (-1)^{z1.x2} X^{x1+x2} Z^{z1+z2}
        sign = 2 * (_popcount(self.z & other.x) % 2)
        return PauliString(self.n, self.x ^ other.x, self.z ^ other.z, self.k + other.k + sign)

    def commutes(self, other):
        return (_popcount(self.x & other.z) + _popcount(self.z & other.x)) % 2 == 0

    def equal_up_to_phase(self, other):
        return self.n == other.n and self.x == other.x and self.z == other.z

    def restrict(self, qubits):
        """Restriction to ``qubits`` (phase of Y letters kept, overall sign dropped)."""
        x = z = 0
        k = 0
        for new, old in enumerate(qubits):
            if (self.x >> old) & 1:
                x |= 1 << new
            if (self.z >> old) & 1:
                z |= 1 << new
            if ((self.x & self.z) >> old) & 1:
                k += 1
        return PauliString(len(qubits), x, z, k)

    def embed(self, n, qubits):
        """Place this string on ``qubits`` of an ``n``-qubit register."""
        x = z = 0
        for old, new in enumerate(qubits):
            if (self.x >> old) & 1:
                x |= 1 << new
            if (self.z >> old) & 1:
                z |= 1 << new
        return PauliString(n, x, z, self.k)

    def to_matrix(self):
        return _pauli_matrix(self.n, self.x, self.z, self.k)

    def apply(self, state):
        """Act on a statevector with qubit ``j`` on tensor axis ``j``."""
        psi = np.asarray(state, dtype=complex).reshape((2,) * self.n)
        for j in range(self.n):
            xb, zb = (self.x >> j) & 1, (self.z >> j) & 1
            if zb:
                psi = psi.copy()
                idx = [slice(None)] * self.n
                idx[j] = 1
                psi[tuple(idx)] *= -1
            if xb:
                psi = np.flip(psi, axis=j)
        return (_PHASE_VALUES[self.k] * psi).reshape(-1)


@functools.lru_cache(maxsize=4096)
def _pauli_matrix(n, x, z, k):
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    Z = np.array([[1, 0], [0, -1]], dtype=complex)
    I = np.eye(2, dtype=complex)
    # qubit 0 is the most significant tensor factor (axis 0)
    m = np.ones((1, 1), dtype=complex)
    for j in range(n):
        f = (X if (x >> j) & 1 else I) @ (Z if (z >> j) & 1 else I)
        m = np.kron(m, f)
    return _PHASE_VALUES[k % 4] * m


def decompose_pauli(matrix, n):
    """Return the PauliString equal to ``matrix`` (raises if it is not one)."""
    dim = 2**n
    m = np.asarray(matrix).reshape(dim, dim)
    col = m[:, 0]
    nz = np.flatnonzero(np.abs(col) > 1e-9)
    if len(nz) != 1:
        raise ValueError("matrix is not a Pauli operator")
    # row index bit (n-1-j) <-> qubit j
    xi = int(nz[0])
    x = 0
    for j in range(n):
        if (xi >> (n - 1 - j)) & 1:
            x |= 1 << j
    base = PauliString(n, x, 0, 0).to_matrix()
    diag = np.diag(base.conj().T @ m)
    z = 0
    for j in range(n):
        idx = 1 << (n - 1 - j)
        if abs(diag[idx] / diag[0] + 1) < 1e-9:
            z |= 1 << j
    for kk in range(4):
        trial = PauliString(n, x, z, kk)
        if np.allclose(trial.to_matrix(), m, atol=1e-9):
            return trial
    raise ValueError("matrix is not a Pauli operator")


# -- [[4,2,2]] block ---------------------------------------------------------

BLOCK = 4
S_X = PauliString.from_label("XXXX")
S_Z = PauliString.from_label("ZZZZ")
# canonical logical representatives
LOGICALS = {
    "Z1": PauliString.from_label("ZIZI"),
    "Z2": PauliString.from_label("ZZII"),
    "X1": PauliString.from_label("XXII"),
    "X2": PauliString.from_label("XIXI"),
}
Z_LOGICALS = ("Z1", "Z2")

BENIGN = "benign"
DETECTABLE = "detectable"
UNDETECTABLE_LOGICAL = "undetectable-logical"
DETECTABLE_LOGICAL = "detectable-logical"
CLASSES = (BENIGN, DETECTABLE, UNDETECTABLE_LOGICAL, DETECTABLE_LOGICAL)


def syndrome(p):
    """``(s_x, s_z)``: anticommutation with ``S_X`` and with ``S_Z``."""
    if p.n != BLOCK:
        raise ValueError("syndrome expects a single 4-qubit block")
    return int(not p.commutes(S_X)), int(not p.commutes(S_Z))


@dataclass(frozen=True)
class Classification:
    kind: str
    syndrome: tuple
    pattern: dict  # logical name -> 1 if anticommutes

    @property
    def detectable(self):
        return self.syndrome != (0, 0)

    @property
    def logical(self):
        return any(self.pattern.values())

    def flips(self):
        """Logical representatives whose measurement this Pauli would flip."""
        return sorted(name for name, bit in self.pattern.items() if bit)


def classify_pauli(p, logicals=None):
    """Classify a block Pauli against the stabilizers and logical representatives.

    ``logicals`` restricts which representatives count; for a freshly prepared
    ``|00>`` block only the ``Z`` logicals matter, since ``Z1``/``Z2`` errors
    act trivially on that state.
    """
    names = tuple(LOGICALS) if logicals is None else tuple(logicals)
    syn = syndrome(p)
    pattern = {name: int(not p.commutes(LOGICALS[name])) for name in names}
    detectable = syn != (0, 0)
    logical = any(pattern.values())
    if detectable:
        kind = DETECTABLE_LOGICAL if logical else DETECTABLE
    else:
        kind = UNDETECTABLE_LOGICAL if logical else BENIGN
    return Classification(kind, syn, pattern)


def block_paulis():
    """All 256 phase-free Paulis on one block."""
    return [PauliString(BLOCK, x, z) for x in range(16) for z in range(16)]
