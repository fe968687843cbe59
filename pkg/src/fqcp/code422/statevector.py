"""Exact statevector execution of gadgets with Pauli fault injection.

State layout: a flat complex vector of length ``2**n`` viewed as an
``n``-axis tensor in C order, qubit ``j`` on axis ``j`` (qubit 0 is the most
significant bit of the flat index).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NotNormalized, TooManyQubits
from .gates import gate_matrix
from .pauli import PauliString

MAX_QUBITS = 20
PRUNE = 1e-14

LOGICAL_BASIS = {
    "00": ("0000", "1111"),
    "01": ("0101", "1010"),
    "10": ("0011", "1100"),
    "11": ("0110", "1001"),
}


def basis_state(bits):
    """Computational basis vector for a bit string, character ``j`` = qubit ``j``."""
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


def encode_state(logical, tol=1e-10):
    """Map a 2-qubit logical vector (index ``2*a + b``) into the code space."""
    c = np.asarray(logical, dtype=complex).reshape(-1)
    if c.shape != (4,):
        raise ValueError("logical state must have 4 amplitudes")
    norm = np.vdot(c, c).real
    if abs(norm - 1.0) > tol:
        raise NotNormalized(f"logical state has norm^2 {norm}")
    out = np.zeros(16, dtype=complex)
    for idx, label in enumerate(("00", "01", "10", "11")):
        for s in LOGICAL_BASIS[label]:
            out[int(s, 2)] += c[idx] / math.sqrt(2)
    return out


def encoded_basis():
    """4x16 matrix whose rows are the encoded basis states."""
    return np.array([encode_state(np.eye(4)[i]) for i in range(4)])


def decode_state(state):
    """Logical amplitudes of a 4-qubit state (projection onto the code space)."""
    return encoded_basis().conj() @ np.asarray(state).reshape(-1)


def kron_states(*states):
    out = np.ones(1, dtype=complex)
    for s in states:
        out = np.kron(out, s)
    return out


def expectation(state, pauli):
    return np.vdot(state, pauli.apply(state)).real


def apply_matrix(state, n, matrix, qubits):
    psi = np.asarray(state).reshape((2,) * n)
    k = len(qubits)
    psi = np.moveaxis(psi, qubits, range(k))
    shape = psi.shape
    psi = (matrix @ psi.reshape(2**k, -1)).reshape(shape)
    return np.moveaxis(psi, range(k), qubits).reshape(-1)


def _project(state, n, q, value):
    psi = np.asarray(state).reshape((2,) * n).copy()
    idx = [slice(None)] * n
    idx[q] = 1 - value
    psi[tuple(idx)] = 0
    return psi.reshape(-1)


def _flip(state, n, q):
    return np.flip(np.asarray(state).reshape((2,) * n), axis=q).reshape(-1)


@dataclass(frozen=True)
class Fault:
    """A Pauli inserted after instruction ``after`` (-1 = before the gadget),
    or a flip of classical bit ``flip_bit`` right after it is measured."""

    after: int
    pauli: PauliString | None = None
    flip_bit: int | None = None

    def describe(self):
        if self.flip_bit is not None:
            return {"after": self.after, "flip_bit": self.flip_bit}
        return {"after": self.after, "pauli": self.pauli.label()}


@dataclass
class Branch:
    prob: float
    state: np.ndarray
    bits: tuple

    def data_state(self, qubits, n):
        """Amplitudes on ``qubits`` when every other qubit is in a basis state."""
        return reduce_to(self.state, n, qubits)


def reduce_to(state, n, keep):
    """Slice a product state onto ``keep``; the other qubits must be classical."""
    psi = np.asarray(state).reshape((2,) * n)
    rest = [q for q in range(n) if q not in keep]
    psi = np.moveaxis(psi, list(keep) + rest, range(n)).reshape(2 ** len(keep), -1)
    col = int(np.argmax(np.linalg.norm(psi, axis=0)))
    out = psi[:, col]
    nrm = np.linalg.norm(out)
    if abs(nrm - np.linalg.norm(psi)) > 1e-9:
        raise ValueError("discarded qubits are not in a basis state")
    return out / nrm


def apply_gadget_statevector(g, state, faults=(), mode="enumerate", rng=None):
    """Run ``g`` on ``state`` (over all ``g.n_qubits`` qubits).

    ``mode="enumerate"`` returns every measurement/reset branch with its
    probability; ``mode="sample"`` draws one branch with ``rng`` and returns a
    one-element list.  Faults are :class:`Fault` records.
    """
    n = g.n_qubits
    if n > MAX_QUBITS:
        raise TooManyQubits(f"{n} qubits > {MAX_QUBITS}")
    psi = np.asarray(state, dtype=complex).reshape(-1)
    if psi.shape != (2**n,):
        raise ValueError(f"state has {psi.size} amplitudes, expected {2**n}")
    if mode not in ("enumerate", "sample"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "sample" and rng is None:
        rng = np.random.default_rng()
    by_loc = {}
    for f in faults:
        by_loc.setdefault(f.after, []).append(f)

    branches = [(1.0, psi, [0] * g.n_bits)]

    def inject(loc, brs):
        for f in by_loc.get(loc, ()):
            if f.pauli is not None:
                brs = [(p, f.pauli.apply(s), b) for p, s, b in brs]
            if f.flip_bit is not None:
                for _, _, b in brs:
                    b[f.flip_bit] ^= 1
        return brs

    branches = inject(-1, branches)
    for i, ins in enumerate(g.instrs):
        nxt = []
        for p, s, bits in branches:
            if ins.cond is not None and bits[ins.cond[0]] != ins.cond[1]:
                nxt.append((p, s, bits))
                continue
            if ins.op in ("PREP", "MZ"):
                q = ins.qubits[0]
                outs = []
                for v in (0, 1):
                    proj = _project(s, n, q, v)
                    w = np.vdot(proj, proj).real
                    if w > PRUNE:
                        outs.append((v, w, proj / math.sqrt(w)))
                if mode == "sample":
                    u = rng.random()
                    acc = 0.0
                    pick = outs[-1]
                    for o in outs:
                        acc += o[1]
                        if u < acc:
                            pick = o
                            break
                    outs = [(pick[0], 1.0, pick[2])]
                for v, w, proj in outs:
                    nb = list(bits)
                    if ins.op == "PREP":
                        if v:
                            proj = _flip(proj, n, q)
                    else:
                        nb[ins.bit] = v
                    nxt.append((p * w, proj, nb))
            elif ins.op == "I":
                nxt.append((p, s, bits))
            else:
                m = gate_matrix(ins.op, ins.angle)
                nxt.append((p, apply_matrix(s, n, m, list(ins.qubits)), bits))
        branches = inject(i, nxt)
    return [Branch(p, s, tuple(b)) for p, s, b in branches]


def gadget_unitary(g, qubits=None):
    """Full matrix of a measurement-free gadget on ``qubits`` (default all)."""
    n = g.n_qubits
    out = np.zeros((2**n, 2**n), dtype=complex)
    for col in range(2**n):
        (br,) = apply_gadget_statevector(g, np.eye(2**n, dtype=complex)[col])
        out[:, col] = br.state
    return out


def _fwht(a):
    """Unnormalized Walsh-Hadamard transform along the last axis."""
    a = a.copy()
    h = 1
    size = a.shape[-1]
    while h < size:
        a = a.reshape(a.shape[:-1] + (size // (2 * h), 2, h))
        x, y = a[..., 0, :].copy(), a[..., 1, :].copy()
        a[..., 0, :], a[..., 1, :] = x + y, x - y
        a = a.reshape(a.shape[:-3] + (size,))
        h *= 2
    return a


def identify_pauli(before, after, n, tol=1e-8):
    """Find a Pauli ``P`` with ``after = P before`` up to a global phase.

    Returns the lexicographically first match (smallest ``x``, then ``z``),
    or ``None``.  Exhaustive over all ``4**n`` Paulis via one Walsh-Hadamard
    transform per X pattern.
    """
    b = np.asarray(before).reshape(-1)
    a = np.asarray(after).reshape(-1)
    dim = 2**n
    idx = np.arange(dim)
    # flat index bit (n-1-j) is qubit j
    def to_mask(v):
        m = 0
        for j in range(n):
            if (v >> (n - 1 - j)) & 1:
                m |= 1 << j
        return m

    # <a| Z^z X^x |b> = sum_i conj(a_i) (-1)^{z.i} b_{i xor x}
    prods = np.conj(a)[None, :] * b[idx[None, :] ^ idx[:, None]]
    spec = _fwht(prods)  # [x_flat, z_flat]
    hits = np.argwhere(np.abs(np.abs(spec) - 1.0) < tol)
    if len(hits) == 0:
        return None
    xf, zf = min((to_mask(int(x)), to_mask(int(z))) for x, z in hits)
    return PauliString(n, xf, zf)
