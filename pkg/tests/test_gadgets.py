import math

import numpy as np
import pytest

from fqcp.code422.gadgets import Gadget, Instr, accepted_branch, build_gadget, compose
from fqcp.code422.gates import conjugate, is_clifford_op
from fqcp.code422.pauli import PauliString
from fqcp.code422.statevector import (
    Fault,
    apply_gadget_statevector,
    basis_state,
    encode_state,
    encoded_basis,
    gadget_unitary,
    identify_pauli,
    kron_states,
)
from fqcp.errors import NotNormalized, TooManyQubits, UnknownKind

from conftest import THETA, random_logical


def rx(t):
    return np.array([[math.cos(t / 2), -1j * math.sin(t / 2)],
                     [-1j * math.sin(t / 2), math.cos(t / 2)]])


def cr(n, ctrl, tgt, t):
    ops0, ops1 = [np.eye(2)] * n, [np.eye(2)] * n
    ops0 = list(ops0)
    ops1 = list(ops1)
    ops0[ctrl] = np.diag([1, 0])
    ops1[ctrl] = np.diag([0, 1])
    ops1[tgt] = rx(t)

    def k(ops):
        out = np.ones((1, 1))
        for o in ops:
            out = np.kron(out, o)
        return out

    return k(ops0) + k(ops1)


def test_unknown_and_missing_theta():
    with pytest.raises(UnknownKind):
        build_gadget("teleport")
    with pytest.raises(UnknownKind):
        build_gadget("crx_inter")
    with pytest.raises(UnknownKind):
        build_gadget("crx_intra", theta=1.0, control=3)


def test_validation():
    with pytest.raises(ValueError):
        Gadget("bad", 2, {}, (Instr("CX", (0, 2)),))
    with pytest.raises(ValueError):
        Gadget("bad", 2, {}, (Instr("X", (0,), cond=(0, 1)),), 1)
    with pytest.raises(ValueError):
        Gadget("bad", 2, {}, (Instr("MZ", (0,), bit=0), Instr("MZ", (1,), bit=0)), 1)


def test_encode_rejects_unnormalized():
    with pytest.raises(NotNormalized):
        encode_state([1, 1, 0, 0])


def test_stab_meas_noiseless(rng):
    g = build_gadget("stab_meas")
    for _ in range(5):
        psi = encode_state(random_logical(rng))
        (br,) = apply_gadget_statevector(g, kron_states(psi, basis_state("00")))
        assert br.bits == (0, 0)
        assert abs(abs(np.vdot(psi, br.data_state(range(4), 6))) - 1) < 1e-10


def test_stab_meas_flags_x1(rng):
    g = build_gadget("stab_meas")
    psi = encode_state(random_logical(rng))
    f = Fault(-1, PauliString.on(6, {0: "X"}))
    (br,) = apply_gadget_statevector(g, kron_states(psi, basis_state("00")), [f])
    assert br.bits[g.meta["syndrome_bits"]["s_z"]] == 1


def test_reset_from_garbage(rng):
    g = build_gadget("reset_00")
    garb = rng.normal(size=32) + 1j * rng.normal(size=32)
    garb /= np.linalg.norm(garb)
    brs = apply_gadget_statevector(g, garb)
    assert sum(b.prob for b in brs) == pytest.approx(1.0)
    target = encode_state([1, 0, 0, 0])
    accepted = [b for b in brs if b.bits[0] == 0 or b.bits[1] == 0]
    assert accepted
    for b in accepted:
        assert abs(abs(np.vdot(target, b.data_state(range(4), 5))) - 1) < 1e-10


def test_sample_mode_is_one_branch(rng):
    g = build_gadget("reset_00")
    psi = np.zeros(32, dtype=complex)
    psi[5] = 1
    out = apply_gadget_statevector(g, psi, mode="sample", rng=rng)
    assert len(out) == 1 and out[0].prob == 1.0


@pytest.mark.parametrize("control", [1, 2])
@pytest.mark.parametrize("theta", [0.3, THETA, math.pi])
def test_crx_intra_logical_action(control, theta):
    g = build_gadget("crx_intra", theta=theta, control=control)
    E = encoded_basis()
    L = E.conj() @ gadget_unitary(g) @ E.T
    want = cr(2, control - 1, 2 - control, theta)
    assert np.abs(L - want).max() < 1e-10


@pytest.mark.parametrize("theta", [0.4, THETA, math.pi])
def test_crx_inter_logical_action(theta):
    E = encoded_basis()
    E2 = np.array([np.kron(E[i], E[j]) for i in range(4) for j in range(4)])
    L = E2.conj() @ gadget_unitary(build_gadget("crx_inter", theta=theta)) @ E2.T
    # logical order A1 A2 B1 B2; the B1-controlled rotation acts first
    want = cr(4, 0, 2, theta) @ cr(4, 2, 0, theta)
    assert np.abs(L - want).max() < 1e-10


def test_crx_inter_is_clifford_at_pi():
    g = build_gadget("crx_inter", theta=math.pi)
    assert g.is_clifford()
    assert g.clifford_at_pi() == list(range(len(g.instrs)))
    assert not build_gadget("crx_inter", theta=THETA).is_clifford()


def test_conjugate_against_matrices(rng):
    ops = [("H", None, 1), ("S", None, 1), ("SDG", None, 1), ("CX", None, 2), ("CZ", None, 2),
           ("XX", math.pi / 2, 2), ("ZZ", -math.pi / 2, 2)]
    for _ in range(100):
        op, ang, k = ops[rng.integers(len(ops))]
        qs = tuple(int(q) for q in rng.permutation(3)[:k])
        p = PauliString(3, int(rng.integers(8)), int(rng.integers(8)), int(rng.integers(4)))
        out = conjugate(op, ang, qs, p)
        g = Gadget("one", 3, {}, (Instr(op, qs, ang),))
        U = gadget_unitary(g)
        assert np.allclose(U @ p.to_matrix() @ U.conj().T, out.to_matrix(), atol=1e-10)
        assert is_clifford_op(op, ang)


def test_identity_gadget_returns_input(rng):
    g = build_gadget("idle")
    psi = encode_state(random_logical(rng))
    (br,) = apply_gadget_statevector(g, psi)
    assert np.allclose(br.state, psi)


def test_too_many_qubits():
    g = Gadget("big", 21, {}, (Instr("X", (0,)),))
    with pytest.raises(TooManyQubits):
        apply_gadget_statevector(g, np.zeros(2, dtype=complex))


def test_identify_pauli(rng):
    psi = rng.normal(size=16) + 1j * rng.normal(size=16)
    psi /= np.linalg.norm(psi)
    p = PauliString.from_label("XZYI")
    found = identify_pauli(psi, 1j * p.apply(psi), 4)
    assert found is not None and found.equal_up_to_phase(p)
    assert identify_pauli(psi, np.roll(psi, 3) * 0.3, 4) is None


def test_compose_and_netlist():
    g = compose(build_gadget("stab_meas"), build_gadget("stab_meas"))
    assert g.n_bits == 4
    assert g.meta["boundaries"] == (len(build_gadget("stab_meas").instrs) - 1,)
    text = g.netlist()
    assert "MZ" in text and text.startswith("gadget")
    a = accepted_branch(build_gadget("reset_00"))
    assert all(ins.cond is None for ins in a.instrs)
    assert build_gadget("reset_00").to_json()
