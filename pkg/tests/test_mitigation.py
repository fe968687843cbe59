import cmath
import math

import numpy as np
import pytest

from fqcp.code422.gadgets import build_gadget, compose
from fqcp.code422.mitigation import (
    clifford_deform,
    count_double_z_logical,
    dd_phases,
    dfs_basis_state,
    dfs_phase,
    dfs_relabel,
    dfs_transform,
    insert_dd,
    uniform_dephasing,
)
from fqcp.code422.pauli import PauliString
from fqcp.code422.statevector import apply_gadget_statevector, encode_state, encoded_basis, gadget_unitary

from conftest import THETA, random_logical

P = PauliString.from_label


def test_deformation_images():
    assert clifford_deform(P("IIZI")) == P("IIXI")
    assert clifford_deform(P("IIIZ")) == P("IIIY")
    assert clifford_deform(P("ZIII")) == P("ZIII")
    assert clifford_deform(P("IZII")) == P("IZII")


def test_deformation_is_conjugation():
    H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    S = np.diag([1, 1j])
    D = np.kron(np.kron(np.eye(4), H), S @ H)
    for lab in ("XIYZ", "ZZZZ", "IYXI", "-XXZZ"):
        p = P(lab)
        assert np.allclose(D @ p.to_matrix() @ D.conj().T, clifford_deform(p).to_matrix())


def test_double_z_counts():
    assert count_double_z_logical(False) == 6
    assert count_double_z_logical(True) == 1
    assert count_double_z_logical(True, qubits=()) == 6


def test_deformed_gadget_is_noiseless_identity(rng):
    g = clifford_deform(build_gadget("idle"))
    psi = encode_state(random_logical(rng))
    (br,) = apply_gadget_statevector(g, psi)
    assert np.allclose(br.state, psi, atol=1e-12)


def test_dfs_phases():
    for theta in (0.1, 0.37, THETA):
        assert dfs_phase("00", theta) == pytest.approx(cmath.exp(8j * theta))
        for lab in ("01", "10", "11"):
            assert dfs_phase(lab, theta) == pytest.approx(1.0)
    # after relabeling only the new |11> is sensitive
    assert dfs_relabel("00") == "11"
    for lab in ("00", "01", "10"):
        assert dfs_phase(lab, 0.3, basis="dfs") == pytest.approx(1.0)
    assert dfs_phase("11", 0.3, basis="dfs") == pytest.approx(cmath.exp(2.4j))


def test_dfs_basis_is_x2x3_image():
    x23 = P("IXXI")
    for idx, lab in enumerate(("00", "01", "10", "11")):
        assert np.allclose(dfs_basis_state(lab, "dfs"), x23.apply(encode_state(np.eye(4)[idx])))
    d = uniform_dephasing(0.2)
    assert np.allclose(np.abs(d), 1)


def test_dfs_transform_logical_action():
    for kind, kw in (("crx_intra", {"theta": THETA, "control": 1}), ("crx_intra", {"theta": 0.5, "control": 2})):
        g = build_gadget(kind, **kw)
        h = dfs_transform(g)
        E = encoded_basis()
        L = E.conj() @ gadget_unitary(g) @ E.T
        Lh = E.conj() @ gadget_unitary(h) @ E.T
        X = np.kron(np.array([[0, 1], [1, 0]]), np.array([[0, 1], [1, 0]]))
        assert np.allclose(Lh, X @ L @ X, atol=1e-12)


def test_xxxx_fixes_basis_states():
    x = P("XXXX")
    for i in range(4):
        psi = encode_state(np.eye(4)[i])
        assert abs(abs(np.vdot(psi, x.apply(psi))) - 1) < 1e-12


def test_dd_preserves_output(rng):
    g = compose(build_gadget("crx_intra", theta=THETA, control=1),
                build_gadget("crx_intra", theta=THETA, control=2))
    h = insert_dd(g, [-1, *g.meta.get("boundaries", ()), len(g.instrs) - 1])
    assert dd_phases(h) == ["+", "-", "+"]
    for _ in range(5):
        psi = encode_state(random_logical(rng))
        (a,) = apply_gadget_statevector(g, psi)
        (b,) = apply_gadget_statevector(h, psi)
        assert abs(abs(np.vdot(a.state, b.state)) - 1) < 1e-10


def test_two_dd_pulses_cancel(rng):
    g = build_gadget("idle")
    h = insert_dd(insert_dd(g, [-1]), [-1])
    psi = rng.normal(size=16) + 0j
    psi /= np.linalg.norm(psi)
    (b,) = apply_gadget_statevector(h, psi)
    assert np.allclose(b.state, psi)


def test_dd_bad_boundary():
    with pytest.raises(ValueError):
        insert_dd(build_gadget("idle"), [5])
