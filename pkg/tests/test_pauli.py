import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fqcp.code422.pauli import (
    BENIGN,
    DETECTABLE_LOGICAL,
    LOGICALS,
    S_X,
    S_Z,
    UNDETECTABLE_LOGICAL,
    PauliString,
    block_paulis,
    classify_pauli,
    decompose_pauli,
    syndrome,
)
from fqcp.code422.statevector import LOGICAL_BASIS, basis_state, encode_state, expectation

P = PauliString.from_label

paulis = st.builds(lambda n, x, z, k: PauliString(n, x % (1 << n), z % (1 << n), k),
                   st.just(3), st.integers(0, 7), st.integers(0, 7), st.integers(0, 3))


def test_label_roundtrip():
    for lab in ("XIZY", "-XX", "+iZ", "-iYY"):
        p = P(lab)
        assert P(p.label()) == p
    assert P("Y").to_matrix() == pytest.approx(np.array([[0, -1j], [1j, 0]]))


@settings(max_examples=200, deadline=None)
@given(paulis, paulis)
def test_product_matches_matrices(a, b):
    assert np.allclose((a * b).to_matrix(), a.to_matrix() @ b.to_matrix())
    comm = np.allclose(a.to_matrix() @ b.to_matrix(), b.to_matrix() @ a.to_matrix())
    assert a.commutes(b) == comm


@settings(max_examples=100, deadline=None)
@given(paulis)
def test_weight_and_decompose(p):
    assert p.weight() == bin(p.x | p.z).count("1")
    assert decompose_pauli(p.to_matrix(), 3) == p


def test_apply_matches_matrix(rng):
    psi = rng.normal(size=16) + 1j * rng.normal(size=16)
    for lab in ("XIZY", "-iZZXI", "YYYY"):
        p = P(lab)
        assert np.allclose(p.apply(psi), p.to_matrix() @ psi)


def test_encoded_basis_states():
    s = encode_state([1, 0, 0, 0])
    want = (basis_state("0000") + basis_state("1111")) / np.sqrt(2)
    assert np.allclose(s, want, atol=1e-12)
    s = encode_state([0, 0, 0, 1])
    want = (basis_state("0110") + basis_state("1001")) / np.sqrt(2)
    assert np.allclose(s, want, atol=1e-12)
    bell = encode_state(np.array([1, 0, 0, 1]) / np.sqrt(2))
    assert abs(np.linalg.norm(bell) - 1) < 1e-12
    assert expectation(bell, S_X) == pytest.approx(1, abs=1e-12)
    assert expectation(bell, S_Z) == pytest.approx(1, abs=1e-12)


def test_stabilizers_fix_basis_and_logicals_act():
    for idx, lab in enumerate(LOGICAL_BASIS):
        psi = encode_state(np.eye(4)[idx])
        assert np.allclose(S_X.apply(psi), psi, atol=1e-12)
        assert np.allclose(S_Z.apply(psi), psi, atol=1e-12)
        a, b = int(lab[0]), int(lab[1])
        assert expectation(psi, LOGICALS["Z1"]) == pytest.approx((-1) ** a, abs=1e-12)
        assert expectation(psi, LOGICALS["Z2"]) == pytest.approx((-1) ** b, abs=1e-12)
        flip1 = encode_state(np.eye(4)[2 * (1 - a) + b])
        flip2 = encode_state(np.eye(4)[2 * a + 1 - b])
        assert np.allclose(LOGICALS["X1"].apply(psi), flip1, atol=1e-12)
        assert np.allclose(LOGICALS["X2"].apply(psi), flip2, atol=1e-12)


def test_alternative_representatives():
    for a, b in (("XXII", "IIXX"), ("XIXI", "IXIX"), ("ZIZI", "IZIZ"), ("ZZII", "IIZZ")):
        ca, cb = classify_pauli(P(a)), classify_pauli(P(b))
        assert ca.kind == cb.kind == UNDETECTABLE_LOGICAL
        assert ca.pattern == cb.pattern
        prod = P(a) * P(b)
        assert prod.equal_up_to_phase(S_X) or prod.equal_up_to_phase(S_Z)


def test_syndrome_examples():
    assert syndrome(PauliString(4)) == (0, 0)
    assert syndrome(P("XIII")) == (0, 1)
    assert syndrome(P("ZZZZ")) == (0, 0) and P("ZZZZ") == S_Z


def test_syndrome_homomorphism():
    ps = block_paulis()
    assert len(ps) == 256
    for a, b in itertools.product(ps, ps):
        sa, sb, sab = syndrome(a), syndrome(b), syndrome(a * b)
        assert sab == (sa[0] ^ sb[0], sa[1] ^ sb[1])


def test_classification_examples():
    c = classify_pauli(P("XXII"))
    assert c.kind == UNDETECTABLE_LOGICAL and "Z1" in c.flips()
    c = classify_pauli(P("XIII"))
    assert c.kind == DETECTABLE_LOGICAL and c.pattern["Z1"] == 1
    assert classify_pauli(S_X * S_Z).kind == BENIGN
    assert (S_X * S_Z).equal_up_to_phase(P("YYYY"))


def test_classification_counts():
    kinds = [classify_pauli(p).kind for p in block_paulis()]
    assert kinds.count(BENIGN) == 4  # the stabilizer group
    assert kinds.count(UNDETECTABLE_LOGICAL) == 60
