import numpy as np
import pytest
import scipy.linalg

from aiqt.qnn import (
    N_GENERATORS,
    apply_qnn,
    apply_qnn_array,
    gellmann_basis,
    init_params,
    layer_hamiltonian,
    layer_unitary,
    pairing,
    qnn_ops,
)
from aiqt.statevec import PureState, TwoQubitUnitary, basis_state

from oracles import embed, random_state


def test_basis_shape_and_readonly():
    g = gellmann_basis()
    assert g.shape == (15, 4, 4) and N_GENERATORS == 15
    with pytest.raises(ValueError):
        g[0, 0, 0] = 1


def test_basis_hermitian_traceless():
    for m in gellmann_basis():
        np.testing.assert_allclose(m, m.conj().T, atol=1e-15)
        assert abs(np.trace(m)) < 1e-14


def test_basis_trace_orthogonality():
    g = gellmann_basis()
    gram = np.einsum("iab,jba->ij", g, g)
    np.testing.assert_allclose(gram, 2 * np.eye(15), atol=1e-12)


def test_basis_spans_traceless_hermitian():
    # any traceless Hermitian 4x4 is recovered from its coefficients Tr(G_i H)/2
    rng = np.random.default_rng(0)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = a + a.conj().T
    h -= np.trace(h) / 4 * np.eye(4)
    coeffs = np.einsum("iab,ba->i", gellmann_basis(), h).real / 2
    np.testing.assert_allclose(np.tensordot(coeffs, gellmann_basis(), axes=1), h, atol=1e-12)


def test_layer_unitary_zero_is_identity():
    np.testing.assert_allclose(layer_unitary(np.zeros(15)), np.eye(4), atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_layer_unitary_matches_expm(seed):
    phi = np.random.default_rng(seed).normal(size=15)
    expected = scipy.linalg.expm(-1j * layer_hamiltonian(phi))
    np.testing.assert_allclose(layer_unitary(phi), expected, atol=1e-12)


def test_layer_unitary_single_generator():
    # phi_0 = t on the (0,1) symmetric generator rotates |00>,|01> like RX(2t)
    t = 0.3
    phi = np.zeros(15)
    phi[0] = t
    u = layer_unitary(phi)
    np.testing.assert_allclose(u[:2, :2], [[np.cos(t), -1j * np.sin(t)], [-1j * np.sin(t), np.cos(t)]], atol=1e-14)
    np.testing.assert_allclose(u[2:, 2:], np.eye(2), atol=1e-14)


@pytest.mark.parametrize("bad", [np.zeros(14), np.zeros((15, 1)), np.full(15, np.nan)])
def test_layer_parameter_validation(bad):
    with pytest.raises(ValueError):
        layer_unitary(bad)


@pytest.mark.parametrize(
    "n, layer, expected",
    [
        (2, 1, [(0, 1)]),
        (2, 2, []),
        (5, 1, [(0, 1), (2, 3)]),
        (5, 2, [(1, 2), (3, 4)]),
        (10, 1, [(0, 1), (2, 3), (4, 5), (6, 7), (8, 9)]),
        (10, 2, [(1, 2), (3, 4), (5, 6), (7, 8)]),
        (10, 3, [(0, 1), (2, 3), (4, 5), (6, 7), (8, 9)]),
    ],
)
def test_pairing(n, layer, expected):
    assert pairing(n, layer) == expected


def test_pairing_errors():
    with pytest.raises(ValueError):
        pairing(1, 1)
    with pytest.raises(ValueError):
        pairing(4, 0)


def test_two_layers_connect_all_neighbours():
    for n in range(2, 11):
        bonds = set(pairing(n, 1)) | set(pairing(n, 2))
        assert bonds == {(q, q + 1) for q in range(n - 1)}


def test_single_pair_applies_layer_matrix():
    rng = np.random.default_rng(1)
    phi = rng.normal(size=(1, 15))
    psi = random_state(rng, 2)
    out = apply_qnn(PureState(2, psi), phi).amplitudes
    np.testing.assert_allclose(out, layer_unitary(phi[0]) @ psi, atol=1e-13)


def test_zero_params_identity():
    psi = PureState(4, random_state(np.random.default_rng(2), 4))
    out = apply_qnn(psi, np.zeros((3, 15)))
    np.testing.assert_allclose(out.amplitudes, psi.amplitudes, atol=1e-14)


def test_qnn_matches_dense_oracle():
    n = 5
    rng = np.random.default_rng(3)
    phi = rng.normal(size=(3, 15))
    u = np.eye(2**n, dtype=complex)
    for ell in range(3):
        m = layer_unitary(phi[ell])
        for a, b in pairing(n, ell + 1):
            u = embed(m, [a, b], n) @ u
    psi = random_state(rng, n)
    np.testing.assert_allclose(apply_qnn_array(psi, n, phi), u @ psi, atol=1e-12)


def test_shared_matrix_within_layer():
    phi = np.random.default_rng(4).normal(size=(2, 15))
    ops = list(qnn_ops(6, phi))
    assert all(isinstance(g, TwoQubitUnitary) for g, _ in ops)
    by_layer = {}
    for g, ell in ops:
        by_layer.setdefault(ell, []).append(g.matrix)
    for mats in by_layer.values():
        for m in mats[1:]:
            assert np.array_equal(m, mats[0])


def test_disjoint_pairs_commute():
    rng = np.random.default_rng(5)
    m = layer_unitary(rng.normal(size=15))
    psi = random_state(rng, 4)
    a = embed(m, [2, 3], 4) @ embed(m, [0, 1], 4) @ psi
    b = embed(m, [0, 1], 4) @ embed(m, [2, 3], 4) @ psi
    np.testing.assert_allclose(a, b, atol=1e-13)


def test_qnn_preserves_norm():
    rng = np.random.default_rng(6)
    out = apply_qnn(PureState(7, random_state(rng, 7)), rng.normal(size=(4, 15)))
    assert abs(out.norm - 1) < 1e-12


def test_qnn_on_basis_state_is_unit_norm():
    out = apply_qnn(basis_state(3, 5), np.full((2, 15), 0.2))
    assert abs(out.norm - 1) < 1e-12


def test_init_params_range_and_determinism():
    a = init_params(3, np.random.default_rng(9))
    b = init_params(3, np.random.default_rng(9))
    assert a.shape == (3, 15)
    assert np.array_equal(a, b)
    assert np.all(np.abs(a) <= 0.1)


def test_qnn_parameter_shape_validated():
    with pytest.raises(ValueError):
        apply_qnn_array(np.ones(4) / 2, 2, np.zeros((3, 14)))
