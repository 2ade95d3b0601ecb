import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from djtransmon import circuit
from djtransmon.hilbert import (
    ChargeBasis,
    FockBasis,
    NonHermitianError,
    annihilation_op,
    charge_op,
    cos_k_phi_op,
    eigensolve,
    is_hermitian,
    resonator_ops,
    tensor,
)


def test_basis_validation():
    assert ChargeBasis(3).dim == 7
    assert FockBasis(4).dim == 4
    with pytest.raises(ValueError):
        ChargeBasis(0)
    with pytest.raises(ValueError):
        FockBasis(1)


def test_charge_op_small():
    np.testing.assert_array_equal(charge_op(ChargeBasis(1)), np.diag([-1.0, 0.0, 1.0]))


@given(st.integers(1, 30))
def test_charge_op_spectrum(nc):
    n = charge_op(ChargeBasis(nc))
    assert np.trace(n) == 0
    np.testing.assert_array_equal(np.linalg.eigvalsh(n), np.arange(-nc, nc + 1))


def test_cos_phi_small():
    c = cos_k_phi_op(ChargeBasis(1), 1)
    np.testing.assert_array_equal(c, [[0, 0.5, 0], [0.5, 0, 0.5], [0, 0.5, 0]])


def test_cos_k_domain():
    with pytest.raises(ValueError):
        cos_k_phi_op(ChargeBasis(2), 0)
    assert not cos_k_phi_op(ChargeBasis(2), 5).any()


@given(st.integers(1, 12), st.integers(1, 6))
def test_cos_k_norm_and_structure(nc, k):
    c = cos_k_phi_op(ChargeBasis(nc), k)
    assert is_hermitian(c)
    assert np.all(np.diag(c) == 0)
    assert np.linalg.norm(c, 2) <= 1 + 1e-12


@pytest.mark.parametrize("k", [1, 2, 3])
def test_cos_k_matrix_elements_by_quadrature(k):
    # <n|cos(k phi)|n'> = (1/2pi) int e^{-i n phi} cos(k phi) e^{i n' phi} d phi
    basis = ChargeBasis(3)
    c = cos_k_phi_op(basis, k)
    for i, n in enumerate(basis.charges):
        for j, m in enumerate(basis.charges):
            val = quad(lambda p: np.cos((m - n) * p) * np.cos(k * p), 0, 2 * np.pi)[0] / (2 * np.pi)
            assert c[i, j] == pytest.approx(val, abs=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_cos_squared_identity(k):
    nc = 8
    c = cos_k_phi_op(ChargeBasis(nc), k)
    d = np.diag(c @ c)
    # cos^2 = 1/2 + cos(2k phi)/2, broken only within k of the basis edge
    np.testing.assert_allclose(d[k:-k], 0.5)
    np.testing.assert_allclose(d[:k], 0.25)


def test_resonator_commutator_and_spectrum(cd1):
    ecr = circuit.energies_full(cd1).E_Cr
    el = circuit.resonator_inductive_energy(cd1.f_res_bare, ecr)
    n, phi = resonator_ops(FockBasis(30), ecr, el)
    comm = phi @ n - n @ phi
    np.testing.assert_allclose(comm[:-1, :-1], 1j * np.eye(29), atol=1e-12)
    h = 4 * ecr * n @ n + 0.5 * el * phi @ phi
    assert is_hermitian(h)
    w = np.linalg.eigvalsh(h)
    assert w[0] == pytest.approx(cd1.f_res_bare / 2, abs=1e-9)
    assert w[1] - w[0] == pytest.approx(cd1.f_res_bare, abs=1e-6)


def test_resonator_ops_domain():
    with pytest.raises(ValueError):
        resonator_ops(FockBasis(4), 0.0, 1.0)


def test_annihilation_op():
    a = annihilation_op(FockBasis(4))
    np.testing.assert_allclose(np.diag(a.T @ a), [0, 1, 2, 3])


def test_tensor_identity_and_dims():
    dims = (2, 3, 4)
    np.testing.assert_array_equal(tensor({}, dims), np.eye(24))
    assert tensor({1: np.ones((3, 3))}, dims).shape == (24, 24)
    with pytest.raises(ValueError):
        tensor({0: np.eye(3)}, dims)
    with pytest.raises(ValueError):
        tensor({3: np.eye(2)}, dims)


def test_tensor_product_factorises():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    np.testing.assert_allclose(tensor({0: a}, (2, 2)) @ tensor({1: b}, (2, 2)), np.kron(a, b))


def test_eigensolve_small():
    w, _ = eigensolve(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_allclose(w, [1, 2, 3])
    w, _ = eigensolve(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(w, [-1, 1])


def test_eigensolve_rejects_non_hermitian():
    with pytest.raises(NonHermitianError):
        eigensolve(np.array([[0.0, 1.0], [0.0, 0.0]]))


@given(st.integers(0, 2**31 - 1))
def test_eigensolve_random_hermitian(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(50, 50)) + 1j * rng.normal(size=(50, 50))
    h = x + x.conj().T
    w, v = eigensolve(h, 10)
    assert np.all(np.diff(w) >= 0)
    np.testing.assert_allclose(v.conj().T @ v, np.eye(10), atol=1e-10)
    resid = np.linalg.norm(h @ v - v * w, axis=0)
    assert np.all(resid < 1e-8 * np.linalg.norm(h, 2))
    np.testing.assert_allclose(w, np.linalg.eigvalsh(h)[:10], atol=1e-9)
