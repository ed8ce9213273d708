"""Jacobi eigensolver against the LAPACK oracle."""

import numpy as np
import pytest

from cdqfi.jacobi import eigh_jacobi


def random_hermitian(n, rng):
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (m + m.conj().T) / 2


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16, 64])
def test_eigenvalues_match_lapack(n):
    rng = np.random.default_rng(n)
    a = random_hermitian(n, rng)
    vals, _ = eigh_jacobi(a)
    np.testing.assert_allclose(vals, np.linalg.eigvalsh(a), atol=1e-11 * n)


@pytest.mark.parametrize("n", [2, 4, 16])
def test_eigenpairs_satisfy_definition(n):
    rng = np.random.default_rng(100 + n)
    a = random_hermitian(n, rng)
    vals, vecs = eigh_jacobi(a)
    np.testing.assert_allclose(a @ vecs, vecs * vals[None, :], atol=1e-11 * n)
    np.testing.assert_allclose(vecs.conj().T @ vecs, np.eye(n), atol=1e-12 * n)


def test_ascending_order():
    rng = np.random.default_rng(5)
    vals, _ = eigh_jacobi(random_hermitian(12, rng))
    assert np.all(np.diff(vals) >= -1e-14)


def test_phase_convention_real_positive_pivot():
    rng = np.random.default_rng(9)
    _, vecs = eigh_jacobi(random_hermitian(8, rng))
    for j in range(8):
        idx = int(np.argmax(np.abs(vecs[:, j])))
        assert vecs[idx, j].imag == 0.0
        assert vecs[idx, j].real > 0


def test_deterministic_bit_for_bit():
    rng = np.random.default_rng(13)
    a = random_hermitian(10, rng)
    v1, w1 = eigh_jacobi(a)
    v2, w2 = eigh_jacobi(a)
    assert np.array_equal(v1, v2)
    assert np.array_equal(w1, w2)


def test_degenerate_spectrum_still_orthonormal():
    # twofold degeneracy: eigenvectors span the subspace deterministically
    a = np.diag([1.0, 1.0, 3.0]).astype(complex)
    u = eigh_jacobi(random_hermitian(3, np.random.default_rng(2)))[1]
    a = u @ a @ u.conj().T
    vals, vecs = eigh_jacobi(a)
    np.testing.assert_allclose(vals, [1.0, 1.0, 3.0], atol=1e-12)
    np.testing.assert_allclose(vecs.conj().T @ vecs, np.eye(3), atol=1e-12)


def test_rejects_non_hermitian():
    with pytest.raises(ValueError):
        eigh_jacobi(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_real_diagonal_input():
    vals, vecs = eigh_jacobi(np.diag([3.0, -1.0, 2.0]).astype(complex))
    np.testing.assert_allclose(vals, [-1.0, 2.0, 3.0], atol=0)
    np.testing.assert_allclose(np.abs(vecs), np.eye(3)[:, [1, 2, 0]], atol=0)
