import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnnpred.kernel import jacobi_eigh, pca_fit, pca_inverse_transform, pca_transform


@given(st.integers(1, 12), st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_jacobi_matches_lapack_eigenvalues(d, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((d, d))
    a = m + m.T
    values, vectors = jacobi_eigh(a)
    np.testing.assert_allclose(np.sort(values), np.linalg.eigvalsh(a), atol=1e-9 * max(1, np.abs(a).max()))
    np.testing.assert_allclose(vectors.T @ vectors, np.eye(d), atol=1e-10)
    np.testing.assert_allclose(a @ vectors, vectors * values, atol=1e-8 * max(1, np.abs(a).max()))


def test_pca_matches_svd_of_centred_data(rng):
    x = rng.standard_normal((200, 6)) @ rng.standard_normal((6, 6))
    fit = pca_fit(x, 3)
    centred = x - x.mean(axis=0)
    _, s, vt = np.linalg.svd(centred, full_matrices=False)
    np.testing.assert_allclose(fit.explained_variance, s[:3] ** 2 / 199, rtol=1e-9)
    # components agree up to sign
    for got, ref in zip(fit.components, vt[:3]):
        assert abs(abs(got @ ref) - 1.0) < 1e-9
    assert np.all(np.diff(fit.explained_variance) <= 0)


def test_full_rank_pca_is_an_invertible_rotation(rng):
    x = rng.standard_normal((50, 5))
    fit = pca_fit(x, 5)
    z = pca_transform(x, fit)
    np.testing.assert_allclose(pca_inverse_transform(z, fit), x, atol=1e-10)
    np.testing.assert_allclose(np.linalg.norm(z, axis=1), np.linalg.norm(x - fit.mean, axis=1),
                               atol=1e-10)


def test_pca_is_deterministic(rng):
    x = rng.standard_normal((40, 7))
    a, b = pca_fit(x, 4), pca_fit(x, 4)
    assert np.array_equal(a.components, b.components)


@pytest.mark.parametrize("rows,k", [(1, 1), (10, 0), (10, 6)])
def test_pca_argument_errors(rows, k):
    with pytest.raises(ValueError):
        pca_fit(np.ones((rows, 5)), k)
