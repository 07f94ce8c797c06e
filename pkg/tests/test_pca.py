import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hoianomaly.pca import back_project, fit_pca, n_components_for, project


def test_component_count_from_fractions():
    assert n_components_for([0.90, 0.08, 0.02], 0.99) == 3
    assert n_components_for([0.90, 0.08, 0.02], 0.98) == 2
    assert n_components_for([0.90, 0.08, 0.02], 0.90) == 1
    assert n_components_for([0.5, 0.49, 0.01], 0.99) == 2


def test_two_point_example():
    m = fit_pca([[0.0, 0.0], [2.0, 0.0]])
    np.testing.assert_allclose(m.mean, [1.0, 0.0])
    assert m.n_components == 1                      # the zero-variance axis is dropped
    np.testing.assert_allclose(m.components[:, 0], [1.0, 0.0])
    np.testing.assert_allclose(m.eigenvalues, [2.0])


@pytest.mark.parametrize("data", [[[1.0, 2.0]], [[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]])
def test_fit_errors(data):
    with pytest.raises(ValueError):
        fit_pca(data)


def test_sign_convention():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 5)) * [5, 3, 2, 1, 0.5]
    for flip in (1, -1):
        W = fit_pca(X * flip).components
        big = np.argmax(np.abs(W), axis=0)
        assert np.all(W[big, np.arange(W.shape[1])] > 0)


def test_projection_identities():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(300, 6)) @ rng.normal(size=(6, 6))
    m = fit_pca(X, 0.9)
    np.testing.assert_allclose(project(m, m.mean), 0.0, atol=1e-12)
    np.testing.assert_allclose(back_project(m, np.zeros(m.n_components)), m.mean)
    v = rng.normal(size=6) * 3
    x = project(m, v)
    assert np.linalg.norm(x) <= np.linalg.norm(v - m.mean) + 1e-9
    np.testing.assert_allclose(project(m, back_project(m, x)), x, atol=1e-9)
    inside = m.mean + m.components @ rng.normal(size=m.n_components)
    np.testing.assert_allclose(back_project(m, project(m, inside)), inside, atol=1e-9)
    u, w, a = rng.normal(size=6), rng.normal(size=6), 0.3
    np.testing.assert_allclose(project(m, a * u + (1 - a) * w), a * project(m, u) + (1 - a) * project(m, w),
                               atol=1e-12)


def test_identity_basis_selects_coordinates():
    from hoianomaly.pca import PcaModel
    m = PcaModel(np.zeros(4), np.eye(4)[:, [0, 2]], np.ones(2), 1.0, 2.0)
    np.testing.assert_allclose(project(m, [1.0, 2.0, 3.0, 4.0]), [1.0, 3.0])


def test_dimension_mismatch():
    m = fit_pca(np.random.default_rng(2).normal(size=(10, 3)))
    with pytest.raises(ValueError):
        project(m, np.zeros(4))
    with pytest.raises(ValueError):
        back_project(m, np.zeros(m.n_components + 1))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 1.0))
def test_fit_contract(seed, threshold):
    rng = np.random.default_rng(seed)
    D = int(rng.integers(2, 12))
    X = rng.normal(size=(int(rng.integers(D + 2, 80)), D)) * rng.uniform(0.1, 5, D)
    m = fit_pca(X, threshold)
    np.testing.assert_allclose(m.components.T @ m.components, np.eye(m.n_components), atol=1e-9)
    assert np.all(np.diff(m.eigenvalues) <= 1e-12) and np.all(m.eigenvalues >= 0)
    assert m.variance_captured >= threshold - 1e-12
    # reconstruction error (per n-1, like the covariance) equals the discarded variance
    resid = X - back_project(m, project(m, X))
    err = (resid ** 2).sum() / (X.shape[0] - 1)
    np.testing.assert_allclose(err, (1 - m.variance_captured) * m.total_variance,
                               rtol=1e-6, atol=1e-9 * m.total_variance)
