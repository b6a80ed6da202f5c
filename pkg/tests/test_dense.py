import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import distinct_points, fd_grad, ref_gram, ref_krr, ref_power, rel_err
from lazykrr import KernelSpec, NumericalError, fit_dense, krr_gradients
from lazykrr.dense import factor_spd, jitter_schedule

# hand-solved 2x2 system [[1, a], [a, 1]] with a = exp(-1), z = 0.5:
# prediction exp(-1/2) / (1 + a) and power function sqrt((1 - a) / (1 + a))
MIDPOINT_PRED = 0.443409441985036954
MIDPOINT_EPS = 0.679791995583950487


def test_three_point_interpolation():
    m = fit_dense(KernelSpec(), [[0.0], [1.0], [2.0]], [[1.0], [0.0], [1.0]])
    np.testing.assert_allclose(m.predict(m.X), m.Y, atol=1e-5)


def test_single_point():
    m = fit_dense(KernelSpec(), [[0.0]], [[7.0]], lam=1e-9)
    assert m.theta[0, 0] == pytest.approx(7 / (1 + 1e-9), rel=1e-15)
    np.testing.assert_allclose(m.cardinal_basis([[0.3]]), [[np.exp(-0.3) / (1 + 1e-9)]], rtol=1e-14)


def test_residual_against_independent_solve():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(20, 3))
    Y = rng.normal(size=(20, 2))
    m = fit_dense(KernelSpec(), X, Y)
    K = ref_gram(X, X) + 1e-9 * np.eye(20)
    assert np.linalg.norm(K @ m.theta - Y) / np.linalg.norm(Y) < 1e-8
    Z = rng.normal(size=(6, 3))
    np.testing.assert_allclose(m.predict(Z), ref_krr(X, Y, Z, 1e-9), rtol=1e-6, atol=1e-8)


def test_far_query_decays():
    m = fit_dense(KernelSpec(), [[0.0], [1.0]], [[3.0], [-2.0]])
    far = m.predict([[41.0]])
    assert abs(far[0, 0]) <= 1e-15 * np.abs(m.theta).sum()
    assert m.power_function([[41.0]])[0] >= 1 - 1e-10


def test_two_point_midpoint_oracle():
    m = fit_dense(KernelSpec(), [[0.0], [1.0]], [[0.0], [1.0]], lam=0.0)
    assert m.predict([[0.5]])[0, 0] == pytest.approx(MIDPOINT_PRED, abs=1e-14)
    assert m.power_function([[0.5]])[0] == pytest.approx(MIDPOINT_EPS, abs=1e-12)


def test_cardinal_basis_identity_and_consistency():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(4, 2))
    Y = rng.normal(size=(4, 3))
    m = fit_dense(KernelSpec(), X, Y, lam=0.0)
    np.testing.assert_allclose(m.cardinal_basis(X), np.eye(4), atol=1e-6)
    Z = rng.normal(size=(5, 2))
    np.testing.assert_allclose(m.cardinal_basis(Z) @ Y, m.predict(Z), atol=1e-12)


def test_rkhs_norm():
    X = np.random.default_rng(1).normal(size=(6, 2))
    Y = np.random.default_rng(2).normal(size=(6, 1))
    assert fit_dense(KernelSpec(), X, np.zeros((6, 1))).rkhs_norm()[0] == 0
    assert fit_dense(KernelSpec(), [[0.0]], [[2.0]], lam=0.0).rkhs_norm()[0] == 2.0
    base = fit_dense(KernelSpec(), X, Y).rkhs_norm()[0]
    assert fit_dense(KernelSpec(), X, -3 * Y).rkhs_norm()[0] == pytest.approx(3 * base, rel=1e-12)
    K = ref_gram(X, X) + 1e-9 * np.eye(6)
    assert base == pytest.approx(np.sqrt(Y[:, 0] @ np.linalg.solve(K, Y[:, 0])), rel=1e-8)


def test_power_function_against_reference():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(12, 2))
    Z = rng.normal(size=(30, 2))
    m = fit_dense(KernelSpec(), X, np.zeros((12, 1)), lam=1e-9)
    np.testing.assert_allclose(m.power_function(Z), ref_power(X, Z, 1e-9), atol=1e-7)
    assert np.all(m.power_function(X) <= 1e-4)
    eps = m.power_function(Z)
    assert np.all((eps >= 0) & (eps <= 1))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 15), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_permutation_equivariance(n, d, seed):
    rng = np.random.default_rng(seed)
    X = distinct_points(rng, n, d, min_sep=0.05)
    Y = rng.normal(size=(n, 2))
    Z = rng.normal(size=(5, d))
    p = rng.permutation(n)
    a = fit_dense(KernelSpec(), X, Y).predict(Z)
    b = fit_dense(KernelSpec(), X[p], Y[p]).predict(Z)
    np.testing.assert_allclose(a, b, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_power_function_monotone_in_centers(n, d, seed):
    rng = np.random.default_rng(seed)
    X = distinct_points(rng, n + 1, d, min_sep=0.05)
    Z = rng.normal(size=(20, d))
    small = fit_dense(KernelSpec(), X[:n], np.zeros((n, 1)))
    big = fit_dense(KernelSpec(), X, np.zeros((n + 1, 1)))
    assert np.all(big.power_function(Z) <= small.power_function(Z) + 1e-8)


def test_jitter_schedule_and_failure():
    assert list(jitter_schedule(1e-9)) == pytest.approx([1e-9, 1e-8, 1e-7, 1e-6])
    assert list(jitter_schedule(0.0))[:2] == pytest.approx([0.0, 1e-11])
    K = np.ones((3, 3))
    L, lam = factor_spd(K, 0.0)
    assert lam > 0
    with pytest.raises(NumericalError) as info:
        factor_spd(-np.eye(2), 1e-9)
    assert info.value.jitter == pytest.approx(1e-6)


def test_duplicate_training_points_fit_with_jitter():
    X = np.array([[0.0], [0.0], [1.0]])
    with pytest.warns(RuntimeWarning):
        m = fit_dense(KernelSpec(), X, [[1.0], [1.0], [2.0]], lam=0.0)
    assert m.lam_used > 0
    assert np.all(np.isfinite(m.predict([[0.5]])))


def test_gradients_zero_upstream():
    rng = np.random.default_rng(0)
    X, Y, Z = rng.normal(size=(5, 2)), rng.normal(size=(5, 1)), rng.normal(size=(3, 2))
    gY, gX, gZ = krr_gradients(KernelSpec(), X, Y, Z, 1e-9, np.zeros((3, 1)))
    assert not gY.any() and not gX.any() and not gZ.any()


def test_grad_y_identity_at_nodes():
    rng = np.random.default_rng(0)
    X, Y = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
    G = rng.normal(size=(5, 2))
    gY, _, _ = krr_gradients(KernelSpec(), X, Y, X, 0.0, G)
    np.testing.assert_allclose(gY, G, atol=1e-6)


def _fd_check(spec, X, Y, Z, lam, G):
    def out(X_, Y_, Z_):
        return float(np.sum(fit_dense(spec, X_, Y_, lam, warn=False).predict(Z_) * G))

    gY, gX, gZ = krr_gradients(spec, X, Y, Z, lam, G)
    return (
        rel_err(gY, fd_grad(lambda v: out(X, v, Z), Y)),
        rel_err(gX, fd_grad(lambda v: out(v, Y, Z), X)),
        rel_err(gZ, fd_grad(lambda v: out(X, Y, v), Z)),
    )


@pytest.mark.parametrize("metric", ["euclidean", "manhattan"])
@pytest.mark.parametrize("act", ["exponential", "gaussian"])
@pytest.mark.parametrize("normalize", [False, True])
def test_gradients_finite_differences(metric, act, normalize):
    rng = np.random.default_rng(17)
    X, Y, Z = rng.normal(size=(5, 2)), rng.normal(size=(5, 2)), rng.normal(size=(4, 2))
    spec = KernelSpec(metric, act)
    if normalize:
        spec = spec.fitted(X)  # normalizer held fixed while X moves
    errs = _fd_check(spec, X, Y, Z, 1e-3, rng.normal(size=(4, 2)))
    assert max(errs) < 1e-4, errs


def test_gradient_at_coincident_point_is_zero_subgradient():
    X = np.array([[0.0, 0.0], [1.0, 0.0]])
    _, _, gZ = krr_gradients(KernelSpec(), X, [[1.0], [0.0]], [[0.0, 0.0]], 1e-9, [[1.0]])
    assert np.all(np.isfinite(gZ))
    # only the second center contributes a direction; the coincident one gives 0
    m = fit_dense(KernelSpec(), X, [[1.0], [0.0]])
    expected = -np.exp(-1.0) * m.theta[1, 0] * np.array([-1.0, 0.0])
    np.testing.assert_allclose(gZ[0], expected, atol=1e-12)
