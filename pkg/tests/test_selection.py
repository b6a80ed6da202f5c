import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment

from helpers import brute_kcenter, brute_lsap, fd_grad, ref_gm, rel_err
from lazykrr import InputError, fill_distance, greedy_select, gromov_monge, monge_assign
from lazykrr.selection import _lsap, transport_cost_matrix


def test_greedy_hand_traced():
    sel = greedy_select([[0.0], [1.0], [2.0], [10.0]], 3)
    assert sel.indices.tolist() == [0, 3, 2]
    assert sel.radii[0] == np.inf
    assert sel.radii[1:].tolist() == [10.0, 2.0]


def test_greedy_base_cases():
    X = np.random.default_rng(0).normal(size=(9, 2))
    assert greedy_select(X, 1, start_index=4).indices.tolist() == [4]
    assert sorted(greedy_select(X, 9).indices.tolist()) == list(range(9))
    with pytest.raises(InputError):
        greedy_select(X, 10)
    with pytest.raises(InputError):
        greedy_select(X, 2, start_index=9)


def test_greedy_ties_lowest_index():
    X = np.array([[0.0], [-1.0], [1.0]])
    assert greedy_select(X, 2).indices.tolist() == [0, 1]


def test_greedy_prefix_rule():
    X = np.array([[0.0], [1.0], [2.0], [10.0]])
    # step n only looks at indices >= n
    sel = greedy_select(X, 3, candidates="prefix")
    assert sel.indices.tolist() == [0, 3, 2]
    X2 = np.array([[5.0], [0.0], [4.9], [10.0]])
    assert greedy_select(X2, 3, candidates="prefix").indices.tolist() == [0, 1, 3]
    with pytest.raises(InputError):
        greedy_select(X2, 4, candidates="prefix", start_index=3)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.integers(1, 4), st.integers(0, 2**32 - 1), st.sampled_from(["euclidean", "manhattan"]))
def test_coverage_radii_non_increasing(n, d, seed, metric):
    X = np.random.default_rng(seed).normal(size=(n, d))
    sel = greedy_select(X, n, metric=metric, start_index=int(seed % n))
    r = sel.radii[1:]
    assert np.all(np.diff(r) <= 0)
    assert len(set(sel.indices.tolist())) == n


def test_greedy_against_naive_loop():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(50, 3))
    chosen = [7]
    for _ in range(9):
        d = [min(np.linalg.norm(X[i] - X[j]) for j in chosen) if i not in chosen else -1 for i in range(50)]
        chosen.append(int(np.argmax(d)))
    assert greedy_select(X, 10, start_index=7).indices.tolist() == chosen


def test_fill_distance():
    X = np.random.default_rng(1).normal(size=(12, 2))
    assert fill_distance(X, range(12)) == 0
    assert fill_distance([[0.0], [10.0]], [0]) == 10.0
    with pytest.raises(InputError):
        fill_distance(X, [])


@pytest.mark.parametrize("seed", range(5))
def test_two_approximation_20_points(seed):
    X = np.random.default_rng(seed).normal(size=(20, 2))
    sel = greedy_select(X, 5)
    assert fill_distance(X, sel.indices) <= 2 * brute_kcenter(X, 5) + 1e-12


def test_lsap_examples():
    X = np.random.default_rng(0).normal(size=(5, 2))
    a = monge_assign(X, X)
    assert a.perm.tolist() == list(range(5)) and a.cost == 0
    b = monge_assign([[0.0], [1.0]], [[1.0], [0.0]])
    assert b.perm.tolist() == [1, 0] and b.cost == 0
    with pytest.raises(InputError):
        monge_assign(X, X[:4])


@pytest.mark.parametrize("seed", range(8))
def test_lsap_matches_brute_force_n6(seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(6, 3)), rng.normal(size=(6, 3))
    for cost in ("sqeuclidean", "euclidean"):
        a = monge_assign(X, Y, cost=cost)
        C = transport_cost_matrix(X, Y, cost)
        assert sorted(a.perm.tolist()) == list(range(6))
        assert a.cost == pytest.approx(C[np.arange(6), a.perm].sum(), abs=0)
        assert a.cost == pytest.approx(brute_lsap(C), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**32 - 1), st.booleans())
def test_lsap_matches_scipy(n, seed, integer):
    rng = np.random.default_rng(seed)
    C = rng.integers(0, 5, size=(n, n)).astype(float) if integer else rng.uniform(size=(n, n))
    perm = _lsap(C)
    r, c = linear_sum_assignment(C)
    assert C[np.arange(n), perm].sum() == pytest.approx(C[r, c].sum(), abs=1e-9)
    assert sorted(perm.tolist()) == list(range(n))


def test_gm_examples():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(7, 3))
    assert gromov_monge(X, X)[0] == 0
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    assert gromov_monge(X, X @ Q.T + rng.normal(size=3))[0] < 1e-10
    v, gx, gy = gromov_monge(X[:1], X[:1])
    assert v == 0 and not gx.any() and not gy.any()
    with pytest.raises(InputError):
        gromov_monge(X, X[:3])


def test_gm_value_and_symmetry():
    rng = np.random.default_rng(3)
    X, Y = rng.normal(size=(6, 2)), rng.normal(size=(6, 4))
    v = gromov_monge(X, Y)[0]
    assert v == pytest.approx(ref_gm(X, Y), rel=1e-12)
    assert v == gromov_monge(Y, X)[0]
    assert v >= 0


@pytest.mark.parametrize("seed", range(5))
def test_gm_gradients_finite_differences(seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(5, 2)), rng.normal(size=(5, 3))
    _, gx, gy = gromov_monge(X, Y)
    assert rel_err(gx, fd_grad(lambda v: gromov_monge(v, Y)[0], X)) < 1e-4
    assert rel_err(gy, fd_grad(lambda v: gromov_monge(X, v)[0], Y)) < 1e-4


def test_gm_gradient_with_coincident_points_is_finite():
    X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    Y = np.array([[0.0], [1.0], [2.0]])
    _, gx, gy = gromov_monge(X, Y)
    assert np.all(np.isfinite(gx)) and np.all(np.isfinite(gy))


def test_brute_force_oracle_sanity():
    C = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])
    best = min(sum(C[i, p[i]] for i in range(3)) for p in itertools.permutations(range(3)))
    assert brute_lsap(C) == best == 5.0
