import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cltca.exceptions import DegenerateComponent, DimMismatch, IndexOutOfRange, ZeroTensor
from cltca.kruskal import (
    KruskalFactors,
    component_slice,
    normalize_components,
    normalized_error,
    reconstruct,
)
from cltca.tensor import Dense3Tensor, new_tensor


def random_factors(dims, rank, seed=0, nonneg=False):
    rng = np.random.default_rng(seed)
    draw = rng.random if nonneg else rng.standard_normal
    return KruskalFactors(rng.random(rank) + 0.5, *(draw((d, rank)) for d in dims))


def triple_loop(f):
    I, J, K = f.shape
    out = np.zeros((I, J, K))
    for i, j, k in itertools.product(range(I), range(J), range(K)):
        out[i, j, k] = sum(f.weights[r] * f.U[i, r] * f.V[j, r] * f.W[k, r] for r in range(f.rank))
    return out


def test_rank_one_all_ones():
    f = KruskalFactors.from_factors(np.ones((2, 1)), np.ones((3, 1)), np.ones((4, 1)))
    np.testing.assert_array_equal(reconstruct(f).data, np.ones((2, 3, 4)))


def test_zero_weight_component_is_ignored():
    rng = np.random.default_rng(1)
    U, V, W = rng.random((3, 2)), rng.random((4, 2)), rng.random((5, 2))
    two = KruskalFactors([1.0, 0.0], U, V, W)
    one = KruskalFactors([1.0], U[:, :1], V[:, :1], W[:, :1])
    np.testing.assert_array_equal(reconstruct(two).data, reconstruct(one).data)


def test_reconstruct_matches_triple_loop():
    f = random_factors((4, 3, 5), 3, seed=2)
    np.testing.assert_allclose(reconstruct(f).data, triple_loop(f), rtol=1e-12, atol=1e-12)


def test_reconstruct_dim_mismatch():
    f = random_factors((4, 3, 5), 2)
    with pytest.raises(DimMismatch):
        reconstruct(f, (4, 3, 6))


def test_normalized_error_examples():
    f = random_factors((4, 3, 5), 2, seed=3)
    x = reconstruct(f)
    assert normalized_error(x, f) == pytest.approx(0.0, abs=1e-14)
    zero = KruskalFactors(np.ones(2), np.zeros((4, 2)), np.zeros((3, 2)), np.zeros((5, 2)))
    assert normalized_error(x, zero) == 1.0


def test_normalized_error_hand_case():
    x = new_tensor((1, 1, 2), [3.0, 4.0])
    f = KruskalFactors.from_factors([[3.0]], [[1.0]], [[1.0], [0.0]])
    assert normalized_error(x, f) == pytest.approx(0.8, abs=1e-15)


def test_normalized_error_zero_tensor():
    f = random_factors((2, 2, 2), 1)
    with pytest.raises(ZeroTensor):
        normalized_error(Dense3Tensor(np.zeros((2, 2, 2))), f)


def test_normalize_unit_columns_and_reconstruction():
    f = random_factors((6, 4, 5), 3, seed=4)
    g = normalize_components(f)
    for m in g.factors:
        np.testing.assert_allclose(np.linalg.norm(m, axis=0), 1.0, rtol=1e-14)
    assert list(g.weights) == sorted(g.weights, reverse=True)
    np.testing.assert_allclose(reconstruct(g).data, reconstruct(f).data, rtol=1e-12, atol=1e-12)


def test_normalize_scaled_column_doubles_weight():
    f = normalize_components(random_factors((5, 4, 3), 1, seed=5))
    g = normalize_components(KruskalFactors(f.weights, 2 * f.U, f.V, f.W))
    assert g.weights[0] == pytest.approx(2 * f.weights[0], rel=1e-14)
    np.testing.assert_allclose(g.U, f.U, rtol=1e-14)


def test_normalize_is_idempotent_up_to_order():
    f = normalize_components(random_factors((5, 4, 3), 3, seed=6))
    g = normalize_components(f)
    np.testing.assert_allclose(g.weights, f.weights, rtol=1e-14)
    np.testing.assert_allclose(g.U, f.U, rtol=1e-14)


def test_normalize_degenerate():
    U = np.ones((3, 2))
    U[:, 1] = 0
    with pytest.raises(DegenerateComponent):
        normalize_components(KruskalFactors([1.0, 1.0], U, np.ones((2, 2)), np.ones((2, 2))))
    g = normalize_components(KruskalFactors([1.0, 0.0], U, np.ones((2, 2)), np.ones((2, 2))))
    assert g.weights[1] == 0.0


def test_component_slice():
    f = normalize_components(random_factors((3, 3, 3), 1))
    c = component_slice(f, 0)
    assert c.weight == f.weights[0]
    np.testing.assert_array_equal(c.u, f.U[:, 0])
    with pytest.raises(IndexOutOfRange):
        component_slice(f, 1)


def test_slices_descending_after_normalize():
    f = normalize_components(random_factors((5, 5, 5), 4, seed=8))
    weights = [component_slice(f, r).weight for r in range(4)]
    assert weights == sorted(weights, reverse=True)


def test_tie_break_is_lexicographic_on_u():
    U = np.array([[0.0, 1.0], [1.0, 0.0]])
    f = normalize_components(KruskalFactors([1.0, 1.0], U, np.eye(2), np.eye(2)))
    # equal weights: column (0, 1) sorts before (1, 0)
    np.testing.assert_array_equal(f.U[:, 0], [0.0, 1.0])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), r=st.integers(0, 2), c=st.floats(0.1, 10.0),
       mode=st.sampled_from([0, 1, 2]))
def test_multilinear_scaling_invariance(seed, r, c, mode):
    f = random_factors((4, 3, 5), 3, seed=seed)
    mats = [m.copy() for m in f.factors]
    mats[mode][:, r] *= c
    w = f.weights.copy()
    w[r] /= c
    g = KruskalFactors(w, *mats)
    a, b = reconstruct(f).data, reconstruct(g).data
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a)) * 10


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), perm=st.permutations(range(4)))
def test_error_invariant_under_permutation(seed, perm):
    f = random_factors((5, 4, 3), 4, seed=seed)
    x = Dense3Tensor(np.random.default_rng(seed + 1).standard_normal((5, 4, 3)))
    assert normalized_error(x, f.permute(perm)) == pytest.approx(normalized_error(x, f), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_nonnegative_factors_reconstruct_nonnegative(seed):
    f = random_factors((4, 5, 6), 3, seed=seed, nonneg=True)
    assert reconstruct(f).data.min() >= 0
