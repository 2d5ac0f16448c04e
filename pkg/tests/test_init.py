import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.cluster import hierarchy

from mcstfa.initialization import InitConfig, hierarchical_labels, initial_params, perturb_labels

# 1-D points chosen so the complete-linkage merges can be done by hand:
#   d(0,1) = d(7,8) = 1, tie -> lowest pair {0,1} first, then {7,8}
#   {0,1} + 3 at max(3, 2) = 3
#   {0,1,3} + {7,8} at 8
#   everything + 20 at 20
SIX = np.array([0.0, 1.0, 3.0, 7.0, 8.0, 20.0])[:, None]


def test_hand_worked_complete_linkage():
    tree = hierarchy.linkage(SIX, method="complete")
    np.testing.assert_array_equal(tree[:, 2], [1, 1, 3, 8, 20])
    np.testing.assert_array_equal(tree[0, :2], [0, 1])
    assert list(hierarchical_labels(SIX, 2)) == [0, 0, 0, 0, 0, 1]
    assert list(hierarchical_labels(SIX, 3)) == [0, 0, 0, 1, 1, 2]
    assert list(hierarchical_labels(SIX, 4)) == [0, 0, 1, 2, 2, 3]


def test_separated_clouds():
    rng = np.random.default_rng(0)
    x = np.vstack([rng.standard_normal((30, 3)), rng.standard_normal((20, 3)) + 50])
    lab = hierarchical_labels(x, 2)
    assert list(lab) == [0] * 30 + [1] * 20
    for link in ("ward", "average"):
        np.testing.assert_array_equal(hierarchical_labels(x, 2, link), lab)


def test_degenerate_cuts():
    assert list(hierarchical_labels(SIX, 6)) == list(range(6))
    assert list(hierarchical_labels(SIX, 1)) == [0] * 6
    with pytest.raises(ValueError):
        hierarchical_labels(SIX, 7)
    with pytest.raises(ValueError):
        hierarchical_labels(SIX, 2, "single")


def test_min_size_absorbs_outliers():
    rng = np.random.default_rng(1)
    x = np.vstack([rng.standard_normal((25, 2)), rng.standard_normal((25, 2)) + 40, [[0.0, 500.0]]])
    plain = hierarchical_labels(x, 2)
    assert np.bincount(plain).min() == 1          # the outlier is its own cluster
    lab = hierarchical_labels(x, 2, min_size=5)
    assert list(lab[:50]) == [0] * 25 + [1] * 25
    assert lab[50] in (0, 1)


def test_min_size_fallback_is_plain_cut():
    # cannot form two groups of 5 from 6 points
    np.testing.assert_array_equal(hierarchical_labels(SIX, 2, min_size=5), hierarchical_labels(SIX, 2))


def test_initial_params_proportions_and_validity():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((100, 6))
    labels = np.array([0] * 30 + [1] * 70)
    par = initial_params(x, labels, 2)
    np.testing.assert_allclose(par.weights, [0.3, 0.7])
    np.testing.assert_allclose(par.loadings.T @ par.loadings, np.eye(2), atol=1e-12)
    np.testing.assert_array_equal(par.dof, [50.0, 50.0])
    # all-ones start, up to the column signs fixed by normalization
    np.testing.assert_allclose(np.abs(par.factor_skews), np.ones((2, 2)), rtol=1e-14)
    again = initial_params(x, labels, 2)
    np.testing.assert_array_equal(again.loadings, par.loadings)
    np.testing.assert_array_equal(again.factor_covs, par.factor_covs)


def test_initial_params_noise_floor_for_low_rank_data():
    rng = np.random.default_rng(3)
    lam = np.linalg.qr(rng.standard_normal((8, 2)))[0]
    x = rng.standard_normal((400, 2)) @ lam.T * 5 + 1e-6 * rng.standard_normal((400, 8))
    par = initial_params(x, np.zeros(400, dtype=int), 2)
    scale = np.mean(np.var(x, axis=0))
    assert np.all(par.noise_diag < 1e-5 * scale)


def test_single_cluster_isotropic_omega():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((5000, 4)) * 2.0
    par = initial_params(x, np.zeros(5000, dtype=int), 2)
    np.testing.assert_allclose(par.factor_covs[0], 4.0 * np.eye(2), atol=0.35)


def test_initial_params_errors():
    x = np.zeros((5, 3))
    with pytest.raises(ValueError):
        initial_params(x, [0, 0, 0, 0, 1], 1)
    with pytest.raises(ValueError):
        initial_params(x, [0, 0, 1, 1], 1)
    with pytest.raises(ValueError):
        InitConfig(nu0=0)


@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
@settings(max_examples=30, deadline=None)
def test_any_partition_gives_valid_params(seed, G):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((40, 5)) * rng.uniform(0.1, 10, 5)
    labels = np.concatenate([np.arange(G), np.arange(G), rng.integers(0, G, 40 - 2 * G)])
    par = initial_params(x, labels, 2)
    assert par.G == G
    assert np.all(np.linalg.eigvalsh(par.factor_covs) > 0)
    assert np.all(par.noise_diag > 0)


def test_perturb_keeps_groups():
    rng = np.random.default_rng(5)
    base = np.repeat(np.arange(3), 10)
    out = perturb_labels(base, 0.3, rng)
    assert np.bincount(out, minlength=3).min() >= 2
    assert np.any(out != base)
