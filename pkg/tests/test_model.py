import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logsumexp

from mcstfa.densities import DensityError, SkewTParams, log_density_skew_t
from mcstfa.model import (
    PARSIMONY_PANELS,
    DataMatrix,
    MixtureParams,
    component_log_densities,
    count_free_parameters,
    mixture_log_density,
    parsimony_table,
    posterior_responsibilities,
)

from oracles import skew_t_logpdf_dense


def random_params(rng, p=5, q=2, G=3, skew=1.0):
    a = rng.standard_normal((G, q, q))
    w = rng.uniform(0.5, 1.5, G)
    return MixtureParams(
        weights=w / w.sum(),
        loadings=rng.standard_normal((p, q)),
        factor_means=rng.standard_normal((G, q)) * 2,
        factor_skews=rng.standard_normal((G, q)) * skew,
        factor_covs=a @ a.transpose(0, 2, 1) + 0.5 * np.eye(q),
        noise_diag=rng.uniform(0.3, 1.5, p),
        dof=rng.uniform(2, 20, G),
    )


def dense_mixture(x, params):
    comps = []
    for g in range(params.G):
        lam = params.loadings
        sigma = lam @ params.factor_covs[g] @ lam.T + np.diag(params.noise_diag)
        comps.append(np.log(params.weights[g]) + skew_t_logpdf_dense(
            x, lam @ params.factor_means[g], sigma, lam @ params.factor_skews[g], params.dof[g]))
    return logsumexp(np.column_stack(comps), axis=1)


# -- DataMatrix


def test_data_matrix_copies_and_freezes():
    raw = np.arange(6.0).reshape(3, 2)
    dm = DataMatrix(raw, ("a", "b"))
    raw[0, 0] = 99
    assert dm.values[0, 0] == 0
    assert (dm.rows, dm.cols) == (3, 2)
    with pytest.raises(ValueError):
        dm.values[0, 0] = 1


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_data_matrix_rejects_non_finite(bad):
    raw = np.zeros((3, 2))
    raw[2, 1] = bad
    with pytest.raises(ValueError, match="row 2, column 1"):
        DataMatrix(raw)


def test_data_matrix_shape_checks():
    with pytest.raises(ValueError):
        DataMatrix(np.zeros(3))
    with pytest.raises(ValueError):
        DataMatrix(np.zeros((2, 2)), ("only-one",))


# -- MixtureParams


def test_params_validation():
    rng = np.random.default_rng(0)
    good = random_params(rng)
    with pytest.raises(ValueError):
        good.replace(weights=np.array([0.5, 0.5, 0.5]))
    with pytest.raises(ValueError):
        good.replace(noise_diag=-good.noise_diag)
    with pytest.raises(ValueError):
        good.replace(dof=np.array([1.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        good.replace(factor_means=np.full((3, 2), np.nan))


def test_params_do_not_alias_inputs():
    rng = np.random.default_rng(1)
    lam = rng.standard_normal((5, 2))
    params = random_params(rng).replace(loadings=lam)
    lam[0, 0] = 1e6
    assert params.loadings[0, 0] != 1e6
    assert lam.flags.writeable


def test_component_view():
    rng = np.random.default_rng(2)
    params = random_params(rng)
    view = params.component(1)
    np.testing.assert_allclose(view.mean, params.loadings @ params.factor_means[1])
    np.testing.assert_allclose(view.skew, params.loadings @ params.factor_skews[1])
    assert view.nu == params.dof[1]


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_normalization_keeps_density(seed, q):
    rng = np.random.default_rng(seed)
    params = random_params(rng, p=6, q=q, G=2)
    norm = params.normalized()
    np.testing.assert_allclose(norm.loadings.T @ norm.loadings, np.eye(q), atol=1e-10)
    first = norm.loadings[np.argmax(np.abs(norm.loadings) > 1e-14, axis=0), np.arange(q)]
    assert np.all(first > 0)
    x = rng.standard_normal((20, 6)) * 3
    np.testing.assert_allclose(mixture_log_density(x, norm), mixture_log_density(x, params), rtol=0, atol=1e-10)


def test_normalized_is_idempotent():
    params = random_params(np.random.default_rng(4)).normalized()
    again = params.normalized()
    np.testing.assert_allclose(again.loadings, params.loadings, atol=1e-13)
    np.testing.assert_allclose(again.factor_means, params.factor_means, atol=1e-12)


def test_permutation_and_canonical_order():
    rng = np.random.default_rng(5)
    params = random_params(rng)
    order = params.canonical_order()
    sorted_params = params.permuted(order)
    first = sorted_params.factor_means @ sorted_params.loadings[0]
    assert np.all(np.diff(first) >= 0)
    x = rng.standard_normal((10, 5))
    np.testing.assert_allclose(mixture_log_density(x, sorted_params), mixture_log_density(x, params), atol=1e-12)
    np.testing.assert_allclose(posterior_responsibilities(x, sorted_params), posterior_responsibilities(x, params)[:, order])


# -- densities and responsibilities


def test_mixture_matches_dense_oracle():
    rng = np.random.default_rng(6)
    params = random_params(rng, p=2, q=1, G=2)
    x = rng.standard_normal((40, 2)) * 3
    np.testing.assert_allclose(mixture_log_density(x, params), dense_mixture(x, params), rtol=0, atol=1e-10)
    assert isinstance(mixture_log_density(x[0], params), float)


def test_single_component_equals_skew_t():
    rng = np.random.default_rng(7)
    params = random_params(rng, G=1)
    view = params.component(0)
    x = rng.standard_normal((8, 5))
    ref = log_density_skew_t(x, SkewTParams(view.mean, view.scale, view.skew, view.nu))
    np.testing.assert_allclose(mixture_log_density(x, params), ref, atol=1e-12)
    np.testing.assert_array_equal(posterior_responsibilities(x, params), np.ones((8, 1)))


def test_duplicate_components_collapse():
    rng = np.random.default_rng(8)
    one = random_params(rng, G=1)
    two = MixtureParams(
        weights=[0.5, 0.5],
        loadings=one.loadings,
        factor_means=np.repeat(one.factor_means, 2, axis=0),
        factor_skews=np.repeat(one.factor_skews, 2, axis=0),
        factor_covs=np.repeat(one.factor_covs, 2, axis=0),
        noise_diag=one.noise_diag,
        dof=np.repeat(one.dof, 2),
    )
    x = rng.standard_normal((10, 5))
    np.testing.assert_allclose(mixture_log_density(x, two), mixture_log_density(x, one), atol=1e-12)
    np.testing.assert_allclose(posterior_responsibilities(x, two), 0.5, atol=1e-15)


def test_responsibilities_direct_ratio():
    rng = np.random.default_rng(9)
    params = random_params(rng)
    x = rng.standard_normal((15, 5))
    logc = component_log_densities(x, params)
    dens = params.weights * np.exp(logc)
    ref = dens / dens.sum(axis=1, keepdims=True)
    z = posterior_responsibilities(x, params)
    np.testing.assert_allclose(z, ref, atol=1e-12)
    np.testing.assert_allclose(z.sum(axis=1), 1.0, atol=1e-12)


def test_responsibilities_survive_far_points():
    # every component density underflows in linear space here
    rng = np.random.default_rng(10)
    params = random_params(rng)
    x = np.full((2, 5), 400.0)
    z = posterior_responsibilities(x, params)
    assert np.all(np.isfinite(z))
    np.testing.assert_allclose(z.sum(axis=1), 1.0, atol=1e-12)


def test_density_error_names_component():
    rng = np.random.default_rng(11)
    params = random_params(rng)
    with pytest.raises(DensityError) as info:
        with np.errstate(all="ignore"):
            component_log_densities(np.full((1, 5), 1e300), params)
    assert info.value.component is not None


# -- parameter counts


def test_count_examples():
    assert count_free_parameters("MCStFA", 15, 2, 4) == 76
    assert count_free_parameters("CCC", 15, 2, 4) == 157
    assert count_free_parameters("mcstfa", 15, 2, 4) == 76
    p = 6
    assert count_free_parameters("MCStFA", p, p, 1) == p * (p + 1) // 2 + p * 2 + 2 + p - 1


@pytest.mark.parametrize("args", [(5, 0, 2), (5, 6, 2), (5, 2, 0), (5.5, 2, 2)])
def test_count_domain_errors(args):
    with pytest.raises(ValueError):
        count_free_parameters("MCStFA", *args)


def test_count_unknown_model():
    with pytest.raises(ValueError):
        count_free_parameters("XYZ", 5, 2, 2)


def hand_count(model, p, q, G):
    """Sum of the parameter blocks, counted one at a time."""
    weights, dof = G - 1, G
    if model == "MCStFA":
        loadings = p * q - q * q                     # orthonormal columns, rotation pinned
        return weights + dof + loadings + G * q + G * q + G * q * (q + 1) // 2 + p
    loadings = (p * q - q * (q - 1) // 2) * (G if model[0] == "U" else 1)
    means_and_skews = 2 * G * p
    shared_noise, isotropic = model[1] == "C", model[2] == "C"
    noise = (1 if isotropic else p) * (1 if shared_noise else G)
    return weights + dof + loadings + means_and_skews + noise


@pytest.mark.parametrize("model", ["MCStFA", "CCC", "CCU", "CUC", "CUU", "UCC", "UCU", "UUC", "UUU"])
def test_counts_match_block_accounting(model):
    for p in range(1, 51):
        for q in range(1, p + 1):
            for G in range(1, 11):
                assert count_free_parameters(model, p, q, G) == hand_count(model, p, q, G)


@pytest.mark.parametrize("q,G", PARSIMONY_PANELS)
def test_parsimony_ordering_for_large_p(q, G):
    for p in range(50, 400):
        c = {m: count_free_parameters(m, p, q, G) for m in ("MCStFA", "CCC", "CUU", "UUU")}
        assert c["MCStFA"] < c["CCC"] < c["CUU"] < c["UUU"]


def test_parsimony_table_rows():
    rows = parsimony_table(range(10, 13), 2, 3, ("CCC", "MCStFA"))
    assert rows[0] == ("CCC", 10, count_free_parameters("CCC", 10, 2, 3))
    assert len(rows) == 6
