import numpy as np
import pytest

from mcstfa.simulate import RNG_NAME, SimSpec, benchmark_spec, simulate


def test_benchmark_design_values():
    spec = benchmark_spec(3)
    assert (spec.n, spec.p, spec.q, spec.G) == (200, 15, 2, 4)
    assert spec.dof == [5.0, 2.0, 40.0, 40.0]
    assert spec.factor_skews == [[10.0, 10.0], [0.0, 0.0], [0.0, 0.0], [50.0, 45.0]]
    sim = simulate(spec)
    assert sim.data.values.shape == (200, 15)
    np.testing.assert_array_equal(np.bincount(sim.labels), [50, 50, 50, 50])


def test_same_seed_same_data():
    a = simulate(benchmark_spec(7))
    b = simulate(benchmark_spec(7))
    np.testing.assert_array_equal(a.data.values, b.data.values)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert not np.array_equal(a.data.values, simulate(benchmark_spec(8)).data.values)


def test_spec_round_trip_reproduces_data():
    sim = simulate(benchmark_spec(2))
    again = simulate(SimSpec.from_dict(sim.spec.to_dict()))
    np.testing.assert_array_equal(again.data.values, sim.data.values)
    assert sim.spec.rng == RNG_NAME
    assert sim.spec.factor_means is not None and sim.spec.loadings is not None


def test_gaussian_limit_mean():
    spec = SimSpec(n=10_000, p=4, q=2, G=1, weights=[1.0], dof=[1e6], factor_skews=[[0.0, 0.0]], seed=1)
    sim = simulate(spec)
    target = sim.params.loadings @ sim.params.factor_means[0]
    sd = np.sqrt(np.diag(sim.params.component(0).scale.dense()) / spec.n)
    assert np.all(np.abs(sim.data.values.mean(axis=0) - target) < 4 * sd)


def test_proportions_within_three_se():
    w = np.array([0.2, 0.3, 0.5])
    spec = SimSpec(n=5000, p=3, q=1, G=3, weights=w.tolist(), dof=[5.0] * 3, factor_skews=[[0.0]] * 3, seed=4)
    freq = np.bincount(simulate(spec).labels, minlength=3) / spec.n
    assert np.all(np.abs(freq - w) < 3 * np.sqrt(w * (1 - w) / spec.n))


def test_symmetric_component_covariance():
    # for nu > 2: Cov = nu / (nu - 2) * Sigma, checked on the diagonal
    nu = 8.0
    spec = SimSpec(n=40_000, p=3, q=1, G=1, weights=[1.0], dof=[nu], factor_skews=[[0.0]], seed=5)
    sim = simulate(spec)
    target = nu / (nu - 2) * np.diag(sim.params.component(0).scale.dense())
    got = sim.data.values.var(axis=0)
    # loose: the fourth moment of a t with nu = 8 is finite but large
    np.testing.assert_allclose(got, target, rtol=0.08)


def test_latent_draws_follow_the_representation():
    sim = simulate(benchmark_spec(0))
    lam = sim.params.loadings
    resid = sim.data.values - sim.latent_factors @ lam.T
    # what is left is sqrt(y) * noise; scaled back it has unit variance
    scaled = resid / np.sqrt(sim.latent_scales)[:, None]
    assert scaled.var() == pytest.approx(1.0, rel=0.05)


def test_spec_validation():
    base = dict(n=10, p=3, q=1, G=2, weights=[0.5, 0.5], dof=[5, 5], factor_skews=[[0.0], [0.0]])
    SimSpec(**base)
    with pytest.raises(ValueError):
        SimSpec(**{**base, "weights": [0.6, 0.6]})
    with pytest.raises(ValueError):
        SimSpec(**{**base, "q": 4})
    with pytest.raises(ValueError):
        SimSpec(**{**base, "factor_skews": [[0.0]]})
    with pytest.raises(ValueError):
        SimSpec(**{**base, "loadings_source": "file"})
