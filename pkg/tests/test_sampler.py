import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qchlab.core import Grid1D, PhysParams, gaussian_packet
from qchlab.qm2d import analytic_free_gaussian
from qchlab.sampler import (
    CounterNormals,
    DriftModel,
    Ensemble,
    evolve_ensemble,
    forward_drift,
    free_gaussian_model,
    grid_model,
    ground_state_model,
    histogram,
    ks_critical_value,
    ks_distance,
)


def test_drift_uniform_density_is_current_velocity():
    model = DriftModel(lambda x, t: 0.3 + 0 * x, lambda x, t: 0 * x, nu=1.0)
    assert np.allclose(forward_drift(model, np.linspace(-1, 1, 5), 0.0), 0.3)


@given(st.floats(0.1, 5.0), st.floats(0.01, 2.0))
def test_drift_of_resting_gaussian(alpha, nu):
    model = DriftModel(lambda x, t: 0 * x, lambda x, t: -4 * alpha * x, nu)
    x = np.linspace(-3, 3, 7)
    assert np.allclose(forward_drift(model, x, 0.0), -4 * nu * alpha * x)


@settings(deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 50), st.integers(1, 300),
       st.integers(1, 300))
def test_counter_normals_are_partition_independent(seed, step, a, b):
    gen = CounterNormals(seed)
    whole = gen.normals(step, 0, a + b)
    parts = np.concatenate([gen.normals(step, 0, a), gen.normals(step, a, a + b)])
    assert np.array_equal(whole, parts)


def test_counter_normals_statistics():
    z = CounterNormals(7).normals(3, 0, 200_000)
    assert abs(z.mean()) < 0.01 and abs(z.var() - 1) < 0.01
    assert not np.array_equal(z[:100], CounterNormals(7).normals(4, 0, 100))
    assert not np.array_equal(z[:100], CounterNormals(8).normals(3, 0, 100))
    u = CounterNormals(7).uniforms(0, 0, 1000)
    assert u.min() > 0 and u.max() < 1


def test_seed_determinism_and_partitioning():
    model = free_gaussian_model(1.0)
    e = Ensemble.normal(5000, 0.0, 0.5, 42, model.nu)
    a = evolve_ensemble(e, model, 1e-3, 30)
    b = evolve_ensemble(e, model, 1e-3, 30)
    assert np.array_equal(a.positions, b.positions)
    pieces = Ensemble.concat([evolve_ensemble(p, model, 1e-3, 30)
                              for p in e.split(4)])
    assert np.array_equal(a.positions, pieces.positions)
    # stepping in two calls equals one call
    c = evolve_ensemble(evolve_ensemble(e, model, 1e-3, 10), model, 1e-3, 20)
    assert np.array_equal(a.positions, c.positions)
    other = evolve_ensemble(Ensemble.normal(5000, 0.0, 0.5, 43, model.nu),
                            model, 1e-3, 30)
    assert not np.array_equal(a.positions, other.positions)


def test_zero_noise_is_deterministic_characteristics():
    model = free_gaussian_model(1.0).with_nu(0.0)
    x0 = np.linspace(-1, 1, 201)
    a = evolve_ensemble(Ensemble(0.0, x0, 1, 0.0), model, 1e-3, 500)
    b = evolve_ensemble(Ensemble(0.0, x0, 2, 0.0), model, 1e-3, 500)
    assert np.array_equal(a.positions, b.positions)
    assert np.allclose(a.positions, x0 * np.sqrt(5.0), atol=5e-3)


def test_vanishing_noise_limit():
    model = ground_state_model()
    spreads = []
    for nu in (1.0, 1e-2, 1e-4):
        e = Ensemble.point(2000, 0.0, 3, nu)
        out = evolve_ensemble(e, DriftModel(lambda x, t: 0 * x, lambda x, t: 0 * x, nu),
                              1e-3, 100)
        spreads.append(out.positions.var())
    assert spreads[0] > spreads[1] > spreads[2]
    # pure diffusion from a point: variance 2 nu t
    assert spreads[2] == pytest.approx(2 * 1e-4 * 0.1, rel=0.1)
    assert model.nu == 1.0


def test_free_gaussian_variance_and_ks():
    alpha = 1.0
    model = free_gaussian_model(alpha)
    n = 100_000
    e = Ensemble.normal(n, 0.0, np.sqrt(1 / (4 * alpha)), 2024, model.nu)
    e = evolve_ensemble(e, model, 1e-3, 500)
    var = e.positions.var()
    se = 1.25 * np.sqrt(2 / (n - 1))
    assert abs(var - 1.25) < 3 * se
    assert ks_distance(e, lambda x: model.cdf(x, e.t)) < ks_critical_value(n)


def test_ground_state_stationary():
    model = ground_state_model()
    n = 20_000
    e = Ensemble.normal(n, 0.0, 1.0, 99, model.nu)
    se = np.sqrt(2 / (n - 1))
    for _ in range(4):
        e = evolve_ensemble(e, model, 1e-3, 500)
        assert abs(e.positions.var() - 1.0) < 4 * se
    assert e.t == pytest.approx(2.0)
    assert ks_distance(e, lambda x: model.cdf(x, e.t)) < 0.01


def test_ks_distance_cases():
    x = np.random.default_rng(0).normal(size=1000)
    assert ks_distance(x, x) == 0.0
    point = Ensemble.point(1000, 0.0, 1, 1.0)
    from scipy.stats import norm
    assert ks_distance(point, norm.cdf) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        ks_distance(x[:50], norm.cdf)
    assert ks_critical_value(100_000) == pytest.approx(0.00515, abs=1e-5)


def test_grid_model_matches_closed_form():
    g = Grid1D(-20.0, 20.0, 1024)
    times = np.linspace(0.0, 0.5, 6)
    phis = [analytic_free_gaussian(1.0, t, g) for t in times]
    gm = grid_model(times, phis, PhysParams())
    exact = free_gaussian_model(1.0)
    x = np.linspace(-3, 3, 13)
    for t in (0.0, 0.2, 0.5):
        assert np.allclose(gm.velocity(x, t), exact.velocity(x, t), atol=1e-2)
        assert np.allclose(gm.log_density_gradient(x, t),
                           exact.log_density_gradient(x, t), atol=1e-2)
    assert gm.cdf(np.array([0.0]), 0.3)[0] == pytest.approx(0.5, abs=1e-2)


def test_escapes_are_clamped_and_counted():
    model = DriftModel(lambda x, t: 50 + 0 * x, lambda x, t: 0 * x, nu=0.0,
                       support=(-1.0, 1.0))
    e = evolve_ensemble(Ensemble.point(10, 0.0, 1, 0.0), model, 0.01, 5)
    assert np.all(e.positions == 1.0)
    assert e.escapes > 0


def test_from_density_samples_the_density():
    g = Grid1D(-10.0, 10.0, 512)
    phi = gaussian_packet(g, 1.0)
    e = Ensemble.from_density(g, phi.density, 50_000, 5, 1.0)
    assert abs(e.positions.var() - 0.25) < 0.01


def test_histogram_counts_everything():
    model = ground_state_model()
    e = Ensemble.normal(10_000, 0.0, 1.0, 1, 1.0)
    centers, counts, dens = histogram(e, 40, (-6, 6), model.density)
    assert counts.sum() == 10_000
    assert centers.shape == dens.shape == (40,)


def test_ensemble_needs_particles():
    with pytest.raises(ValueError):
        Ensemble(0.0, np.array([]), 1, 1.0)
    with pytest.raises(ValueError):
        evolve_ensemble(Ensemble.point(5, 0.0, 1, 1.0), ground_state_model(), 0.0, 1)
