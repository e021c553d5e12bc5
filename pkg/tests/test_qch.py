import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qchlab.config import ScenarioConfig
from qchlab.core import (
    ComplexField1D,
    Grid1D,
    HarmonicPotential,
    PhysParams,
    RealField1D,
    SolverDivergedError,
    ZeroPotential,
    gaussian_packet,
)
from qchlab.diagnostics import qch_energy
from qchlab.qch import (
    HybridStepper,
    cubic_interp,
    init_hybrid,
    quantum_velocity,
    step_hybrid,
)
from qchlab.qm2d import analytic_free_gaussian
from qchlab.runner import run_qch


def _l2(a, b, grid):
    return float(np.sqrt(np.sum(np.abs(a - b) ** 2) * grid.dx))


def run(grid, alpha, pot, dt, steps, params=None, coupling=0.0):
    params = params or PhysParams()
    s = init_hybrid(grid, alpha)
    stepper = HybridStepper(grid, dt, pot, params, coupling)
    out = [s]
    for _ in range(steps):
        s = stepper.step(s)
        out.append(s)
    return out


def test_init_hybrid_default_values(grid):
    s = init_hybrid(grid, 1.0)
    assert np.all(s.f1.values == 0.5) and np.all(s.w.values == -1.0)
    assert s.r1 == 0.5 and s.t == 0.0
    assert np.abs(s.phi.values).max() == pytest.approx((2 / np.pi) ** 0.25)
    assert s.phi.norm2() == pytest.approx(1.0, abs=1e-12)


def test_quantum_velocity_exact_four():
    g = Grid1D(-np.pi, np.pi, 64)
    phi = ComplexField1D(g, np.exp(2j * g.nodes) / np.sqrt(2 * np.pi))
    assert np.allclose(quantum_velocity(phi, PhysParams()).values, 4.0, atol=1e-12)


def test_quantum_velocity_real_gaussian(grid, params):
    v = quantum_velocity(gaussian_packet(grid, 1.0), params).values
    assert np.max(np.abs(v)) < 1e-12


def test_quantum_velocity_with_node_refines(params):
    def field(n):
        g = Grid1D(-10.0, 10.0, n)
        x = g.nodes
        psi = (np.exp(-(x - 1.5) ** 2 + 1j * x) - np.exp(-(x + 1.5) ** 2 - 0.5j * x))
        psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * g.dx)
        return g, quantum_velocity(ComplexField1D(g, psi), params).values

    g1, v1 = field(256)
    g2, v2 = field(512)
    x = g1.nodes
    away = (np.abs(x) > 0.5) & (np.abs(x) < 4)
    assert np.max(np.abs(v1[away] - v2[::2][away])) < 1e-3


def test_quantum_velocity_finite_in_empty_tails(params):
    g = Grid1D(-40.0, 40.0, 512)
    phi = gaussian_packet(g, 2.0, wavenumber=1.5)
    v = quantum_velocity(phi, params).values
    assert np.all(np.isfinite(v))


@settings(deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1),
       st.lists(st.floats(-9.9, 9.9), min_size=1, max_size=20))
def test_cubic_interp_exact_for_cubics(a, b, c, d, xs):
    g = Grid1D(-10.0, 10.0, 64)
    f = lambda x: a + b * x + c * x ** 2 + d * x ** 3 / 50
    xs = np.clip(np.array(xs), g.nodes[0], g.nodes[-1])
    got = cubic_interp(f(g.nodes), g, xs)
    assert np.allclose(got, f(xs), atol=1e-9)


def test_free_limit(wide_grid):
    states = run(wide_grid, 1.0, ZeroPotential(), 1e-3, 1000)
    for s in states:
        assert abs(s.r1 - (0.5 - s.t)) < 1e-10
        assert np.max(np.abs(s.f1.values - s.r1)) < 1e-10
    end = states[-1]
    exact = analytic_free_gaussian(1.0, end.t, wide_grid)
    assert _l2(end.phi.values, exact.values, wide_grid) < 1e-6


def test_uniform_transport_is_exact(grid, params):
    s = init_hybrid(grid, 0.5)
    for _ in range(200):
        s = step_hybrid(s, 1e-3, ZeroPotential(), params)
    assert np.max(np.abs(s.w.values + 1.0)) < 1e-13


def test_norm_conserved(grid):
    states = run(grid, 1.0, HarmonicPotential(), 1e-3, 600)
    assert max(abs(s.phi.norm2() - 1.0) for s in states) < 1e-8


def test_energy_starts_at_closed_form_and_is_conserved(grid, params):
    pot = HarmonicPotential()
    states = run(grid, 1.0, pot, 1e-3, 600)
    e = np.array([qch_energy(s, pot, params) for s in states[::20]])
    assert e[0] == pytest.approx(2.5, abs=1e-6)
    assert np.max(np.abs(e - e[0])) / e[0] < 1e-6


def test_kinetic_term_in_phase_breaks_energy_conservation(grid, params):
    """The coupling of w^2 into the phase makes the energy drift."""
    pot = HarmonicPotential()
    states = run(grid, 1.0, pot, 1e-3, 600, coupling=-1.0)
    e0, e1 = (qch_energy(s, pot, params) for s in (states[0], states[-1]))
    assert abs(e1 - e0) / e0 > 1e-3


def test_self_convergence_second_order(grid):
    pot = HarmonicPotential()
    ends = [run(grid, 1.0, pot, dt, int(round(1.0 / dt)))[-1].phi.values
            for dt in (2e-3, 1e-3, 5e-4)]
    d1 = _l2(ends[0], ends[1], grid)
    d2 = _l2(ends[1], ends[2], grid)
    assert 3.0 <= d1 / d2 <= 5.0


def test_divergence_reports_step(grid, params):
    s = init_hybrid(grid, 1.0)
    w = s.w.values.copy()
    w[10] = np.nan
    from dataclasses import replace
    bad = replace(s, w=RealField1D(grid, w), step=7)
    with pytest.raises(SolverDivergedError) as info:
        HybridStepper(grid, 1e-3, HarmonicPotential(), params).step(bad)
    assert info.value.step == 8


def test_dt_must_be_positive(grid):
    with pytest.raises(ValueError):
        HybridStepper(grid, 0.0, HarmonicPotential())


def test_run_qch_zero_duration():
    series = run_qch(ScenarioConfig(scenario="harmonic", t_max=0.0))
    assert len(series) == 1
    assert series.rows[0].t == 0.0


def test_run_qch_records_every_n():
    cfg = ScenarioConfig(scenario="harmonic", t_max=0.1, record_every=10,
                         grid=ScenarioConfig().grid.__class__(-10, 10, 256))
    series = run_qch(cfg)
    assert len(series) == 11
    assert np.allclose(np.diff(series.t), 0.01)
    assert "force2_full" in series.aux


def test_run_qch_is_deterministic():
    cfg = ScenarioConfig(scenario="repulsive", t_max=0.05)
    a, b = run_qch(cfg), run_qch(cfg)
    assert [r.values() for r in a.rows] == [r.values() for r in b.rows]
