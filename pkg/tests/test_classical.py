import math

import numpy as np
import pytest

from qchlab.classical import (
    ClassicalState,
    classical_energy,
    crossing_time,
    harmonic_analytic,
    harmonic_frequency,
    step_newton,
)
from qchlab.core import GaussianRepulsivePotential, HarmonicPotential, PhysParams

INIT = ClassicalState(0.0, 0.5, 0.0, -1.0, 0.0)


def test_reduced_mass_frequency(params):
    assert harmonic_frequency(params, 1.0) == pytest.approx(math.sqrt(12 / 5))
    assert harmonic_frequency(params, 1.0) == pytest.approx(1.54919, abs=1e-5)


@pytest.mark.parametrize("t", [0.0, 0.3, 0.8, 1.2])
def test_center_of_mass_moves_uniformly(params, t):
    s = harmonic_analytic(params, 1.0, INIT, t)
    X = (params.m1 * s.x1 + params.m2 * s.x2) / (params.m1 + params.m2)
    assert X == pytest.approx(5 / 12 - 5 / 6 * t, abs=1e-14)


def test_crossing_time(params):
    tc = crossing_time(params, 1.0, INIT)
    assert tc == pytest.approx(0.4255, abs=1e-3)
    # "cross around T ~ 0.4"
    assert 0.35 < tc < 0.45


def test_rk4_matches_analytic_and_conserves_energy(params):
    pot = HarmonicPotential()
    s = INIT
    e0 = classical_energy(s, pot, params)
    worst = 0.0
    for n in range(1200):
        s = step_newton(s, 1e-3, pot, params)
        ref = harmonic_analytic(params, 1.0, INIT, s.t)
        worst = max(worst, abs(s.x1 - ref.x1), abs(s.x2 - ref.x2))
        drift = abs(classical_energy(s, pot, params) - e0) / e0
        assert drift < 1e-9
    assert worst < 1e-10


def test_repulsive_energy_conserved(params):
    pot = GaussianRepulsivePotential()
    s = INIT
    e0 = classical_energy(s, pot, params)
    for _ in range(1200):
        s = step_newton(s, 1e-3, pot, params)
    assert abs(classical_energy(s, pot, params) - e0) / e0 < 1e-9


def test_momentum_conserved_for_pair_potentials(params):
    s = INIT
    for pot in (HarmonicPotential(), GaussianRepulsivePotential()):
        p0 = params.m1 * s.v1 + params.m2 * s.v2
        out = s
        for _ in range(200):
            out = step_newton(out, 1e-3, pot, params)
        assert params.m1 * out.v1 + params.m2 * out.v2 == pytest.approx(p0, abs=1e-12)


def test_analytic_at_start_is_identity(params):
    assert harmonic_analytic(params, 1.0, INIT, 0.0) == INIT
    assert np.allclose(INIT.as_array(), [0.5, 0.0, -1.0, 0.0])
