"""Newtonian two-body reference: RK4 stepping and the closed-form harmonic
solution."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import PhysParams, SolverDivergedError

__all__ = [
    "ClassicalState",
    "step_newton",
    "harmonic_analytic",
    "harmonic_frequency",
    "classical_energy",
    "crossing_time",
]


@dataclass(frozen=True)
class ClassicalState:
    t: float
    x1: float
    x2: float
    v1: float
    v2: float

    def as_array(self):
        return np.array([self.x1, self.x2, self.v1, self.v2])


def _rhs(y, pot, params):
    x1, x2, v1, v2 = y
    _, d1, d2 = pot(x1, x2)
    return np.array([v1, v2, -d1 / params.m1, -d2 / params.m2])


def step_newton(state: ClassicalState, dt: float, pot,
                params: PhysParams | None = None) -> ClassicalState:
    """One classical RK4 step of ``x_i' = v_i``, ``m_i v_i' = -dV/dx_i``."""
    params = params or PhysParams()
    y = state.as_array()
    k1 = _rhs(y, pot, params)
    k2 = _rhs(y + 0.5 * dt * k1, pot, params)
    k3 = _rhs(y + 0.5 * dt * k2, pot, params)
    k4 = _rhs(y + dt * k3, pot, params)
    y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(y)):
        raise SolverDivergedError(f"classical integrator diverged at t={state.t}")
    return ClassicalState(state.t + dt, *map(float, y))


def classical_energy(state: ClassicalState, pot,
                     params: PhysParams | None = None) -> float:
    params = params or PhysParams()
    V = pot(state.x1, state.x2)[0]
    return float(0.5 * params.m1 * state.v1 ** 2
                 + 0.5 * params.m2 * state.v2 ** 2 + V)


def harmonic_frequency(params: PhysParams, K: float) -> float:
    """``sqrt(K / mu)`` with the reduced mass ``mu = m1 m2 / (m1 + m2)``."""
    mu = params.m1 * params.m2 / (params.m1 + params.m2)
    return math.sqrt(K / mu)


def harmonic_analytic(params: PhysParams, K: float, init: ClassicalState,
                      t: float) -> ClassicalState:
    """Exact state at time ``t`` for ``V = K/2 (x1 - x2)^2``."""
    m1, m2 = params.m1, params.m2
    M = m1 + m2
    tau = t - init.t
    if tau == 0:
        return init
    om = harmonic_frequency(params, K)
    X0 = (m1 * init.x1 + m2 * init.x2) / M
    V0 = (m1 * init.v1 + m2 * init.v2) / M
    r0 = init.x1 - init.x2
    rdot0 = init.v1 - init.v2
    c, s = math.cos(om * tau), math.sin(om * tau)
    X = X0 + V0 * tau
    r = r0 * c + rdot0 / om * s
    rdot = -r0 * om * s + rdot0 * c
    return ClassicalState(t, X + m2 / M * r, X - m1 / M * r,
                          V0 + m2 / M * rdot, V0 - m1 / M * rdot)


def crossing_time(params: PhysParams, K: float, init: ClassicalState,
                  t_max: float = 1.5) -> float:
    """First time the two harmonic-oscillator particles meet."""
    def gap(t):
        s = harmonic_analytic(params, K, init, t)
        return s.x1 - s.x2

    ts = np.linspace(init.t, t_max, 2001)
    g = np.array([gap(t) for t in ts])
    idx = np.flatnonzero(np.sign(g[1:]) != np.sign(g[:-1]))
    if idx.size == 0:
        raise ValueError("particles do not cross before t_max")
    i = idx[0]
    return brentq(gap, ts[i], ts[i + 1], xtol=1e-14)
