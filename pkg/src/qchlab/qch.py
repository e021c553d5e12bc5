"""Quantum-classical hybrid dynamics for one classical and one quantum particle.

The quantum particle is carried as a single stored field ``phi(x2)`` (the
hybrid wave function evaluated on the quasi trajectory), the classical
particle as the quasi-trajectory field ``f1(x2)``, its velocity field
``w(x2)`` and the scalar mean trajectory ``r1``.  One step is a symmetric
splitting

    kinetic(dt/2) . fields(dt/2) . phase(dt) . fields(dt/2) . kinetic(dt/2)

where ``fields`` integrates the classical fields with the quantum velocity
and density frozen, and ``phase`` multiplies ``phi`` by the local phase of
``V(f1, x2) + c * m1/2 * w^2``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    DENSITY_FLOOR,
    ComplexField1D,
    Grid1D,
    PhysParams,
    RealField1D,
    SolverDivergedError,
    gaussian_packet,
    real_spectral_derivative,
)

log = logging.getLogger(__name__)

__all__ = [
    "HybridState",
    "init_hybrid",
    "quantum_velocity",
    "cubic_interp",
    "advect_fields",
    "step_hybrid",
    "HybridStepper",
]

#: Coefficient ``c`` of ``c * m1/2 * w^2`` in the phase potential.  With
#: stored fields the energy changes as ``dE/dt = -c m1 <v2 w dw/dx>``, so the
#: default 0 is the only value that conserves it; -1 and +1 correspond to
#: keeping the kinetic term with either sign.
DEFAULT_KINETIC_COUPLING = 0.0


@dataclass(frozen=True)
class HybridState:
    t: float
    phi: ComplexField1D
    f1: RealField1D
    w: RealField1D
    r1: float
    step: int = 0

    @property
    def grid(self) -> Grid1D:
        return self.phi.grid


def init_hybrid(grid: Grid1D, alpha: float, r1_0: float = 0.5,
                v1_0: float = -1.0) -> HybridState:
    """Uniform quasi trajectory ``r1_0`` moving at ``v1_0`` next to a
    centered Gaussian of width parameter ``alpha``."""
    phi = gaussian_packet(grid, alpha, 0.0, 0.0)
    return HybridState(
        t=0.0,
        phi=phi,
        f1=RealField1D.uniform(grid, r1_0),
        w=RealField1D.uniform(grid, v1_0),
        r1=float(r1_0),
    )


def _fill_from_nearest(values, mask):
    """Replace entries outside ``mask`` by the nearest entry inside it."""
    good = np.flatnonzero(mask)
    if good.size == values.size or good.size == 0:
        return values
    idx = np.arange(values.size)
    pos = np.clip(np.searchsorted(good, idx), 1, good.size - 1)
    left, right = good[pos - 1], good[pos]
    nearest = np.where(idx - left <= right - idx, left, right)
    # searchsorted clipping leaves nodes past either end pointing at the
    # wrong neighbour when there is a single good node
    nearest = np.where(idx < good[0], good[0], nearest)
    nearest = np.where(idx > good[-1], good[-1], nearest)
    out = values.copy()
    out[~mask] = values[nearest[~mask]]
    return out


def _regularized_log_derivative(phi: ComplexField1D, floor=DENSITY_FLOOR):
    """``phi'/phi`` with sub-floor nodes copied from the nearest good node."""
    psi = phi.values
    a, b = psi.real, psi.imag
    rho = a * a + b * b
    mask = rho >= floor * rho.max()
    # real and imaginary parts differentiated separately so that a real
    # phi has an exactly real log-derivative
    da = real_spectral_derivative(a, phi.grid)
    db = real_spectral_derivative(b, phi.grid)
    ratio = np.zeros_like(psi)
    ratio[mask] = ((a * da + b * db) + 1j * (a * db - b * da))[mask] / rho[mask]
    return _fill_from_nearest(ratio, mask), mask


def quantum_velocity(phi: ComplexField1D, params: PhysParams,
                     floor: float = DENSITY_FLOOR) -> RealField1D:
    """Current velocity ``(hbar/m2) Im(phi'/phi)`` of the quantum particle."""
    ratio, _ = _regularized_log_derivative(phi, floor)
    return RealField1D(phi.grid, params.hbar / params.m2 * ratio.imag)


def osmotic_log_gradient(phi: ComplexField1D, floor: float = DENSITY_FLOOR):
    """``d/dx ln rho`` with the same floor policy as :func:`quantum_velocity`."""
    ratio, _ = _regularized_log_derivative(phi, floor)
    return 2.0 * ratio.real


def cubic_interp(values, grid: Grid1D, x):
    """Four-point Lagrange interpolation of node ``values`` at points ``x``.

    The fields carried by the hybrid solver are not periodic (``f1`` and
    ``w`` pick up linear trends), so the stencil is clamped to the grid
    instead of wrapping.
    """
    s = (np.asarray(x) - grid.x_min) / grid.dx
    j = np.clip(np.floor(s).astype(int), 1, grid.n - 3)
    u = s - j
    um1, up1, up2 = u + 1.0, u - 1.0, u - 2.0
    w0 = -u * up1 * up2 / 6.0
    w1 = um1 * up1 * up2 / 2.0
    w2 = -um1 * u * up2 / 2.0
    w3 = um1 * u * up1 / 6.0
    return (w0 * values[j - 1] + w1 * values[j] + w2 * values[j + 1]
            + w3 * values[j + 2])


def advect_fields(f1, w, r1, rho, v, dt, pot, params: PhysParams, grid):
    """Integrate the classical fields over ``dt`` with frozen ``rho`` and ``v``.

    ``f1_t = w``, ``w_t + v w_x = -dV/dx1(f1, x)/m1`` and
    ``r1_t = int rho w dx``.  The advection is semi-Lagrangian (midpoint
    back-trace, cubic interpolation) and the sources use a Heun
    predictor-corrector, second order overall.
    """
    x = grid.nodes
    dx = grid.dx
    x_mid = x - 0.5 * dt * v
    # departure points are clamped so the stencil never extrapolates; the
    # edge nodes then act as inflow boundaries
    x_dep = np.clip(x - dt * cubic_interp(v, grid, x_mid), x[0], x[-1])

    f_dep = cubic_interp(f1, grid, x_dep)
    w_dep = cubic_interp(w, grid, x_dep)
    inv_m1 = 1.0 / params.m1

    s_dep = -inv_m1 * pot(f_dep, x_dep)[1]
    w_pred = w_dep + dt * s_dep
    f_pred = f1 + dt * w

    s_new = -inv_m1 * pot(f_pred, x)[1]
    w_new = w_dep + 0.5 * dt * (s_dep + s_new)
    f_new = f1 + 0.5 * dt * (w + w_pred)
    r1_new = r1 + 0.5 * dt * dx * (np.dot(rho, w) + np.dot(rho, w_pred))
    return f_new, w_new, r1_new


@dataclass
class HybridStepper:
    """Reusable stepping context for a fixed grid, ``dt`` and potential.

    Caches the kinetic propagator.  ``step`` advances a :class:`HybridState`
    and returns a new one; the input state is not modified.
    """

    grid: Grid1D
    dt: float
    pot: object
    params: PhysParams = field(default_factory=PhysParams)
    kinetic_coupling: float = DEFAULT_KINETIC_COUPLING
    cfl_flags: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        p = self.params
        k = self.grid.wavenumbers
        self._half_kinetic = np.exp(
            -0.5j * self.dt * p.hbar * k ** 2 / (2.0 * p.m2))

    def _kinetic(self, psi):
        return np.fft.ifft(np.fft.fft(psi) * self._half_kinetic)

    def _frozen(self, psi):
        phi = ComplexField1D(self.grid, psi)
        v = quantum_velocity(phi, self.params).values
        return np.abs(psi) ** 2, v

    def _check_cfl(self, v, rho, step):
        occupied = rho >= DENSITY_FLOOR * rho.max()
        cfl = np.max(np.abs(v[occupied])) * self.dt / self.grid.dx
        if cfl > 1.0:
            self.cfl_flags += 1
            log.info("step %d: advection CFL number %.3f > 1", step, cfl)

    def step(self, state: HybridState) -> HybridState:
        dt, grid, p = self.dt, self.grid, self.params
        half = 0.5 * dt
        psi = self._kinetic(state.phi.values)

        rho, v = self._frozen(psi)
        self._check_cfl(v, rho, state.step)
        f1, w, r1 = advect_fields(state.f1.values, state.w.values, state.r1,
                                  rho, v, half, self.pot, p, grid)

        U = self.pot(f1, grid.nodes)[0]
        if self.kinetic_coupling:
            U = U + self.kinetic_coupling * 0.5 * p.m1 * w * w
        psi = psi * np.exp(-1j * dt / p.hbar * U)

        rho, v = self._frozen(psi)
        f1, w, r1 = advect_fields(f1, w, r1, rho, v, half, self.pot, p, grid)
        psi = self._kinetic(psi)

        n = state.step + 1
        if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(f1))
                and np.all(np.isfinite(w)) and np.isfinite(r1)):
            raise SolverDivergedError(
                f"hybrid solver produced non-finite values at step {n}", n)
        return replace(
            state,
            t=state.t + dt,
            phi=ComplexField1D(grid, psi),
            f1=RealField1D(grid, f1),
            w=RealField1D(grid, w),
            r1=float(r1),
            step=n,
        )


def step_hybrid(state: HybridState, dt: float, pot, params: PhysParams,
                kinetic_coupling: float = DEFAULT_KINETIC_COUPLING):
    """Advance ``state`` by one step of length ``dt``."""
    stepper = HybridStepper(state.grid, dt, pot, params, kinetic_coupling)
    return stepper.step(state)
