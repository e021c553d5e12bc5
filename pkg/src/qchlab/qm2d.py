"""Exact two-particle quantum reference on a 2D periodic grid.

Split-step Fourier integration of

    i hbar psi_t = [-hbar^2/(2 m1) d1^2 - hbar^2/(2 m2) d2^2 + V(x1, x2)] psi

plus the closed-form free Gaussian used as an oracle for the 1D solvers.
Axis 0 of every 2D array is x1, axis 1 is x2.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ComplexField1D,
    ConfigurationError,
    Grid1D,
    PhysParams,
    SolverDivergedError,
    check_boundary_contact,
    gaussian_packet,
)

__all__ = [
    "Wavefunction2D",
    "QMObservables",
    "init_two_particle_state",
    "QMStepper",
    "step_qm2d",
    "observables_2d",
    "analytic_free_gaussian",
    "free_gaussian_variance",
]

#: Width parameter of the x1 packet, from exp(-2 (x1 - 1/2)^2).
X1_WIDTH = 2.0
X1_CENTER = 0.5
#: Default wavenumber of the repulsive-scenario phase exp(-5 i x1).
REPULSIVE_PHASE_K = -5.0


@dataclass(frozen=True)
class Wavefunction2D:
    grid1: Grid1D
    grid2: Grid1D
    values: np.ndarray = field(repr=False)
    t: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid1.n, self.grid2.n):
            raise ConfigurationError(
                f"wavefunction has shape {v.shape}, expected "
                f"({self.grid1.n}, {self.grid2.n})")
        object.__setattr__(self, "values", v)

    @property
    def density(self):
        return np.abs(self.values) ** 2

    def norm2(self) -> float:
        return float(self.density.sum() * self.grid1.dx * self.grid2.dx)

    def marginal(self, axis: int) -> np.ndarray:
        """Marginal density of particle ``axis + 1``."""
        other = self.grid2 if axis == 0 else self.grid1
        return self.density.sum(axis=1 - axis) * other.dx


@dataclass(frozen=True)
class QMObservables:
    t: float
    x1_mean: float
    x2_mean: float
    p1_mean: float
    p2_mean: float
    energy: float
    norm2: float


def init_two_particle_state(grid1: Grid1D, grid2: Grid1D, alpha: float,
                            scenario: str = "repulsive",
                            params: PhysParams | None = None,
                            qm_phase_k: float | None = None,
                            v1_0: float = -1.0) -> Wavefunction2D:
    """Product-Gaussian initial state for the two reference scenarios.

    ``repulsive`` uses the phase ``exp(i qm_phase_k x1)`` (default -5).  The
    ``harmonic`` state gives particle 1 the wavenumber ``m1 v1_0 / hbar`` so
    that its mean velocity is ``v1_0``; ``qm_phase_k`` overrides it.
    """
    params = params or PhysParams()
    if scenario == "repulsive":
        k1 = REPULSIVE_PHASE_K if qm_phase_k is None else qm_phase_k
    elif scenario in ("harmonic", "free"):
        k1 = params.m1 * v1_0 / params.hbar if qm_phase_k is None else qm_phase_k
    else:
        raise ConfigurationError(f"unknown two-particle scenario {scenario!r}")
    psi1 = gaussian_packet(grid1, X1_WIDTH, X1_CENTER, k1).values
    psi2 = gaussian_packet(grid2, alpha, 0.0, 0.0).values
    return Wavefunction2D(grid1, grid2, np.outer(psi1, psi2))


class QMStepper:
    """Strang split-step propagator with cached phase factors.

    ``pot`` is any potential callable from :mod:`qchlab.core`.
    """

    def __init__(self, grid1: Grid1D, grid2: Grid1D, dt: float, pot,
                 params: PhysParams | None = None):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.grid1, self.grid2, self.dt = grid1, grid2, dt
        self.params = p = params or PhysParams()
        k1 = grid1.wavenumbers[:, None]
        k2 = grid2.wavenumbers[None, :]
        kinetic = p.hbar * (k1 ** 2 / (2 * p.m1) + k2 ** 2 / (2 * p.m2))
        self._half_kinetic = np.exp(-0.5j * dt * kinetic)
        self._full_kinetic = self._half_kinetic ** 2
        X1, X2 = np.meshgrid(grid1.nodes, grid2.nodes, indexing="ij")
        self.V = pot(X1, X2)[0] * np.ones_like(X1)
        self._potential = np.exp(-1j * dt * self.V / p.hbar)
        self.steps = 0

    def step(self, state: Wavefunction2D) -> Wavefunction2D:
        return self.advance(state, 1)

    def advance(self, state: Wavefunction2D, steps: int) -> Wavefunction2D:
        """``steps`` Strang steps with adjacent half-kinetic factors merged."""
        psi = np.fft.fft2(state.values) * self._half_kinetic
        for i in range(steps):
            psi = np.fft.fft2(np.fft.ifft2(psi) * self._potential)
            psi *= self._full_kinetic if i < steps - 1 else self._half_kinetic
        psi = np.fft.ifft2(psi)
        self.steps += steps
        if not np.all(np.isfinite(psi)):
            raise SolverDivergedError(
                f"2D reference solver produced non-finite values at step "
                f"{self.steps}", self.steps)
        return Wavefunction2D(self.grid1, self.grid2, psi,
                              state.t + steps * self.dt)


def step_qm2d(state: Wavefunction2D, dt: float, pot,
              params: PhysParams | None = None) -> Wavefunction2D:
    return QMStepper(state.grid1, state.grid2, dt, pot, params).step(state)


def observables_2d(state: Wavefunction2D, pot, params: PhysParams | None = None,
                   V=None) -> QMObservables:
    """Positions by quadrature, momenta by spectral derivative.

    ``V`` may pass a precomputed potential grid (``QMStepper.V``).
    """
    p = params or PhysParams()
    g1, g2 = state.grid1, state.grid2
    dA = g1.dx * g2.dx
    psi = state.values
    rho = np.abs(psi) ** 2
    norm2 = float(rho.sum() * dA)
    x1 = float((rho.sum(axis=1) * g1.nodes).sum() * dA)
    x2 = float((rho.sum(axis=0) * g2.nodes).sum() * dA)

    spec = np.fft.fft2(psi)
    d1 = np.fft.ifft2(spec * (1j * g1.wavenumbers[:, None]))
    d2 = np.fft.ifft2(spec * (1j * g2.wavenumbers[None, :]))
    p1c = np.vdot(psi, -1j * p.hbar * d1) * dA
    p2c = np.vdot(psi, -1j * p.hbar * d2) * dA
    if max(abs(p1c.imag), abs(p2c.imag)) > 1e-8:
        warnings.warn(f"momentum expectations have imaginary parts "
                      f"{p1c.imag:.2e}, {p2c.imag:.2e}", RuntimeWarning)

    kinetic = p.hbar ** 2 * ((np.abs(d1) ** 2).sum() / (2 * p.m1)
                             + (np.abs(d2) ** 2).sum() / (2 * p.m2)) * dA
    if V is None:
        X1, X2 = np.meshgrid(g1.nodes, g2.nodes, indexing="ij")
        V = pot(X1, X2)[0]
    energy = float(kinetic + (rho * V).sum() * dA)
    return QMObservables(state.t, x1, x2, float(p1c.real), float(p2c.real),
                         energy, norm2)


def analytic_free_gaussian(alpha: float, t: float, grid: Grid1D,
                           m: float = 0.5, hbar: float = 1.0) -> ComplexField1D:
    """Free evolution of ``(2a/pi)^(1/4) exp(-a x^2)`` to time ``t``.

    Exact on the real line; on the periodic grid it is accurate while the
    packet stays away from the boundary.
    """
    if not alpha > 0:
        raise ConfigurationError("alpha must be positive")
    D = hbar / (2.0 * m)
    s = 1.0 + 4j * alpha * D * t
    x = grid.nodes
    psi = (2.0 * alpha / np.pi) ** 0.25 * np.exp(-alpha * x ** 2 / s) / np.sqrt(s)
    check_boundary_contact(np.abs(psi) ** 2, label="analytic free Gaussian")
    return ComplexField1D(grid, psi)


def free_gaussian_variance(alpha: float, t: float, m: float = 0.5,
                           hbar: float = 1.0) -> float:
    """Position variance ``(1 + 16 a^2 D^2 t^2) / (4 a)`` with ``D = hbar/2m``."""
    D = hbar / (2.0 * m)
    return (1.0 + 16.0 * alpha ** 2 * D ** 2 * t ** 2) / (4.0 * alpha)
