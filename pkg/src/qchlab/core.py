"""Grids, fields, physical parameters and interaction potentials.

Everything here is expressed in natural units where hbar = 1, the length
scale is 1 and the quantum particle has mass 1/2, so the dimensionless time
equals the simulation time and the harmonic constant is K = 1.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "ConfigurationError",
    "SolverDivergedError",
    "InsufficientDataError",
    "BoundaryContactWarning",
    "PhysParams",
    "Grid1D",
    "ComplexField1D",
    "RealField1D",
    "ZeroPotential",
    "HarmonicPotential",
    "GaussianRepulsivePotential",
    "make_grid",
    "gaussian_packet",
    "potential_eval",
    "spectral_derivative",
    "real_spectral_derivative",
    "check_boundary_contact",
]

#: Density below this fraction of the peak is treated as "no particle here".
DENSITY_FLOOR = 1e-12
#: Tail density allowed at the grid boundary before a warning is emitted.
BOUNDARY_TOL = 1e-10


class ConfigurationError(ValueError):
    """Invalid grid, parameter or scenario configuration."""


class SolverDivergedError(RuntimeError):
    """A time stepper produced non-finite values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class InsufficientDataError(ValueError):
    """A diagnostic needs more recorded rows than were supplied."""


class BoundaryContactWarning(UserWarning):
    """A wave packet has non-negligible density at the periodic boundary."""


@dataclass(frozen=True)
class PhysParams:
    """Masses and diffusion constants of the two-particle system.

    ``m1 = mass_ratio * m2`` is the particle that gets classicalized and
    ``nu_i = hbar / (2 m_i)`` is the noise intensity that reproduces quantum
    mechanics.
    """

    mass_ratio: float = 5.0
    m2: float = 0.5
    hbar: float = 1.0

    def __post_init__(self):
        if not self.mass_ratio > 0:
            raise ConfigurationError("mass_ratio must be positive")
        if not self.m2 > 0:
            raise ConfigurationError("m2 must be positive")
        if not self.hbar > 0:
            raise ConfigurationError("hbar must be positive")

    @property
    def m1(self) -> float:
        return self.mass_ratio * self.m2

    @property
    def nu1(self) -> float:
        return self.hbar / (2.0 * self.m1)

    @property
    def nu2(self) -> float:
        return self.hbar / (2.0 * self.m2)


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on ``[x_min, x_max)`` with ``n`` nodes."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise ConfigurationError("grid bounds must be finite")
        if not self.x_max > self.x_min:
            raise ConfigurationError(
                f"degenerate interval [{self.x_min}, {self.x_max})")
        n = self.n
        if int(n) != n or n < 16 or (int(n) & (int(n) - 1)) != 0:
            raise ConfigurationError(
                f"n must be a power of two >= 16, got {n}")
        object.__setattr__(self, "n", int(n))

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n)
        x.flags.writeable = False
        return x

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers in FFT order, ``k_m = 2 pi m / L``."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        k.flags.writeable = False
        return k

    @property
    def k_min(self) -> float:
        """Smallest positive wavenumber."""
        return 2.0 * np.pi / self.length


def make_grid(x_min: float, x_max: float, n: int) -> Grid1D:
    return Grid1D(float(x_min), float(x_max), n)


def spectral_derivative(values: np.ndarray, grid: Grid1D, axis: int = -1):
    """First derivative of periodic samples by FFT differentiation."""
    k = grid.wavenumbers
    shape = [1] * np.ndim(values)
    shape[axis] = grid.n
    spec = np.fft.fft(values, axis=axis) * (1j * k.reshape(shape))
    return np.fft.ifft(spec, axis=axis)


def real_spectral_derivative(values: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Spectral derivative of real periodic samples; the result is real."""
    k = 2.0 * np.pi * np.fft.rfftfreq(grid.n, d=grid.dx)
    return np.fft.irfft(np.fft.rfft(values) * (1j * k), n=grid.n)


@dataclass(frozen=True)
class ComplexField1D:
    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n,):
            raise ConfigurationError(
                f"field has shape {v.shape}, grid needs ({self.grid.n},)")
        object.__setattr__(self, "values", v)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm2(self) -> float:
        return float(np.sum(self.density) * self.grid.dx)

    def derivative(self) -> np.ndarray:
        return spectral_derivative(self.values, self.grid)


@dataclass(frozen=True)
class RealField1D:
    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ConfigurationError(
                f"field has shape {v.shape}, grid needs ({self.grid.n},)")
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls, grid: Grid1D, value: float) -> "RealField1D":
        return cls(grid, np.full(grid.n, float(value)))


def check_boundary_contact(density, tol=BOUNDARY_TOL, label="wave packet"):
    """Warn if ``density`` exceeds ``tol`` on any edge of the grid.

    Returns True when contact was detected.
    """
    rho = np.asarray(density)
    edges = []
    for axis in range(rho.ndim):
        edges.append(np.take(rho, 0, axis=axis).max())
        edges.append(np.take(rho, -1, axis=axis).max())
    peak = max(edges)
    if peak > tol:
        warnings.warn(
            f"{label} density {peak:.3e} at the grid boundary exceeds {tol:g}",
            BoundaryContactWarning, stacklevel=3)
        return True
    return False


def gaussian_packet(grid: Grid1D, alpha: float, center: float = 0.0,
                    wavenumber: float = 0.0) -> ComplexField1D:
    """Normalized Gaussian ``(2a/pi)^(1/4) exp(-a (x-c)^2 + i k x)``."""
    if not alpha > 0:
        raise ConfigurationError("alpha must be positive")
    x = grid.nodes
    psi = ((2.0 * alpha / np.pi) ** 0.25
           * np.exp(-alpha * (x - center) ** 2 + 1j * wavenumber * x))
    check_boundary_contact(np.abs(psi) ** 2)
    return ComplexField1D(grid, psi)


# -- potentials ---------------------------------------------------------------
#
# Each potential is a function of the two particle positions and returns
# (V, dV/dx1, dV/dx2) with analytic derivatives.  All of them broadcast.

@dataclass(frozen=True)
class ZeroPotential:
    name = "zero"

    def __call__(self, x1, x2):
        z = np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)
        if z.ndim == 0:
            return 0.0, 0.0, 0.0
        return z, z.copy(), z.copy()


@dataclass(frozen=True)
class HarmonicPotential:
    """``V = K/2 (x1 - x2)^2``."""

    K: float = 1.0
    name = "harmonic"

    def __call__(self, x1, x2):
        r = np.subtract(x1, x2)
        force = self.K * r
        return 0.5 * self.K * r * r, force, -force


@dataclass(frozen=True)
class GaussianRepulsivePotential:
    """``V = A exp(-(x1 - x2)^2 / width^2)``."""

    A: float = 1.0
    width: float = 1.0
    name = "gaussian_repulsive"

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigurationError("width must be positive")

    def __call__(self, x1, x2):
        r = np.subtract(x1, x2)
        V = self.A * np.exp(-(r / self.width) ** 2)
        d1 = -2.0 * r / self.width ** 2 * V
        return V, d1, -d1


def potential_eval(spec, x1, x2):
    """Return ``(V, dV/dx1, dV/dx2)`` of ``spec`` at ``(x1, x2)``."""
    return spec(x1, x2)
