"""Forward stochastic trajectories of a quantum particle.

Positions follow ``dx = u(x, t) dt + sqrt(2 nu) dW`` with the forward drift
``u = v + nu d/dx ln rho``.  Every trajectory draws its noise from a
counter-based stream addressed by ``(seed, step, trajectory index)``, so an
ensemble evolved in pieces is bitwise identical to one evolved at once.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .core import DENSITY_FLOOR, ComplexField1D, Grid1D, PhysParams
from .qch import osmotic_log_gradient, quantum_velocity

__all__ = [
    "CounterNormals",
    "Ensemble",
    "DriftModel",
    "free_gaussian_model",
    "ground_state_model",
    "grid_model",
    "forward_drift",
    "evolve_ensemble",
    "ks_distance",
    "ks_critical_value",
    "histogram",
]

_NOISE_STREAM = 0
_SAMPLING_STREAM = 1
_TWO_M53 = 2.0 ** -53


class CounterNormals:
    """Standard normals addressed by ``(step, index)``.

    Trajectory ``i`` at step ``s`` uses the two 64-bit Philox words
    ``2i, 2i+1`` of the block sequence keyed by ``seed`` with counter
    ``(i // 2, 0, s, stream)``, turned into one normal by Box-Muller.
    """

    def __init__(self, seed: int, stream: int = _NOISE_STREAM):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = int(stream)

    def normals(self, step: int, start: int, stop: int) -> np.ndarray:
        if stop <= start:
            return np.empty(0)
        first = start - start % 2
        bg = np.random.Philox(key=self.seed,
                              counter=[first // 2, 0, int(step), self.stream])
        words = bg.random_raw(2 * (stop - first))[2 * (start - first):]
        u1 = ((words[0::2] >> np.uint64(11)).astype(float) + 0.5) * _TWO_M53
        u2 = (words[1::2] >> np.uint64(11)).astype(float) * _TWO_M53
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def uniforms(self, step: int, start: int, stop: int) -> np.ndarray:
        first = start - start % 2
        bg = np.random.Philox(key=self.seed,
                              counter=[first // 2, 0, int(step), self.stream])
        words = bg.random_raw(2 * (stop - first))[2 * (start - first)::2]
        return ((words >> np.uint64(11)).astype(float) + 0.5) * _TWO_M53


@dataclass(frozen=True)
class Ensemble:
    """Particle positions with the bookkeeping needed to keep streams aligned.

    ``offset`` is the global index of the first trajectory (non-zero for a
    piece produced by :meth:`split`), ``step`` the number of stochastic steps
    already taken, ``t0`` the time at step 0 and ``escapes`` how many times a
    particle was put back into the model's support window.
    """

    t: float
    positions: np.ndarray
    seed: int
    nu: float
    step: int = 0
    offset: int = 0
    escapes: int = 0
    t0: float | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 1 or pos.size < 1:
            raise ValueError("an ensemble needs at least one particle")
        object.__setattr__(self, "positions", pos)
        if self.t0 is None:
            object.__setattr__(self, "t0", float(self.t))

    def __len__(self):
        return self.positions.size

    @classmethod
    def normal(cls, n: int, mean: float, std: float, seed: int, nu: float,
               t: float = 0.0):
        """``n`` particles drawn from ``N(mean, std^2)``."""
        z = CounterNormals(seed, _SAMPLING_STREAM).normals(0, 0, n)
        return cls(t, mean + std * z, seed, nu)

    @classmethod
    def point(cls, n: int, x0: float, seed: int, nu: float, t: float = 0.0):
        return cls(t, np.full(n, float(x0)), seed, nu)

    @classmethod
    def from_density(cls, grid: Grid1D, rho, n: int, seed: int, nu: float,
                     t: float = 0.0):
        """Inverse-CDF sampling of a gridded density (linear CDF)."""
        rho = np.asarray(rho, dtype=float)
        cdf = np.concatenate([[0.0], np.cumsum(rho)])
        cdf /= cdf[-1]
        edges = grid.x_min + grid.dx * np.arange(grid.n + 1) - 0.5 * grid.dx
        u = CounterNormals(seed, _SAMPLING_STREAM).uniforms(0, 0, n)
        return cls(t, np.interp(u, cdf, edges), seed, nu)

    def split(self, parts: int):
        chunks = np.array_split(np.arange(len(self)), parts)
        return [replace(self, positions=self.positions[c],
                        offset=self.offset + int(c[0]), escapes=0)
                for c in chunks if c.size]

    @staticmethod
    def concat(pieces):
        pieces = sorted(pieces, key=lambda e: e.offset)
        first = pieces[0]
        return replace(first, positions=np.concatenate([e.positions for e in pieces]),
                       escapes=sum(e.escapes for e in pieces))


@dataclass(frozen=True)
class DriftModel:
    """Current velocity and log-density gradient as functions of ``(x, t)``."""

    velocity: Callable
    log_density_gradient: Callable
    nu: float
    cdf: Optional[Callable] = None
    density: Optional[Callable] = None
    support: tuple = (-np.inf, np.inf)

    def with_nu(self, nu: float) -> "DriftModel":
        return replace(self, nu=float(nu))


def free_gaussian_model(alpha: float, m: float = 0.5, hbar: float = 1.0,
                        nu: float | None = None) -> DriftModel:
    """Freely spreading Gaussian ``(2a/pi)^(1/4) exp(-a x^2)`` of mass ``m``."""
    D = hbar / (2.0 * m)

    def var(t):
        return (1.0 + 16.0 * alpha ** 2 * D ** 2 * t ** 2) / (4.0 * alpha)

    def dvar(t):
        return 32.0 * alpha ** 2 * D ** 2 * t / (4.0 * alpha)

    return DriftModel(
        velocity=lambda x, t: x * dvar(t) / (2.0 * var(t)),
        log_density_gradient=lambda x, t: -x / var(t),
        nu=D if nu is None else nu,
        cdf=lambda x, t: stats.norm.cdf(x, scale=np.sqrt(var(t))),
        density=lambda x, t: stats.norm.pdf(x, scale=np.sqrt(var(t))),
    )


def ground_state_model(m: float = 0.5, omega: float = 1.0, hbar: float = 1.0,
                       nu: float | None = None) -> DriftModel:
    """Harmonic-oscillator ground state; stationary with zero current."""
    var = hbar / (2.0 * m * omega)
    return DriftModel(
        velocity=lambda x, t: np.zeros_like(x),
        log_density_gradient=lambda x, t: -x / var,
        nu=hbar / (2.0 * m) if nu is None else nu,
        cdf=lambda x, t: stats.norm.cdf(x, scale=np.sqrt(var)),
        density=lambda x, t: stats.norm.pdf(x, scale=np.sqrt(var)),
    )


def grid_model(times, phis, params: PhysParams | None = None,
               nu: float | None = None,
               floor: float = DENSITY_FLOOR) -> DriftModel:
    """Drift from a stored series of wave functions of the quantum particle.

    Velocity and ``d ln rho`` are computed per snapshot with the density
    floor of :func:`qchlab.qch.quantum_velocity`, then interpolated linearly
    in ``x`` and in ``t``.
    """
    p = params or PhysParams()
    times = np.asarray(times, dtype=float)
    phis = list(phis)
    if len(phis) != times.size or times.size < 1:
        raise ValueError("need one wave function per time")
    grid = phis[0].grid
    x = grid.nodes
    V = np.array([quantum_velocity(ph, p, floor).values for ph in phis])
    L = np.array([osmotic_log_gradient(ph, floor) for ph in phis])
    R = np.array([ph.density for ph in phis])

    def interp(table):
        def f(xq, t):
            if times.size == 1:
                return np.interp(xq, x, table[0])
            k = int(np.clip(np.searchsorted(times, t, side="right") - 1,
                            0, times.size - 2))
            s = np.clip((t - times[k]) / (times[k + 1] - times[k]), 0.0, 1.0)
            return ((1.0 - s) * np.interp(xq, x, table[k])
                    + s * np.interp(xq, x, table[k + 1]))
        return f

    density = interp(R)

    def cdf(xq, t):
        xs = np.asarray(xq)
        rho = density(x, t)
        c = np.cumsum(rho) * grid.dx
        c /= c[-1]
        return np.interp(xs, x + 0.5 * grid.dx, c)

    return DriftModel(
        velocity=interp(V),
        log_density_gradient=interp(L),
        nu=p.nu2 if nu is None else nu,
        cdf=cdf,
        density=density,
        support=(x[0], x[-1]),
    )


def forward_drift(model: DriftModel, x, t):
    """``u = v + nu d/dx ln rho`` (forward drift from the consistency condition)."""
    x = np.asarray(x, dtype=float)
    u = model.velocity(x, t)
    if model.nu:
        u = u + model.nu * model.log_density_gradient(x, t)
    return u


def evolve_ensemble(e: Ensemble, model: DriftModel, dt: float,
                    steps: int) -> Ensemble:
    """Euler-Maruyama integration of ``steps`` forward steps of length ``dt``.

    The diffusion constant is the model's ``nu``.  Particles leaving the
    model's support are placed back on its edge and counted in ``escapes``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = e.positions.copy()
    # times come from the global step count so that split calls and
    # partitioned ensembles see bitwise-identical drift arguments
    t0 = e.t0
    if abs(t0 + e.step * dt - e.t) > 1e-9 * max(1.0, abs(e.t)):
        t0 = e.t - e.step * dt
    t = t0 + e.step * dt
    lo, hi = model.support
    noise = CounterNormals(e.seed)
    amp = np.sqrt(2.0 * model.nu * dt)
    escapes = e.escapes
    start, stop = e.offset, e.offset + len(e)
    for s in range(e.step, e.step + steps):
        x += forward_drift(model, x, t) * dt
        if amp:
            x += amp * noise.normals(s, start, stop)
        t = t0 + (s + 1) * dt
        out = (x < lo) | (x > hi)
        if out.any():
            escapes += int(out.sum())
            np.clip(x, lo, hi, out=x)
    return replace(e, t=t, positions=x, step=e.step + steps, nu=model.nu,
                   escapes=escapes, t0=t0)


def ks_distance(e, cdf) -> float:
    """Kolmogorov-Smirnov sup distance between the ensemble and ``cdf``.

    ``cdf`` is a callable CDF of position, or another ensemble / sample
    array, in which case the two-sample statistic is returned.
    """
    x = e.positions if isinstance(e, Ensemble) else np.asarray(e, dtype=float)
    if x.size < 100:
        raise ValueError("ks_distance needs at least 100 samples")
    if callable(cdf):
        return float(stats.kstest(x, cdf).statistic)
    other = cdf.positions if isinstance(cdf, Ensemble) else np.asarray(cdf)
    return float(stats.ks_2samp(x, other).statistic)


def ks_critical_value(n: int, level: float = 0.01) -> float:
    """Asymptotic one-sample critical value ``c(level) / sqrt(n)``."""
    return float(stats.kstwobign.isf(level) / np.sqrt(n))


def histogram(e: Ensemble, bins: int = 80, range=None, density=None):
    """Counts per bin plus the model density at the bin centers."""
    counts, edges = np.histogram(e.positions, bins=bins, range=range)
    centers = 0.5 * (edges[1:] + edges[:-1])
    model = (density(centers, e.t) if density is not None
             else np.full(centers.shape, np.nan))
    return centers, counts, model
