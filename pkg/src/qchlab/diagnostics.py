"""Observables of hybrid runs: expectations, energy, Ehrenfest residuals and
the trajectory gap.

Every engine reports into the same :class:`DiagnosticRow` schema so that
hybrid, two-particle and classical runs can be written, read and compared
with one set of tools.
"""
from __future__ import annotations

from dataclasses import astuple, dataclass, field, fields

import numpy as np

from .core import (
    DENSITY_FLOOR,
    ComplexField1D,
    InsufficientDataError,
    PhysParams,
    RealField1D,
)
from .qch import HybridState, osmotic_log_gradient, quantum_velocity

__all__ = [
    "DiagnosticRow",
    "COLUMNS",
    "TimeSeries",
    "expectation",
    "qch_energy",
    "hybrid_row",
    "hybrid_forces",
    "qm_row",
    "classical_row",
    "ehrenfest_residuals",
    "quasi_trajectory_gap",
]


@dataclass(frozen=True)
class DiagnosticRow:
    t: float
    r1: float
    f1_mean: float
    x2_mean: float
    w_mean: float
    p2_mean: float
    energy: float
    norm2: float
    diff_r1_f1: float
    diff_r1_x2: float

    @classmethod
    def build(cls, t, r1, f1_mean, x2_mean, w_mean, p2_mean, energy, norm2):
        """Row with the two difference columns filled in."""
        return cls(float(t), float(r1), float(f1_mean), float(x2_mean),
                   float(w_mean), float(p2_mean), float(energy), float(norm2),
                   float(r1) - float(f1_mean), float(r1) - float(x2_mean))

    def values(self):
        return astuple(self)


COLUMNS = tuple(f.name for f in fields(DiagnosticRow))

#: Extra per-row quantities kept alongside hybrid series for the Ehrenfest
#: residuals; not part of the CSV schema.
FORCE_COLUMNS = ("force1", "force2_slot", "force2_full")


@dataclass
class TimeSeries:
    """Ordered diagnostic rows from one engine run."""

    label: str = ""
    rows: list = field(default_factory=list)
    aux: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    truncated: bool = False

    def append(self, row: DiagnosticRow, **aux):
        self.rows.append(row)
        for k, v in aux.items():
            self.aux.setdefault(k, []).append(float(v))

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, name):
        if name in COLUMNS:
            i = COLUMNS.index(name)
            return np.array([r.values()[i] for r in self.rows], dtype=float)
        if name in self.aux:
            return np.asarray(self.aux[name], dtype=float)
        raise KeyError(name)

    @property
    def t(self):
        return self["t"]

    def at(self, t, tol=1e-9) -> DiagnosticRow:
        """Row recorded at time ``t``."""
        times = self.t
        i = int(np.argmin(np.abs(times - t)))
        if abs(times[i] - t) > tol:
            raise KeyError(f"no row recorded at t={t}")
        return self.rows[i]


def expectation(phi: ComplexField1D, weight, hbar: float = 1.0) -> float:
    """``<A>`` over the density of ``phi``.

    ``weight`` is a multiplicative field (RealField1D, array or scalar),
    ``"position"`` or ``"momentum"`` (``-i hbar d/dx``, spectral derivative).
    """
    dx = phi.grid.dx
    if isinstance(weight, str):
        if weight == "position":
            return float(np.sum(phi.density * phi.grid.nodes) * dx)
        if weight == "momentum":
            val = np.vdot(phi.values, -1j * hbar * phi.derivative()) * dx
            return float(val.real)
        raise ValueError(f"unknown operator {weight!r}")
    if isinstance(weight, RealField1D):
        weight = weight.values
    return float(np.sum(phi.density * weight) * dx)


def qch_energy(state: HybridState, pot, params: PhysParams | None = None,
               floor: float = DENSITY_FLOOR) -> float:
    """Conserved energy of the hybrid model.

    ``< m1/2 w^2 + m2/2 v2^2 + V(f1, x2) + hbar^2/(8 m2) (d ln rho)^2 >``
    """
    p = params or PhysParams()
    phi = state.phi
    v2 = quantum_velocity(phi, p, floor).values
    dlnrho = osmotic_log_gradient(phi, floor)
    w = state.w.values
    V = pot(state.f1.values, phi.grid.nodes)[0]
    integrand = (0.5 * p.m1 * w * w + 0.5 * p.m2 * v2 * v2 + V
                 + p.hbar ** 2 / (8.0 * p.m2) * dlnrho * dlnrho)
    return expectation(phi, integrand)


def hybrid_forces(state: HybridState, pot):
    """``<dV/dx1>``, ``<(dV/dx2)(f1, x2)>`` and ``<d/dx2 V(f1(x2), x2)>``."""
    x = state.grid.nodes
    f1 = state.f1.values
    _, d1, d2 = pot(f1, x)
    df1 = np.gradient(f1, state.grid.dx, edge_order=2)
    phi = state.phi
    return (expectation(phi, d1), expectation(phi, d2),
            expectation(phi, d2 + d1 * df1))


def hybrid_row(state: HybridState, pot, params: PhysParams | None = None):
    p = params or PhysParams()
    phi = state.phi
    return DiagnosticRow.build(
        state.t,
        state.r1,
        expectation(phi, state.f1),
        expectation(phi, "position"),
        expectation(phi, state.w),
        expectation(phi, "momentum", p.hbar),
        qch_energy(state, pot, p),
        phi.norm2(),
    )


def qm_row(obs, params: PhysParams | None = None) -> DiagnosticRow:
    """Map two-particle observables onto the row schema.

    Particle 1 has no quasi trajectory here, so ``r1 = f1_mean = <x1>`` and
    ``w_mean = <p1>/m1``.
    """
    p = params or PhysParams()
    return DiagnosticRow.build(obs.t, obs.x1_mean, obs.x1_mean, obs.x2_mean,
                               obs.p1_mean / p.m1, obs.p2_mean, obs.energy,
                               obs.norm2)


def classical_row(state, energy: float, params: PhysParams | None = None):
    p = params or PhysParams()
    return DiagnosticRow.build(state.t, state.x1, state.x1, state.x2,
                               state.v1, p.m2 * state.v2, energy, 1.0)


def _central(y, h):
    return (y[2:] - y[:-2]) / (2.0 * h)


def ehrenfest_residuals(series: TimeSeries, pot=None,
                        params: PhysParams | None = None) -> dict:
    """Central-difference residuals of the four modified Ehrenfest relations.

    Returns arrays on the interior recorded times::

        r1       dR1/dt - <w>
        x2       d<x2>/dt - <p2>/m2
        w        d<w>/dt + <dV/dx1>/m1            (needs force columns)
        p2_slot  d<p2>/dt + <(dV/dx2)(f1, x2)>    (needs force columns)
        p2_full  d<p2>/dt + <d/dx2 V(f1(x2), x2)> (needs force columns)

    ``pot`` is accepted for symmetry with the other diagnostics; the forces
    are taken from the series, which records them while the fields exist.
    """
    p = params or PhysParams()
    if len(series) < 3:
        raise InsufficientDataError(
            f"need at least 3 rows for central differences, got {len(series)}")
    t = series.t
    steps = np.diff(t)
    h = steps.mean()
    if np.max(np.abs(steps - h)) > 1e-9 * max(1.0, abs(h)):
        raise ValueError("series must have a uniform recording interval")

    out = {
        "t": t[1:-1],
        "r1": _central(series["r1"], h) - series["w_mean"][1:-1],
        "x2": _central(series["x2_mean"], h) - series["p2_mean"][1:-1] / p.m2,
    }
    if all(k in series.aux for k in FORCE_COLUMNS):
        dw = _central(series["w_mean"], h)
        dp2 = _central(series["p2_mean"], h)
        out["w"] = dw + series["force1"][1:-1] / p.m1
        out["p2_slot"] = dp2 + series["force2_slot"][1:-1]
        out["p2_full"] = dp2 + series["force2_full"][1:-1]
    return out


def quasi_trajectory_gap(series: TimeSeries) -> dict:
    """Both gap definitions: ``r1 - <f1>`` and ``r1 - <x2>``."""
    r1 = series["r1"]
    return {
        "t": series.t,
        "r1_minus_f1": r1 - series["f1_mean"],
        "r1_minus_x2": r1 - series["x2_mean"],
    }
