"""Engine drivers and run orchestration.

``run_qch``, ``run_qm2d``, ``run_classical`` and ``run_sampler`` turn a
:class:`~qchlab.config.ScenarioConfig` into a :class:`TimeSeries` (or a
sampler report).  ``run_member`` runs every engine of one config and writes
its files; ``run_config`` adds the run manifest.
"""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .classical import ClassicalState, classical_energy, step_newton
from .config import ScenarioConfig
from .core import BOUNDARY_TOL, SolverDivergedError
from .diagnostics import (
    InsufficientDataError,
    TimeSeries,
    classical_row,
    ehrenfest_residuals,
    hybrid_forces,
    hybrid_row,
    qm_row,
    quasi_trajectory_gap,
)
from .io import write_histogram, write_manifest, write_series, write_snapshot, write_table
from .qch import HybridStepper, init_hybrid
from .qm2d import QMStepper, init_two_particle_state, observables_2d
from .sampler import (
    Ensemble,
    evolve_ensemble,
    free_gaussian_model,
    grid_model,
    histogram,
    ks_critical_value,
    ks_distance,
)

log = logging.getLogger(__name__)

__all__ = [
    "run_qch",
    "run_qm2d",
    "run_classical",
    "run_sampler",
    "MemberResult",
    "run_member",
    "run_config",
    "build_manifest",
]


def _edge_density(rho) -> float:
    rho = np.asarray(rho)
    edges = [np.take(rho, i, axis=a).max()
             for a in range(rho.ndim) for i in (0, -1)]
    return float(max(edges))


def _boundary_warning(series, edge, engine):
    series.meta["boundary_density"] = edge
    if edge > BOUNDARY_TOL:
        series.meta["warnings"].append(
            f"{engine}: boundary contact, edge density {edge:.3e} > {BOUNDARY_TOL:g}")


def run_qch(config: ScenarioConfig, keep_phi: bool = False,
            snapshot_dir: str | None = None) -> TimeSeries:
    """Hybrid run from ``T = 0`` to ``t_max``.

    Rows are recorded every ``record_every`` steps, with the force
    expectations and ``max |f1 - r1|`` kept as auxiliary columns.  On
    divergence the partial series is attached to the raised error as
    ``err.series`` and flagged truncated.
    """
    cfg = config
    grid, pot, p = cfg.grid.build(), cfg.build_potential(), cfg.params
    state = init_hybrid(grid, cfg.alpha, cfg.r1_0, cfg.v1_0)
    stepper = HybridStepper(grid, cfg.dt, pot, p, cfg.kinetic_coupling)
    series = TimeSeries(label=cfg.label or "qch",
                        meta={"engine": "qch", "warnings": [], "snapshots": []})
    phis, edge = [], 0.0

    def record(s):
        nonlocal edge
        f1, f2s, f2f = hybrid_forces(s, pot)
        series.append(hybrid_row(s, pot, p), force1=f1, force2_slot=f2s,
                      force2_full=f2f,
                      f1_spread=np.max(np.abs(s.f1.values - s.r1)))
        edge = max(edge, _edge_density(s.phi.density))
        if keep_phi:
            phis.append(s.phi)

    def snapshot(s):
        if snapshot_dir and cfg.snapshot_every and s.step % cfg.snapshot_every == 0:
            path = os.path.join(snapshot_dir,
                                f"{series.label}_qch_step{s.step:07d}.csv")
            write_snapshot(path, s)
            series.meta["snapshots"].append(path)

    record(state)
    snapshot(state)
    try:
        for n in range(1, cfg.n_steps + 1):
            state = replace(stepper.step(state), t=n * cfg.dt)
            if n % cfg.record_every == 0:
                record(state)
            snapshot(state)
    except SolverDivergedError as err:
        series.truncated = True
        series.meta["error"] = str(err)
        err.series = series
        raise
    finally:
        series.meta["cfl_flags"] = stepper.cfl_flags
        if stepper.cfl_flags:
            series.meta["warnings"].append(
                f"qch: advection CFL number above 1 on {stepper.cfl_flags} steps")
        _boundary_warning(series, edge, "qch")
    series.meta["final_state"] = state
    if keep_phi:
        series.meta["phis"] = phis
    return series


def run_qm2d(config: ScenarioConfig) -> TimeSeries:
    """Two-particle reference run, rows every ``qm_record_every`` steps."""
    cfg = config
    g = cfg.grid2d.build()
    pot, p = cfg.build_potential(), cfg.params
    scenario = "harmonic" if cfg.scenario == "custom" else cfg.scenario
    k = cfg.qm_phase_k if scenario == "repulsive" else None
    state = init_two_particle_state(g, g, cfg.alpha, scenario, p, k, cfg.v1_0)
    stepper = QMStepper(g, g, cfg.dt, pot, p)
    series = TimeSeries(label=cfg.label or "qm2d",
                        meta={"engine": "qm2d", "warnings": [],
                              "qm_phase_k": k})
    edge = 0.0

    def record(s):
        nonlocal edge
        series.append(qm_row(observables_2d(s, pot, p, stepper.V), p))
        edge = max(edge, _edge_density(s.density))

    record(state)
    try:
        done = 0
        while done < cfg.n_steps:
            chunk = min(cfg.qm_record_every, cfg.n_steps - done)
            state = stepper.advance(state, chunk)
            done += chunk
            state = replace(state, t=done * cfg.dt)
            record(state)
    except SolverDivergedError as err:
        series.truncated = True
        series.meta["error"] = str(err)
        err.series = series
        raise
    finally:
        _boundary_warning(series, edge, "qm2d")
    return series


def run_classical(config: ScenarioConfig) -> TimeSeries:
    """Newtonian point-particle run (RK4) from ``(r1_0, v1_0, 0, 0)``."""
    cfg = config
    pot, p = cfg.build_potential(), cfg.params
    state = ClassicalState(0.0, cfg.r1_0, 0.0, cfg.v1_0, 0.0)
    series = TimeSeries(label=cfg.label or "classical",
                        meta={"engine": "classical", "warnings": []})
    series.append(classical_row(state, classical_energy(state, pot, p), p))
    for n in range(1, cfg.n_steps + 1):
        state = step_newton(state, cfg.dt, pot, p)
        state = ClassicalState(n * cfg.dt, state.x1, state.x2, state.v1, state.v2)
        if n % cfg.record_every == 0:
            series.append(classical_row(state, classical_energy(state, pot, p), p))
    return series


def run_sampler(config: ScenarioConfig, qch_series: TimeSeries | None = None,
                bins: int = 80) -> dict:
    """Evolve a stochastic ensemble alongside a density and compare.

    The free scenario uses the closed-form free Gaussian; otherwise the drift
    comes from the stored wave functions of ``qch_series`` (``keep_phi``).
    """
    cfg = config
    sc = cfg.sampler
    p = cfg.params
    if cfg.scenario == "free" and qch_series is None:
        model = free_gaussian_model(cfg.alpha, p.m2, p.hbar)
        e = Ensemble.normal(sc.n_particles, 0.0, np.sqrt(1.0 / (4 * cfg.alpha)),
                            cfg.seed, model.nu)
    else:
        if qch_series is None or "phis" not in qch_series.meta:
            raise ValueError("sampler needs a qch series with stored wave functions")
        phis = qch_series.meta["phis"]
        model = grid_model(qch_series.t, phis, p)
        e = Ensemble.from_density(phis[0].grid, phis[0].density,
                                  sc.n_particles, cfg.seed, model.nu)
    steps = int(round(cfg.t_max / sc.dt))
    if steps:
        e = evolve_ensemble(e, model, sc.dt, steps)
    report = {"t": e.t, "n": len(e), "escapes": e.escapes,
              "ks": None, "ks_critical": None}
    if len(e) >= 100:
        report["ks"] = ks_distance(e, lambda x: model.cdf(x, e.t))
        report["ks_critical"] = ks_critical_value(len(e))
    lo, hi = np.percentile(e.positions, [0.05, 99.95])
    report["histogram"] = histogram(e, bins, (lo, hi), model.density)
    return report


@dataclass
class MemberResult:
    """Everything one config produced."""

    label: str
    config: dict
    scenario: ScenarioConfig | None = None
    series: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def partial(self) -> bool:
        return self.error is not None


def _prefix(cfg):
    return f"{cfg.label}_" if cfg.label else ""


def _write_qch_reports(series, path_base, outputs):
    gap = quasi_trajectory_gap(series)
    path = path_base + "_gap.csv"
    write_table(path, ("t", "r1_minus_f1", "r1_minus_x2"), gap)
    outputs.append(path)
    try:
        res = ehrenfest_residuals(series)
    except (InsufficientDataError, ValueError):
        return
    path = path_base + "_ehrenfest.csv"
    write_table(path, ("t", "r1", "x2", "w", "p2_slot", "p2_full"), res)
    outputs.append(path)


def run_member(config: ScenarioConfig, out_dir: str) -> MemberResult:
    """Run every engine of ``config`` and write its files into ``out_dir``.

    Engine errors stop the member; whatever was computed is written and the
    error text is returned in the result.
    """
    cfg = config
    res = MemberResult(label=cfg.label, config=cfg.to_dict(), scenario=cfg)
    prefix = os.path.join(out_dir, _prefix(cfg))
    snap_dir = os.path.join(out_dir, "snapshots") if cfg.snapshot_every else None
    keep_phi = "sampler" in cfg.engines and "qch" in cfg.engines
    order = [e for e in ("qch", "qm2d", "classical", "sampler") if e in cfg.engines]
    runners = {"qch": lambda: run_qch(cfg, keep_phi, snap_dir),
               "qm2d": lambda: run_qm2d(cfg),
               "classical": lambda: run_classical(cfg)}
    for engine in order:
        try:
            if engine == "sampler":
                rep = run_sampler(cfg, res.series.get("qch"))
                path = prefix + "sampler_hist.csv"
                write_histogram(path, *rep.pop("histogram"))
                res.outputs.append(path)
                res.extras["sampler"] = rep
                if rep["escapes"]:
                    res.warnings.append(
                        f"sampler: {rep['escapes']} particle escapes clamped to the window")
                continue
            series = runners[engine]()
        except SolverDivergedError as err:
            series = getattr(err, "series", None)
            res.error = f"{engine}: {err}"
            log.error("%s", res.error)
        except OSError as err:
            res.error = f"{engine}: {err}"
            log.error("%s", res.error)
            break
        if series is not None:
            res.series[engine] = series
            res.warnings.extend(series.meta.get("warnings", []))
            path = f"{prefix}{engine}.csv"
            write_series(series, path)
            res.outputs.append(path)
            if engine == "qch":
                _write_qch_reports(series, f"{prefix}{engine}", res.outputs)
                res.outputs.extend(series.meta["snapshots"])
        if res.error:
            break
    return res


def build_manifest(name, members, wall_time, checks=None, extra=None) -> dict:
    """Run manifest: config echo, version, timing, warnings and outputs."""
    members = list(members)
    man = {
        "name": name,
        "version": __version__,
        "wall_time_s": wall_time,
        "partial": any(m.partial for m in members),
        "errors": [m.error for m in members if m.error],
        "warnings": [w for m in members for w in m.warnings],
        "outputs": [os.path.basename(o) if os.path.dirname(o) == "" else o
                    for m in members for o in m.outputs],
        "members": [{
            "label": m.label,
            "config": m.config,
            "cfl_flags": sum(s.meta.get("cfl_flags", 0) for s in m.series.values()),
            "boundary_density": {k: s.meta.get("boundary_density")
                                 for k, s in m.series.items()},
            "sampler": m.extras.get("sampler"),
        } for m in members],
        "checks": checks or [],
        "passed": all(c["passed"] for c in (checks or [])),
    }
    if extra:
        man.update(extra)
    return man


def _relative_outputs(members, out_dir):
    for m in members:
        m.outputs = [os.path.relpath(o, out_dir) for o in m.outputs]


def run_config(config: ScenarioConfig, out_dir: str | None = None):
    """Run one scenario, write its series files and ``manifest.json``.

    Returns ``(member_result, manifest)``.
    """
    out_dir = out_dir or config.output_dir()
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    member = run_member(config, out_dir)
    _relative_outputs([member], out_dir)
    checks = []
    rep = member.extras.get("sampler")
    if rep and rep.get("ks") is not None:
        checks.append({"name": "sampler KS distance", "value": rep["ks"],
                       "threshold": rep["ks_critical"],
                       "passed": rep["ks"] < rep["ks_critical"]})
    manifest = build_manifest(config.label or "run", [member],
                              time.perf_counter() - t0, checks)
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)
    return member, manifest
