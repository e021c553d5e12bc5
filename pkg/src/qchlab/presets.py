"""Named experiment matrices with their pass/fail checks.

Every preset writes its members' files into one directory and a single
``manifest.json`` after all members finished.
"""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .config import GridConfig, ScenarioConfig, apply_overrides
from .core import ConfigurationError
from .diagnostics import ehrenfest_residuals, quasi_trajectory_gap
from .io import write_histogram, write_manifest, write_table
from .qm2d import analytic_free_gaussian
from .runner import MemberResult, build_manifest, run_member
from .sampler import (
    Ensemble,
    evolve_ensemble,
    free_gaussian_model,
    ground_state_model,
    histogram,
    ks_critical_value,
    ks_distance,
)

log = logging.getLogger(__name__)

__all__ = ["PRESETS", "PresetResult", "preset_members", "run_preset"]

HARMONIC_ALPHAS = (0.5, 1.0, 2.0)
REPULSIVE_ALPHAS = (0.5, 1.0)
QM_PHASE_KS = (-5.0, -2.5)
MASS_RATIOS = (5.0, 10.0, 20.0)
#: |gap| above this counts as having left zero (repulsive sweep).
DEPARTURE_TOL = 1e-3
EHRENFEST_TOL = 1e-4
#: Energy-conservation study grid.
CONVERGENCE_GRID = GridConfig(-10.0, 10.0, 512)

PRESETS = ("fig1", "fig2", "fig3", "fig4", "fig5", "free-limit",
           "sampler-suite", "convergence", "mass-ratio")
_SWEPT = {"alpha", "engines", "label", "qm_phase_k", "scenario", "mass_ratio"}


@dataclass
class PresetResult:
    name: str
    members: list
    manifest: dict
    out_dir: str

    @property
    def passed(self) -> bool:
        return self.manifest["passed"] and not self.manifest["partial"]

    def series(self, label, engine):
        for m in self.members:
            if m.label == label:
                return m.series[engine]
        raise KeyError(label)


def _check(name, value, threshold, passed, **extra):
    return {"name": name, "value": value, "threshold": threshold,
            "passed": bool(passed), **extra}


def _tag(alpha):
    return f"a{alpha:g}"


def preset_members(name: str, overrides=()) -> list:
    """Scenario configs of a named preset, with ``key=value`` overrides."""
    if name not in PRESETS:
        raise ConfigurationError(
            f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    for item in overrides or ():
        key = item.split("=", 1)[0].strip()
        if key in _SWEPT:
            raise ConfigurationError(f"{key} is set by preset {name}")
    if name in ("fig1", "fig2", "fig3"):
        base = ScenarioConfig(scenario="harmonic")
    elif name == "convergence":
        base = ScenarioConfig(scenario="harmonic", grid=CONVERGENCE_GRID)
    elif name in ("fig4", "fig5"):
        base = ScenarioConfig(scenario="repulsive")
    elif name == "mass-ratio":
        base = ScenarioConfig(scenario="harmonic", t_max=1.0)
    else:
        base = ScenarioConfig(scenario="free", t_max=1.0)
    base = apply_overrides(base, overrides)

    if name in ("fig1", "fig2", "fig3"):
        return ([replace(base, alpha=a, engines=("qch",), label=_tag(a))
                 for a in HARMONIC_ALPHAS]
                + [replace(base, engines=("classical",), label="oracle")])
    if name in ("fig4", "fig5"):
        out = []
        for a in REPULSIVE_ALPHAS:
            out.append(replace(base, alpha=a, engines=("qch",), label=_tag(a)))
            for k in QM_PHASE_KS:
                out.append(replace(base, alpha=a, engines=("qm2d",),
                                   qm_phase_k=k, label=f"{_tag(a)}_k{k:g}"))
        return out
    if name == "mass-ratio":
        return ([replace(base, mass_ratio=mr, engines=("qch",),
                         label=f"mr{mr:g}") for mr in MASS_RATIOS]
                + [replace(base, mass_ratio=mr, engines=("classical",),
                           label=f"mr{mr:g}_oracle") for mr in MASS_RATIOS])
    if name == "free-limit":
        return [replace(base, alpha=1.0, engines=("qch",), label="free")]
    if name == "convergence":
        return [replace(base, alpha=1.0, engines=("qch",), dt=dt,
                        label=f"dt{dt:g}")
                for dt in (base.dt, base.dt / 2)]
    return [base]  # sampler-suite: the config only carries seed and sizes


# -- checks --------------------------------------------------------------------

def _ehrenfest_checks(members):
    out = []
    for m in members:
        s = m.series.get("qch")
        if s is None or len(s) < 3:
            continue
        res = ehrenfest_residuals(s)
        for key, label in (("x2", "d<x2>/dT - <p2>/m2"), ("r1", "dR1/dT - <w>")):
            val = float(np.max(np.abs(res[key])))
            out.append(_check(f"{m.label}: Ehrenfest {label}", val,
                              EHRENFEST_TOL, val < EHRENFEST_TOL))
    return out


def _aligned(a, b, name):
    """Values of column ``name`` of ``b`` at the recorded times of ``a``."""
    return np.interp(a.t, b.t, b[name])


def _harmonic_checks(name, members):
    by = {m.label: m for m in members}
    oracle = by["oracle"].series["classical"]
    checks, devs = [], []
    for a in HARMONIC_ALPHAS:
        s = by[_tag(a)].series["qch"]
        dev = float(np.max(np.abs(s["r1"] - _aligned(s, oracle, "r1"))))
        devs.append(dev)
        checks.append(_check(f"alpha={a:g}: max |R1 - x1 classical|", dev, 0.05,
                             dev < 0.05))
    checks.append(_check("R1 deviation strictly decreasing in alpha", devs, None,
                         all(x > y for x, y in zip(devs, devs[1:]))))
    if name == "fig3":
        checks += _gap_checks([by[_tag(a)].series["qch"] for a in HARMONIC_ALPHAS])
    return checks


def gap_onset_monotone(t, gap, t_end, window=(0.3, 0.5)):
    """Earliest onset in ``window`` after which ``|gap|`` never decreases.

    Returns ``None`` when no onset in the window works.
    """
    g = np.abs(gap)
    sel = t <= t_end + 1e-12
    t, g = t[sel], g[sel]
    nondec = np.diff(g) >= 0
    ok_from = np.ones(t.size, dtype=bool)
    # ok_from[i]: |gap| non-decreasing on t[i:]
    ok_from[:-1] = np.flip(np.cumprod(np.flip(nondec))).astype(bool)
    cand = np.flatnonzero((t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
                          & ok_from)
    return float(t[cand[0]]) if cand.size else None


def _gap_checks(series_list):
    checks, at1 = [], []
    for a, s in zip(HARMONIC_ALPHAS, series_list):
        gap = quasi_trajectory_gap(s)
        t, g = gap["t"], gap["r1_minus_f1"]
        ref = abs(g[np.argmin(np.abs(t - 1.2))])
        early = float(np.max(np.abs(g[t < 0.3]))) if np.any(t < 0.3) else 0.0
        checks.append(_check(f"alpha={a:g}: max |gap| for T<0.3 / |gap(1.2)|",
                             early / ref if ref else np.inf, 0.1,
                             early < 0.1 * ref))
        onset = gap_onset_monotone(t, g, 1.2)
        checks.append(_check(f"alpha={a:g}: |gap| monotone after T=0.4+-0.1",
                             onset, [0.3, 0.5], onset is not None))
        at1.append(float(abs(g[np.argmin(np.abs(t - 1.0))])))
    checks.append(_check("|gap(T=1)| strictly decreasing in alpha", at1, None,
                         all(x > y for x, y in zip(at1, at1[1:]))))
    return checks


def departure_time(t, gap, tol=DEPARTURE_TOL):
    idx = np.flatnonzero(np.abs(gap) > tol)
    return float(t[idx[0]]) if idx.size else np.inf


def _repulsive_checks(members):
    by = {m.label: m for m in members}
    checks = []
    for k in QM_PHASE_KS:
        devs = []
        for a in REPULSIVE_ALPHAS:
            s = by[_tag(a)].series["qch"]
            q = by[f"{_tag(a)}_k{k:g}"].series["qm2d"]
            devs.append(float(abs(s.at(1.0).x2_mean - q.at(1.0).x2_mean)))
        checks.append(_check(
            f"qm_phase_k={k:g}: |<x2> QCH - QM| at T=1, alpha 0.5 > alpha 1",
            devs, None, devs[0] > devs[1]))
    dep = []
    for a in REPULSIVE_ALPHAS:
        gap = quasi_trajectory_gap(by[_tag(a)].series["qch"])
        dep.append(departure_time(gap["t"], gap["r1_minus_f1"]))
    checks.append(_check("gap departs from 0 earlier for alpha=0.5",
                         dep, DEPARTURE_TOL, dep[0] < dep[1]))
    return checks


def _mass_ratio_checks(members):
    by = {m.label: m for m in members}
    devs = []
    for mr in MASS_RATIOS:
        s = by[f"mr{mr:g}"].series["qch"]
        o = by[f"mr{mr:g}_oracle"].series["classical"]
        devs.append(float(abs(s.at(1.0).r1 - o.at(1.0).r1)))
    return [_check("|R1 - x1 classical| at T=1 strictly decreasing in mass ratio",
                   devs, None, all(x > y for x, y in zip(devs, devs[1:])))]


def _free_limit_checks(members):
    m = members[0]
    s = m.series["qch"]
    cfg = m.scenario
    r1_err = float(np.max(np.abs(s["r1"] - (cfg.r1_0 + cfg.v1_0 * s.t))))
    spread = float(np.max(s["f1_spread"]))
    norm = float(np.max(np.abs(s["norm2"] - 1.0)))
    final = s.meta["final_state"]
    exact = analytic_free_gaussian(cfg.alpha, final.t, final.grid,
                                   cfg.params.m2, cfg.params.hbar)
    l2 = float(np.sqrt(np.sum(np.abs(final.phi.values - exact.values) ** 2)
                       * final.grid.dx))
    res = ehrenfest_residuals(s)
    worst = float(max(np.max(np.abs(res[k])) for k in
                      ("r1", "x2", "w", "p2_slot", "p2_full")))
    return [
        _check("max |R1(T) - (r1_0 + v1_0 T)|", r1_err, 1e-10, r1_err < 1e-10),
        _check("max |f1 - R1|", spread, 1e-10, spread < 1e-10),
        _check(f"L2 error vs analytic free Gaussian at T={final.t:g}", l2, 1e-6,
               l2 < 1e-6),
        _check("max |norm2 - 1|", norm, 1e-8, norm < 1e-8),
        _check("max Ehrenfest residual with V=0", worst, 1e-8, worst < 1e-8),
    ]


def _convergence_checks(members):
    drifts = []
    for m in members:
        e = m.series["qch"]["energy"]
        drifts.append(float(np.max(np.abs(e - e[0])) / abs(e[0])))
    ratio = drifts[0] / drifts[1] if drifts[1] else np.inf
    return [
        _check("E(0) (harmonic, alpha=1)", float(members[0].series["qch"]["energy"][0]),
               2.5, abs(members[0].series["qch"]["energy"][0] - 2.5) < 1e-6),
        _check("relative energy drift", drifts[0], 1e-3, drifts[0] < 1e-3),
        _check("energy drift reduction when dt is halved", ratio, 3.5,
               ratio >= 3.5),
    ]


# -- sampler suite -------------------------------------------------------------

def sampler_suite(config: ScenarioConfig, out_dir: str):
    """Density tracking and reproducibility checks of the stochastic sampler."""
    n = config.sampler.n_particles
    dt = config.sampler.dt
    seed = config.seed
    crit = ks_critical_value(n)
    checks, outputs = [], []
    times = (0.25, 0.5)

    def track(label, model, e0, var_fn):
        e = e0
        for T in times:
            e = evolve_ensemble(e, model, dt, int(round((T - e.t) / dt)))
            ks = ks_distance(e, lambda x: model.cdf(x, e.t))
            checks.append(_check(f"{label}: KS distance at T={T:g}", ks, crit,
                                 ks < crit))
        var = float(np.var(e.positions))
        exact = var_fn(e.t)
        se = exact * np.sqrt(2.0 / (len(e) - 1))
        checks.append(_check(f"{label}: variance at T={e.t:g} within 3 SE",
                             var, [exact, 3 * se], abs(var - exact) < 3 * se))
        path = os.path.join(out_dir, f"sampler_{label}_hist.csv")
        lo, hi = np.percentile(e.positions, [0.05, 99.95])
        write_histogram(path, *histogram(e, 80, (lo, hi), model.density))
        outputs.append(path)

    alpha = 1.0
    free = free_gaussian_model(alpha)
    track("free", free, Ensemble.normal(n, 0.0, np.sqrt(1 / (4 * alpha)), seed,
                                        free.nu),
          lambda t: (1 + 16 * alpha ** 2 * free.nu ** 2 * t ** 2) / (4 * alpha))
    ground = ground_state_model()
    track("ground", ground, Ensemble.normal(n, 0.0, 1.0, seed, ground.nu),
          lambda t: 1.0)

    # nu = 0: noise never enters, so any two seeds give the same trajectories
    small = min(n, 10_000)
    det = free.with_nu(0.0)
    x0 = Ensemble.normal(small, 0.0, 0.5, seed, 0.0).positions
    a = evolve_ensemble(Ensemble(0.0, x0, seed, 0.0), det, dt, 500)
    b = evolve_ensemble(Ensemble(0.0, x0, seed + 1, 0.0), det, dt, 500)
    checks.append(_check("nu=0 runs identical across seeds", None, None,
                         np.array_equal(a.positions, b.positions)))
    # characteristics of the free Gaussian scale with the packet width; the
    # noiseless scheme is explicit Euler, so the error halves with dt
    errs = []
    for h in (dt, dt / 2):
        c = evolve_ensemble(Ensemble(0.0, x0, seed, 0.0), det, h,
                            int(round(0.5 / h)))
        scale = np.sqrt(1 + 16 * alpha ** 2 * free.nu ** 2 * c.t ** 2)
        errs.append(float(np.max(np.abs(c.positions - x0 * scale))))
    ratio = errs[0] / errs[1]
    checks.append(_check("nu=0 follows dx/dt = v, first-order error ratio",
                         ratio, [1.8, 2.2], 1.8 < ratio < 2.2, errors=errs))

    e0 = Ensemble.normal(small, 0.0, 0.5, seed, free.nu)
    whole = evolve_ensemble(e0, free, dt, 50)
    again = evolve_ensemble(e0, free, dt, 50)
    pieces = Ensemble.concat([evolve_ensemble(p, free, dt, 50)
                              for p in e0.split(3)])
    checks.append(_check("equal seeds give bitwise-equal ensembles", None, None,
                         np.array_equal(whole.positions, again.positions)))
    checks.append(_check("partitioned evolution is bitwise identical", None, None,
                         np.array_equal(whole.positions, pieces.positions)))
    member = MemberResult(label="sampler-suite", config=config.to_dict(),
                          outputs=outputs)
    return member, checks


# -- orchestration -------------------------------------------------------------

def run_preset(name: str, out_dir: str | None = None, overrides=(),
               workers: int = 1) -> PresetResult:
    """Run all members of preset ``name`` and write one manifest.

    Sweep members are independent; ``workers > 1`` runs them in separate
    processes.
    """
    members_cfg = preset_members(name, overrides)
    out_dir = out_dir or members_cfg[0].output_dir()
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    if name == "sampler-suite":
        member, checks = sampler_suite(members_cfg[0], out_dir)
        members = [member]
    else:
        if workers > 1 and len(members_cfg) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                members = list(pool.map(run_member, members_cfg,
                                        [out_dir] * len(members_cfg)))
        else:
            members = [run_member(c, out_dir) for c in members_cfg]
        checks = []
        if not any(m.partial for m in members):
            checks = _preset_checks(name, members)
            checks += _ehrenfest_checks(members)
            if name in ("fig1", "fig2", "fig3"):
                _write_gap_table(members, out_dir)
    for m in members:
        m.outputs = [os.path.relpath(o, out_dir) for o in m.outputs]
    if name in ("fig1", "fig2", "fig3"):
        members[0].outputs.append("gaps.csv")
    manifest = build_manifest(name, members, time.perf_counter() - t0, checks)
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)
    for c in checks:
        log.info("%s %s: %s", "PASS" if c["passed"] else "FAIL", c["name"],
                 c["value"])
    return PresetResult(name, members, manifest, out_dir)


def _preset_checks(name, members):
    if name in ("fig1", "fig2", "fig3"):
        return _harmonic_checks(name, members)
    if name in ("fig4", "fig5"):
        return _repulsive_checks(members)
    if name == "mass-ratio":
        return _mass_ratio_checks(members)
    if name == "free-limit":
        return _free_limit_checks(members)
    if name == "convergence":
        return _convergence_checks(members)
    return []


def _write_gap_table(members, out_dir):
    """Gap columns of the whole alpha sweep side by side."""
    cols, data = ["t"], {}
    for a in HARMONIC_ALPHAS:
        s = next(m for m in members if m.label == _tag(a)).series["qch"]
        gap = quasi_trajectory_gap(s)
        data["t"] = gap["t"]
        for k in ("r1_minus_f1", "r1_minus_x2"):
            cols.append(f"{k}_{_tag(a)}")
            data[cols[-1]] = gap[k]
    write_table(os.path.join(out_dir, "gaps.csv"), cols, data)
