"""Quantum-classical hybrid dynamics laboratory.

One particle of a two-body system is treated classically through a
quasi-trajectory field while the other stays quantum.  The package provides
the hybrid solver, exact two-particle and classical references, the
observables used to compare them, a stochastic-trajectory sampler and a
command-line scenario runner.
"""
__version__ = "0.1.0"

from .core import (  # noqa: E402
    BoundaryContactWarning,
    ComplexField1D,
    ConfigurationError,
    GaussianRepulsivePotential,
    Grid1D,
    HarmonicPotential,
    InsufficientDataError,
    PhysParams,
    RealField1D,
    SolverDivergedError,
    ZeroPotential,
    gaussian_packet,
    make_grid,
    potential_eval,
)
from .qch import (  # noqa: E402
    HybridState,
    HybridStepper,
    init_hybrid,
    quantum_velocity,
    step_hybrid,
)
from .qm2d import (  # noqa: E402
    Wavefunction2D,
    analytic_free_gaussian,
    init_two_particle_state,
    observables_2d,
    step_qm2d,
)
from .classical import ClassicalState, harmonic_analytic, step_newton  # noqa: E402
from .diagnostics import (  # noqa: E402
    DiagnosticRow,
    TimeSeries,
    ehrenfest_residuals,
    expectation,
    qch_energy,
    quasi_trajectory_gap,
)
from .sampler import (  # noqa: E402
    DriftModel,
    Ensemble,
    evolve_ensemble,
    forward_drift,
    ks_distance,
)
from .config import ScenarioConfig, parse_config  # noqa: E402
from .io import read_series, write_series  # noqa: E402
from .runner import run_classical, run_config, run_qch, run_qm2d  # noqa: E402
from .presets import run_preset  # noqa: E402
