"""Particle swarm optimization instrumented for statistical inference.

The engine runs classical PSO dynamics and records full trajectories; the
statistics layer classifies particle regimes and turns three limit theorems
into estimators and confidence regions around the optima the swarm finds,
with a seeded Monte Carlo harness, an HTTP service, and a CLI on top.
"""

from ._version import VERSION as __version__
from .clt_stats import (
    A3Check,
    B2Check,
    BelowFloorError,
    ConfidenceRegion,
    DegenerateSampleError,
    InsufficientDataError,
    MuSigmaEstimate,
    NonOscCLT,
    OscillatoryCLT,
    ParameterRegimeError,
    SingularGammaError,
    SwarmCLT,
    check_A3,
    check_B2,
    ci_oscillatory,
    constraint_grid,
    ellipsoid_oscillatory,
    estimate_mu_sigma,
    h1_statistic,
    h2_statistic,
    h3_and_ci,
    oscillatory_step_variance,
    ratio_chain,
    region_nonoscillatory,
    theorem1_constants,
)
from .diagnostics import QQData, coverage, qq_data
from .experiments import (
    ANALYSES,
    EmptyCohortError,
    ExperimentResult,
    ExperimentSpec,
    SpecError,
    analyze_trajectory,
    fixture_path,
    load_fixture,
    load_spec,
    run_experiment,
    run_nonoscillatory_experiment,
    run_oscillatory_experiment,
    run_swarm_experiment,
)
from .objectives import (
    DuplicateObjectiveError,
    Objective,
    UnknownObjectiveError,
    himmelblau,
    lookup,
    names,
    register,
)
from .quantiles import chi2_cdf, chi2_quantile, normal_cdf, normal_quantile
from .regime import (
    RegimeLabel,
    StagnationReport,
    classify,
    detect_stagnation,
    flag_belated,
)
from .swarm_core import (
    NoiseDraw,
    ParamsError,
    PsoParams,
    StepError,
    TopologySpec,
    Trajectory,
    init_swarm,
    run,
    single_line_form,
    step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
