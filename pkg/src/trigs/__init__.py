"""Tikhonov-regularized inertial gradient dynamics with controlled damping,
their proximal discretizations, and the diagnostics used to check their rates."""
from .continuous import AVD, TRIGS, HeavyBall, Trajectory, energy_W, integrate, vector_field
from .diagnostics import RateReport, lyapunov_critical, lyapunov_general, rate_fit
from .discrete import IpatreParams, IterateLog, ipatre_ns_run, ipatre_run, ipatre_step, moreau_envelope
from .harness import ExperimentConfig, RunReport, emit, parse_config, run, sweep
from .objectives import Objective, make_abs, make_least_squares, make_quad1d, make_zero, resolve_problem
from .schedules import (
    Certificate,
    ConstantSchedule,
    PowerSchedule,
    RationalSchedule,
    cd_check,
    parse_schedule,
    rate_bound,
    select_K,
)

__version__ = "0.1.0"

__all__ = [
    "AVD", "TRIGS", "HeavyBall", "Trajectory", "energy_W", "integrate", "vector_field",
    "RateReport", "lyapunov_critical", "lyapunov_general", "rate_fit",
    "IpatreParams", "IterateLog", "ipatre_ns_run", "ipatre_run", "ipatre_step", "moreau_envelope",
    "ExperimentConfig", "RunReport", "emit", "parse_config", "run", "sweep",
    "Objective", "make_abs", "make_least_squares", "make_quad1d", "make_zero", "resolve_problem",
    "Certificate", "ConstantSchedule", "PowerSchedule", "RationalSchedule", "cd_check", "parse_schedule",
    "rate_bound", "select_K",
]
