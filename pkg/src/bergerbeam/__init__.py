"""Finite-difference simulation of a clamped Berger beam in a supersonic flow."""
__version__ = "0.1.0"

from .diagnostics import EnergyRecord, GrowthEstimate, energies, energy_identity_residual, fit_growth_rate
from .experiments import (
    CriticalVelocityReport, LimitCycleReport, SteadyStateReport, SweepTable, detect_limit_cycle, find_ucrit,
    run_sweep, solve_steady_state,
)
from .integrator import IntegratorConfig, Trajectory, integrate, run, step
from .model import BeamConfig, InitialData, Mesh, State, build_mesh, build_operators, rhs

__all__ = [
    "BeamConfig", "InitialData", "Mesh", "State", "build_mesh", "build_operators", "rhs",
    "IntegratorConfig", "Trajectory", "integrate", "run", "step",
    "EnergyRecord", "GrowthEstimate", "energies", "energy_identity_residual", "fit_growth_rate",
    "CriticalVelocityReport", "LimitCycleReport", "SteadyStateReport", "SweepTable",
    "detect_limit_cycle", "find_ucrit", "run_sweep", "solve_steady_state",
]
