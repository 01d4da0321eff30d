"""Finite-difference time-domain solver for the return-stroke field problem."""

from .grid import AXI2D, CART3D, CpmlProfile, GridSpec, cfl_timestep
from .solver import (DivergenceError, Probe, SimulationState, StabilityReport, build,
                     inject_source, memory_estimate, probe_waveforms, run, stability_report, step)

__all__ = ["AXI2D", "CART3D", "CpmlProfile", "GridSpec", "cfl_timestep", "DivergenceError",
           "Probe", "SimulationState", "StabilityReport", "build", "inject_source",
           "memory_estimate", "probe_waveforms", "run", "stability_report", "step"]
