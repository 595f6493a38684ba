"""Bohmian flow analysis of free Gaussian wave packets and two-packet interference.

Closed-form models (:mod:`~bohmflow.packet`, :mod:`~bohmflow.superposition`),
a model-agnostic field engine (:mod:`~bohmflow.fields`), an adaptive
trajectory integrator (:mod:`~bohmflow.trajectories`), a detection Monte
Carlo (:mod:`~bohmflow.detection`) and diagnostics (:mod:`~bohmflow.analysis`).
"""
from .errors import (BohmflowError, BranchMismatch, ConfigError, DegenerateDensity, DomainError,
                     NodeEncounter, NodeOnGrid, NodeProximity, ResolutionError, StepUnderflow,
                     SwarmFailure)
from .packet import PacketParams
from .superposition import SuperpositionConfig
from .fields import FieldSample, WaveFunction, fields_at
from .trajectories import Swarm, SwarmSpec, Trajectory, integrate_swarm, integrate_trajectory
from .detection import DetectionFrame, PixelGrid
from .config import RunConfig, parse_config

__version__ = "0.1.0"

__all__ = [
    "BohmflowError", "BranchMismatch", "ConfigError", "DegenerateDensity", "DomainError",
    "NodeEncounter", "NodeOnGrid", "NodeProximity", "ResolutionError", "StepUnderflow",
    "SwarmFailure", "PacketParams", "SuperpositionConfig", "FieldSample", "WaveFunction",
    "fields_at", "Swarm", "SwarmSpec", "Trajectory", "integrate_swarm", "integrate_trajectory",
    "DetectionFrame", "PixelGrid", "RunConfig", "parse_config",
]
