"""Stochastic simulation of an autonomous flux-piston heat engine."""

__version__ = "0.1.0"

from .model import EngineParams, bath_at_angle, detuning, hot_contact, rotor_drift, steady_state_occupations
from .sde import IntegrationError, RandomStream
from .sim import run_ensemble, run_trajectory

__all__ = [
    "EngineParams", "IntegrationError", "RandomStream", "bath_at_angle", "detuning", "hot_contact",
    "rotor_drift", "run_ensemble", "run_trajectory", "steady_state_occupations",
]
