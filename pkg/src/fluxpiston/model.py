"""Angle-dependent static quantities of the engine.

All rates and frequencies are in units of the cold linewidth kappa_C, and
hbar = 1, so ``hbar_g`` is numerically ``g``. Functions accept scalar or
array angles and broadcast like numpy ufuncs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class EngineParams:
    """Engine rates and energies. Give either ``J`` or ``alpha``, not both."""

    kappa_H: float
    Delta0: float
    g: float
    E_c: float
    E_J: float
    n_H: float
    n_C: float
    kappa_C: float = 1.0
    J: float | None = None
    alpha: float | None = None

    def __post_init__(self) -> None:
        if (self.J is None) == (self.alpha is None):
            raise ValueError("exactly one of J and alpha must be given")
        if not (self.kappa_C > 0 and self.kappa_H > 0):
            raise ValueError("kappa_C and kappa_H must be positive")
        if self.J is not None:
            object.__setattr__(self, "alpha", 4.0 * self.J**2 / (self.kappa_C * self.kappa_H))
        else:
            if self.alpha < 0:
                raise ValueError("alpha must be non-negative")
            object.__setattr__(self, "J", 0.5 * math.sqrt(self.alpha * self.kappa_C * self.kappa_H))
        if not self.n_H >= self.n_C >= 0:
            raise ValueError("occupations must satisfy n_H >= n_C >= 0")
        if self.g < 0 or self.E_c < 0:
            raise ValueError("g and E_c must be non-negative")

    @property
    def hbar_g(self) -> float:
        return self.g

    @property
    def EcEJ(self) -> float:
        return self.E_c * self.E_J

    @property
    def Ec_hbar_g(self) -> float:
        return self.E_c * self.g

    def replace(self, **changes) -> "EngineParams":
        # alpha is held fixed unless J is explicitly changed
        if "J" in changes:
            changes["alpha"] = None
        else:
            changes.setdefault("alpha", self.alpha)
            changes["J"] = None
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "kappa_C": self.kappa_C, "kappa_H": self.kappa_H, "alpha": self.alpha, "J": self.J,
            "Delta0": self.Delta0, "g": self.g, "E_c": self.E_c, "E_J": self.E_J,
            "n_H": self.n_H, "n_C": self.n_C,
        }


class BathAtAngle(NamedTuple):
    n_bar: np.ndarray
    kappa: np.ndarray
    f_H: np.ndarray
    Delta: np.ndarray


def detuning(phi, p: EngineParams):
    return p.Delta0 + p.g * np.cos(phi)


def hot_contact(phi, p: EngineParams):
    D = detuning(phi, p)
    return p.alpha / (1.0 + 4.0 * D**2 / p.kappa_H**2)


def bath_at_angle(phi, p: EngineParams) -> BathAtAngle:
    """Effective thermalisation target and rate after eliminating the filter mode."""
    D = detuning(phi, p)
    f = p.alpha / (1.0 + 4.0 * D**2 / p.kappa_H**2)
    n_bar = (p.n_C + f * p.n_H) / (1.0 + f)
    return BathAtAngle(n_bar, p.kappa_C * (1.0 + f), f, D)


def occupations_at_detuning(Delta, p: EngineParams):
    """Two-mode steady-state occupations ``(n_a, n_b)`` as functions of detuning."""
    kC, kH, a = p.kappa_C, p.kappa_H, p.alpha
    s = kC + kH
    dn = p.n_H - p.n_C
    den_a = 4.0 * Delta**2 / (kH * s) + (1.0 + a) * s / kH
    den_b = 4.0 * Delta**2 / (kC * s) + (1.0 + a) * s / kC
    return p.n_C + a * dn / den_a, p.n_H - a * dn / den_b


def occupation_slope(Delta, p: EngineParams):
    """Analytic d<n_a>_ss/dDelta of the two-mode steady state."""
    kC, kH, a = p.kappa_C, p.kappa_H, p.alpha
    s = kC + kH
    den = 4.0 * Delta**2 / (kH * s) + (1.0 + a) * s / kH
    return -a * (p.n_H - p.n_C) * (8.0 * Delta / (kH * s)) / den**2


def steady_state_occupations(phi, p: EngineParams):
    return occupations_at_detuning(detuning(phi, p), p)


def rotor_drift(phi, Q, n_a, p: EngineParams):
    """Deterministic rotor equations: returns ``(dPhi/dt, dQ/dt)``."""
    return p.E_c * Q, -(p.E_J - p.hbar_g * n_a) * np.sin(phi)
