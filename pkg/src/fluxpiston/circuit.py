"""Circuit-element reduction for the flux piston.

Maps the bare capacitances/inductance of the two coupling variants onto the
effective oscillator-rotor description and derives the frequencies that set
the engine's energy scales. Everything here is in SI units; use
:func:`to_engine_units` to move into the kappa_C-scaled units of the
dynamical modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import constants as _const

HBAR = _const.hbar
#: reduced flux quantum hbar / 2e (weber)
PHI0 = _const.hbar / (2.0 * _const.e)

DEFAULT_RATIO = 0.01


class CircuitError(ValueError):
    """Raised for non-physical circuit element values."""


def _require_positive(**values: float) -> None:
    for name, value in values.items():
        if not (value > 0.0 and math.isfinite(value)):
            raise CircuitError(f"{name} must be strictly positive and finite, got {value!r}")


@dataclass(frozen=True)
class CapacitiveCircuit:
    C_tilde: float
    CJ_tilde: float
    C_c: float
    L: float
    E_J: float

    def __post_init__(self) -> None:
        _require_positive(C_tilde=self.C_tilde, CJ_tilde=self.CJ_tilde, C_c=self.C_c,
                          L=self.L, E_J=self.E_J)


@dataclass(frozen=True)
class InductiveCircuit:
    C_tilde: float
    CJ_tilde: float
    L: float
    E_J: float

    def __post_init__(self) -> None:
        _require_positive(C_tilde=self.C_tilde, CJ_tilde=self.CJ_tilde, L=self.L, E_J=self.E_J)


@dataclass(frozen=True)
class EffectiveCircuit:
    """Common reduced form: coupling ``xi`` plus effective capacitances."""

    xi: float
    C: float
    C_J: float
    L: float
    E_J: float
    CJ_tilde: float

    def __post_init__(self) -> None:
        if not 0.0 < self.xi < 1.0:
            raise CircuitError(f"xi must lie in (0, 1), got {self.xi!r}")
        _require_positive(C=self.C, C_J=self.C_J, L=self.L, E_J=self.E_J, CJ_tilde=self.CJ_tilde)


@dataclass(frozen=True)
class DerivedParams:
    omega0: float
    omega_p: float
    g: float
    E_c: float
    Phi_r: float
    Phi0: float = PHI0

    @property
    def hbar_E_c(self) -> float:
        """Rotor charging rate hbar*E_c in rad/s (Q measured in units of hbar)."""
        return HBAR * self.E_c


@dataclass(frozen=True)
class RegimeReport:
    g_over_omega0: float
    omegap_over_omega0: float
    vacuum_over_EJ: float
    occupation_over_critical: float
    threshold: float = DEFAULT_RATIO
    checks: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def effective_capacitive(raw: CapacitiveCircuit) -> EffectiveCircuit:
    xi = raw.C_c / (raw.C_c + raw.CJ_tilde)
    return EffectiveCircuit(
        xi=xi,
        C=raw.C_tilde + xi * raw.CJ_tilde,
        C_J=raw.CJ_tilde + raw.C_c,
        L=raw.L,
        E_J=raw.E_J,
        CJ_tilde=raw.CJ_tilde,
    )


def effective_inductive(raw: InductiveCircuit) -> EffectiveCircuit:
    xi = raw.C_tilde / (raw.C_tilde + raw.CJ_tilde)
    return EffectiveCircuit(
        xi=xi,
        C=xi * raw.CJ_tilde,
        C_J=raw.CJ_tilde + raw.C_tilde,
        L=raw.L,
        E_J=raw.E_J,
        CJ_tilde=raw.CJ_tilde,
    )


def derive_params(eff: EffectiveCircuit) -> DerivedParams:
    """Cavity frequency, plasma frequency, modulation depth, charging energy, flux ZPF."""
    omega0 = 1.0 / math.sqrt(eff.L * eff.C)
    omega_p = math.sqrt(eff.E_J / (PHI0**2 * eff.CJ_tilde))
    g = eff.xi**2 * omega_p**2 * eff.CJ_tilde / (2.0 * omega0 * eff.C)
    E_c = 1.0 / (PHI0**2 * eff.C_J)
    Phi_r = math.sqrt(HBAR / (2.0 * omega0 * eff.C))
    return DerivedParams(omega0=omega0, omega_p=omega_p, g=g, E_c=E_c, Phi_r=Phi_r)


def validate_regime(p: DerivedParams, E_J: float, expected_occupation: float,
                    threshold: float = DEFAULT_RATIO) -> RegimeReport:
    """Check the Born-Oppenheimer / weak-modulation assumptions.

    A quantity is taken to be "much smaller" than another when their ratio does
    not exceed ``threshold``. The report never raises; inspect ``checks``.
    """
    g_ratio = p.g / p.omega0
    p_ratio = p.omega_p / p.omega0
    vac_ratio = HBAR * p.g / 2.0 / E_J
    occ_ratio = expected_occupation * HBAR * p.g / E_J
    checks = {
        "g_much_less_than_omega0": g_ratio <= threshold,
        "omega_p_much_less_than_omega0": p_ratio <= threshold,
        "vacuum_correction_negligible": vac_ratio <= threshold,
        "below_critical_occupation": occ_ratio <= threshold,
    }
    return RegimeReport(g_ratio, p_ratio, vac_ratio, occ_ratio, threshold, checks)


def to_engine_units(p: DerivedParams, E_J: float, kappa_C: float) -> dict:
    """Express circuit-derived scales in units of kappa_C (hbar = 1).

    ``kappa_C`` is the cold-bath linewidth in rad/s. Returns ``g``, ``E_c`` and
    ``E_J`` such that ``E_c * E_J`` and ``E_c * g`` are in units of kappa_C**2.
    """
    _require_positive(kappa_C=kappa_C, E_J=E_J)
    return {
        "g": p.g / kappa_C,
        "E_c": p.hbar_E_c / kappa_C,
        "E_J": E_J / (HBAR * kappa_C),
    }
