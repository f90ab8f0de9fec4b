"""Closed-form engine diagnostics and ensemble post-processing.

Rotor momenta are handled in the rescaled form L = E_c*Q (units of kappa_C),
so the additive variance term below is the L-variance growth; divide by
E_c**2 for charge units.

pV convention: V = -cos(phi) (smallest volume at phi = 0) and p = hbar*g*n_a.
With dV = sin(phi) dphi the loop integral of p dV is the work done on the
rotor by the radiation-pressure-like force hbar*g*n_a*sin(phi) over one turn.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, special

from .model import (EngineParams, bath_at_angle, detuning, occupation_slope,
                    occupations_at_detuning)

CHI_NODES = 2**14
QUAD_RTOL = 1e-8
L2_THRESHOLD = 0.1
MIN_ROTATING_FRACTION = 0.6


# -- quasi-static, delayed-reaction picture ----------------------------------

@dataclass(frozen=True)
class QuasiStaticConstants:
    tau: float
    C1: float
    C2: float
    C3: float
    W_cyc_per_Q: float


def quasi_static_constants(p: EngineParams, tau: float) -> QuasiStaticConstants:
    if tau < 0:
        raise ValueError("tau must be non-negative")
    n0, _ = occupations_at_detuning(p.Delta0, p)
    C1 = p.hbar_g * n0 - p.E_J
    C2 = p.hbar_g * p.g * occupation_slope(p.Delta0, p)
    C3 = tau * p.E_c * C2
    return QuasiStaticConstants(tau, float(C1), float(C2), float(C3), math.pi * tau * p.E_c * C2)


def predicted_loop_area(p: EngineParams, tau_times_omega: float) -> float:
    """First-order work per turn pi*tau*(E_c Q)*C2 at rotation rate E_c Q."""
    return math.pi * tau_times_omega * quasi_static_constants(p, 0.0).C2


@dataclass
class CycleRecord:
    start_time: float
    end_time: float
    loop_area: float
    p_samples: np.ndarray
    V_samples: np.ndarray
    phi_samples: np.ndarray | None = None
    stars: dict = field(default_factory=dict)


def loop_work(p_samples, V_samples) -> float:
    """Closed-loop integral of p dV (negative shoelace area in the V-p plane)."""
    p = np.asarray(p_samples, dtype=float)
    V = np.asarray(V_samples, dtype=float)
    p1, V1 = np.roll(p, -1), np.roll(V, -1)
    return float(0.5 * np.sum((p + p1) * (V1 - V)))


def pv_curve(p: EngineParams, tau_times_omega: float, n_points: int = 720) -> CycleRecord:
    """pV loop for uniform rotation with the chamber lagging by a fixed delay.

    The occupation at angle phi is the two-mode steady state evaluated at the
    delayed angle phi - tau*dphi/dt. Times are in units of the rotation
    period's 1/(dphi/dt), so one loop spans [0, 2*pi].
    """
    if n_points < 8:
        raise ValueError("n_points must be >= 8")
    phi = 2.0 * np.pi * np.arange(n_points) / n_points
    n_a, _ = occupations_at_detuning(detuning(phi - tau_times_omega, p), p)
    pressure = p.hbar_g * n_a
    volume = -np.cos(phi)
    i_max, i_min = int(np.argmax(pressure)), int(np.argmin(pressure))
    stars = {
        "max": {"phi": float(phi[i_max]), "V": float(volume[i_max]), "p": float(pressure[i_max])},
        "min": {"phi": float(phi[i_min]), "V": float(volume[i_min]), "p": float(pressure[i_min])},
    }
    return CycleRecord(0.0, 2.0 * np.pi, loop_work(pressure, volume), pressure, volume, phi, stars)


def extract_cycles(record, p: EngineParams) -> list[CycleRecord]:
    """Cut a simulated trajectory into turns between successive upward crossings of 0 mod 2pi."""
    turns = np.floor(record.phi / (2.0 * np.pi))
    ups = np.flatnonzero(np.diff(turns) == 1) + 1
    cycles = []
    for i0, i1 in zip(ups[:-1], ups[1:]):
        if np.any(np.diff(turns[i0:i1 + 1]) < 0):
            continue
        sl = slice(i0, i1 + 1)
        pressure = p.hbar_g * record.n_a[sl]
        volume = -np.cos(record.phi[sl])
        cycles.append(CycleRecord(float(record.times[i0]), float(record.times[i1]),
                                  loop_work(pressure, volume), pressure, volume, record.phi[sl]))
    return cycles


# -- angle-resolved gain -----------------------------------------------------

def chi(phi, p: EngineParams):
    """Momentum gain rate at angle phi from the first-order delayed chamber response."""
    D = detuning(phi, p)
    kappa = bath_at_angle(phi, p).kappa
    x = 4.0 * D**2 / p.kappa_H**2
    return (-(p.hbar_g * p.E_c / kappa) * (p.n_H - p.n_C) * 8.0 * p.alpha * np.sin(phi) ** 2
            * (p.g * D / p.kappa_H**2) / (1.0 + p.alpha + x) ** 2)


def periodic_mean(func, n_nodes: int = CHI_NODES, rtol: float = QUAD_RTOL) -> float:
    """(1/2pi) * integral over one period, composite trapezoid on ``n_nodes`` nodes.

    The result is checked against the half-resolution rule; a disagreement
    larger than ``rtol`` (relative to the integrand scale) raises a warning.
    """
    phi = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    vals = np.asarray(func(phi), dtype=float)
    fine = float(np.mean(vals))
    coarse = float(np.mean(vals[::2]))
    scale = max(abs(fine), float(np.mean(np.abs(vals))))
    if abs(fine - coarse) > rtol * scale:
        warnings.warn(f"periodic quadrature not converged: |I_N - I_N/2| = {abs(fine - coarse):.3g}",
                      RuntimeWarning, stacklevel=2)
    return fine


def chi_mean(p: EngineParams, n_nodes: int = CHI_NODES) -> float:
    return periodic_mean(lambda phi: chi(phi, p), n_nodes)


def variance_offset(p: EngineParams, n_nodes: int = CHI_NODES) -> float:
    """Additive L-variance growth (E_c hbar g)^2/pi * int n_bar^2 sin^2 / kappa dphi."""
    def integrand(phi):
        bath = bath_at_angle(phi, p)
        return bath.n_bar**2 * np.sin(phi) ** 2 / bath.kappa

    return 2.0 * (p.E_c * p.hbar_g) ** 2 * periodic_mean(integrand, n_nodes)


def variance_rate(p: EngineParams, var_L, chi_value: float | None = None):
    """Free-rotation growth rate of the L-variance at current variance ``var_L``."""
    if np.any(np.asarray(var_L) < 0):
        raise ValueError("var_L must be non-negative")
    c = chi_mean(p) if chi_value is None else chi_value
    return 2.0 * c * np.asarray(var_L) + variance_offset(p)


def optimal_detuning(p: EngineParams) -> float:
    """Bare detuning maximising -Delta / (1 + alpha + 4 Delta^2/kappa_H^2)^2."""
    return -math.sqrt((1.0 + p.alpha) / 12.0) * p.kappa_H


def pendulum_swing_time(p: EngineParams, phi0: float) -> float:
    """Time for the bare pendulum released at rest from phi0 to reach its opposite turning point."""
    omega = math.sqrt(p.EcEJ)
    m = math.sin(abs(phi0) / 2.0) ** 2
    return 2.0 * float(special.ellipk(m)) / omega


# -- ensembles ----------------------------------------------------------------

@dataclass
class EnsembleStats:
    times: np.ndarray
    mean_L: np.ndarray
    var_L: np.ndarray
    mean_L2: np.ndarray
    snr: np.ndarray
    snr_defined: np.ndarray
    rate_mean: np.ndarray
    rate_var: np.ndarray
    norm_rate_mean: np.ndarray
    norm_rate_var: np.ndarray
    rotating_fraction: np.ndarray
    chi: float
    var_offset: float
    smoothing_window: float
    n_traj: int

    COLUMNS = ("t", "mean_L", "var_L", "mean_L2", "snr", "snr_defined", "rate_mean", "rate_var",
               "norm_rate_mean", "norm_rate_var", "rotating_fraction")

    def column(self, name: str) -> np.ndarray:
        return self.times if name == "t" else getattr(self, name)


def _window_samples(times: np.ndarray, window: float) -> int:
    if len(times) < 2:
        raise ValueError("record too short for a smoothing window")
    dt = times[1] - times[0]
    if window > times[-1] - times[0]:
        raise ValueError(f"smoothing window {window} exceeds record length {times[-1] - times[0]}")
    return max(1, int(round(window / dt)))


def _centered_rate(times: np.ndarray, y: np.ndarray, half: int) -> np.ndarray:
    idx = np.arange(len(times))
    hi = np.minimum(idx + half, len(times) - 1)
    lo = np.maximum(idx - half, 0)
    return (y[hi] - y[lo]) / (times[hi] - times[lo])


def rotating_fraction(phi: np.ndarray, w: int) -> np.ndarray:
    """Fraction of trajectories whose angle moved strictly monotonically over the last ``w`` samples."""
    d = np.diff(phi, axis=1)
    n_traj, n = phi.shape
    out = np.zeros(n)
    if n <= w:
        return out
    pos = np.concatenate([np.zeros((n_traj, 1)), np.cumsum(d > 0, axis=1)], axis=1)
    neg = np.concatenate([np.zeros((n_traj, 1)), np.cumsum(d < 0, axis=1)], axis=1)
    run_pos = pos[:, w:] - pos[:, :-w]
    run_neg = neg[:, w:] - neg[:, :-w]
    out[w:] = np.mean((run_pos == w) | (run_neg == w), axis=0)
    return out


def _ordered_mean(x: np.ndarray) -> np.ndarray:
    # sorting first makes the reduction independent of trajectory order
    return np.mean(np.sort(x, axis=0), axis=0)


def ensemble_stats(e, smoothing_window: float = 200.0, p: EngineParams | None = None) -> EnsembleStats:
    """Cross-trajectory statistics of L and their growth rates against the analytic predictions."""
    if e.count < 2:
        raise ValueError("ensemble statistics need at least two trajectories")
    if p is None:
        p = EngineParams(**{k: v for k, v in e.metadata["params"].items() if k != "J"})
    times = e.times
    w = _window_samples(times, smoothing_window)
    L = e.stack("L")
    mean_L = _ordered_mean(L)
    mean_L2 = _ordered_mean(L**2)
    var_L = _ordered_mean((L - mean_L) ** 2)
    snr_defined = var_L > 0
    snr = np.divide(mean_L, np.sqrt(var_L), out=np.full_like(mean_L, np.nan), where=snr_defined)

    c = chi_mean(p)
    offset = variance_offset(p)
    rate_mean = _centered_rate(times, mean_L, w // 2 or 1)
    rate_var = _centered_rate(times, var_L, w // 2 or 1)
    gain_ref = c * mean_L
    var_ref = 2.0 * c * var_L + offset
    norm_mean = np.divide(rate_mean, gain_ref, out=np.full_like(mean_L, np.nan), where=gain_ref != 0)
    norm_var = np.divide(rate_var, var_ref, out=np.full_like(mean_L, np.nan), where=var_ref != 0)
    return EnsembleStats(times, mean_L, var_L, mean_L2, snr, snr_defined, rate_mean, rate_var,
                         norm_mean, norm_var, rotating_fraction(e.stack("phi"), w), c, offset,
                         smoothing_window, e.count)


@dataclass(frozen=True)
class ValidityWindow:
    start: float | None
    end: float | None
    crossing_time: float | None

    @property
    def empty(self) -> bool:
        return self.start is None or self.end is None or self.end <= self.start


def validity_window(stats: EnsembleStats, threshold: float = L2_THRESHOLD,
                    min_rotating_fraction: float = MIN_ROTATING_FRACTION) -> ValidityWindow:
    """Free-rotation range in which the first-order gain analysis applies.

    The window ends at the last sample before <L^2> exceeds ``threshold``
    (samples equal to the threshold are inside). It starts once at least
    ``min_rotating_fraction`` of the trajectories have wound monotonically over
    the trailing smoothing window, and stay so up to the end.
    """
    t = stats.times
    over = np.flatnonzero(stats.mean_L2 > threshold)
    if over.size:
        i_end = over[0] - 1
        j = over[0]
        if j == 0:
            crossing = float(t[0])
        else:
            y0, y1 = stats.mean_L2[j - 1], stats.mean_L2[j]
            crossing = float(t[j - 1] + (threshold - y0) / (y1 - y0) * (t[j] - t[j - 1]))
    else:
        i_end = len(t) - 1
        crossing = None
    if i_end < 0:
        return ValidityWindow(None, None, crossing)
    rotating = stats.rotating_fraction[: i_end + 1] >= min_rotating_fraction
    if not rotating[-1]:
        return ValidityWindow(None, None, crossing)
    not_rot = np.flatnonzero(~rotating)
    i_start = not_rot[-1] + 1 if not_rot.size else 0
    return ValidityWindow(float(t[i_start]), float(t[i_end]), crossing)


def window_agreement(stats: EnsembleStats, window: ValidityWindow) -> dict:
    """Window-integrated gain and variance growth relative to the analytic rates.

    ``gain_ratio`` = [<L>(t1) - <L>(t0)] / int chi <L> dt and ``var_ratio``
    likewise for the variance; both are 1 when the analytic rates hold on
    average over the window. ``snr_variation`` is (max - min)/max of the SNR
    after a moving average over the smoothing window.
    """
    if window.empty:
        raise ValueError("empty validity window")
    t = stats.times
    i0 = int(np.searchsorted(t, window.start))
    i1 = int(np.searchsorted(t, window.end))
    sl = slice(i0, i1 + 1)
    gain_int = stats.chi * np.trapezoid(stats.mean_L[sl], t[sl])
    var_int = np.trapezoid(2.0 * stats.chi * stats.var_L[sl] + stats.var_offset, t[sl])
    w = _window_samples(t, stats.smoothing_window)
    snr = np.where(stats.snr_defined, stats.snr, 0.0)
    smooth = ndimage.uniform_filter1d(snr, w, mode="nearest")[sl]
    in_window = stats.snr_defined[sl]
    s = smooth[in_window]
    snr_variation = float((s.max() - s.min()) / abs(s).max()) if s.size else math.nan
    return {
        "gain_ratio": float((stats.mean_L[i1] - stats.mean_L[i0]) / gain_int),
        "var_ratio": float((stats.var_L[i1] - stats.var_L[i0]) / var_int),
        "snr_variation": snr_variation,
        "median_norm_rate_mean": float(np.nanmedian(stats.norm_rate_mean[sl])),
        "median_norm_rate_var": float(np.nanmedian(stats.norm_rate_var[sl])),
    }
