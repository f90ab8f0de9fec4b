"""Trajectory simulation of the full three-mode and the reduced chamber+rotor models.

The rotor is integrated in the rescaled variables (phi, L = E_c*Q), so only
the products E_c*E_J and E_c*hbar*g enter. The full model runs in the frame
rotating at the filter frequency, which leaves only the detuning Delta(phi).

Cavity variables take an exponential Euler-Maruyama step: the linear drift of
(a, b) is propagated exactly over dt at the current detuning and the Ito noise
increment is added. Plain Euler-Maruyama inflates |a|^2 by a factor
1 + Delta^2 dt^2 per step, which competes with the weak kappa_C damping.

The rotor carries no noise of its own and uses the semi-implicit ordering
L -> phi, i.e. the angle is advanced with the updated L. This keeps the
conservative pendulum energy bounded.
"""

from __future__ import annotations

import cmath
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .model import EngineParams, bath_at_angle, occupations_at_detuning, detuning
from .sde import IntegrationError, RandomStream

CHUNK_STEPS = 1 << 15
MODELS = ("full", "reduced")


@dataclass(frozen=True)
class FullState:
    a: complex
    b: complex
    phi: float
    L: float


@dataclass(frozen=True)
class ReducedState:
    n_a: float
    phi: float
    L: float


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    n_a: np.ndarray
    phi: np.ndarray
    L: np.ndarray
    n_b: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def stream_id(self) -> int:
        return self.metadata["stream_id"]

    @property
    def clamp_fraction(self) -> float:
        steps = self.metadata.get("n_steps", 0)
        return self.metadata.get("clamp_count", 0) / steps if steps else 0.0


@dataclass
class EnsembleRecord:
    trajectories: list
    failures: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.trajectories)

    @property
    def times(self) -> np.ndarray:
        return self.trajectories[0].times

    @property
    def metadata(self) -> dict:
        meta = dict(self.trajectories[0].metadata)
        meta.pop("stream_id", None)
        meta.pop("clamp_count", None)
        return meta

    def stack(self, name: str) -> np.ndarray:
        """Observable ``name`` as an array of shape (n_traj, n_samples)."""
        return np.stack([getattr(tr, name) for tr in self.trajectories])


# -- numerical cores ---------------------------------------------------------
# Scalar step functions are shared by the per-step API and the chunk loops so
# both paths produce identical bits.

@numba.njit(cache=True, nogil=True)
def _mode_propagator(D, kC, kH, J, dt):
    """Entries of exp(M dt) for the linear (a, b) drift matrix M at fixed detuning.

    With eigenvalues m +- s of M, the diagonal entries are written as
    e^{(m+s)dt} (s+d)/2s + e^{(m-s)dt} (s-d)/2s with s - d = q^2/(s + d),
    which stays accurate when the two rates are far apart.
    """
    p = -(1j * D + 0.5 * kC)
    q = -1j * J
    r = complex(-0.5 * kH, 0.0)
    m = 0.5 * (p + r)
    d = 0.5 * (p - r)
    s = cmath.sqrt(d * d + q * q)
    if (s * d.conjugate()).real < 0.0:
        s = -s
    lp, lm = m + s, m - s
    # the smaller eigenvalue from the determinant avoids cancellation
    if abs(lp) < abs(lm):
        lp = (p * r - q * q) / lm
    elif lp != 0:
        lm = (p * r - q * q) / lp
    ep = cmath.exp(lp * dt)
    em = cmath.exp(lm * dt)
    if abs(s * dt) <= 1e-6:
        c = 0.5 * (ep + em)
        sh = cmath.exp(m * dt) * dt * (1.0 + (s * dt) ** 2 / 6.0)
        return c + sh * d, sh * q, c - sh * d
    sp = s + d
    sm = q * q / sp
    inv = 0.5 / s
    return (ep * sp + em * sm) * inv, (ep - em) * q * inv, (ep * sm + em * sp) * inv


@numba.njit(cache=True, nogil=True)
def _full_core(a, b, phi, L, z0, z1, z2, z3, par):
    dt, kC, kH, J, D0, g, EcEJ, Ecg, sa, sb = (par[0], par[1], par[2], par[3], par[4],
                                               par[5], par[6], par[7], par[8], par[9])
    D = D0 + g * math.cos(phi)
    na = a.real * a.real + a.imag * a.imag
    e_aa, e_ab, e_bb = _mode_propagator(D, kC, kH, J, dt)
    a_new = e_aa * a + e_ab * b + sa * complex(z0, z1)
    b_new = e_ab * a + e_bb * b + sb * complex(z2, z3)
    L_new = L - (EcEJ - Ecg * na) * math.sin(phi) * dt
    phi_new = phi + L_new * dt
    return a_new, b_new, phi_new, L_new


@numba.njit(cache=True, nogil=True)
def _reduced_core(n, phi, L, z, par):
    dt, kC, kH, alpha, D0, g, nC, nH, EcEJ, Ecg = (par[0], par[1], par[2], par[3], par[4],
                                                   par[5], par[6], par[7], par[8], par[9])
    D = D0 + g * math.cos(phi)
    f = alpha / (1.0 + 4.0 * D * D / (kH * kH))
    nbar = (nC + f * nH) / (1.0 + f)
    k = kC * (1.0 + f)
    n_pos = n if n > 0.0 else 0.0
    n_new = n - k * (n - nbar) * dt + math.sqrt(2.0 * k * nbar * n_pos * dt) * z
    L_new = L - (EcEJ - Ecg * n) * math.sin(phi) * dt
    phi_new = phi + L_new * dt
    clamped = n_new < 0.0
    if clamped:
        n_new = 0.0
    return n_new, phi_new, L_new, clamped


@numba.njit(cache=True, nogil=True)
def _full_chunk(st, z, step0, n_total, stride, par, out_na, out_nb, out_phi, out_L, k):
    a = complex(st[0], st[1])
    b = complex(st[2], st[3])
    phi = st[4]
    L = st[5]
    bad = -1
    for i in range(z.shape[0]):
        a, b, phi, L = _full_core(a, b, phi, L, z[i, 0], z[i, 1], z[i, 2], z[i, 3], par)
        s = step0 + i + 1
        if not (np.isfinite(a.real) and np.isfinite(a.imag) and np.isfinite(b.real)
                and np.isfinite(b.imag) and np.isfinite(phi) and np.isfinite(L)):
            bad = s
            break
        if s % stride == 0 or s == n_total:
            out_na[k] = a.real * a.real + a.imag * a.imag
            out_nb[k] = b.real * b.real + b.imag * b.imag
            out_phi[k] = phi
            out_L[k] = L
            k += 1
    st[0] = a.real
    st[1] = a.imag
    st[2] = b.real
    st[3] = b.imag
    st[4] = phi
    st[5] = L
    return k, bad


@numba.njit(cache=True, nogil=True)
def _reduced_chunk(st, z, step0, n_total, stride, par, out_na, out_phi, out_L, k):
    n = st[0]
    phi = st[1]
    L = st[2]
    bad = -1
    clamps = 0
    for i in range(z.shape[0]):
        n, phi, L, clamped = _reduced_core(n, phi, L, z[i], par)
        if clamped:
            clamps += 1
        s = step0 + i + 1
        if not (np.isfinite(n) and np.isfinite(phi) and np.isfinite(L)):
            bad = s
            break
        if s % stride == 0 or s == n_total:
            out_na[k] = n
            out_phi[k] = phi
            out_L[k] = L
            k += 1
    st[0] = n
    st[1] = phi
    st[2] = L
    return k, bad, clamps


def _full_par(p: EngineParams, dt: float) -> np.ndarray:
    return np.array([dt, p.kappa_C, p.kappa_H, p.J, p.Delta0, p.g, p.EcEJ, p.Ec_hbar_g,
                     math.sqrt(p.kappa_C * p.n_C * dt / 2.0),
                     math.sqrt(p.kappa_H * p.n_H * dt / 2.0)])


def _reduced_par(p: EngineParams, dt: float) -> np.ndarray:
    return np.array([dt, p.kappa_C, p.kappa_H, p.alpha, p.Delta0, p.g, p.n_C, p.n_H,
                     p.EcEJ, p.Ec_hbar_g])


# -- single steps ------------------------------------------------------------

def _check_dt(dt: float, p: EngineParams, model: str) -> None:
    if not dt > 0:
        raise ValueError("dt must be positive")
    fast = p.kappa_H if model == "full" else p.kappa_C * (1.0 + p.alpha)
    if dt * fast > 0.1:
        warnings.warn(f"dt={dt} is coarse for the {model} model (dt*rate={dt * fast:.3g} > 0.1)",
                      RuntimeWarning, stacklevel=3)


def step_full(s: FullState, p: EngineParams, dt: float, rng: RandomStream) -> FullState:
    z = rng.normals(4)
    a, b, phi, L = _full_core(complex(s.a), complex(s.b), float(s.phi), float(s.L),
                              z[0], z[1], z[2], z[3], _full_par(p, dt))
    out = FullState(a, b, phi, L)
    if not all(map(math.isfinite, (a.real, a.imag, b.real, b.imag, phi, L))):
        raise IntegrationError("non-finite full-model state")
    return out


def step_reduced(s: ReducedState, p: EngineParams, dt: float, rng: RandomStream) -> ReducedState:
    n, phi, L, _ = _reduced_core(float(s.n_a), float(s.phi), float(s.L), rng.normal(),
                                 _reduced_par(p, dt))
    if not all(map(math.isfinite, (n, phi, L))):
        raise IntegrationError("non-finite reduced-model state")
    return ReducedState(n, phi, L)


def equilibrium_state(model: str, p: EngineParams, phi: float = 0.0, L: float = 0.0):
    """State with the cavity occupations at their local steady state for angle ``phi``.

    Reduced model: n_a = n_bar(phi). Full model: real amplitudes with the
    two-mode steady-state occupations.
    """
    if model == "reduced":
        return ReducedState(float(bath_at_angle(phi, p).n_bar), phi, L)
    if model == "full":
        na, nb = occupations_at_detuning(detuning(phi, p), p)
        return FullState(complex(math.sqrt(na)), complex(math.sqrt(nb)), phi, L)
    raise ValueError(f"unknown model {model!r}")


# -- trajectories ------------------------------------------------------------

def default_stride(dt: float) -> int:
    """Steps per sample for one sample every 1/kappa_C."""
    return max(1, int(round(1.0 / dt)))


def run_trajectory(model: str, init, p: EngineParams, dt: float, t_end: float,
                   sample_stride: int | None, rng: RandomStream) -> TrajectoryRecord:
    """Integrate one trajectory, sampling every ``sample_stride`` steps plus t=0 and the last step."""
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    _check_dt(dt, p, model)
    stride = sample_stride or default_stride(dt)
    n_total = int(round(t_end / dt))
    n_samples = 1 + n_total // stride + (1 if n_total % stride else 0)
    sample_steps = np.concatenate([np.arange(0, n_total + 1, stride),
                                   [n_total] if n_total % stride else []]).astype(np.int64)
    out_na = np.empty(n_samples)
    out_phi = np.empty(n_samples)
    out_L = np.empty(n_samples)
    out_nb = np.empty(n_samples) if model == "full" else None
    clamps = 0

    if model == "full":
        s = init if isinstance(init, FullState) else FullState(*init)
        st = np.array([s.a.real, s.a.imag, s.b.real, s.b.imag, s.phi, s.L], dtype=float)
        out_na[0] = st[0] * st[0] + st[1] * st[1]
        out_nb[0] = st[2] * st[2] + st[3] * st[3]
        out_phi[0], out_L[0] = st[4], st[5]
        par = _full_par(p, dt)
    else:
        s = init if isinstance(init, ReducedState) else ReducedState(*init)
        if s.n_a < 0:
            raise ValueError("initial n_a must be non-negative")
        st = np.array([s.n_a, s.phi, s.L], dtype=float)
        out_na[0], out_phi[0], out_L[0] = st
        par = _reduced_par(p, dt)

    k = 1
    step = 0
    while step < n_total:
        m = min(CHUNK_STEPS, n_total - step)
        if model == "full":
            z = rng.normals((m, 4))
            k, bad = _full_chunk(st, z, step, n_total, stride, par, out_na, out_nb, out_phi, out_L, k)
        else:
            z = rng.normals(m)
            k, bad, c = _reduced_chunk(st, z, step, n_total, stride, par, out_na, out_phi, out_L, k)
            clamps += c
        if bad >= 0:
            raise IntegrationError(f"non-finite {model}-model state at step {bad} (t={bad * dt:g})",
                                   step=int(bad), time=bad * dt)
        step += m

    metadata = {
        "model": model, "params": p.to_dict(), "seed": rng.seed, "stream_id": rng.stream_id,
        "dt": dt, "t_end": n_total * dt, "n_steps": n_total, "sample_stride": stride,
        "clamp_count": clamps,
    }
    return TrajectoryRecord(sample_steps * dt, out_na, out_phi, out_L, out_nb, metadata)


def run_ensemble(model: str, init, p: EngineParams, dt: float, t_end: float, n_traj: int,
                 seed: int, sample_stride: int | None = None, workers: int = 1,
                 progress=None) -> EnsembleRecord:
    """Run ``n_traj`` independent trajectories with stream ids ``0..n_traj-1``.

    Output is ordered by stream id and does not depend on ``workers``. Failed
    trajectories are listed in ``failures``; if every trajectory fails the
    first error is re-raised.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")

    def one(i: int):
        try:
            return run_trajectory(model, init, p, dt, t_end, sample_stride, RandomStream(seed, i))
        except IntegrationError as exc:
            return exc
        finally:
            if progress is not None:
                progress(i)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(n_traj)))
    else:
        results = [one(i) for i in range(n_traj)]

    trajectories, failures = [], []
    for i, res in enumerate(results):
        if isinstance(res, IntegrationError):
            failures.append({"stream_id": i, "step": res.step, "time": res.time, "message": str(res)})
        else:
            trajectories.append(res)
    if not trajectories:
        raise next(r for r in results if isinstance(r, IntegrationError))
    return EnsembleRecord(trajectories, failures)
