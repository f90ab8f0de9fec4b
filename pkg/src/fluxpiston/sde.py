"""Reproducible noise streams and Euler-Maruyama stepping (Ito convention).

Every trajectory owns one :class:`RandomStream`. Streams are numpy ``Philox``
(4x64, 10 rounds) generators keyed by ``(seed, stream_id)``. Philox is
counter-based, so distinct keys give independent substreams with no shared
state. Gaussian draws use numpy's ziggurat ``standard_normal``, so a stream's
output is pinned by the numpy version (recorded in run provenance).
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

GENERATOR = "numpy.random.Philox"


class IntegrationError(RuntimeError):
    """A stepping scheme produced a non-finite state."""

    def __init__(self, message: str, step: int | None = None, time: float | None = None):
        super().__init__(message)
        self.step = step
        self.time = time


class RandomStream:
    def __init__(self, seed: int, stream_id: int = 0):
        if not (0 <= seed < 2**64 and 0 <= stream_id < 2**64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def normals(self, size) -> np.ndarray:
        return self._gen.standard_normal(size)

    def normal(self) -> float:
        return float(self._gen.standard_normal())

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"


def wiener(rng: RandomStream, dt: float) -> float:
    """Wiener increment with variance ``dt``."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    return math.sqrt(dt) * rng.normal()


def complex_thermal_increment(rng: RandomStream, dt: float, occupation: float) -> complex:
    """Integrated classical thermal input with <|dxi|^2> = occupation*dt and <dxi^2> = 0."""
    if dt < 0 or occupation < 0:
        raise ValueError("dt and occupation must be non-negative")
    z = rng.normals(2)
    scale = math.sqrt(occupation * dt / 2.0)
    return complex(scale * z[0], scale * z[1])


def em_step(state, drift: Callable, diffusion: Callable, dt: float, rng: RandomStream,
            step: int = 0) -> np.ndarray:
    """One Euler-Maruyama step ``x + f(x) dt + G(x) dW``.

    ``diffusion`` may return a vector (diagonal noise, one Wiener process per
    component) or a ``(d, m)`` matrix driven by ``m`` Wiener processes.
    """
    x = np.asarray(state, dtype=float)
    G = np.asarray(diffusion(x), dtype=float)
    m = G.shape[1] if G.ndim == 2 else G.size
    dW = math.sqrt(dt) * rng.normals(m)
    noise = G @ dW if G.ndim == 2 else G * dW
    out = x + np.asarray(drift(x), dtype=float) * dt + noise
    if not np.all(np.isfinite(out)):
        raise IntegrationError("non-finite state in Euler-Maruyama step", step=step)
    return out
