"""Monotone polygonal (tamed) gradient.

With ``f(x) = h(x) - (m/2) x`` the tamed drift is ``f_tam(x) + (m/2) x`` where
``f_tam = f`` on ``|f| <= sqrt(gamma)`` and ``2 f / (1 + |f|/sqrt(gamma))``
outside.  The two branches agree on ``|f| = sqrt(gamma)`` so the map is
continuous; no smoothing is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .targets import TargetPotential


def tamed_part(f: np.ndarray, gamma: float) -> np.ndarray:
    """Apply the taming map to ``f`` along the last axis."""
    sg = math.sqrt(gamma)
    nf = np.sqrt(np.sum(f * f, axis=-1, keepdims=True))
    scale = np.where(nf <= sg, 1.0, 2.0 / (1.0 + nf / sg))
    return f * scale


def tame(target: TargetPotential, gamma: float, x) -> np.ndarray:
    """``h_tam,gamma(x)``; exact ``h(x)`` wherever ``|f(x)| <= sqrt(gamma)``."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    x = np.asarray(x, dtype=float)
    h = target.grad(x)
    half_m = 0.5 * target.m
    f = h - half_m * x
    sg = math.sqrt(gamma)
    nf = np.sqrt(np.sum(f * f, axis=-1, keepdims=True))
    inside = nf <= sg
    # inside the exactness region return h itself, not f + (m/2)x
    tamed = 2.0 * f / (1.0 + nf / sg) + half_m * x
    return np.where(inside, h, tamed)


@dataclass(frozen=True)
class TamedGradient:
    base: TargetPotential
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def __call__(self, x) -> np.ndarray:
        return tame(self.base, self.gamma, x)

    def f(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.base.grad(x) - 0.5 * self.base.m * x

    def f_tam(self, x) -> np.ndarray:
        return tamed_part(self.f(x), self.gamma)


def taming_error_estimate(target: TargetPotential, gamma: float, samples) -> float:
    """Monte Carlo mean of ``|h_tam(X) - h(X)|^2`` over ``samples`` (shape ``(n, d)``)."""
    x = np.asarray(samples, dtype=float).reshape(-1, target.dim)
    if x.shape[0] == 0:
        raise ValueError("taming error needs at least one sample")
    diff = tame(target, gamma, x) - target.grad(x)
    return float(np.mean(np.sum(diff * diff, axis=-1)))


def taming_error_bound(target: TargetPotential, gamma: float, p: float, samples) -> float:
    """Right-hand side ``c gamma^{-p}`` with ``c`` built from the empirical
    ``(4p+4)(l+1)`` moment of ``samples``."""
    x = np.asarray(samples, dtype=float).reshape(-1, target.dim)
    if x.shape[0] == 0:
        raise ValueError("taming error bound needs at least one sample")
    order = (4 * p + 4) * (target.l + 1)
    moment = float(np.mean(np.linalg.norm(x, axis=-1) ** order))
    h0 = float(np.linalg.norm(target.grad(np.zeros(target.dim))))
    c = 2 ** (2 * p + 2) * (target.L + 0.5 * target.m) ** (2 * p + 2) * math.sqrt(moment)
    c += 2 ** (2 * p + 2) * h0 ** (2 * p + 2)
    return c * gamma ** (-p)
