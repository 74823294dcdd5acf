"""Moreau-Yosida envelope of a target: prox, envelope value and gradient.

Only used for verification and for estimating the Lipschitz constant ``K`` of
the envelope gradient; the samplers never call the prox.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .targets import TargetPotential


class ProxConvergenceError(RuntimeError):
    pass


class SelfConsistencyError(RuntimeError):
    pass


@dataclass(frozen=True)
class MoreauConfig:
    epsilon: float
    inner_tol: float = 1e-10
    inner_max_iters: int = 10_000

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.inner_tol > 0:
            raise ValueError(f"inner_tol must be positive, got {self.inner_tol}")
        if self.inner_max_iters < 1:
            raise ValueError("inner_max_iters must be positive")

    @property
    def K(self) -> float:
        """Worst-case Lipschitz constant of the envelope gradient."""
        return 1.0 / self.epsilon


def _cfg(epsilon, config):
    if config is None:
        return MoreauConfig(epsilon)
    if config.epsilon != epsilon:
        raise ValueError("epsilon disagrees with config.epsilon")
    return config


def prox(target: TargetPotential, epsilon: float, x, config: MoreauConfig | None = None) -> np.ndarray:
    """``argmin_y u(y) + |x - y|^2 / (2 epsilon)``, batched over leading axes of ``x``.

    Gradient descent on the inner objective starting at ``y = x``.  Each
    iteration backtracks from step ``epsilon`` until the local gradient
    Lipschitz estimate times the step is at most one, which makes every step a
    contraction of the strongly convex inner problem without needing a global
    Hessian bound.  Stops once every inner gradient norm is ``<= inner_tol``.
    """
    cfg = _cfg(epsilon, config)
    x = np.asarray(x, dtype=float)
    shape = x.shape
    xs = x.reshape(-1, target.dim)
    inv_eps = 1.0 / epsilon

    def inner_grad(y, centre):
        return target.grad(y) + (y - centre) * inv_eps

    y = xs.copy()
    step = np.full(xs.shape[0], epsilon)
    active = np.ones(xs.shape[0], dtype=bool)
    for _ in range(cfg.inner_max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        yi, xi = y[idx], xs[idx]
        g = inner_grad(yi, xi)
        gn = np.linalg.norm(g, axis=-1)
        done = gn <= cfg.inner_tol
        active[idx[done]] = False
        if done.all():
            break
        idx, yi, xi, g, gn = idx[~done], yi[~done], xi[~done], g[~done], gn[~done]
        t = np.minimum(step[idx] * 2.0, epsilon)
        while True:
            trial = yi - t[:, None] * g
            dg = np.linalg.norm(inner_grad(trial, xi) - g, axis=-1)
            bad = dg > gn
            if not bad.any():
                break
            t = np.where(bad, 0.5 * t, t)
            if np.any(t < 1e-300):
                raise ProxConvergenceError("backtracking collapsed; is the target convex?")
        y[idx] = trial
        step[idx] = t
    else:
        idx = np.flatnonzero(active)
        if idx.size:
            gn = np.linalg.norm(inner_grad(y[idx], xs[idx]), axis=-1)
            if np.any(gn > cfg.inner_tol):
                raise ProxConvergenceError(
                    f"prox did not reach tol {cfg.inner_tol} in {cfg.inner_max_iters} iterations "
                    f"(worst residual {gn.max():.3e})"
                )
    return y.reshape(shape)


def my_grad(
    target: TargetPotential, epsilon: float, x, config: MoreauConfig | None = None
) -> np.ndarray:
    """Envelope gradient ``(x - prox(x)) / epsilon``, cross-checked against ``h(prox(x))``."""
    cfg = _cfg(epsilon, config)
    x = np.asarray(x, dtype=float)
    p = prox(target, epsilon, x, cfg)
    g = (x - p) / epsilon
    gap = np.max(np.abs(g - target.grad(p)), initial=0.0)
    if gap > 10 * cfg.inner_tol / epsilon:
        raise SelfConsistencyError(f"prox gradient identities disagree by {gap:.3e}")
    return g


def my_value(target: TargetPotential, epsilon: float, x, config: MoreauConfig | None = None):
    """Envelope value ``u(prox) + |x - prox|^2 / (2 epsilon)``."""
    x = np.asarray(x, dtype=float)
    p = prox(target, epsilon, x, config)
    d = x - p
    return target.u(p) + np.sum(d * d, axis=-1) / (2 * epsilon)


def gradient_gap_bound(target: TargetPotential, epsilon: float, x) -> np.ndarray:
    """``2^{2l+2} L (1 + |x| + sqrt(R))^{2l+2} epsilon`` with ``R = sqrt(2 u(0)/m)``."""
    x = np.asarray(x, dtype=float)
    R = target.minimizer_radius
    e = 2 * target.l + 2
    return 2**e * target.L * (1 + np.linalg.norm(x, axis=-1) + math.sqrt(R)) ** e * epsilon


def my_gradient_gap(target: TargetPotential, epsilon: float, x, config: MoreauConfig | None = None):
    """Return ``(|h(x) - my_grad(x)|, bound)``."""
    x = np.asarray(x, dtype=float)
    gap = np.linalg.norm(target.grad(x) - my_grad(target, epsilon, x, config), axis=-1)
    return gap, gradient_gap_bound(target, epsilon, x)
