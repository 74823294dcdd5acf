"""Strongly convex potentials with explicit gradients and their analytic constants.

Convention: strong convexity is stated as
``<h(x) - h(y), x - y> >= 2 m |x - y|^2``, so a potential whose Hessian is
bounded below by ``c`` carries ``m = c / 2``.  Everything downstream (taming
shift, moment bounds, restrictions) uses this ``m`` literally.

All callables act on the last axis, so ``x`` may carry leading batch
dimensions.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np
from scipy.special import gammaln

ArrayFn = Callable[[np.ndarray], np.ndarray]


def _sqnorm(x: np.ndarray) -> np.ndarray:
    return np.sum(x * x, axis=-1)


def _quartic_u(x):
    r2 = _sqnorm(np.asarray(x, dtype=float))
    return 0.25 * r2 * r2 + 2.5 * r2


def _quartic_grad(x):
    x = np.asarray(x, dtype=float)
    r2 = _sqnorm(x)[..., None]
    return (r2 + 5.0) * x


def _quadratic_u(x, a):
    return 0.5 * a * _sqnorm(np.asarray(x, dtype=float))


def _quadratic_grad(x, a):
    return a * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class TargetPotential:
    """A potential ``u >= 0`` with gradient ``h``, verified constants and dimension.

    ``L`` and ``l`` are the local Lipschitz constants in
    ``|h(x) - h(y)| <= L (1 + |x| + |y|)^l |x - y|``.
    """

    name: str
    dim: int
    u: ArrayFn
    grad: ArrayFn
    m: float
    L: float
    l: float
    u0: float
    minimizer: np.ndarray | None = field(default=None, compare=False)
    radial: bool = False
    # ``a`` for u(x) = a|x|^2/2; None when the invariant law is not Gaussian
    gaussian_precision: float | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.m <= 0 or self.L <= 0 or self.l < 0:
            raise ValueError("need m > 0, L > 0, l >= 0")
        if self.minimizer is not None:
            xs = np.asarray(self.minimizer, dtype=float).reshape(self.dim)
            xs.setflags(write=False)
            object.__setattr__(self, "minimizer", xs)

    @property
    def minimizer_radius(self) -> float:
        """Radius of the ball around the origin guaranteed to contain ``x*``."""
        return math.sqrt(2.0 * self.u0 / self.m)

    def exact_theta_second_moment(self, beta: float) -> float | None:
        """``E|theta|^2`` under ``mu_beta`` when it is Gaussian, else None."""
        if self.gaussian_precision is None:
            return None
        return self.dim / (beta * self.gaussian_precision)

    def u_min(self) -> float:
        if self.minimizer is None:
            raise ValueError(f"target {self.name!r} has no known minimizer")
        return float(self.u(self.minimizer))


def quartic_target(dim: int = 1) -> TargetPotential:
    """``u(x) = |x|^4/4 + 5|x|^2/2``, ``h(x) = |x|^2 x + 5x``.

    The Hessian is bounded below by 5, hence ``m = 5/2``.  Along a segment the
    Jacobian norm is at most ``3 s^2 + 5 <= 5 (1 + s)^2``, giving ``L = 5``,
    ``l = 2``.
    """
    return TargetPotential(
        name="quartic",
        dim=dim,
        u=_quartic_u,
        grad=_quartic_grad,
        m=2.5,
        L=5.0,
        l=2.0,
        u0=0.0,
        minimizer=np.zeros(dim),
        radial=True,
    )


def quadratic_target(a: float, dim: int = 1) -> TargetPotential:
    """``u(x) = a|x|^2/2``; the invariant law is ``N(0, I/(beta a))``."""
    if not a > 0:
        raise ValueError(f"quadratic precision must be positive, got {a}")
    a = float(a)
    return TargetPotential(
        name=f"quadratic:a={a!r}",
        dim=dim,
        u=partial(_quadratic_u, a=a),
        grad=partial(_quadratic_grad, a=a),
        m=a / 2.0,
        L=a,
        l=0.0,
        u0=0.0,
        minimizer=np.zeros(dim),
        radial=True,
        gaussian_precision=a,
    )


_QUAD_RE = re.compile(r"^quadratic(?::a=(?P<a>[^,\s]+))?$")


def target_from_name(name: str, dim: int = 1) -> TargetPotential:
    """Resolve ``"quartic"`` or ``"quadratic:a=<v>"``."""
    name = name.strip()
    if name == "quartic":
        return quartic_target(dim)
    match = _QUAD_RE.match(name)
    if match:
        a = float(match.group("a")) if match.group("a") else 1.0
        return quadratic_target(a, dim)
    raise ValueError(f"unknown target {name!r}; expected 'quartic' or 'quadratic:a=<v>'")


def custom_target(
    u: ArrayFn,
    grad: ArrayFn,
    *,
    dim: int,
    m: float,
    L: float,
    l: float,
    minimizer=None,
    name: str = "custom",
    check_pairs: int = 10_000,
    seed: int = 0,
) -> TargetPotential:
    """Wrap user callables; the constants are verified on random pairs, never inferred."""
    u0 = float(u(np.zeros(dim)))
    target = TargetPotential(
        name=name, dim=dim, u=u, grad=grad, m=m, L=L, l=l, u0=u0, minimizer=minimizer
    )
    report = check_assumptions(target, n_pairs=check_pairs, seed=seed)
    if not report.ok:
        raise ValueError(f"supplied constants fail verification: {report}")
    return target


@dataclass(frozen=True)
class AssumptionReport:
    n_pairs: int
    negative_u: int
    strong_convexity: int
    local_lipschitz: int
    dissipativity: int
    minimizer_ball: int

    @property
    def ok(self) -> bool:
        return not (
            self.negative_u
            or self.strong_convexity
            or self.local_lipschitz
            or self.dissipativity
            or self.minimizer_ball
        )


# relative slack for cases where the inequality is an identity (quadratics)
_RTOL = 1e-12


def check_assumptions(
    target: TargetPotential, n_pairs: int = 10_000, box: float = 5.0, seed: int = 0
) -> AssumptionReport:
    """Count violations of the structural assumptions on uniform random pairs in ``[-box, box]^d``."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-box, box, size=(n_pairs, target.dim))
    y = rng.uniform(-box, box, size=(n_pairs, target.dim))
    hx, hy = target.grad(x), target.grad(y)
    dx = x - y
    nx, ny = np.linalg.norm(x, axis=-1), np.linalg.norm(y, axis=-1)
    ndx2 = _sqnorm(dx)

    lhs = np.sum((hx - hy) * dx, axis=-1)
    rhs = 2 * target.m * ndx2
    sc = int(np.sum(lhs < rhs * (1 - _RTOL)))

    lip_l = np.linalg.norm(hx - hy, axis=-1)
    lip_r = target.L * (1 + nx + ny) ** target.l * np.sqrt(ndx2)
    ll = int(np.sum(lip_l > lip_r * (1 + _RTOL)))

    ux = target.u(x)
    diss_l = np.sum(hx * x, axis=-1)
    diss_r = 0.5 * target.m * nx**2 - target.u0
    diss = int(np.sum(diss_l < diss_r - _RTOL * np.abs(diss_r)))

    ball = 0
    if target.minimizer is not None:
        ball = int(np.linalg.norm(target.minimizer) > target.minimizer_radius * (1 + _RTOL))
    return AssumptionReport(
        n_pairs=n_pairs,
        negative_u=int(np.sum(ux < 0)),
        strong_convexity=sc,
        local_lipschitz=ll,
        dissipativity=diss,
        minimizer_ball=ball,
    )


@dataclass(frozen=True)
class InvariantMeasureSpec:
    """Moment bounds for ``mu_beta``; no sampling involved."""

    beta: float
    target: TargetPotential
    second_moment_bound: float
    p_moment_bound: dict[float, float]


def second_moment_bound(target: TargetPotential, beta: float) -> float:
    return (2.0 / target.m) * (target.u0 + target.dim / beta)


def p_moment_bound(target: TargetPotential, beta: float, p: float) -> float:
    """Bound on ``E|Y|^p`` under ``mu_beta`` for ``p >= 2``."""
    if p < 2:
        raise ValueError(f"moment order must be >= 2, got {p}")
    d, m = target.dim, target.m
    centred = (d / (beta * m)) ** (p / 2) * (1 + p / d) ** (p / 2 - 1)
    return 2 ** (p - 1) * (centred + second_moment_bound(target, beta) ** (p / 2))


def invariant_moment_bounds(target: TargetPotential, beta: float, p=2) -> InvariantMeasureSpec:
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    orders = [p] if np.isscalar(p) else list(p)
    bounds = {float(q): p_moment_bound(target, beta, q) for q in orders}
    return InvariantMeasureSpec(
        beta=beta,
        target=target,
        second_moment_bound=second_moment_bound(target, beta),
        p_moment_bound=bounds,
    )


def gaussian_abs_moment(p: float, dim: int, variance: float) -> float:
    """``E|X|^p`` for ``X ~ N(0, variance I_dim)``."""
    log = 0.5 * p * math.log(2 * variance) + gammaln((dim + p) / 2) - gammaln(dim / 2)
    return math.exp(log)
