"""Tamed kinetic Langevin samplers, an overdamped baseline and a quadratic oracle.

tKLMC1 (explicit Euler; the position update uses the *old* momentum)::

    v'     = v - lam (gamma v + h_tam(theta)) + sqrt(2 gamma lam / beta) xi
    theta' = theta + lam v

tKLMC2 (exact integration of the friction with frozen drift)::

    v'     = psi0 v - psi1 h_tam(theta) + sqrt(2 gamma / beta) Xi
    theta' = theta + psi1 v - psi2 h_tam(theta) + sqrt(2 gamma / beta) Xi'
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import GaussianPairKernel, build_kernel, pair_from_normals
from .taming import tame
from .targets import TargetPotential

log = logging.getLogger(__name__)

SAMPLERS = ("tklmc1", "tklmc2", "overdamped", "exact-quadratic")
DIVERGENCE_RADIUS = 1e10
_BLOCK = 2048


class ParameterError(ValueError):
    """Strict-mode violation of the step-size / friction restrictions."""


class ParameterWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ChainConfig:
    lam: float
    gamma: float
    beta: float
    n_steps: int
    burn_in: int = 0
    seed: int = 0
    strict_params: bool = False
    epsilon: float | None = None
    K: float | None = None
    tamed: bool = True

    def __post_init__(self):
        for name in ("lam", "gamma", "beta"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be positive, got {self.n_steps}")
        if not 0 <= self.burn_in < self.n_steps:
            raise ValueError(f"burn_in must lie in [0, n_steps), got {self.burn_in}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.K is not None and not self.K > 0:
            raise ValueError(f"K must be positive, got {self.K}")

    @property
    def lipschitz_K(self) -> float | None:
        if self.K is not None:
            return self.K
        if self.epsilon is not None:
            return 1.0 / self.epsilon
        return None


@dataclass
class KineticState:
    theta: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.v = np.asarray(self.v, dtype=float)

    @property
    def finite(self) -> bool:
        return bool(np.all(np.abs(self.theta) <= DIVERGENCE_RADIUS) and np.all(np.isfinite(self.v)))


@dataclass(frozen=True)
class InitSpec:
    """Initial law: point mass at ``theta0`` with ``v0 = 0``, or iid ``N(0, scale^2)`` for both."""

    kind: str = "point"
    theta0: tuple[float, ...] = (0.0,)
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("point", "gaussian"):
            raise ValueError(f"init kind must be 'point' or 'gaussian', got {self.kind!r}")
        if self.kind == "gaussian" and not self.scale > 0:
            raise ValueError(f"gaussian init scale must be positive, got {self.scale}")
        object.__setattr__(self, "theta0", tuple(float(t) for t in self.theta0))

    @classmethod
    def parse(cls, text: str) -> "InitSpec":
        kind, _, arg = text.strip().partition(":")
        kind = kind.strip()
        if kind == "point":
            values = tuple(float(s) for s in arg.split(",")) if arg.strip() else (0.0,)
            return cls("point", values)
        if kind == "gaussian":
            return cls("gaussian", scale=float(arg) if arg.strip() else 1.0)
        raise ValueError(f"cannot parse init {text!r}")

    def render(self) -> str:
        if self.kind == "point":
            return "point:" + ",".join(repr(t) for t in self.theta0)
        return f"gaussian:{self.scale!r}"

    def draw(self, dim: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "gaussian":
            theta = self.scale * rng.standard_normal(dim)
            v = self.scale * rng.standard_normal(dim)
            return theta, v
        t0 = np.asarray(self.theta0, dtype=float)
        if t0.size == 1:
            t0 = np.full(dim, t0[0])
        if t0.size != dim:
            raise ValueError(f"init point has {t0.size} coordinates, target has {dim}")
        return t0.copy(), np.zeros(dim)


@dataclass
class Trajectory:
    """Thinned states of ``n_chains`` chains; arrays are ``(n_records, n_chains, dim)``."""

    steps: np.ndarray
    theta: np.ndarray
    v: np.ndarray
    diverged: bool = False
    divergence_step: int | None = None
    divergence_chain: int | None = None
    chain_offset: int = 0

    @property
    def n_chains(self) -> int:
        return self.theta.shape[1]

    @property
    def states(self) -> list[KineticState]:
        return [KineticState(t, v) for t, v in zip(self.theta, self.v)]

    def positions(self) -> np.ndarray:
        """All retained positions flattened to ``(n, dim)``."""
        return self.theta.reshape(-1, self.theta.shape[-1])


def chain_seed(seed: int, chain_index: int) -> int:
    """64-bit seed of chain ``chain_index``; a pure function of its arguments."""
    ss = np.random.SeedSequence(entropy=int(seed) % 2**64, spawn_key=(int(chain_index),))
    return int(ss.generate_state(1, np.uint64)[0])


def _drift(target, config, theta):
    if config.tamed:
        return tame(target, config.gamma, theta)
    return target.grad(theta)


def tklmc1_step(target, config: ChainConfig, state: KineticState, xi) -> KineticState:
    lam, gamma = config.lam, config.gamma
    h = _drift(target, config, state.theta)
    v = state.v - lam * (gamma * state.v + h) + math.sqrt(2 * gamma * lam / config.beta) * np.asarray(xi)
    theta = state.theta + lam * state.v
    return KineticState(theta, v)


def tklmc2_step(
    target, config: ChainConfig, kernel: GaussianPairKernel, state: KineticState, pair
) -> KineticState:
    if not (math.isclose(kernel.gamma, config.gamma) and math.isclose(kernel.lam, config.lam)):
        raise ValueError("kernel was built for a different (gamma, lambda)")
    xi, xi_prime = pair
    s = math.sqrt(2 * config.gamma / config.beta)
    h = _drift(target, config, state.theta)
    v = kernel.psi0 * state.v - kernel.psi1 * h + s * np.asarray(xi)
    theta = state.theta + kernel.psi1 * state.v - kernel.psi2 * h + s * np.asarray(xi_prime)
    return KineticState(theta, v)


def overdamped_tamed_step(target, config: ChainConfig, theta, xi) -> np.ndarray:
    h = _drift(target, config, np.asarray(theta, dtype=float))
    return theta - config.lam * h + math.sqrt(2 * config.lam / config.beta) * np.asarray(xi)


def klmc1_transition(a: float, config: ChainConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate linear map ``(A, Q)`` of untamed tKLMC1 on ``u = a|x|^2/2``."""
    lam, gamma = config.lam, config.gamma
    A = np.array([[1.0, lam], [-lam * a, 1.0 - lam * gamma]])
    Q = np.diag([0.0, 2 * gamma * lam / config.beta])
    return A, Q


def exact_klmc_quadratic_stationary_cov(
    a: float, config: ChainConfig, tol: float = 1e-12, max_iters: int = 10_000_000
) -> np.ndarray:
    """Stationary covariance of ``(theta_i, v_i)`` solving ``S = A S A^T + Q`` by fixed-point iteration.

    Taming is ignored; see the README for when that is justified.
    """
    A, Q = klmc1_transition(a, config)
    rho = max(abs(np.linalg.eigvals(A)))
    if rho >= 1:
        raise ValueError(f"unstable step: spectral radius of the transition is {rho:.6g} >= 1")
    # successive differences shrink like rho^2; scale so the remaining error is below tol
    stop = tol * (1.0 - rho * rho)
    S = Q.copy()
    for _ in range(max_iters):
        S_next = A @ S @ A.T + Q
        if np.max(np.abs(S_next - S)) <= stop * max(1.0, np.max(np.abs(S_next))):
            return S_next
        S = S_next
    raise RuntimeError("Lyapunov fixed-point iteration did not converge")


@dataclass(frozen=True)
class Violation:
    name: str
    value: float
    limit: float
    advisory: bool
    message: str


def gamma_min_1(m: float, K: float, beta: float) -> float:
    return max(math.sqrt((K + m) / beta), K, 32.0, 48 * (2 * m + 1) ** 2 / m)


def gamma_min_2(K: float, beta: float) -> float:
    return math.sqrt(2 * K / beta)


def validate_params(
    target: TargetPotential, config: ChainConfig, algorithm: str = "tklmc1"
) -> list[Violation]:
    """Check the theoretical friction/step restrictions.

    Strict mode raises :class:`ParameterError` on non-advisory violations;
    otherwise a :class:`ParameterWarning` is emitted.  ``K`` defaults to
    ``1/epsilon``; with neither given, ``K = 0`` is used and flagged.
    """
    K = config.lipschitz_K
    out: list[Violation] = []
    if K is None:
        out.append(Violation("K", float("nan"), float("nan"), True,
                             "neither K nor epsilon given; K-dependent limits use K = 0"))
        K = 0.0
    g, lam = config.gamma, config.lam
    if algorithm == "tklmc1":
        gmin = gamma_min_1(target.m, K, config.beta)
        if g < gmin:
            out.append(Violation("gamma_min_1", g, gmin, False,
                                 f"gamma={g!r} < gamma_min,1={gmin!r}"))
        if not lam < 1 / g:
            out.append(Violation("lambda_max_1", lam, 1 / g, False,
                                 f"lambda={lam!r} >= 1/gamma={1 / g!r}"))
    elif algorithm == "tklmc2":
        gmin = gamma_min_2(K, config.beta)
        if g < gmin:
            out.append(Violation("gamma_min_2", g, gmin, False,
                                 f"gamma={g!r} < gamma_min,2={gmin!r}"))
        if not lam * g < 1:
            out.append(Violation("lambda_gamma", lam * g, 1.0, False,
                                 f"lambda*gamma={lam * g!r} >= 1"))
        if lam > g**-5:
            out.append(Violation("lambda_max_2", lam, g**-5, True,
                                 f"lambda={lam!r} > gamma^-5={g**-5!r} (constant taken as 1)"))
    elif algorithm in ("overdamped", "exact-quadratic"):
        pass
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")

    hard = [v for v in out if not v.advisory]
    if hard:
        text = "; ".join(v.message for v in hard)
        if config.strict_params:
            raise ParameterError(text)
        warnings.warn(f"parameter restrictions violated: {text}", ParameterWarning, stacklevel=2)
    return out


def _noise_block(rngs, n, shape, refine):
    """``(n, n_chains, *shape)`` standard normals, each chain from its own stream.

    With ``refine = r`` every step consumes ``2^r`` consecutive normals and
    uses their normalised sum, so a chain at step ``lam`` sees the same
    Brownian path as a chain at ``lam / 2^r`` with the same seed.
    """
    k = 1 << refine
    blocks = []
    for rng in rngs:
        z = rng.standard_normal((n, k) + shape)
        blocks.append(z[:, 0] if k == 1 else z.sum(axis=1) / math.sqrt(k))
    return np.stack(blocks, axis=1)


def run_chain(
    target: TargetPotential,
    config: ChainConfig,
    sampler: str = "tklmc1",
    thin: int = 1,
    *,
    n_chains: int = 1,
    init: InitSpec | None = None,
    chain_offset: int = 0,
    noise_refinement: int = 0,
    validate: bool = True,
) -> Trajectory:
    """Run ``n_chains`` independent chains side by side.

    Chain ``i`` draws from ``default_rng(chain_seed(config.seed, chain_offset + i))``:
    first its initial state, then its noise.  States are recorded at steps
    ``burn_in, burn_in + thin, ...`` (step 0 is the initial state).  A chain
    leaving the ball of radius ``1e10`` or going non-finite stops the run and
    marks the trajectory diverged.
    """
    if sampler not in SAMPLERS:
        raise ValueError(f"unknown sampler {sampler!r}; choose from {SAMPLERS}")
    if thin < 1 or n_chains < 1:
        raise ValueError("thin and n_chains must be positive")
    if noise_refinement and sampler not in ("tklmc1", "overdamped"):
        raise ValueError("noise refinement is only defined for single-noise samplers")
    if validate and sampler in ("tklmc1", "tklmc2"):
        validate_params(target, config, sampler)
    init = init or InitSpec()
    d = target.dim
    rngs = [np.random.default_rng(chain_seed(config.seed, chain_offset + i)) for i in range(n_chains)]
    theta = np.empty((n_chains, d))
    v = np.empty((n_chains, d))
    for i, rng in enumerate(rngs):
        theta[i], v[i] = init.draw(d, rng)
    if sampler == "overdamped":
        v[:] = 0.0

    if sampler == "exact-quadratic":
        return _exact_quadratic(target, config, thin, rngs, chain_offset)

    record_steps = np.arange(config.burn_in, config.n_steps + 1, thin)
    th_rec = np.empty((record_steps.size, n_chains, d))
    v_rec = np.empty_like(th_rec)
    n_rec = 0
    if record_steps[0] == 0:
        th_rec[0], v_rec[0] = theta, v
        n_rec = 1
    next_rec = record_steps[n_rec] if n_rec < record_steps.size else -1

    lam, gamma, beta = config.lam, config.gamma, config.beta
    drift = (lambda x: tame(target, gamma, x)) if config.tamed else target.grad
    if sampler == "tklmc2":
        kernel = build_kernel(gamma, lam)
        s = math.sqrt(2 * gamma / beta)
        noise_shape = (2, d)
    elif sampler == "tklmc1":
        s = math.sqrt(2 * gamma * lam / beta)
        noise_shape = (d,)
    else:
        s = math.sqrt(2 * lam / beta)
        noise_shape = (d,)
    damp = 1.0 - lam * gamma

    diverged, div_step, div_chain = False, None, None
    step = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while step < config.n_steps and not diverged:
            n = min(_BLOCK, config.n_steps - step)
            noise = _noise_block(rngs, n, noise_shape, noise_refinement)
            if sampler == "tklmc2":
                xi_all, xip_all = pair_from_normals(kernel, noise[:, :, 0], noise[:, :, 1])
                xi_all *= s
                xip_all *= s
            else:
                noise *= s
            for j in range(n):
                h = drift(theta)
                if sampler == "tklmc1":
                    theta, v = theta + lam * v, damp * v - lam * h + noise[j]
                elif sampler == "tklmc2":
                    theta, v = (
                        theta + kernel.psi1 * v - kernel.psi2 * h + xip_all[j],
                        kernel.psi0 * v - kernel.psi1 * h + xi_all[j],
                    )
                else:
                    theta = theta - lam * h + noise[j]
                step += 1
                # NaN fails the comparison as well
                if not np.abs(theta).max() <= DIVERGENCE_RADIUS or not np.isfinite(v).all():
                    bad = ~(np.all(np.abs(theta) <= DIVERGENCE_RADIUS, axis=1) & np.all(np.isfinite(v), axis=1))
                    diverged, div_step, div_chain = True, step, chain_offset + int(np.argmax(bad))
                    log.info("chain %d diverged at step %d", div_chain, step)
                    break
                if step == next_rec:
                    th_rec[n_rec], v_rec[n_rec] = theta, v
                    n_rec += 1
                    next_rec = record_steps[n_rec] if n_rec < record_steps.size else -1

    return Trajectory(
        steps=record_steps[:n_rec].copy(),
        theta=th_rec[:n_rec],
        v=v_rec[:n_rec],
        diverged=diverged,
        divergence_step=div_step,
        divergence_chain=div_chain,
        chain_offset=chain_offset,
    )


def _exact_quadratic(target, config, thin, rngs, chain_offset) -> Trajectory:
    a = target.gaussian_precision
    if a is None:
        raise ValueError("exact-quadratic sampling needs a quadratic target")
    steps = np.arange(config.burn_in, config.n_steps + 1, thin)
    d = target.dim
    th = np.stack([rng.standard_normal((steps.size, d)) for rng in rngs], axis=1)
    v = np.stack([rng.standard_normal((steps.size, d)) for rng in rngs], axis=1)
    th /= math.sqrt(config.beta * a)
    v /= math.sqrt(config.beta)
    return Trajectory(steps=steps, theta=th, v=v, chain_offset=chain_offset)


def merge_trajectories(parts: list[Trajectory]) -> Trajectory:
    """Concatenate chain groups; on divergence keep only records before the first one."""
    div = [p for p in parts if p.diverged]
    n = min(p.steps.size for p in parts)
    if div:
        first = min(div, key=lambda p: (p.divergence_step, p.divergence_chain))
        n = min(n, int(np.searchsorted(parts[0].steps, first.divergence_step)))
    theta = np.concatenate([p.theta[:n] for p in parts], axis=1)
    v = np.concatenate([p.v[:n] for p in parts], axis=1)
    out = Trajectory(steps=parts[0].steps[:n].copy(), theta=theta, v=v,
                     chain_offset=parts[0].chain_offset)
    if div:
        out.diverged = True
        out.divergence_step = first.divergence_step
        out.divergence_chain = first.divergence_chain
    return out
