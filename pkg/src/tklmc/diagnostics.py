"""Empirical checks: reference laws by quadrature, W2 estimates, decay fits,
moments and the truncated excess-risk estimator."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .targets import TargetPotential


@dataclass(frozen=True)
class ReferenceTarget1D:
    """A one-dimensional law tabulated on ``grid``; ``cdf`` is nondecreasing from 0 to 1."""

    beta: float
    grid: np.ndarray
    cdf: np.ndarray
    density: np.ndarray
    log_z: float

    def quantile(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if np.any((p < 0) | (p > 1)):
            raise ValueError("quantile levels must lie in [0, 1]")
        return np.interp(p, self.cdf, self.grid)

    def cdf_at(self, x) -> np.ndarray:
        return np.interp(x, self.grid, self.cdf)

    def moment(self, k: float) -> float:
        return float(simpson(np.abs(self.grid) ** k * self.density, x=self.grid))


def point_mass(x0: float = 0.0) -> ReferenceTarget1D:
    return ReferenceTarget1D(
        beta=math.inf, grid=np.array([x0, x0]), cdf=np.array([0.0, 1.0]),
        density=np.array([0.0, 0.0]), log_z=0.0,
    )


_TAIL_LOG = 16 * math.log(10)  # density ratio 1e-16 at the boundary


def _default_radius(phi, start: float = 1.0) -> float:
    r = start
    while min(phi(r), phi(-r)) < _TAIL_LOG:
        r *= 1.5
        if r > 1e8:
            raise ValueError("could not find a tail radius for this target")
    return r


def _tabulate(grid, logw, beta, lower_is_boundary: bool) -> ReferenceTarget1D:
    shift = np.min(logw)
    w = np.exp(-(logw - shift))
    ends = [w[-1]] if lower_is_boundary else [w[0], w[-1]]
    if max(ends) > 1e-12 * w.max():
        raise ValueError("tail radius too small: boundary density exceeds 1e-12 of the peak")
    z = simpson(w, x=grid)
    cdf = cumulative_simpson(w, x=grid, initial=0.0)
    cdf = np.maximum.accumulate(cdf / cdf[-1])
    return ReferenceTarget1D(beta=beta, grid=grid, cdf=cdf, density=w / z,
                             log_z=float(math.log(z) - shift))


def build_reference_1d(
    target: TargetPotential, beta: float, tail_radius: float | None = None, n_grid: int = 40_001
) -> ReferenceTarget1D:
    """Tabulate ``mu_beta`` for a one-dimensional target by composite Simpson quadrature."""
    if target.dim != 1:
        raise ValueError("build_reference_1d needs a one-dimensional target; use build_reference_radial")
    centre = 0.0 if target.minimizer is None else float(target.minimizer[0])
    u_min = float(target.u(np.array([centre])))

    def phi(r):
        return beta * (float(target.u(np.array([centre + r]))) - u_min)

    radius = tail_radius if tail_radius is not None else _default_radius(phi)
    grid = np.linspace(centre - radius, centre + radius, n_grid | 1)
    logw = beta * target.u(grid[:, None])
    return _tabulate(grid, logw, beta, lower_is_boundary=False)


def build_reference_radial(
    target: TargetPotential, beta: float, tail_radius: float | None = None, n_grid: int = 40_001
) -> ReferenceTarget1D:
    """Law of ``|theta|`` under ``mu_beta`` for a radial target: density ``~ r^{d-1} exp(-beta u(r))``."""
    if not target.radial:
        raise ValueError(f"target {target.name!r} is not radially symmetric")
    d = target.dim
    e1 = np.zeros(d)
    e1[0] = 1.0
    u0 = target.u0

    def phi(r):
        return beta * (float(target.u(r * e1)) - u0)

    radius = tail_radius if tail_radius is not None else _default_radius(phi)
    grid = np.linspace(0.0, radius, n_grid | 1)
    with np.errstate(divide="ignore"):
        logw = beta * target.u(grid[:, None] * e1) - (d - 1) * np.log(grid)
    # r^{d-1} vanishes at 0 for d > 1; keep it finite for the exp
    logw = np.where(np.isfinite(logw), logw, np.inf)
    ref = _tabulate(grid, np.minimum(logw, 1e300), beta, lower_is_boundary=True)
    return ref


def w2_1d_empirical_vs_reference(samples, ref: ReferenceTarget1D) -> float:
    """Quantile-coupling W2 between an empirical law and a tabulated one.

    ``sqrt(mean_i (x_(i) - Q((i - 1/2)/n))^2)`` with ``x_(i)`` sorted.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    q = ref.quantile((np.arange(n) + 0.5) / n)
    return float(np.sqrt(np.mean((x - q) ** 2)))


def w2_1d_empirical(a, b) -> float:
    """W2 between two equal-size empirical laws on the line (sorted pairing)."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size != b.size or a.size == 0:
        raise ValueError("need two nonempty samples of equal size")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def sliced_w2(samples_a, samples_b, n_projections: int = 200, seed: int = 0) -> float:
    """Sliced W2 over uniformly random unit directions drawn from ``seed``."""
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape != b.shape:
        raise ValueError(f"sample sets differ in shape: {a.shape} vs {b.shape}")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_projections, a.shape[1]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pa = np.sort(a @ dirs.T, axis=0)
    pb = np.sort(b @ dirs.T, axis=0)
    return float(np.sqrt(np.mean((pa - pb) ** 2)))


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float
    intercept: float


def geometric_decay_fit(distances) -> DecayFit:
    """Least-squares line through ``(step, log W2)``; ``rate`` is the slope per step."""
    pts = np.asarray(distances, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("need at least three (step, distance) points")
    steps, w = pts[:, 0], pts[:, 1]
    if np.any(w <= 0):
        raise ValueError("distances must be positive")
    y = np.log(w)
    slope, intercept = np.polyfit(steps, y, 1)
    resid = y - (slope * steps + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    if ss_tot == 0:
        slope = 0.0
    return DecayFit(rate=float(slope), r_squared=r2, intercept=float(intercept))


def excess_risk_radius(target: TargetPotential, beta: float) -> float:
    """Truncation radius ``sqrt(2u(0)/m) + sqrt((u(0)+1) d / beta) + 1``."""
    return (
        math.sqrt(2 * target.u0 / target.m)
        + math.sqrt((target.u0 + 1) * target.dim / beta)
        + 1.0
    )


@dataclass(frozen=True)
class ExcessRisk:
    estimate: float
    r0: float
    bound_tail: float
    stderr: float


def excess_risk_estimate(target: TargetPotential, beta: float, positions, n_batches: int = 20) -> ExcessRisk:
    """Mean of ``u(theta 1{|theta| <= r0}) - u(x*)`` over the retained positions.

    ``positions`` is ``(n, d)`` in time order (or ``(n, chains, d)``); the
    standard error uses batch means along the first axis.
    """
    x = np.asarray(positions, dtype=float)
    if x.size == 0:
        raise ValueError("empty trajectory")
    r0 = excess_risk_radius(target, beta)
    inside = np.linalg.norm(x, axis=-1, keepdims=True) <= r0
    vals = target.u(np.where(inside, x, 0.0)) - target.u_min()
    series = vals if vals.ndim == 1 else vals.mean(axis=tuple(range(1, vals.ndim)))
    return ExcessRisk(
        estimate=float(np.mean(vals)),
        r0=r0,
        bound_tail=2 * target.dim / (target.m * beta),
        stderr=batch_means_se(series, n_batches),
    )


def empirical_moments(samples, orders) -> dict[int, float]:
    """``mean |x|^p`` for each order."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("no samples")
    if x.ndim == 1:
        x = x[:, None]
    r = np.linalg.norm(x, axis=-1)
    # fsum is correctly rounded, so the estimate does not depend on sample order
    return {int(p): math.fsum(r**p) / r.size for p in orders}


def batch_means_se(series, n_batches: int = 20) -> float:
    """Standard error of the mean of a correlated series by nonoverlapping batch means."""
    s = np.asarray(series, dtype=float)
    if s.ndim > 1:
        # independent chains along axis 1: batch each chain, pool the batch means
        means = np.concatenate([_batch_means(s[:, j], n_batches) for j in range(s.shape[1])])
    else:
        means = _batch_means(s, n_batches)
    if means.size < 2:
        return math.nan
    return float(np.std(means, ddof=1) / math.sqrt(means.size))


def _batch_means(s, n_batches):
    n = s.size // n_batches
    if n == 0:
        return s.copy()
    return s[: n * n_batches].reshape(n_batches, n).mean(axis=1)


def per_chain_w2(trajectory_theta, ref: ReferenceTarget1D, radial: bool = False) -> np.ndarray:
    """W2 of each chain's retained samples against ``ref`` (``theta`` is ``(n, chains, d)``)."""
    th = np.asarray(trajectory_theta, dtype=float)
    vals = np.linalg.norm(th, axis=-1) if radial else th[..., 0]
    return np.array([w2_1d_empirical_vs_reference(vals[:, j], ref) for j in range(vals.shape[1])])


@dataclass(frozen=True)
class MetricRow:
    metric: str
    value: float
    tolerance: float
    passed: bool | None


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


@dataclass
class DiagnosticsReport:
    rows: list[MetricRow] = field(default_factory=list)
    summary: dict[str, object] = field(default_factory=dict)

    def add(self, metric: str, value: float, tolerance: float = math.nan, passed: bool | None = None):
        self.rows.append(MetricRow(metric, float(value), float(tolerance), None if passed is None else bool(passed)))

    @property
    def all_passed(self) -> bool:
        return all(r.passed is not False for r in self.rows)

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value", "tolerance", "pass"])
        for r in self.rows:
            w.writerow([r.metric, _fmt(r.value), "" if math.isnan(r.tolerance) else _fmt(r.tolerance), _fmt(r.passed)])
        return buf.getvalue()

    def summary_text(self) -> str:
        return "".join(f"{k}={_fmt(v) if not isinstance(v, str) else v}\n" for k, v in self.summary.items())
