"""Command-line experiment runner.

    tklmc sample --config run.cfg --chains 4 --out results/
    tklmc validate --config run.cfg
    tklmc reference --target quartic --beta 5 --out ref.csv

Exit codes: 0 success, 2 divergence, 3 strict validation failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentSpec, parse_config, render_config
from .diagnostics import (
    DiagnosticsReport,
    batch_means_se,
    build_reference_1d,
    build_reference_radial,
    excess_risk_estimate,
    geometric_decay_fit,
    w2_1d_empirical_vs_reference,
)
from .samplers import (
    ParameterError,
    Trajectory,
    exact_klmc_quadratic_stationary_cov,
    merge_trajectories,
    run_chain,
    validate_params,
)
from .taming import taming_error_estimate
from .targets import invariant_moment_bounds, target_from_name

log = logging.getLogger("tklmc")

EXIT_OK, EXIT_DIVERGED, EXIT_INVALID, EXIT_IO = 0, 2, 3, 4


def _fmt(x: float) -> str:
    return repr(float(x))


def _run_group(args):
    target_name, dim, config, sampler, thin, n_chains, init, offset = args
    target = target_from_name(target_name, dim)
    return run_chain(target, config, sampler, thin, n_chains=n_chains, init=init,
                     chain_offset=offset, validate=False)


def run_chains(spec: ExperimentSpec) -> Trajectory:
    """Run all chains, split into ``spec.jobs`` contiguous groups of chain indices."""
    config = spec.chain_config()
    jobs = min(spec.jobs, spec.n_chains)
    sizes = [spec.n_chains // jobs + (i < spec.n_chains % jobs) for i in range(jobs)]
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)
    tasks = [(spec.target, spec.dim, config, spec.sampler, spec.thin, n, spec.init, int(o))
             for n, o in zip(sizes, offsets)]
    if jobs == 1:
        return _run_group(tasks[0])
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_run_group, tasks))
    return merge_trajectories(parts)


def validation_report(spec: ExperimentSpec) -> tuple[list, str]:
    target = target_from_name(spec.target, spec.dim)
    config = spec.chain_config()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        violations = validate_params(target, config.__class__(**{**config.__dict__, "strict_params": False}),
                                     spec.sampler)
    lines = [f"algorithm={spec.sampler}", f"m={_fmt(target.m)}"]
    if not violations:
        lines.append("status=ok")
    for v in violations:
        kind = "advisory" if v.advisory else "violation"
        lines.append(f"{kind}.{v.name}={v.message}")
    return violations, "\n".join(lines) + "\n"


def _reference(target, beta):
    if target.dim == 1:
        return build_reference_1d(target, beta), False
    if target.radial:
        return build_reference_radial(target, beta), True
    return None, False


def compute_diagnostics(spec: ExperimentSpec, traj: Trajectory) -> DiagnosticsReport:
    target = target_from_name(spec.target, spec.dim)
    rep = DiagnosticsReport()
    th, v = traj.theta, traj.v
    beta = spec.beta

    sq = np.sum(th * th, axis=-1)  # (records, chains)
    m2, se2 = float(sq.mean()), batch_means_se(sq)
    exact = target.exact_theta_second_moment(beta)
    bounds = invariant_moment_bounds(target, beta, spec.moments or (2,))
    if exact is not None:
        rep.add("theta_second_moment", m2, 4 * se2, abs(m2 - exact) <= 4 * se2)
        rep.add("theta_second_moment_exact", exact)
    else:
        rep.add("theta_second_moment", m2, 4 * se2, m2 <= bounds.second_moment_bound + 4 * se2)
    rep.add("theta_second_moment_bound", bounds.second_moment_bound)

    if spec.sampler != "overdamped":
        vq = np.sum(v * v, axis=-1)
        vm, vse = float(vq.mean()), batch_means_se(vq)
        rep.add("v_second_moment", vm, 4 * vse)
        rep.add("v_second_moment_continuum", spec.dim / beta)
        if spec.sampler == "tklmc1" and target.gaussian_precision is not None and not spec.untamed:
            try:
                S = exact_klmc_quadratic_stationary_cov(target.gaussian_precision, spec.chain_config())
            except ValueError:
                S = None
            if S is not None:
                series = {"11": th[..., 0] ** 2, "12": th[..., 0] * v[..., 0], "22": v[..., 0] ** 2}
                for key, s in series.items():
                    i, j = int(key[0]) - 1, int(key[1]) - 1
                    val, se = float(s.mean()), batch_means_se(s)
                    rep.add(f"lyapunov_sigma_{key}", val, 4 * se, abs(val - S[i, j]) <= 4 * se)
                    rep.add(f"lyapunov_sigma_{key}_exact", S[i, j])

    for p in spec.moments:
        r = np.linalg.norm(th, axis=-1) ** p
        val, se = float(r.mean()), batch_means_se(r)
        bound = bounds.p_moment_bound[float(p)]
        rep.add(f"theta_moment_{p}", val, 4 * se, val <= bound + 4 * se)
        rep.add(f"theta_moment_{p}_bound", bound)

    ref, radial = _reference(target, beta) if (spec.w2 or spec.decay_fit or spec.histogram) else (None, False)
    if spec.w2 and ref is not None:
        vals = np.linalg.norm(th, axis=-1) if radial else th[..., 0]
        rep.add("w2_to_reference", w2_1d_empirical_vs_reference(vals.ravel(), ref))
        if vals.shape[1] > 1:
            per = [w2_1d_empirical_vs_reference(vals[:, j], ref) for j in range(vals.shape[1])]
            rep.add("w2_per_chain_mean", float(np.mean(per)), float(np.std(per, ddof=1) / math.sqrt(len(per))))

    if spec.excess_risk and target.minimizer is not None:
        er = excess_risk_estimate(target, beta, th)
        rep.add("excess_risk", er.estimate, 4 * er.stderr, er.estimate <= er.bound_tail + 4 * er.stderr)
        rep.add("excess_risk_floor", er.bound_tail)
        rep.add("excess_risk_r0", er.r0)

    if spec.sampler != "exact-quadratic":
        rep.add("taming_error", taming_error_estimate(target, spec.gamma, traj.positions()))

    if spec.decay_fit and ref is not None and th.shape[0] >= 3:
        vals = np.linalg.norm(th, axis=-1) if radial else th[..., 0]
        w = np.array([w2_1d_empirical_vs_reference(vals[k], ref) for k in range(vals.shape[0])])
        fit = decay_window_fit(traj.steps, w)
        if fit is not None:
            rep.add("decay_rate", fit.rate)
            rep.add("decay_r_squared", fit.r_squared)
    return rep


def decay_window_fit(steps, w):
    """Fit the transient: points up to the first one within twice the late-time floor."""
    w = np.asarray(w, dtype=float)
    floor = float(np.median(w[-max(1, w.size // 4):]))
    below = np.flatnonzero(w <= 2 * floor)
    end = int(below[0]) if below.size else w.size
    end = max(end, 3)
    pts = np.column_stack([steps[:end], w[:end]])
    pts = pts[pts[:, 1] > 0]
    if pts.shape[0] < 3:
        return None
    return geometric_decay_fit(pts)


def _write_trajectory(path: Path, traj: Trajectory, dim: int):
    header = ["step", "chain"] + [f"theta_{i}" for i in range(dim)] + [f"v_{i}" for i in range(dim)]
    with path.open("w") as fh:
        fh.write(",".join(header) + "\n")
        for k, step in enumerate(traj.steps.tolist()):
            for c in range(traj.n_chains):
                vals = traj.theta[k, c].tolist() + traj.v[k, c].tolist()
                fh.write(f"{step},{traj.chain_offset + c}," + ",".join(map(repr, vals)) + "\n")


def _write_histogram(path: Path, traj: Trajectory, tail: float, bins: int = 100):
    dens, edges = np.histogram(traj.theta[..., 0].ravel(), bins=bins, range=(-tail, tail), density=True)
    with path.open("w") as fh:
        fh.write("bin_left,bin_right,density\n")
        for lo, hi, dv in zip(edges[:-1], edges[1:], dens):
            fh.write(f"{_fmt(lo)},{_fmt(hi)},{_fmt(dv)}\n")


def run_experiment(spec: ExperimentSpec, out=None) -> int:
    """Validate, sample, diagnose and write artifacts; returns the exit code."""
    out = sys.stdout if out is None else out
    violations, report = validation_report(spec)
    hard = [v for v in violations if not v.advisory]
    if hard and spec.sampler in ("tklmc1", "tklmc2"):
        if spec.strict:
            print(report, end="", file=out)
            print("strict parameter check failed", file=out)
            return EXIT_INVALID
        print("warning: parameter restrictions violated: " + "; ".join(v.message for v in hard), file=out)

    outdir = Path(spec.output_dir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create {outdir}: {exc}", file=out)
        return EXIT_IO

    traj = run_chains(spec)
    summary: dict[str, object] = {}
    for line in render_config(spec).splitlines():
        k, _, val = line.partition(" = ")
        summary[f"config.{k}"] = val
    summary["violations"] = ";".join(v.name for v in violations) or "none"
    summary["diverged"] = traj.diverged
    summary["records"] = int(traj.steps.size)

    try:
        if spec.trajectory:
            _write_trajectory(outdir / "trajectory.csv", traj, spec.dim)
        if traj.diverged:
            summary["divergence_step"] = int(traj.divergence_step)
            summary["divergence_chain"] = int(traj.divergence_chain)
            rep = DiagnosticsReport(summary=summary)
            rep.add("diverged", 1.0, passed=False)
            rep.add("divergence_step", traj.divergence_step)
        else:
            rep = compute_diagnostics(spec, traj)
            rep.summary = {**summary, **{r.metric: r.value for r in rep.rows}}
            rep.summary["all_passed"] = rep.all_passed
            if spec.histogram:
                target = target_from_name(spec.target, spec.dim)
                ref, radial = _reference(target, spec.beta)
                tail = float(ref.grid[-1]) if ref is not None and not radial else float(np.abs(traj.theta).max())
                _write_histogram(outdir / "histogram.csv", traj, tail)
        (outdir / "metrics.csv").write_text(rep.metrics_csv())
        (outdir / "summary.txt").write_text(rep.summary_text())
    except OSError as exc:
        print(f"I/O failure: {exc}", file=out)
        return EXIT_IO

    if traj.diverged:
        print(f"diverged at step {traj.divergence_step} (chain {traj.divergence_chain})", file=out)
        return EXIT_DIVERGED
    for r in rep.rows:
        status = "" if r.passed is None else (" PASS" if r.passed else " FAIL")
        print(f"{r.metric} = {_fmt(r.value)}{status}", file=out)
    return EXIT_OK


_FLAG_KEYS = {
    "target": "target", "sampler": "sampler", "gamma": "gamma", "lambda_": "lambda",
    "beta": "beta", "steps": "n_steps", "burnin": "burn_in", "chains": "n_chains",
    "seed": "seed", "dim": "dim", "thin": "thin", "out": "output_dir", "jobs": "jobs",
    "init": "init", "epsilon": "epsilon", "K": "K", "moments": "moments",
}


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path)
    p.add_argument("--target")
    p.add_argument("--sampler")
    p.add_argument("--gamma")
    p.add_argument("--lambda", dest="lambda_")
    p.add_argument("--beta")
    p.add_argument("--steps")
    p.add_argument("--burnin")
    p.add_argument("--chains")
    p.add_argument("--seed")
    p.add_argument("--dim")
    p.add_argument("--thin")
    p.add_argument("--init")
    p.add_argument("--epsilon")
    p.add_argument("--K")
    p.add_argument("--moments")
    p.add_argument("--out")
    p.add_argument("--jobs")
    p.add_argument("--strict", action="store_true", default=None)
    p.add_argument("--untamed", action="store_true", default=None)
    p.add_argument("--trajectory", action="store_true", default=None)
    p.add_argument("--histogram", action="store_true", default=None)
    p.add_argument("--decay-fit", dest="decay_fit", action="store_true", default=None)


def _spec_from_args(args) -> ExperimentSpec:
    text = args.config.read_text() if args.config else ""
    overrides: dict[str, object] = {}
    for flag, key in _FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    for flag in ("strict", "untamed", "trajectory", "histogram", "decay_fit"):
        if getattr(args, flag, None):
            overrides[flag] = True
    return parse_config(text, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tklmc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("sample", help="run chains and write metrics"))
    _add_run_flags(sub.add_parser("validate", help="report the parameter restrictions"))
    ref = sub.add_parser("reference", help="dump the quadrature CDF of a 1-D target")
    ref.add_argument("--target", default="quartic")
    ref.add_argument("--beta", type=float, default=5.0)
    ref.add_argument("--dim", type=int, default=1)
    ref.add_argument("--n-grid", type=int, default=40_001)
    ref.add_argument("--out", type=Path, required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.command == "reference":
            target = target_from_name(args.target, args.dim)
            ref, radial = _reference(target, args.beta)
            if ref is None:
                print("reference needs a 1-D or radial target", file=sys.stderr)
                return EXIT_INVALID
            ref = (build_reference_radial if radial else build_reference_1d)(target, args.beta, n_grid=args.n_grid)
            try:
                with args.out.open("w") as fh:
                    fh.write("x,cdf,density\n")
                    for x, c, dv in zip(ref.grid, ref.cdf, ref.density):
                        fh.write(f"{_fmt(x)},{_fmt(c)},{_fmt(dv)}\n")
            except OSError as exc:
                print(f"I/O failure: {exc}", file=sys.stderr)
                return EXIT_IO
            print(f"log_z={_fmt(ref.log_z)}")
            return EXIT_OK
        try:
            spec = _spec_from_args(args)
        except OSError as exc:
            print(f"cannot read config: {exc}", file=sys.stderr)
            return EXIT_IO
        if args.command == "validate":
            violations, report = validation_report(spec)
            print(report, end="")
            if spec.strict and any(not v.advisory for v in violations):
                return EXIT_INVALID
            return EXIT_OK
        return run_experiment(spec)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
