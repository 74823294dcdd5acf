import csv

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tklmc.cli import EXIT_DIVERGED, EXIT_INVALID, EXIT_OK, main, run_experiment
from tklmc.config import ConfigError, ExperimentSpec, parse_config, render_config
from tklmc.samplers import InitSpec

from strategies import specs

EXAMPLE = """
# the quartic density-plot configuration
target = quartic
gamma = 60
beta = 5
lambda = 0.0078125
n_steps = 153600
"""


def read_metrics(path):
    with open(path) as fh:
        return {row["metric"]: row for row in csv.DictReader(fh)}


def test_parse_example_configuration():
    spec = parse_config(EXAMPLE)
    assert (spec.target, spec.gamma, spec.beta, spec.lam, spec.n_steps) == ("quartic", 60.0, 5.0, 2.0**-7, 153600)
    assert spec == ExperimentSpec()


def test_flags_alone():
    spec = parse_config("", {"target": "quadratic:a=2", "lambda": "0.01", "n_chains": "3", "init": "point:1.0"})
    assert spec.lam == 0.01 and spec.n_chains == 3 and spec.init == InitSpec("point", (1.0,))


def test_flags_override_file():
    assert parse_config("gamma = 10", {"gamma": "20"}).gamma == 20.0


@pytest.mark.parametrize("text", [
    "lambda = -1", "gamma = 0", "n_steps = 10\nburn_in = 10", "colour = red", "gamma 60",
    "gamma = sixty", "sampler = mala", "moments = 3", "n_chains = 0", "target = banana",
    "strict = maybe", "lambda = nan",
])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


@settings(max_examples=100)
@given(specs())
def test_round_trip(spec):
    assert parse_config(render_config(spec)) == spec


def quadratic_spec(tmp_path, **kw):
    base = dict(target="quadratic:a=5", n_chains=4, n_steps=100_000, burn_in=5000, thin=10,
                seed=3, output_dir=str(tmp_path))
    base.update(kw)
    return ExperimentSpec(**base)


def test_quadratic_run_matches_gaussian(tmp_path):
    assert run_experiment(quadratic_spec(tmp_path)) == EXIT_OK
    rows = read_metrics(tmp_path / "metrics.csv")
    val, tol = float(rows["theta_second_moment"]["value"]), float(rows["theta_second_moment"]["tolerance"])
    assert abs(val - 0.04) <= tol
    assert (tmp_path / "summary.txt").read_text().count("all_passed=true") == 1


def test_byte_identical_artifacts(tmp_path):
    # same output directory both times, since summary.txt records it
    spec = quadratic_spec(tmp_path, n_steps=20_000, burn_in=0, trajectory=True, histogram=True)
    names = ("metrics.csv", "summary.txt", "trajectory.csv", "histogram.csv")
    assert run_experiment(spec) == EXIT_OK
    first = {n: (tmp_path / n).read_bytes() for n in names}
    assert run_experiment(spec) == EXIT_OK
    for n in names:
        assert (tmp_path / n).read_bytes() == first[n]


def test_jobs_do_not_change_results(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_experiment(quadratic_spec(a, n_steps=5000, burn_in=0))
    run_experiment(quadratic_spec(b, n_steps=5000, burn_in=0, jobs=2))
    assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()


def test_untamed_divergence_exit_code(tmp_path, capsys):
    code = main(["sample", "--untamed", "--lambda", "0.1", "--gamma", "2", "--init", "point:5",
                 "--steps", "1000", "--out", str(tmp_path)])
    assert code == EXIT_DIVERGED
    summary = (tmp_path / "summary.txt").read_text()
    assert "divergence_step=" in summary
    assert "diverged at step" in capsys.readouterr().out


def test_strict_violation_exit_code(tmp_path):
    code = main(["sample", "--strict", "--epsilon", "0.01", "--steps", "10", "--out", str(tmp_path)])
    assert code == EXIT_INVALID
    assert not (tmp_path / "metrics.csv").exists()


def test_bad_config_exit_code(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("lambda = -1\n")
    assert main(["sample", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_INVALID


def test_missing_config_file(tmp_path):
    assert main(["sample", "--config", str(tmp_path / "nope.cfg")]) == 4


def test_validate_subcommand(capsys):
    assert main(["validate", "--K", "100"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "violation.gamma_min_1" in out and "691.2" in out
    assert main(["validate", "--K", "100", "--gamma", "700", "--lambda", "0.001"]) == EXIT_OK
    assert "status=ok" in capsys.readouterr().out


def test_reference_subcommand(tmp_path):
    out = tmp_path / "ref.csv"
    assert main(["reference", "--target", "quartic", "--beta", "5", "--n-grid", "2001", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "x,cdf,density" and len(lines) == 2002
    last = lines[-1].split(",")
    assert float(last[1]) == pytest.approx(1.0)
