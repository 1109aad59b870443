import io
import math
from dataclasses import replace

import numpy as np
import pytest

from core.errors import ConfigError
from core.montecarlo import (
    SUMMARY_COLUMNS,
    DgpSpec,
    generate_panel,
    load_study,
    replication_seeds,
    run_replications,
    run_study,
    study_from_mapping,
    summarize_outcomes,
    write_summary_csv,
)
from core.run_config import PROJECT_ROOT


def test_generate_panel_shape_and_labels():
    gp = generate_panel(DgpSpec(n_entities=12, n_periods=5))
    assert gp.usable_observations == 60
    assert gp.entities[0] == "e01" and gp.entities[-1] == "e12"
    assert [row.period for row in gp.entity_rows("e03")] == [1, 2, 3, 4, 5]
    assert gp.label == "simulated"


def test_generate_panel_is_deterministic():
    first, second = generate_panel(DgpSpec(seed=42)), generate_panel(DgpSpec(seed=42))
    np.testing.assert_array_equal(first.p, second.p)
    np.testing.assert_array_equal(first.q, second.q)
    assert not np.array_equal(first.p, generate_panel(DgpSpec(seed=43)).p)


def test_effects_follow_kappa():
    spec = DgpSpec(n_entities=50, kappa=1.0, sigma_u=0.01, sigma_e=0.0)
    gp = generate_panel(spec)
    residual = gp.p - spec.intercept - spec.slope * gp.q
    effects = np.array([residual[gp.codes == i].mean() for i in range(50)])
    q_means = np.array([gp.q[gp.codes == i].mean() for i in range(50)])
    assert np.corrcoef(effects, q_means)[0, 1] > 0.8


def test_unit_root_panel_is_integrated():
    gp = generate_panel(DgpSpec(n_entities=3, n_periods=200, unit_root=True, seed=5))
    q = gp.q[gp.codes == 0]
    assert np.var(q[100:]) > 0 and np.var(np.diff(q)) < np.var(q)


@pytest.mark.parametrize(
    "kwargs",
    [{"n_entities": 0}, {"sigma_e": -0.1}, {"ar1_rho": 1.0}, {"seed": -1}],
)
def test_invalid_dgp(kwargs):
    with pytest.raises(ConfigError):
        DgpSpec(**kwargs)


@pytest.mark.parametrize("estimator", ["OLS", "FE", "RE"])
def test_noiseless_recovery(estimator):
    summary = run_study(DgpSpec(sigma_u=0.0, sigma_e=0.0), estimator, 5)
    assert summary.successes == 5
    assert summary.bias == pytest.approx(0.0, abs=1e-10)
    assert summary.rmse == pytest.approx(0.0, abs=1e-10)


def test_single_replication_rmse_is_absolute_bias():
    summary = run_study(DgpSpec(seed=11), "FE", 1)
    assert summary.rmse == pytest.approx(abs(summary.bias), rel=1e-12)


def test_study_is_deterministic():
    spec = DgpSpec(seed=7)
    assert run_study(spec, "RE", 20) == run_study(spec, "RE", 20)


def test_execution_order_does_not_change_summary():
    spec = DgpSpec(seed=99)
    baseline = summarize_outcomes("FE", spec.slope, run_replications(spec, "FE", 25))
    reversed_run = run_replications(spec, "FE", 25, order=list(range(24, -1, -1)))
    assert [o.index for o in reversed_run][:2] == [24, 23]
    assert summarize_outcomes("FE", spec.slope, reversed_run) == baseline
    threaded = summarize_outcomes("FE", spec.slope, run_replications(spec, "FE", 25, workers=4))
    assert threaded == baseline


def test_order_must_be_a_permutation():
    with pytest.raises(ConfigError):
        run_replications(DgpSpec(), "FE", 3, order=[0, 0, 1])


def test_replication_seeds_do_not_collide():
    seeds = replication_seeds(1986, 100_000)
    assert len(set(seeds)) == 100_000
    assert replication_seeds(1986, 3) == seeds[:3]
    assert replication_seeds(1987, 3) != seeds[:3]


def test_failures_are_counted():
    summary = run_study(DgpSpec(n_periods=1), "FE", 3)
    assert summary.failures == 3
    assert summary.successes == 0
    assert summary.mean_estimate is None
    assert "InsufficientDataError" in summary.failure_messages[0]


def test_test_labels_report_rejection_only():
    summary = run_study(DgpSpec(seed=3), "BP_LM", 10)
    assert summary.bias is None and summary.coverage_95 is None
    assert 0.0 <= summary.rejection_rate <= 1.0
    assert summary.mean_estimate >= 0


def test_unknown_study_label():
    with pytest.raises(ConfigError):
        run_study(DgpSpec(), "GMM", 5)


def test_load_demo_study():
    spec, estimator, replications, workers = load_study(PROJECT_ROOT / "studies" / "demo.study")
    assert estimator == "FE"
    assert replications == 200
    assert workers == 1
    assert spec.seed == 1986
    assert (spec.n_entities, spec.n_periods) == (7, 8)
    assert spec.slope == 0.7


def test_study_file_errors(tmp_path):
    bad_key = tmp_path / "bad_key.study"
    bad_key.write_text("estimator = FE\nslpe = 0.7\n")
    with pytest.raises(ConfigError, match="slpe"):
        load_study(bad_key)

    bad_label = tmp_path / "bad_label.study"
    bad_label.write_text("estimator = LSDV\n")
    with pytest.raises(ConfigError):
        load_study(bad_label)

    bad_value = tmp_path / "bad_value.study"
    bad_value.write_text("sigma_u = wide  # not a number\n")
    with pytest.raises(ConfigError):
        load_study(bad_value)

    with pytest.raises(ConfigError):
        load_study(tmp_path / "missing.study")


def test_study_from_mapping_coerces_values():
    spec, estimator, replications, _ = study_from_mapping(
        {"estimator": "hausman", "replications": "50", "slope": 1, "unit_root": "yes", "n_entities": 9}
    )
    assert estimator == "HAUSMAN"
    assert replications == 50
    assert spec.slope == 1.0 and isinstance(spec.slope, float)
    assert spec.unit_root is True
    assert spec.n_entities == 9


def test_summary_csv_is_deterministic():
    summaries = [run_study(DgpSpec(seed=5), label, 10) for label in ("OLS", "F_FE_OLS")]
    first, second = io.StringIO(), io.StringIO()
    write_summary_csv(summaries, first)
    write_summary_csv(summaries, second)
    assert first.getvalue() == second.getvalue()
    lines = first.getvalue().splitlines()
    assert lines[0] == ",".join(SUMMARY_COLUMNS)
    assert lines[1].startswith("OLS,10,10,0,")
    assert len(lines) == 3


# Acceptance studies. Every run is seeded, so the outcome is fixed; bounds
# leave room for the Monte Carlo standard error.


def _mc_error(summary):
    spread = math.sqrt(max(summary.rmse ** 2 - summary.bias ** 2, 0.0))
    return spread / math.sqrt(summary.successes)


@pytest.mark.slow
def test_fixed_effects_unbiased_with_nominal_coverage():
    summary = run_study(DgpSpec(seed=2024), "FE", 1000)
    assert summary.failures == 0
    assert abs(summary.bias) < 0.01
    assert abs(summary.bias) < 3 * _mc_error(summary)
    assert 0.90 <= summary.coverage_95 <= 0.99


@pytest.mark.slow
def test_fe_vs_ols_size_and_power():
    size = run_study(DgpSpec(sigma_u=0.0, seed=31), "F_FE_OLS", 1000)
    assert 0.03 <= size.rejection_rate <= 0.07
    # Uniform effects of +-10 sigma_e.
    power = run_study(DgpSpec(effect_halfwidth=0.2, sigma_e=0.02, seed=32), "F_FE_OLS", 500)
    assert power.rejection_rate >= 0.99


@pytest.mark.slow
def test_breusch_pagan_size_and_power():
    size = run_study(DgpSpec(n_entities=50, sigma_u=0.0, seed=41), "BP_LM", 500)
    assert 0.02 <= size.rejection_rate <= 0.09
    power = run_study(DgpSpec(n_entities=20, sigma_u=0.2, seed=42), "BP_LM", 500)
    assert power.rejection_rate >= 0.99


@pytest.mark.slow
def test_hausman_size_and_power():
    base = DgpSpec(n_entities=50, n_periods=8, sigma_u=0.01, sigma_e=0.05)
    power = run_study(replace(base, kappa=1.0, seed=51), "HAUSMAN", 500)
    assert power.rejection_rate >= 0.9
    size = run_study(replace(base, kappa=0.0, seed=52), "HAUSMAN", 1000)
    assert 0.02 <= size.rejection_rate <= 0.08


@pytest.mark.slow
def test_dpd_unbiased_on_static_panels():
    # No dynamics in the DGP: the lagged dependent term is estimated but its true value is 0.
    summary = run_study(DgpSpec(n_entities=50, ar1_rho=0.0, lagged_dependent=True, seed=61), "DPD", 500)
    assert summary.failures == 0
    assert abs(summary.bias) < 2 * _mc_error(summary)
