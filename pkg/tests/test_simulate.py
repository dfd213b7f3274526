import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from diffdisc.estimators import EstimatorConfig, estimate_diff_disc_fd
from diffdisc.exceptions import DomainError, HarnessError
from diffdisc.local_regression import FixedBandwidth
from diffdisc.panel import first_difference, validate_panel
from diffdisc.simulate import (DgpSpec, McSummary, format_spec, generate_panel,
                               oracle_true_effect, parse_spec, replication_seed,
                               run_monte_carlo, summarize)

FIXED = EstimatorConfig(bandwidth=FixedBandwidth(0.5))
ZERO = dict(f0_coeffs=(), f1_coeffs=(), gamma0=0.0, gamma_slope=0.0, tau0=0.0, tau_slope=0.0,
            noise_sd=0.0, unit_effect_sd=0.0)


def test_all_zero_spec_gives_zero_outcomes():
    data = generate_panel(DgpSpec(n_units=50, **ZERO), seed=3)
    assert_array_equal(data.outcome, 0.0)


def test_direct_evaluation_of_outcome_equation():
    spec = DgpSpec(n_units=500, **{**ZERO, "f0_coeffs": (0, 1), "f1_coeffs": (0, 1),
                                   "gamma0": 2.0, "tau0": 1.5})
    data = generate_panel(spec, seed=1)
    d = data.distance[0::2]
    y0, y1 = data.outcome[0::2], data.outcome[1::2]
    r = d >= 0
    assert_allclose(y0, d + 2.0 * r, atol=1e-15)
    assert_allclose(y1, d + 3.5 * r, atol=1e-15)
    # the worked example: a unit at D = 0.3
    assert_allclose([0.3 + 2.0, 0.3 + 3.5], [2.3, 3.8])


def test_determinism_and_seed_sensitivity():
    spec = DgpSpec(n_units=100)
    a, b = generate_panel(spec, 42), generate_panel(spec, 42)
    c = generate_panel(spec, 43)
    assert_array_equal(a.outcome, b.outcome)
    assert_array_equal(a.distance, b.distance)
    assert list(a.unit_id) == list(b.unit_id)
    assert not np.array_equal(a.outcome, c.outcome)


@pytest.mark.parametrize("kwargs, expected", [
    ({}, 1.5), ({"tau0": 0.0}, 0.0), ({"tau0": -0.7, "tau_slope": 9.0}, -0.7)])
def test_oracle_true_effect(kwargs, expected):
    assert oracle_true_effect(DgpSpec(**kwargs)) == expected


@pytest.mark.parametrize("bad", [
    {"n_units": 1}, {"noise_sd": -1.0}, {"unit_effect_sd": -0.1},
    {"violation": "teleport"}, {"gamma0": float("nan")}, {"distance_half_width": 0.0},
])
def test_invalid_specs(bad):
    with pytest.raises(DomainError):
        DgpSpec(**bad)


def test_violations_shift_only_treated_period1():
    base = DgpSpec(n_units=300)
    clean = generate_panel(base, 5)
    for kind in ("period1_sorting", "period1_policy"):
        spec = DgpSpec(n_units=300, violation=kind, violation_shift=1.0)
        data = generate_panel(spec, 5)
        delta = data.outcome - clean.outcome
        expected = np.where((data.period == 1) & (data.distance >= 0), 1.0, 0.0)
        assert_allclose(delta, expected, atol=1e-12)
        assert data.metadata["violation"] == kind


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 300), seed=st.integers(0, 2**63), a=st.floats(0.01, 100.0))
def test_generated_panels_are_valid_when_both_sides_drawn(n, seed, a):
    data = generate_panel(DgpSpec(n_units=n, distance_half_width=a), seed)
    report = validate_panel(data)
    codes = {i.code for i in report.issues}
    # only an empty side may occur, and only by chance with tiny n
    assert codes <= {"empty_side"}
    if n >= 50:
        assert report.is_valid


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**63),
       coeffs=st.lists(st.floats(-5, 5), min_size=8, max_size=8))
def test_noiseless_exactness_every_seed(seed, coeffs):
    spec = DgpSpec(n_units=300, f0_coeffs=coeffs[0:2], f1_coeffs=coeffs[2:4],
                   gamma0=coeffs[4], gamma_slope=coeffs[5], tau0=coeffs[6], tau_slope=coeffs[7],
                   noise_sd=0.0, unit_effect_sd=0.0)
    est = estimate_diff_disc_fd(generate_panel(spec, seed), FIXED)
    assert_allclose(est.tau_hat, spec.tau0, atol=1e-10)


def test_unit_effects_cancel_in_first_differences():
    spec = DgpSpec(n_units=200, noise_sd=0.0, unit_effect_sd=3.0)
    no_eta = DgpSpec(n_units=200, noise_sd=0.0, unit_effect_sd=0.0)
    assert_allclose(first_difference(generate_panel(spec, 9)).value,
                    first_difference(generate_panel(no_eta, 9)).value, atol=1e-12)


def test_spec_text_round_trip():
    spec = DgpSpec(n_units=123, f0_coeffs=(0.1, -2.0), violation="period1_policy",
                   violation_shift=0.3)
    assert parse_spec(format_spec(spec)) == spec
    assert parse_spec("# only comments\n\n") == DgpSpec()


@pytest.mark.parametrize("text", ["n_units 5", "bogus = 1", "gamma0 = abc"])
def test_spec_parse_errors(text):
    with pytest.raises(DomainError):
        parse_spec(text)


def test_replication_seeds_are_stable():
    assert replication_seed(42, 0) == replication_seed(42, 0)
    seeds = {replication_seed(42, r) for r in range(100)}
    assert len(seeds) == 100
    assert replication_seed(42, 1) != replication_seed(43, 1)


def test_summary_rmse_identity():
    rng = np.random.default_rng(0)
    est = rng.normal(1.4, 0.3, 57)
    s = summarize(est, est - 0.5, est + 0.5, 1.5, 60, "diff_disc_fd")
    ok = 57
    assert s.failures == 3
    assert_allclose(s.rmse ** 2, s.bias ** 2 + s.sd ** 2 * (ok - 1) / ok, atol=1e-8)
    assert 0.0 <= s.coverage_rate <= 1.0


def test_monte_carlo_independent_of_workers():
    spec = DgpSpec(n_units=300)
    serial = run_monte_carlo(spec, "diff_disc_fd", FIXED, 12, 7)
    parallel = run_monte_carlo(spec, "diff_disc_fd", FIXED, 12, 7, workers=3)
    assert serial == parallel
    assert isinstance(serial, McSummary) and serial.reps == 12 and serial.failures == 0


def test_monte_carlo_partial_and_total_failure():
    tiny = DgpSpec(n_units=6)
    cfg = EstimatorConfig(bandwidth=FixedBandwidth(0.6))
    summary = run_monte_carlo(tiny, "diff_disc_fd", cfg, 40, 1)
    assert 0 < summary.failures < 40
    with pytest.raises(HarnessError) as err:
        run_monte_carlo(DgpSpec(n_units=2), "diff_disc_fd",
                        EstimatorConfig(bandwidth=FixedBandwidth(1e-6)), 3, 1)
    assert "replication 0" in str(err.value.first_failure)


def test_monte_carlo_rejects_bad_arguments():
    with pytest.raises(ValueError):
        run_monte_carlo(DgpSpec(), "diff_disc_fd", FIXED, 0, 1)
    with pytest.raises(ValueError):
        run_monte_carlo(DgpSpec(), "ols", FIXED, 1, 1)


def test_pooled_estimator_in_harness():
    s = run_monte_carlo(DgpSpec(n_units=500), "diff_disc_pooled", FIXED, 30, 3)
    f = run_monte_carlo(DgpSpec(n_units=500), "diff_disc_fd", FIXED, 30, 3)
    assert_allclose(s.mean_estimate, f.mean_estimate, atol=1e-8)
