import math
from unittest.mock import patch

import numpy as np
import pytest

import correlation_analytics as ca
import mc_harness as mc
from config import make_config
from errors import BatchFailure, DomainError, EmptyHistogram, SolveFailure


# ==============================
# Batch runner
# ==============================

def test_run_batch_is_independent_of_thread_count():
    cfg = make_config(beta=4, n=4, count=12, master_seed=21)
    one = mc.run_batch(cfg, threads=1)
    four = mc.run_batch(cfg, threads=4)
    assert [s.draw_index for s in one] == list(range(12))
    for a, b in zip(one, four):
        assert np.array_equal(a.lambdas, b.lambdas)
        assert a.seed_used == b.seed_used


def test_run_batch_aborts_when_too_many_draws_fail():
    cfg = make_config(beta=4, n=2, count=10, master_seed=0)
    with patch("mc_harness.sampler.run_draw", side_effect=SolveFailure("singular")):
        with pytest.raises(BatchFailure) as excinfo:
            mc.run_batch(cfg, threads=2)
    assert len(excinfo.value.failures) == 10
    assert excinfo.value.failures[0]["error"] == "SolveFailure"


# ==============================
# Histograms
# ==============================

def test_histogram_bins_and_conservation():
    hist = mc.histogram_from_moduli(np.array([0.5, 0.05, 0.999, 1.0 + 1e-9]), n=2, draws=2, n_bins=10)
    assert hist.counts[5] == 1
    assert hist.counts[0] == 1
    assert hist.counts[9] == 2
    assert hist.total_eigs == 4
    assert hist.bins[5] == (pytest.approx(0.5), pytest.approx(0.6), 1)


def test_empirical_density_integrates_to_n():
    rng = np.random.default_rng(0)
    n, draws = 3, 50
    hist = mc.histogram_from_moduli(rng.uniform(0, 1, n * draws), n=n, draws=draws, n_bins=8)
    assert np.sum(hist.empirical_density * hist.area) == pytest.approx(n)
    assert np.sum(hist.empirical_density_over_n * hist.area) == pytest.approx(1.0)


def test_histogram_rejects_bad_input():
    with pytest.raises(DomainError):
        mc.histogram_from_moduli(np.array([0.5]), n=1, draws=1, n_bins=4)
    with pytest.raises(EmptyHistogram):
        mc.histogram_from_moduli(np.array([]), n=1, draws=1, n_bins=10)
    with pytest.raises(EmptyHistogram):
        mc.radial_histogram([], 10)


def test_radial_histogram_from_samples():
    samples = mc.run_batch(make_config(beta=4, n=3, count=5, master_seed=2), threads=1)
    hist = mc.radial_histogram(samples, 6)
    assert hist.total_eigs == 15
    assert hist.draws == 5 and hist.n == 3


def test_angular_uniformity_of_uniform_angles():
    samples = mc.run_batch(make_config(beta=4, n=10, count=100, master_seed=4), threads=2)
    chi2, dof = mc.angular_uniformity(samples, n_bins=16)
    assert dof == 15
    # p ~ 1e-6 cut for a chi^2 with 15 dof
    assert chi2 < 50


def test_monte_carlo_check_fails_on_angular_clustering():
    opts = mc.VerifyOptions(n=3, count=60, bins=5, seed=3, threads=2)
    with patch("mc_harness.angular_uniformity", return_value=(1000.0, 15)):
        result = mc.check_monte_carlo(opts)
    assert result.passed is False
    assert "angular chi2 1000.0 on 15 dof" in result.detail


def test_gap_probability_matches_simulation():
    n, radius = 3, 0.3
    samples = mc.run_batch(make_config(beta=4, n=n, count=2000, master_seed=5))
    empty = float(np.mean([np.min(np.abs(s.ws)) >= radius for s in samples]))
    p = ca.gap_probability(radius, n)
    assert 0.05 < p < 0.95
    assert abs(empty - p) <= 4 * math.sqrt(p * (1 - p) / len(samples))


# ==============================
# Theory comparison
# ==============================

def test_bin_mass_of_density_totals_n():
    assert mc.bin_mass(ca.density, 4, 0.0, 1.0) == pytest.approx(4.0, rel=1e-8)
    halves = mc.bin_mass(ca.density, 4, 0.0, 0.5) + mc.bin_mass(ca.density, 4, 0.5, 1.0)
    assert halves == pytest.approx(4.0, rel=1e-8)


def test_compare_to_theory_rejects_mismatched_n():
    hist = mc.histogram_from_moduli(np.array([0.5, 0.2]), n=2, draws=1, n_bins=5)
    with pytest.raises(DomainError):
        mc.compare_to_theory(hist, 3)


def test_compare_to_theory_small_monte_carlo():
    samples = mc.run_batch(make_config(beta=4, n=5, count=400, master_seed=7), threads=2)
    report = mc.compare_to_theory(mc.radial_histogram(samples, 10), 5)
    assert report.frac_within_3se >= 0.9
    assert report.dof == 9
    assert np.sum(report.theory * math.pi * (report.edges[1:] ** 2 - report.edges[:-1] ** 2)) == pytest.approx(1.0)
    summary = report.summary()
    assert set(summary) == {"sup_z", "frac_within_3se", "chi2", "dof", "chi2_per_dof", "passed"}


def test_convergence_sweep_decreases():
    rows = mc.convergence_sweep([10, 40, 160], grid_points=81)
    devs = [row.sup_deviation for row in rows]
    assert devs[0] > devs[1] > devs[2]
    assert all(0 <= row.r_at_sup <= 0.8 for row in rows)


# ==============================
# Verification checks
# ==============================

def test_run_checks_rejects_unknown_name():
    with pytest.raises(DomainError):
        mc.run_checks(["normalization", "does_not_exist"])


def test_n1_closed_form_check_passes():
    report = mc.run_checks(["n1_closed_form"])
    assert report.passed
    assert report.failed == []
    doc = report.to_dict()
    assert doc["schema_version"] == 1
    assert doc["passed"] is True
    assert set(doc["checks"][0]) == {"name", "target", "measured", "passed", "seconds"}


def test_cheap_checks_pass():
    report = mc.run_checks(
        ["normalization", "skew_orthogonality", "density_normalization", "spherical_limit"],
        mc.VerifyOptions(n=2),
    )
    assert report.passed, [c.detail for c in report.checks]


def test_normalization_check_catches_sign_error():
    original = ca.log_c_n

    def flipped(n):
        sign, log_c = original(n)
        return -sign, log_c

    with patch("correlation_analytics.log_c_n", side_effect=flipped):
        report = mc.run_checks(["normalization"], mc.VerifyOptions(n=2))
    assert not report.passed
    assert report.failed == ["normalization"]
    assert report.checks[0].measured == pytest.approx(2.0, abs=1e-6)


def test_raised_error_fails_the_check():
    def broken(opts):
        raise SolveFailure("boom")

    with patch.dict(mc.CHECKS, {"n1_closed_form": broken}):
        report = mc.run_checks(["n1_closed_form"])
    assert not report.passed
    assert report.checks[0].measured is None
    assert report.to_dict()["checks"][0]["measured"] is None


def test_check_result_drops_non_finite_measurement():
    result = mc.CheckResult("x", "t", math.inf, False)
    assert result.to_dict()["measured"] is None


@pytest.mark.slow
def test_monte_carlo_check():
    report = mc.run_checks(["monte_carlo"], mc.VerifyOptions(seed=1))
    assert report.passed, report.checks[0].detail


@pytest.mark.slow
def test_pairing_check():
    assert mc.run_checks(["pairing"]).passed


@pytest.mark.slow
def test_full_verify():
    report = mc.run_checks()
    assert report.passed, report.failed
