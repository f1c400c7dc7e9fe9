"""Smoke tests for the python bindings: every exposed operation is called once
and checked against an independently known value."""

import math
import os

import pytest

import trialkit as tk

SCENARIOS = os.environ.get("TRIALKIT_SCENARIO_DIR", "scenarios")


def test_normal_machinery():
    assert tk.std_normal_cdf(0.0) == pytest.approx(0.5, abs=1e-12)
    assert tk.std_normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-5)
    # Sheppard's identity at rho = 0.5
    assert tk.bivariate_normal_cdf(0, 0, 0.5) == pytest.approx(1 / 4 + math.asin(0.5) / (2 * math.pi), abs=1e-9)
    l = math.sqrt(0.5)
    assert tk.mvn_orthant_product_corr([1.0, 1.0], [l, l]) == pytest.approx(
        tk.bivariate_normal_cdf(1.0, 1.0, 0.5), abs=1e-7
    )
    est, half = tk.mvn_cdf_qmc([0, 0, 0], [[1, 0, 0], [0, 1, 0], [0, 0, 1]], eps=1e-5, seed=1)
    assert est == pytest.approx(0.125, abs=1e-4)
    assert half <= 1e-5
    root = tk.find_root_monotone(lambda x: x - 0.5, 0.0, 1.0, 1e-10)
    assert root == pytest.approx(0.5, abs=1e-9)


def test_model_and_correlation():
    surv = tk.SurvivalOutcome(control_hazard=0.693, hazard_ratio=0.75)
    assert tk.fisher_information(surv, 400, 1.0) == pytest.approx(100.0)
    assert tk.effect_theta(surv) == pytest.approx(math.log(0.75))
    assert tk.noncentrality(surv, 508, 1.0) == pytest.approx(-3.242, abs=1e-3)

    assert tk.full_overlap_correlation(1.0, 1.0) == pytest.approx(0.5)
    assert tk.partial_overlap_correlation(1.0, 94, 264) == pytest.approx(0.178, abs=1e-3)
    assert tk.general_pairwise_correlation(77, 401, 267, 0.5, 1.0) == pytest.approx(0.096, abs=1e-3)


def test_error_rates_and_solver():
    eye = [[1.0, 0.0], [0.0, 1.0]]
    rho5 = [[1.0, 0.5], [0.5, 1.0]]
    assert tk.fwer_sidak([0.025, 0.025]) == pytest.approx(0.049375)
    assert tk.fwer_bonferroni([0.025, 0.025]) == pytest.approx(0.05)
    assert tk.fwer_dunnett([0.025, 0.025], eye) == pytest.approx(0.049375, abs=1e-9)
    assert tk.fwer_dunnett([0.025, 0.025], rho5) == pytest.approx(0.0454, abs=1e-3)
    assert tk.disjunctive_power([0.9, 0.9], rho5) == pytest.approx(0.9676, abs=1e-3)
    assert tk.conjunctive_power([0.9, 0.9], rho5) == pytest.approx(0.8324, abs=1e-3)

    assert tk.required_events(0.025, 0.9, 0.75, 1.0) == 508
    assert tk.control_share_events(508, 1.0) == pytest.approx(254.0)
    assert tk.pairwise_power(tk.SurvivalOutcome(0.693, 0.75), 508, 1.0, 0.025) == pytest.approx(0.90, abs=3e-3)

    sol = tk.solve_uniform_alpha(0.05, eye)
    assert sol.alphas[0] == pytest.approx(1 - math.sqrt(0.95), abs=1e-6)
    assert sol.achieved_fwer == pytest.approx(0.05, abs=1e-6)
    bb = tk.buyback_alpha(0.025, rho5)
    assert bb.alphas[0] == pytest.approx(0.013479, abs=1e-4)

    with pytest.raises(ValueError):
        tk.required_events(0.025, 0.9, 1.0, 1.0)
    with pytest.raises(ArithmeticError):
        tk.bivariate_normal_cdf(0, 0, 1.5)


def test_scenario_roundtrip_and_simulation():
    sc = tk.load_scenario(os.path.join(SCENARIOS, "table2_A1.toml"))
    assert sc.comparison_ids == ["E1", "E2"]
    corr = sc.correlation_matrix()
    assert corr[0][1] == pytest.approx(0.5, abs=1e-9)

    ov = sc.predicted_overlaps()
    assert ov[0]["shared"] == pytest.approx(264.0, abs=1e-6)

    sol = sc.solve(0.05)
    assert 0.025 < sol.alphas[0] < 0.05

    out = sc.simulate(reps=300, seed=42, null_truth=True)
    assert out["replications"] == 300
    assert 0.0 <= out["any_rejection"] <= 0.2
    again = sc.simulate(reps=300, seed=42, null_truth=True)
    assert out["mean_z"] == again["mean_z"]  # deterministic for a fixed seed

    assert tk.expected_events(500, 0.693, 0.0, 1.0, 0.0) == 0.0


def test_unknown_key_rejection(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("spec = 1\nwhoops = 2\n[platform]\naccrual_rate = 10\n")
    with pytest.raises(ValueError, match="whoops"):
        tk.load_scenario(str(bad))
