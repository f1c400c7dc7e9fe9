#include "doctest.h"

#include <cmath>

#include "trialkit/trial_model.hpp"

using namespace trialkit;

TEST_SUITE("trial_model") {

TEST_CASE("fisher information per outcome family") {
  CHECK(fisher_information(ContinuousOutcome{0, 0, 1, 1}, 100, 1.0) ==
        doctest::Approx(50.0).epsilon(1e-12));
  CHECK(fisher_information(BinaryOutcome{0.5, 0.5, BinaryScale::risk_difference}, 100, 1.0) ==
        doctest::Approx(200.0).epsilon(1e-12));
  CHECK(fisher_information(SurvivalOutcome{0.693, 0.75}, 400, 1.0) ==
        doctest::Approx(100.0).epsilon(1e-12));
  // unequal allocation shifts the harmonic weights
  CHECK(fisher_information(ContinuousOutcome{0, 0, 1, 2}, 50, 0.5) ==
        doctest::Approx(1.0 / (1.0 / 50 + 4.0 / 25.0)).epsilon(1e-12));
}

TEST_CASE("fisher information grows with counts and with allocation on (0,1]") {
  const ContinuousOutcome sym{0, 0, 1, 1};
  double prev = 0.0;
  for (long n = 10; n <= 500; n += 10) {
    const double v = fisher_information(sym, n, 1.0);
    CHECK(v > prev);
    prev = v;
  }
  prev = 0.0;
  for (double a = 0.1; a <= 1.0; a += 0.05) {
    const double v = fisher_information(sym, 100, a);
    CHECK(v > prev);
    prev = v;
  }
  const SurvivalOutcome surv{0.693, 0.75};
  prev = 0.0;
  for (long d = 50; d <= 600; d += 25) {
    const double v = fisher_information(surv, d, 0.5);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("treatment effects") {
  CHECK(effect_theta(SurvivalOutcome{0.693, 0.75}) ==
        doctest::Approx(-0.287682).epsilon(1e-5));
  CHECK(effect_theta(ContinuousOutcome{1.3, 1.3, 1, 1}) == 0.0);
  CHECK(effect_theta(BinaryOutcome{0.5, 0.5, BinaryScale::log_odds_ratio}) == 0.0);
  // beneficial arm ("smaller is better") carries a negative sign
  CHECK(effect_theta(SurvivalOutcome{0.693, 0.8}) < 0.0);
  CHECK(effect_theta(ContinuousOutcome{1.0, 0.5, 1, 1}) < 0.0);
  CHECK(effect_theta(BinaryOutcome{0.4, 0.3, BinaryScale::risk_difference}) ==
        doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(effect_theta(BinaryOutcome{0.4, 0.3, BinaryScale::log_risk_ratio}) ==
        doctest::Approx(std::log(0.75)).epsilon(1e-12));
}

TEST_CASE("each binary scale pairs its own variance") {
  const BinaryOutcome rd{0.3, 0.2, BinaryScale::risk_difference};
  const BinaryOutcome lor{0.3, 0.2, BinaryScale::log_odds_ratio};
  const BinaryOutcome lrr{0.3, 0.2, BinaryScale::log_risk_ratio};
  const double v_rd = fisher_information(rd, 100, 1.0);
  const double v_lor = fisher_information(lor, 100, 1.0);
  const double v_lrr = fisher_information(lrr, 100, 1.0);
  CHECK(v_rd != doctest::Approx(v_lor));
  CHECK(v_lor != doctest::Approx(v_lrr));
  // all scales agree on the Z drift direction
  CHECK(effect_theta(rd) * std::sqrt(v_rd) < 0.0);
  CHECK(effect_theta(lor) * std::sqrt(v_lor) < 0.0);
  CHECK(effect_theta(lrr) * std::sqrt(v_lrr) < 0.0);
}

TEST_CASE("noncentrality matches the design identity") {
  // d = 508 was sized for alpha 0.025 / power 0.9, so theta*sqrt(V) recovers
  // -(z_{0.975} + z_{0.9}) up to the integer rounding of d.
  const double nc = noncentrality(SurvivalOutcome{0.693, 0.75}, 508, 1.0);
  CHECK(nc == doctest::Approx(-3.242).epsilon(1e-3));
  CHECK(std::fabs(nc + 1.959964 + 1.281552) < 0.01);
  CHECK(noncentrality(SurvivalOutcome{0.693, 1.0}, 508, 1.0) == 0.0);
  // A -> large keeps the information bounded by the control arm
  const double huge = noncentrality(ContinuousOutcome{0, -0.3, 1, 1}, 100, 1e9);
  CHECK(std::isfinite(huge));
  CHECK(std::fabs(huge) < std::fabs(-0.3) * std::sqrt(101.0));
}

TEST_CASE("outcome validation") {
  CHECK_THROWS_AS(validate_outcome(ContinuousOutcome{0, 0, -1, 1}), ConfigError);
  CHECK_THROWS_AS(validate_outcome(BinaryOutcome{0.0, 0.5, BinaryScale::risk_difference}),
                  ConfigError);
  CHECK_THROWS_AS(validate_outcome(BinaryOutcome{0.5, 1.0, BinaryScale::risk_difference}),
                  ConfigError);
  CHECK_THROWS_AS(validate_outcome(SurvivalOutcome{0.0, 0.75}), ConfigError);
  CHECK_THROWS_AS(validate_outcome(SurvivalOutcome{0.693, -0.75}), ConfigError);
  CHECK_THROWS_AS(fisher_information(SurvivalOutcome{0.693, 0.75}, 0, 1.0), ConfigError);
}

TEST_CASE("comparison and schedule invariants") {
  ComparisonSpec c;
  c.id = "E1";
  c.outcome = SurvivalOutcome{0.693, 0.75};
  c.control_event_target = 264;
  c.validate();

  ComparisonSpec bad = c;
  bad.alpha = 0.6;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.control_n_target = 100;  // both targets set
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.control_event_target = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.outcome = ContinuousOutcome{};
  CHECK_THROWS_AS(bad.validate(), ConfigError);  // e0 with a count-based outcome

  PlatformSchedule s;
  s.accrual_rate = 500;
  s.comparisons = {c};
  s.validate();
  s.comparisons.push_back(c);  // duplicate id
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.comparisons.clear();
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("correlation matrix type") {
  CorrelationMatrix id(3);
  CHECK(id(0, 0) == 1.0);
  CHECK(id(0, 1) == 0.0);
  CHECK(id.min_eigenvalue() == doctest::Approx(1.0));

  CorrelationMatrix m(2);
  m.set(0, 1, 0.5);
  CHECK(m(1, 0) == 0.5);
  m.require_psd();
  CHECK_THROWS_AS(m.set(0, 1, 1.5), ConfigError);
  CHECK_THROWS_AS(m.set(0, 0, 0.5), ConfigError);

  CorrelationMatrix bad(3);
  bad.set(0, 1, 0.95);
  bad.set(0, 2, -0.95);
  bad.set(1, 2, 0.95);
  CHECK(bad.min_eigenvalue() < -1e-10);
  CHECK_THROWS_AS(bad.require_psd(), NumericError);

  CHECK_THROWS_AS(CorrelationMatrix(2, {1.0, 0.3, 0.2, 1.0}), ConfigError);  // asymmetric
  CHECK_THROWS_AS(CorrelationMatrix(2, {0.9, 0.3, 0.3, 1.0}), ConfigError);  // diagonal
}

TEST_CASE("product structure detection") {
  CorrelationMatrix m(3);
  const double l1 = 0.7, l2 = 0.5, l3 = 0.3;
  m.set(0, 1, l1 * l2);
  m.set(0, 2, l1 * l3);
  m.set(1, 2, l2 * l3);
  const auto lambda = m.product_structure();
  REQUIRE(lambda.has_value());
  CHECK((*lambda)[0] == doctest::Approx(l1).epsilon(1e-9));
  CHECK((*lambda)[1] == doctest::Approx(l2).epsilon(1e-9));
  CHECK((*lambda)[2] == doctest::Approx(l3).epsilon(1e-9));

  CHECK(CorrelationMatrix(4).product_structure().has_value());  // identity: all zero

  CorrelationMatrix np(3);  // 0.12/0.01/0.17 cannot factor (lambda^2 would exceed 1)
  np.set(0, 1, 0.12);
  np.set(0, 2, 0.01);
  np.set(1, 2, 0.17);
  CHECK(!np.product_structure().has_value());

  CorrelationMatrix sub(3);
  sub.set(0, 1, 0.4);
  sub.set(0, 2, 0.2);
  sub.set(1, 2, 0.3);
  const std::vector<std::size_t> keep{0, 2};
  const auto s = sub.submatrix(keep);
  CHECK(s.dim() == 2);
  CHECK(s(0, 1) == 0.2);
}

}  // TEST_SUITE
