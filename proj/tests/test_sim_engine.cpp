#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "trialkit/correlation.hpp"
#include "trialkit/rng.hpp"
#include "trialkit/sim_engine.hpp"

using namespace trialkit;
using namespace trialkit::sim;

namespace {

PlatformSchedule two_arm_platform(double allocation, long e0, double second_open,
                                  double hr = 0.75) {
  PlatformSchedule s;
  s.accrual_rate = 500;
  ComparisonSpec c;
  c.alpha = 0.025;
  c.power = 0.9;
  c.allocation_ratio = allocation;
  c.outcome = SurvivalOutcome{0.693, hr};
  c.control_event_target = e0;
  c.id = "E1";
  s.comparisons.push_back(c);
  c.id = "E2";
  c.open_time = second_open;
  s.comparisons.push_back(c);
  return s;
}

// Simple single-comparison dataset generator used by the logrank-level tests:
// one control and one experimental stream from time zero, analysed when the
// total event count crosses `d_target`.
std::vector<SurvivalObservation> single_comparison_dataset(long rep, std::uint64_t seed,
                                                           double rate0, double rate1,
                                                           double lambda0, double lambda1,
                                                           long d_target, double* cutoff_out) {
  RngStream ctrl(seed, static_cast<std::uint32_t>(rep), 101);
  RngStream arm(seed, static_cast<std::uint32_t>(rep), 102);
  struct P { double entry, event; bool experimental; };
  std::vector<P> ps;
  const double horizon = 40.0;
  for (long i = 0; i * 1.0 / rate0 < horizon; ++i) {
    const double entry = (i + 0.5) / rate0;
    ps.push_back({entry, entry + ctrl.exponential(lambda0), false});
  }
  for (long i = 0; i * 1.0 / rate1 < horizon; ++i) {
    const double entry = (i + 0.5) / rate1;
    ps.push_back({entry, entry + arm.exponential(lambda1), true});
  }
  std::vector<double> events;
  for (const auto& p : ps) events.push_back(p.event);
  std::nth_element(events.begin(), events.begin() + (d_target - 1), events.end());
  const double cutoff = events[d_target - 1];
  if (cutoff_out) *cutoff_out = cutoff;
  std::vector<SurvivalObservation> obs;
  for (const auto& p : ps) {
    if (p.entry >= cutoff) continue;
    obs.push_back({std::min(p.event, cutoff) - p.entry, p.event <= cutoff, p.experimental});
  }
  return obs;
}

}  // namespace

TEST_SUITE("sim_engine") {

TEST_CASE("expected events closed form") {
  CHECK(expected_events(500, 0.693, 0.0, 1.0, 0.0) == 0.0);
  CHECK(expected_events(500, 0.693, 0.5, 1.0, 0.5) == 0.0);
  // huge hazard: everyone accrued so far has died
  CHECK(expected_events(500, 5000.0, 0.0, 1.0, 1.0) == doctest::Approx(500.0).epsilon(1e-3));
  CHECK(expected_events(500, 5000.0, 0.0, 1.0, 3.0) == doctest::Approx(500.0).epsilon(1e-6));
  // monotone in t
  double prev = -1.0;
  for (double t = 0.0; t < 4.0; t += 0.1) {
    const double e = expected_events(250, 0.693, 0.0, 2.0, t);
    CHECK(e >= prev);
    prev = e;
  }
}

TEST_CASE("expected events agrees with Monte Carlo") {
  const double rate = 500, lambda = 0.693, t = 1.0;
  RngStream rng(99, 0, 0);
  const long n = 500;  // patients per replicate at rate 500 over [0,1]
  const long reps = 400;
  double sum = 0.0, sumsq = 0.0;
  for (long r = 0; r < reps; ++r) {
    long events = 0;
    for (long i = 0; i < n; ++i) {
      const double entry = (i + 0.5) / rate;
      if (entry + rng.exponential(lambda) <= t) ++events;
    }
    sum += events;
    sumsq += static_cast<double>(events) * events;
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sumsq / reps - mean * mean) / reps);
  const double expected = expected_events(rate, lambda, 0.0, 1.0, t);
  CHECK(std::fabs(mean - expected) <= 3.0 * se);
}

TEST_CASE("schedule projection reproduces the three-arm design grid") {
  struct Cell { double A; long e0; double t1; };
  const Cell cells[] = {{0.5, 401, 2.365983}, {1.0, 264, 2.180595}, {2.0, 196, 2.332388}};
  for (const auto& cell : cells) {
    const auto proj = project_schedule(two_arm_platform(cell.A, cell.e0, 0.0));
    CHECK(proj[0].analysis_time == doctest::Approx(cell.t1).epsilon(1e-5));
    CHECK(proj[0].control_rate == doctest::Approx(500.0 / (1 + cell.A)).epsilon(1e-12));
    CHECK(proj[0].expected_control_events == doctest::Approx(cell.e0).epsilon(1e-6));
  }

  // deferred second arm: expected shared control events per the event window
  const auto ov1 = predicted_overlaps(two_arm_platform(1.0, 264, 1.0));
  CHECK(ov1[0].shared == doctest::Approx(93.58).epsilon(2e-3));
  const auto ov05 = predicted_overlaps(two_arm_platform(0.5, 401, 1.0));
  CHECK(ov05[0].shared == doctest::Approx(160.98).epsilon(2e-3));
  const auto ov2 = predicted_overlaps(two_arm_platform(2.0, 196, 1.0));
  CHECK(ov2[0].shared == doctest::Approx(77.09).epsilon(2e-3));
  // simultaneous arms share everything
  const auto ov0 = predicted_overlaps(two_arm_platform(1.0, 264, 0.0));
  CHECK(ov0[0].shared == doctest::Approx(264.0).epsilon(1e-6));
}

TEST_CASE("projection flags unreachable targets") {
  PlatformSchedule s = two_arm_platform(1.0, 264, 0.0);
  s.comparisons[1].accrual_duration = 0.05;  // a handful of patients only
  CHECK_THROWS_AS(project_schedule(s), NumericError);
}

TEST_CASE("logrank on a hand-computed toy dataset") {
  // two patients, both events: experimental at t=1, control at t=2
  // t=1: at risk {both}, n1=1, n=2: O-E = 1 - 1/2, V = 1/4
  // t=2: at risk {control}, n1=0, n=1: no information
  const LogrankResult lr = logrank_score({{1.0, true, true}, {2.0, true, false}});
  CHECK(lr.score == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(lr.variance == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(lr.z == doctest::Approx(1.0).epsilon(1e-12));

  // four patients with one censored and a tie; hand-computed sweep
  //  t=1: deaths {exp}, at risk 4 (2 exp): O-E = 1 - 2/4 = 0.5, V = 0.25
  //  t=2: death {ctrl} with exp censored at 2 still at risk:
  //       at risk 3 (1 exp): O-E = 0 - 1/3, V = (1/3)(2/3) = 2/9
  const LogrankResult lr2 = logrank_score(
      {{1.0, true, true}, {2.0, true, false}, {2.0, false, true}, {3.0, true, false}});
  CHECK(lr2.score == doctest::Approx(0.5 - 1.0 / 3.0).epsilon(1e-12));
  CHECK(lr2.variance == doctest::Approx(0.25 + 2.0 / 9.0).epsilon(1e-12));

  CHECK_THROWS_AS(logrank_score({{1.0, false, true}, {2.0, false, false}}), NumericError);
  CHECK_THROWS_AS(logrank_score({}), NumericError);
  // events confined to a single arm carry no comparative information
  CHECK_THROWS_AS(logrank_score({{1.0, true, true}, {2.0, true, true}}), NumericError);
}

TEST_CASE("logrank null distribution is standard normal") {
  const long reps = 2000;
  std::vector<double> zs;
  for (long r = 0; r < reps; ++r) {
    const auto obs = single_comparison_dataset(r, 7, 125, 125, 0.693, 0.693, 120, nullptr);
    zs.push_back(logrank_score(obs).z);
  }
  const double mean = std::accumulate(zs.begin(), zs.end(), 0.0) / reps;
  double var = 0.0;
  for (double z : zs) var += (z - mean) * (z - mean);
  var /= reps;
  CHECK(std::fabs(mean) < 0.07);        // ~3/sqrt(reps)
  CHECK(std::fabs(var - 1.0) < 0.10);
}

TEST_CASE("logrank rejection rate matches the design at the sized event count") {
  // d = 508 with A = 1 was sized for 90% power at one-sided 0.025
  const long reps = 2500;
  long rejected = 0;
  for (long r = 0; r < reps; ++r) {
    const auto obs =
        single_comparison_dataset(r, 11, 250, 250, 0.693, 0.693 * 0.75, 508, nullptr);
    if (-logrank_score(obs).z >= 1.959964) ++rejected;
  }
  const double rate = static_cast<double>(rejected) / reps;
  CHECK(std::fabs(rate - 0.90) < 0.02);
}

TEST_CASE("independent increments across information times") {
  // one comparison analysed at 132 and 264 events: Cov(Z1, Z2) ~ sqrt(t)
  const long reps = 1500;
  std::vector<double> z1, z2;
  for (long r = 0; r < reps; ++r) {
    const auto early = single_comparison_dataset(r, 13, 250, 250, 0.693, 0.693, 132, nullptr);
    const auto late = single_comparison_dataset(r, 13, 250, 250, 0.693, 0.693, 264, nullptr);
    z1.push_back(logrank_score(early).z);
    z2.push_back(logrank_score(late).z);
  }
  const double rho = empirical_correlation(z1, z2);
  const double expected = std::sqrt(132.0 / 264.0);
  CHECK(std::fabs(rho - expected) < 3.0 / std::sqrt(static_cast<double>(reps)));
}

TEST_CASE("replicates are deterministic and order-insensitive") {
  SimConfig cfg;
  cfg.schedule = two_arm_platform(1.0, 80, 0.3);
  cfg.global_null = true;
  cfg.replications = 60;
  cfg.seed = 314;

  const auto a = run_single_replicate(cfg, 17);
  const auto b = run_single_replicate(cfg, 17);
  CHECK(a.z == b.z);
  CHECK(a.cutoff == b.cutoff);
  CHECK(a.shared_events == b.shared_events);

  cfg.threads = 1;
  const auto s1 = simulate_platform(cfg);
  cfg.threads = 4;
  const auto s4 = simulate_platform(cfg);
  CHECK(s1.fwer == s4.fwer);
  CHECK(s1.mean_z == s4.mean_z);
  CHECK(s1.mean_shared == s4.mean_shared);
  CHECK(s1.z_correlation(0, 1) == s4.z_correlation(0, 1));

  cfg.seed = 315;
  const auto other = simulate_platform(cfg);
  CHECK(other.mean_z != s1.mean_z);
}

TEST_CASE("poisson accrual variant stays calibrated") {
  SimConfig cfg;
  cfg.schedule = two_arm_platform(1.0, 100, 0.0);
  cfg.global_null = true;
  cfg.replications = 800;
  cfg.seed = 2718;
  cfg.poisson_accrual = true;
  const auto s = simulate_platform(cfg);
  for (std::size_t k = 0; k < 2; ++k)
    CHECK(std::fabs(s.pairwise_reject[k] - 0.025) <= 3.0 * 0.0056 + 1e-12);
}

TEST_CASE("platform simulation matches the analytic correlation and size") {
  SimConfig cfg;
  cfg.schedule = two_arm_platform(1.0, 264, 1.0);
  cfg.global_null = true;
  cfg.replications = 3000;
  cfg.seed = 424242;
  const auto s = simulate_platform(cfg);

  // marginal null calibration: rejection rate = alpha within 3 SE
  const double se = std::sqrt(0.025 * 0.975 / cfg.replications);
  CHECK(std::fabs(s.pairwise_reject[0] - 0.025) <= 3.0 * se);
  CHECK(std::fabs(s.pairwise_reject[1] - 0.025) <= 3.0 * se);

  // empirical correlation vs the partial-overlap formula
  const auto ov = predicted_overlaps(cfg.schedule);
  const double rho = correlation::general_pairwise_correlation(ov[0], 1.0, 1.0);
  CHECK(rho == doctest::Approx(0.1772).epsilon(1e-2));
  CHECK(std::fabs(s.z_correlation(0, 1) - rho) <= 3.0 / std::sqrt(cfg.replications));

  // shared events: per-replicate bound and mean near the expectation
  CHECK(std::fabs(s.mean_shared[0] - ov[0].shared) <= 0.05 * ov[0].shared);
  for (long r = 0; r < 50; ++r) {
    const auto rep = run_single_replicate(cfg, r);
    CHECK(rep.shared_events[0] >= 0.0);
    CHECK(rep.shared_events[0] <= 264.0);
    CHECK(shared_control_events(rep, 0, 1) == rep.shared_events[0]);
    CHECK(shared_control_events(rep, 1, 0) == rep.shared_events[0]);
  }
}

TEST_CASE("mixed-allocation correlation formula passes the simulation gate") {
  // Unequal ratios and totals: the closed form must agree with the
  // patient-level engine within 3 Monte Carlo standard errors, which rejects
  // the alternative normalisation by the later comparison's total alone
  // (that form sits more than 6 SE away at 50k replicates).
  PlatformSchedule s;
  s.accrual_rate = 500;
  ComparisonSpec c;
  c.alpha = 0.025;
  c.power = 0.9;
  c.outcome = SurvivalOutcome{0.693, 0.75};
  c.id = "E1";
  c.allocation_ratio = 0.5;
  c.control_event_target = 401;
  s.comparisons.push_back(c);
  c.id = "E6";
  c.allocation_ratio = 1.0;
  c.control_event_target = 267;
  c.open_time = 1.465;
  s.comparisons.push_back(c);

  SimConfig cfg;
  cfg.schedule = s;
  cfg.global_null = true;
  cfg.replications = 25000;
  cfg.seed = 99;
  const auto sum = simulate_platform(cfg);

  const auto ov = predicted_overlaps(s);
  const double rho = correlation::general_pairwise_correlation(ov[0], 0.5, 1.0);
  const double se = (1.0 - rho * rho) / std::sqrt(static_cast<double>(cfg.replications));
  CHECK(std::fabs(sum.z_correlation(0, 1) - rho) <= 3.0 * se);
  const double later_total_form = rho * std::sqrt(ov[0].total_i / ov[0].total_j);
  CHECK(std::fabs(sum.z_correlation(0, 1) - later_total_form) > 3.0 * se);
}

TEST_CASE("powers under the design effects match the analytic formulas") {
  // e0 = 254 makes the total-event trigger fire at 508 events, the count that
  // delivers 90% pairwise power at one-sided 0.025 for HR 0.75 and A = 1.
  // (The published three-arm designs carry e0 = 264 from different software
  // conventions; at that target the realised marginal power is ~0.91.)
  SimConfig cfg;
  cfg.schedule = two_arm_platform(1.0, 254, 0.0);
  cfg.replications = 4000;
  cfg.seed = 77;
  const auto s = simulate_platform(cfg);

  const double se_m = std::sqrt(0.9 * 0.1 / cfg.replications);
  CHECK(std::fabs(s.pairwise_reject[0] - 0.90) <= 3 * se_m);
  CHECK(std::fabs(s.pairwise_reject[1] - 0.90) <= 3 * se_m);

  // The analytic formulas evaluate the joint rejection at the null
  // correlation (0.5 here).  At a design-sized alternative the realised
  // Z correlation drops (about 0.44 at this drift), which moves the joint
  // powers a few thousandths; 0.01 covers the model gap plus noise.
  CHECK(s.z_correlation(0, 1) < 0.5);
  CHECK(std::fabs(s.disjunctive - 0.9676) <= 0.01);
  CHECK(std::fabs(s.conjunctive - 0.8324) <= 0.01);
}

TEST_CASE("fwer is largest under the global null") {
  SimConfig null_cfg;
  null_cfg.schedule = two_arm_platform(1.0, 120, 0.0);
  null_cfg.global_null = true;
  null_cfg.replications = 2000;
  null_cfg.seed = 5;
  const auto under_null = simulate_platform(null_cfg);

  // mixed truth: one genuinely effective arm; false rejections only from E2
  SimConfig mixed = null_cfg;
  mixed.global_null = false;
  mixed.truth_hazard_ratios = {0.75, 1.0};
  const auto under_mixed = simulate_platform(mixed);
  const double false_reject = under_mixed.pairwise_reject[1];
  CHECK(false_reject < under_null.fwer);
}

TEST_CASE("disjoint or empty windows are degenerate") {
  const ConcurrentWindow w{1.0, 2.0};
  CHECK(w.contains(1.0));
  CHECK(!w.contains(2.0));
  CHECK(!w.contains(0.5));
  const ConcurrentWindow empty{2.0, 2.0};
  for (double t = 0.0; t < 4.0; t += 0.5) CHECK(!empty.contains(t));
}

TEST_CASE("empirical correlation basics") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(empirical_correlation(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  RngStream rng(1, 0, 0);
  std::vector<double> a(4000), b(4000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.uniform();
    b[i] = rng.uniform();
  }
  CHECK(std::fabs(empirical_correlation(a, b)) < 3.0 / std::sqrt(4000.0));
  const std::vector<double> flat{1, 1, 1};
  CHECK_THROWS_AS(empirical_correlation(flat, flat), NumericError);
  CHECK_THROWS_AS(empirical_correlation(x, flat), ConfigError);
}

TEST_CASE("config validation") {
  SimConfig cfg;
  cfg.schedule = two_arm_platform(1.0, 100, 0.0);
  cfg.replications = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.replications = 10;
  cfg.truth_hazard_ratios = {0.75};  // wrong length
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.truth_hazard_ratios = {0.75, -1.0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.truth_hazard_ratios.clear();
  cfg.schedule.comparisons[0].outcome = ContinuousOutcome{};
  cfg.schedule.comparisons[0].control_event_target = 0;
  cfg.schedule.comparisons[0].control_n_target = 100;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);  // survival-only engine
}

}  // TEST_SUITE
