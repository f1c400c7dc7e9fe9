#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "trialkit/trial_model.hpp"

namespace trialkit::sim {

// ---------------------------------------------------------------------------
// Expected-event calculus (closed forms; also the planning side of the CLI)
// ---------------------------------------------------------------------------

// Expected events by calendar time t for one arm accruing uniformly at `rate`
// over the window [a0, a1] with exponential event hazard:
//   rate * int_{a0}^{min(t,a1)} (1 - exp(-hazard (t - s))) ds.
double expected_events(double rate, double hazard, double a0, double a1, double t);

// Deterministic projection of a platform of survival comparisons: per-arm
// accrual rates, expected analysis times (control event target crossings) and
// expected pairwise shared control events.
struct ComparisonProjection {
  double open = 0.0;
  double control_rate = 0.0;       // control accrual while this comparison runs
  double experimental_rate = 0.0;
  double analysis_time = 0.0;      // expected e0 crossing
  double accrual_close = 0.0;      // end of the comparison's accrual window
  double expected_control_events = 0.0;  // equals e0 at analysis_time
  double expected_total_events = 0.0;    // control + experimental at analysis
};

std::vector<ComparisonProjection> project_schedule(const PlatformSchedule& schedule);

// Expected shared control events (survival) or shared control patients
// (count-based outcomes) for every pair, from the projection above.
std::vector<OverlapInfo> predicted_overlaps(const PlatformSchedule& schedule);

// ---------------------------------------------------------------------------
// Patient-level Monte Carlo
// ---------------------------------------------------------------------------

struct PatientRecord {
  double entry = 0.0;       // platform time of randomisation
  double event_time = 0.0;  // latent time from entry to event
};

// Contemporaneous-control window of one comparison; close is the accrual end
// (by default the comparison's analysis time).
struct ConcurrentWindow {
  double open = 0.0;
  double close = 0.0;
  bool contains(double entry) const { return entry >= open && entry < close; }
};

struct LogrankResult {
  double score = 0.0;     // O - E summed over event times, experimental arm
  double variance = 0.0;  // hypergeometric null variance
  double z = 0.0;         // score / sqrt(variance)
};

// One observation entering the logrank sweep.
struct SurvivalObservation {
  double time = 0.0;  // observed follow-up
  bool event = false;
  bool experimental = false;
};

// Logrank statistic over a comparison-restricted dataset.  Ties are processed
// deaths-before-censorings.  Throws NumericError when the null variance is
// zero (no events, or events confined to one arm at single-patient risk sets).
LogrankResult logrank_score(std::vector<SurvivalObservation> observations);

struct SimConfig {
  PlatformSchedule schedule;
  // Truth per comparison: hazard ratio for the experimental arm.  Empty means
  // the design hazard ratios; global_null overrides everything with 1.
  std::vector<double> truth_hazard_ratios;
  bool global_null = false;
  long replications = 10000;
  std::uint64_t seed = 0;
  bool poisson_accrual = false;  // default: deterministic midpoint spacing
  int threads = 0;               // 0 = hardware concurrency
  // Analysis trigger.  The default fires when the comparison's total
  // concurrent event count crosses e0*(1+A): a stopping rule in the event
  // filtration, under which the logrank score keeps mean zero.  Triggering on
  // the control-arm count alone (the literal trial-conduct rule) conditions
  // the last event to be a control death and shifts the null Z by
  // O(1/sqrt(e0)) toward rejection; it is available for study.
  bool control_event_trigger = false;

  void validate() const;
};

struct ReplicateResult {
  long replicate = 0;
  std::vector<double> z;             // per comparison
  std::vector<bool> rejected;        // one-sided, beneficial direction
  std::vector<double> cutoff;        // analysis times
  std::vector<double> shared_events; // row-major upper triangle, pair (i,j)
};

struct SimSummary {
  long replications = 0;
  double fwer = 0.0;  // share of replicates rejecting at least one comparison
  double fwer_se = 0.0;
  double disjunctive = 0.0;  // identical estimand under alternative truths
  double conjunctive = 0.0;
  double conjunctive_se = 0.0;
  std::vector<double> pairwise_reject;     // per comparison
  std::vector<double> pairwise_reject_se;
  std::vector<double> mean_z;
  CorrelationMatrix z_correlation{1};
  std::vector<double> mean_shared;  // upper triangle (i<j)
  std::vector<double> mean_cutoff;
};

// Runs one replicate; the stream index is derived from (seed, replicate), so
// any subset of replicates can be evaluated in any order.
ReplicateResult run_single_replicate(const SimConfig& config, long replicate);

// Shared control events of a pair within one replicate.
double shared_control_events(const ReplicateResult& rep, std::size_t i, std::size_t j);

// Pearson correlation of two equal-length samples.
double empirical_correlation(std::span<const double> x, std::span<const double> y);

// Aggregates replicates (optionally across threads; the reduction is chunked
// deterministically so the thread count never changes the result).
SimSummary simulate_platform(const SimConfig& config);

// Streams one CSV row per (replicate, comparison) to `sink`.
void write_replicates_csv(const SimConfig& config, std::ostream& sink);

}  // namespace trialkit::sim
