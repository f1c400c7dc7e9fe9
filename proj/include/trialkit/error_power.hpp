#pragma once

#include <optional>
#include <span>
#include <string>

#include "trialkit/numerics.hpp"
#include "trialkit/trial_model.hpp"

namespace trialkit::power {

enum class FwerMethod { sidak, bonferroni, dunnett };

struct FwerResult {
  Probability value;
  FwerMethod method;
  std::optional<CorrelationMatrix> corr_used;
};

// P(Z_1 <= c_1, ..., Z_K <= c_K) for the given correlation matrix, dispatched
// to the cheapest exact route: closed form for K=1, the bivariate quadrature
// for K=2, the single-factor quadrature when the matrix has product structure
// and randomized QMC otherwise (confidence half-width <= qmc_eps).
Probability mvn_lower_cdf(std::span<const double> c, const CorrelationMatrix& corr,
                          double qmc_eps = 1e-6);

// Familywise error rate approximations for one-sided tests at levels alphas.
Probability fwer_sidak(std::span<const double> alphas);        // 1 - prod(1-a)
Probability fwer_bonferroni(std::span<const double> alphas);   // min(1, sum a)
Probability fwer_dunnett(std::span<const double> alphas, const CorrelationMatrix& corr);

// Same computations packaged with the method tag and, for the Dunnett route,
// the correlation matrix that produced the value.
FwerResult fwer_report(FwerMethod method, std::span<const double> alphas,
                       const CorrelationMatrix& corr);

// Disjunctive (any-pair) and conjunctive (all-pairs) power from per-comparison
// target powers omegas and the correlation of the Z statistics.
Probability disjunctive_power(std::span<const double> omegas, const CorrelationMatrix& corr);
Probability conjunctive_power(std::span<const double> omegas, const CorrelationMatrix& corr);

// Power of a single comparison: Phi(|theta| sqrt(V) - z_{1-alpha}).
Probability pairwise_power(const OutcomeSpec& outcome, long n0_or_d,
                           double allocation_ratio, double alpha);

// Total events required for a survival comparison:
//   ceil( (z_{1-alpha} + z_power)^2 (1+A)^2 / (A log(HR)^2) ).
long required_events(double alpha, double power, double hazard_ratio,
                     double allocation_ratio);

// Expected control-arm share of the total events: d / (1+A).  Exact under the
// null and at full follow-up under any truth; used to map required_events onto
// a control-arm event target.
double control_share_events(long total_events, double allocation_ratio);

// ---------------------------------------------------------------------------
// Strategy guidance for adding comparisons to a running platform
// ---------------------------------------------------------------------------

enum class Strategy {
  control_pwer_only,
  split_sidak_or_bonferroni,
  split_dunnett,
  recursive_adjust,
};

struct StrategyContext {
  bool fwer_control_required = false;
  bool questions_related = false;
  std::size_t comparisons = 1;  // K, counting the added arms
  std::vector<double> allocation_ratios;
  std::vector<double> correlations;  // pairwise, any order
  // An unplanned addition changes the overlap of existing comparisons once
  // their significance levels move, which calls for the recursive procedure.
  bool unplanned_addition = false;
};

// Rule-of-thumb cutovers; the defaults mirror the guidance this library ships
// with (Sidak/Bonferroni acceptable below correlation 0.30, equivalently about
// 60% information-time overlap at equal allocation).
struct StrategyThresholds {
  double correlation_cutover = 0.30;
};

Strategy strategy_recommend(const StrategyContext& ctx,
                            const StrategyThresholds& thresholds = {});

std::string to_string(Strategy s);
std::string to_string(FwerMethod m);

}  // namespace trialkit::power
