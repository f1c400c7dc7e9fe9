#pragma once

#include <vector>

#include "trialkit/trial_model.hpp"

namespace trialkit::alpha {

struct AlphaAllocation {
  std::vector<double> alphas;  // one per comparison, uniform split
  double achieved_fwer = 0.0;
  int iterations = 0;
  bool converged = true;  // recursive procedure reports non-convergence here
};

// Equal per-comparison significance level with Dunnett FWER equal to the
// target (bisection-bracketed root finding; the FWER is strictly increasing
// in alpha, so the bracket [target/K, target] always holds the solution).
AlphaAllocation solve_uniform_alpha(double target_fwer, const CorrelationMatrix& corr);

// Re-solves over the remaining comparisons when a planned arm is never added,
// buying back the unspent type I error.
AlphaAllocation buyback_alpha(double target_fwer, const CorrelationMatrix& remaining_corr);

// Fixed-point iteration for schedules whose overlap depends on the solved
// levels: solve alphas at the current correlations, recompute event targets
// (required_events) and hence overlaps and correlations, repeat until the
// largest alpha change drops below 1e-6.  Non-convergence is reported in the
// result, never silently.
AlphaAllocation recursive_alpha_adjust(const PlatformSchedule& schedule,
                                       double target_fwer, int max_iter = 50,
                                       double damping = 1.0);

}  // namespace trialkit::alpha
