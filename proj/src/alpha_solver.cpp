#include "trialkit/alpha_solver.hpp"

#include <algorithm>
#include <cmath>

#include "trialkit/correlation.hpp"
#include "trialkit/error_power.hpp"
#include "trialkit/numerics.hpp"
#include "trialkit/sim_engine.hpp"

namespace trialkit::alpha {

namespace {

double uniform_fwer(double a, const CorrelationMatrix& corr) {
  std::vector<double> alphas(corr.dim(), a);
  return power::fwer_dunnett(alphas, corr).value();
}

}  // namespace

AlphaAllocation solve_uniform_alpha(double target_fwer, const CorrelationMatrix& corr) {
  if (!(target_fwer > 0.0 && target_fwer < 1.0))
    throw ConfigError("solve_uniform_alpha: target FWER must lie strictly in (0,1)");
  corr.require_psd();
  const std::size_t k = corr.dim();
  AlphaAllocation out;
  if (k == 1) {
    out.alphas = {target_fwer};
    out.achieved_fwer = target_fwer;
    out.iterations = 0;
    return out;
  }
  // Bonferroni bounds the solution from below, the target itself from above.
  const double lo = target_fwer / static_cast<double>(k) * 0.999;
  const double hi = target_fwer;
  const double a = numerics::find_root_monotone(
      [&](double x) { return uniform_fwer(x, corr) - target_fwer; }, lo, hi, 1e-9);
  out.alphas.assign(k, a);
  out.achieved_fwer = uniform_fwer(a, corr);
  out.iterations = 1;
  return out;
}

AlphaAllocation buyback_alpha(double target_fwer, const CorrelationMatrix& remaining_corr) {
  return solve_uniform_alpha(target_fwer, remaining_corr);
}

AlphaAllocation recursive_alpha_adjust(const PlatformSchedule& schedule,
                                       double target_fwer, int max_iter,
                                       double damping) {
  if (!(target_fwer > 0.0 && target_fwer < 1.0))
    throw ConfigError("recursive_alpha_adjust: target FWER must lie strictly in (0,1)");
  if (max_iter < 1) throw ConfigError("recursive_alpha_adjust: max_iter must be positive");
  if (!(damping > 0.0 && damping <= 1.0))
    throw ConfigError("recursive_alpha_adjust: damping must lie in (0,1]");
  schedule.validate();

  PlatformSchedule current = schedule;
  const std::size_t k = schedule.comparisons.size();
  double alpha_now = target_fwer / static_cast<double>(k);

  AlphaAllocation out;
  out.converged = false;
  for (int iter = 1; iter <= max_iter; ++iter) {
    // Event targets at the current level drive the overlap structure.
    for (std::size_t i = 0; i < k; ++i) {
      auto& c = current.comparisons[i];
      if (const auto* surv = std::get_if<SurvivalOutcome>(&c.outcome)) {
        const long d = power::required_events(alpha_now, c.power, surv->hazard_ratio,
                                              c.allocation_ratio);
        c.control_event_target = static_cast<long>(
            std::lround(power::control_share_events(d, c.allocation_ratio)));
      }
    }
    const auto overlaps = sim::predicted_overlaps(current);
    const CorrelationMatrix corr = correlation::build_correlation_matrix(current, overlaps);
    const AlphaAllocation solved = solve_uniform_alpha(target_fwer, corr);
    const double alpha_next = alpha_now + damping * (solved.alphas.front() - alpha_now);

    out.alphas.assign(k, alpha_next);
    out.achieved_fwer = solved.achieved_fwer;
    out.iterations = iter;
    if (std::fabs(alpha_next - alpha_now) < 1e-6) {
      out.converged = true;
      alpha_now = alpha_next;
      break;
    }
    alpha_now = alpha_next;
  }
  out.alphas.assign(k, alpha_now);
  return out;
}

}  // namespace trialkit::alpha
