#include "trialkit/correlation.hpp"

#include <cmath>

namespace trialkit::correlation {

namespace {

double shared_control_loading(double allocation_ratio) {
  if (!(allocation_ratio > 0.0))
    throw ConfigError("correlation: allocation ratio must be positive");
  return std::sqrt(allocation_ratio / (1.0 + allocation_ratio));
}

}  // namespace

double full_overlap_correlation(double ratio_i, double ratio_j) {
  return shared_control_loading(ratio_i) * shared_control_loading(ratio_j);
}

double partial_overlap_correlation(double allocation_ratio, double shared, double total) {
  if (!(total >= 1.0)) throw ConfigError("correlation: total must be at least 1");
  if (shared < 0.0 || shared > total + 1e-9)
    throw ConfigError("correlation: shared must lie in [0, total]");
  return (allocation_ratio / (allocation_ratio + 1.0)) * (shared / total);
}

double general_pairwise_correlation(const OverlapInfo& overlap, double ratio_i,
                                    double ratio_j) {
  overlap.validate();
  return shared_control_loading(ratio_i) * shared_control_loading(ratio_j) *
         overlap.shared / std::sqrt(overlap.total_i * overlap.total_j);
}

CorrelationMatrix build_correlation_matrix(const PlatformSchedule& schedule,
                                           std::span<const OverlapInfo> overlaps) {
  schedule.validate();
  const std::size_t k = schedule.comparisons.size();
  CorrelationMatrix corr(k);
  for (const auto& ov : overlaps) {
    if (ov.i >= k || ov.j >= k)
      throw ConfigError("correlation: overlap pair index out of range");
    const double rho = general_pairwise_correlation(
        ov, schedule.comparisons[ov.i].allocation_ratio,
        schedule.comparisons[ov.j].allocation_ratio);
    corr.set(ov.i, ov.j, rho);
  }
  corr.require_psd();
  return corr;
}

}  // namespace trialkit::correlation
