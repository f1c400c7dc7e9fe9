#pragma once

#include <span>

#include "trialkit/trial_model.hpp"

namespace trialkit::correlation {

// Correlation between the Z statistics of two comparisons whose control-arm
// information overlaps completely.  Equal ratios give A/(A+1); unequal ratios
// give sqrt(A_i/(1+A_i)) * sqrt(A_j/(1+A_j)).
double full_overlap_correlation(double ratio_i, double ratio_j);

// Equal-ratio partial overlap: (A/(A+1)) * shared/total, where shared/total is
// the fraction of control observations (patients for count-based outcomes,
// primary-outcome events for survival) entering both analyses.
double partial_overlap_correlation(double allocation_ratio, double shared, double total);

// General pairwise correlation with unequal allocation ratios and totals:
//   sqrt(A_i/(1+A_i)) * sqrt(A_j/(1+A_j)) * shared / sqrt(total_i * total_j).
// This reduces to partial_overlap_correlation for equal ratios and totals and
// to full_overlap_correlation when everything is shared.  The normalisation by
// sqrt(total_i * total_j) is the convention certified by the patient-level
// simulation oracle (see tests); normalising by the later comparison's total
// alone would give larger values and is rejected by that oracle.
double general_pairwise_correlation(const OverlapInfo& overlap, double ratio_i, double ratio_j);

// Assembles pairwise correlations into a matrix.  Pairs not covered by an
// OverlapInfo default to zero correlation.  The result is PSD-checked; a
// failure signals inconsistent overlap inputs.
CorrelationMatrix build_correlation_matrix(const PlatformSchedule& schedule,
                                           std::span<const OverlapInfo> overlaps);

}  // namespace trialkit::correlation
