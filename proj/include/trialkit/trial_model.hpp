#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "trialkit/errors.hpp"

namespace trialkit {

// ---------------------------------------------------------------------------
// Outcome families.  theta is the treatment effect entering Z = theta*sqrt(V);
// "smaller is better" throughout, so a beneficial arm has theta < 0 for
// survival (HR < 1) and for continuous outcomes with mu1 < mu0.
// ---------------------------------------------------------------------------

enum class BinaryScale { risk_difference, log_odds_ratio, log_risk_ratio };

struct ContinuousOutcome {
  double mu0 = 0.0;
  double mu1 = 0.0;
  double sigma0 = 1.0;  // > 0
  double sigma1 = 1.0;  // > 0
};

struct BinaryOutcome {
  double p0 = 0.5;  // in (0,1)
  double p1 = 0.5;  // in (0,1)
  BinaryScale scale = BinaryScale::risk_difference;
};

struct SurvivalOutcome {
  double lambda0 = 1.0;      // control-arm hazard per unit time, > 0
  double hazard_ratio = 1.0; // experimental vs control, > 0
};

using OutcomeSpec = std::variant<ContinuousOutcome, BinaryOutcome, SurvivalOutcome>;

void validate_outcome(const OutcomeSpec& outcome);

// Survival comparisons accumulate information in events, the others in
// patients.
bool event_based(const OutcomeSpec& outcome);

// Fisher information V for one pairwise comparison given the control-arm
// count n0 (patients) or the total event count d (survival) and the
// experimental:control allocation ratio A.
//   continuous:  (sigma0^2/n0 + sigma1^2/(A n0))^-1
//   binary:      per selected scale
//   survival:    d * A / (1+A)^2
double fisher_information(const OutcomeSpec& outcome, long n0_or_d, double allocation_ratio);

// Treatment effect theta per outcome family.
double effect_theta(const OutcomeSpec& outcome);

// theta * sqrt(V): the mean of the Z statistic under the given effect.
double noncentrality(const OutcomeSpec& outcome, long n0_or_d, double allocation_ratio);

// ---------------------------------------------------------------------------
// Platform schedule
// ---------------------------------------------------------------------------

// One experimental-vs-control comparison.  Exactly one of
// control_event_target (survival) / control_n_target (continuous, binary)
// must be set.
struct ComparisonSpec {
  std::string id;
  double alpha = 0.025;            // one-sided significance level, in (0, 0.5)
  double power = 0.9;              // target pairwise power, in (0.5, 1)
  double allocation_ratio = 1.0;   // experimental : control, > 0
  OutcomeSpec outcome;
  double open_time = 0.0;          // platform time the arm opens, >= 0
  long control_event_target = 0;   // e0, >= 1 when set
  long control_n_target = 0;       // n0, >= 1 when set
  // Optional explicit accrual window length; by default accrual runs until the
  // comparison's analysis concludes.
  std::optional<double> accrual_duration;

  long target_count() const;       // whichever of e0 / n0 applies
  void validate() const;
};

struct PlatformSchedule {
  double accrual_rate = 0.0;  // patients per unit time for one comparison
                              // stream (control share + experimental share)
  std::string control_label = "control";
  std::vector<ComparisonSpec> comparisons;

  void validate() const;
};

// Shared control-arm information between comparisons i and j: patients for
// count-based outcomes, primary-outcome events for survival.  Expected values
// are real numbers, hence double.
struct OverlapInfo {
  std::size_t i = 0;
  std::size_t j = 0;
  double shared = 0.0;   // n0_ij or e0_ij, 0 <= shared <= min(total_i, total_j)
  double total_i = 0.0;  // n0 or e0 of comparison i
  double total_j = 0.0;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Correlation matrix of comparison Z statistics
// ---------------------------------------------------------------------------

class CorrelationMatrix {
 public:
  // Identity of the given dimension.
  explicit CorrelationMatrix(std::size_t dim);
  // From a row-major square matrix; must be symmetric with unit diagonal and
  // entries in [-1,1].  Positive semi-definiteness is checked separately.
  CorrelationMatrix(std::size_t dim, std::vector<double> row_major);

  std::size_t dim() const noexcept { return dim_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }
  void set(std::size_t i, std::size_t j, double rho);
  std::span<const double> data() const noexcept { return data_; }

  double min_eigenvalue() const;
  // Throws NumericError with the offending eigenvalue when the smallest
  // eigenvalue is below -1e-10.
  void require_psd() const;

  // Lower-triangular L with L L^T equal to this matrix; tolerates semi-
  // definite input (zero pivots produce zero columns).
  std::vector<double> cholesky_psd() const;

  // If corr_ij == lambda_i * lambda_j for all i != j (within tol) with all
  // lambda in [0,1), returns the factor loadings.
  std::optional<std::vector<double>> product_structure(double tol = 1e-9) const;

  CorrelationMatrix submatrix(std::span<const std::size_t> keep) const;

 private:
  std::size_t dim_;
  std::vector<double> data_;
};

}  // namespace trialkit
