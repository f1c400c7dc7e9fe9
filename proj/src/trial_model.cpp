#include "trialkit/trial_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

namespace trialkit {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

bool is_prob(double p) { return p > 0.0 && p < 1.0; }

}  // namespace

void validate_outcome(const OutcomeSpec& outcome) {
  std::visit(
      [](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, ContinuousOutcome>) {
          require(std::isfinite(o.mu0) && std::isfinite(o.mu1),
                  "continuous outcome: means must be finite");
          require(o.sigma0 > 0.0 && o.sigma1 > 0.0,
                  "continuous outcome: standard deviations must be positive");
        } else if constexpr (std::is_same_v<T, BinaryOutcome>) {
          require(is_prob(o.p0) && is_prob(o.p1),
                  "binary outcome: proportions must lie strictly in (0,1)");
        } else {
          require(o.lambda0 > 0.0, "survival outcome: control hazard must be positive");
          require(o.hazard_ratio > 0.0, "survival outcome: hazard ratio must be positive");
        }
      },
      outcome);
}

bool event_based(const OutcomeSpec& outcome) {
  return std::holds_alternative<SurvivalOutcome>(outcome);
}

double fisher_information(const OutcomeSpec& outcome, long n0_or_d,
                          double allocation_ratio) {
  validate_outcome(outcome);
  require(n0_or_d >= 1, "fisher_information: count must be at least 1");
  require(allocation_ratio > 0.0, "fisher_information: allocation ratio must be positive");
  const double n = static_cast<double>(n0_or_d);
  const double A = allocation_ratio;
  return std::visit(
      [&](const auto& o) -> double {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, ContinuousOutcome>) {
          return 1.0 / (o.sigma0 * o.sigma0 / n + o.sigma1 * o.sigma1 / (A * n));
        } else if constexpr (std::is_same_v<T, BinaryOutcome>) {
          const double v0 = o.p0 * (1.0 - o.p0);
          const double v1 = o.p1 * (1.0 - o.p1);
          switch (o.scale) {
            case BinaryScale::risk_difference:
              return 1.0 / (v0 / n + v1 / (A * n));
            case BinaryScale::log_odds_ratio:
              return 1.0 / (1.0 / (n * v0) + 1.0 / (A * n * v1));
            case BinaryScale::log_risk_ratio:
              return 1.0 / ((1.0 - o.p0) / (n * o.p0) + (1.0 - o.p1) / (A * n * o.p1));
          }
          return 0.0;  // unreachable
        } else {
          // d * A / (1+A)^2, reading the table entry as information so that
          // Z = theta*sqrt(V) has unit variance.
          return n * A / ((1.0 + A) * (1.0 + A));
        }
      },
      outcome);
}

double effect_theta(const OutcomeSpec& outcome) {
  validate_outcome(outcome);
  return std::visit(
      [](const auto& o) -> double {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, ContinuousOutcome>) {
          return o.mu1 - o.mu0;
        } else if constexpr (std::is_same_v<T, BinaryOutcome>) {
          switch (o.scale) {
            case BinaryScale::risk_difference:
              return o.p1 - o.p0;
            case BinaryScale::log_odds_ratio:
              return std::log(o.p1 * (1.0 - o.p0) / (o.p0 * (1.0 - o.p1)));
            case BinaryScale::log_risk_ratio:
              return std::log(o.p1 / o.p0);
          }
          return 0.0;  // unreachable
        } else {
          return std::log(o.hazard_ratio);
        }
      },
      outcome);
}

double noncentrality(const OutcomeSpec& outcome, long n0_or_d, double allocation_ratio) {
  return effect_theta(outcome) * std::sqrt(fisher_information(outcome, n0_or_d, allocation_ratio));
}

long ComparisonSpec::target_count() const {
  return event_based(outcome) ? control_event_target : control_n_target;
}

void ComparisonSpec::validate() const {
  require(!id.empty(), "comparison: id must not be empty");
  require(alpha > 0.0 && alpha < 0.5, "comparison '" + id + "': alpha must lie in (0, 0.5)");
  require(power > 0.5 && power < 1.0, "comparison '" + id + "': power must lie in (0.5, 1)");
  require(allocation_ratio > 0.0, "comparison '" + id + "': allocation ratio must be positive");
  require(open_time >= 0.0, "comparison '" + id + "': open time must be nonnegative");
  validate_outcome(outcome);
  const bool has_e0 = control_event_target > 0;
  const bool has_n0 = control_n_target > 0;
  if (event_based(outcome)) {
    require(has_e0 && !has_n0,
            "comparison '" + id + "': survival outcomes take e0 (control event target) only");
  } else {
    require(has_n0 && !has_e0,
            "comparison '" + id + "': continuous/binary outcomes take n0 (control sample target) only");
  }
  if (accrual_duration)
    require(*accrual_duration > 0.0, "comparison '" + id + "': accrual duration must be positive");
}

void PlatformSchedule::validate() const {
  require(accrual_rate > 0.0, "platform: accrual rate must be positive");
  require(!comparisons.empty(), "platform: at least one comparison is required");
  for (const auto& c : comparisons) c.validate();
  for (std::size_t i = 0; i < comparisons.size(); ++i)
    for (std::size_t j = i + 1; j < comparisons.size(); ++j)
      require(comparisons[i].id != comparisons[j].id,
              "platform: duplicate comparison id '" + comparisons[i].id + "'");
}

void OverlapInfo::validate() const {
  require(i != j, "overlap: pair indices must differ");
  require(total_i >= 1.0 && total_j >= 1.0, "overlap: totals must be at least 1");
  require(shared >= 0.0 && shared <= std::min(total_i, total_j) + 1e-9,
          "overlap: shared count must lie in [0, min(totals)]");
}

CorrelationMatrix::CorrelationMatrix(std::size_t dim)
    : dim_(dim), data_(dim * dim, 0.0) {
  require(dim >= 1, "correlation matrix: dimension must be at least 1");
  for (std::size_t i = 0; i < dim; ++i) data_[i * dim + i] = 1.0;
}

CorrelationMatrix::CorrelationMatrix(std::size_t dim, std::vector<double> row_major)
    : dim_(dim), data_(std::move(row_major)) {
  require(dim >= 1, "correlation matrix: dimension must be at least 1");
  require(data_.size() == dim * dim, "correlation matrix: size mismatch");
  for (std::size_t i = 0; i < dim; ++i) {
    require(std::fabs((*this)(i, i) - 1.0) < 1e-12, "correlation matrix: diagonal must be 1");
    for (std::size_t j = 0; j < i; ++j) {
      require(std::fabs((*this)(i, j) - (*this)(j, i)) < 1e-12,
              "correlation matrix: must be symmetric");
      require(std::fabs((*this)(i, j)) <= 1.0 + 1e-12,
              "correlation matrix: entries must lie in [-1,1]");
    }
  }
}

void CorrelationMatrix::set(std::size_t i, std::size_t j, double rho) {
  require(i < dim_ && j < dim_, "correlation matrix: index out of range");
  require(i != j, "correlation matrix: diagonal is fixed at 1");
  require(std::fabs(rho) <= 1.0, "correlation matrix: entries must lie in [-1,1]");
  data_[i * dim_ + j] = rho;
  data_[j * dim_ + i] = rho;
}

double CorrelationMatrix::min_eigenvalue() const {
  Eigen::MatrixXd m(dim_, dim_);
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < dim_; ++j) m(i, j) = (*this)(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

void CorrelationMatrix::require_psd() const {
  const double lambda_min = min_eigenvalue();
  if (lambda_min < -1e-10) {
    std::ostringstream os;
    os << "correlation matrix is not positive semi-definite "
       << "(smallest eigenvalue " << lambda_min << ")";
    throw NumericError(os.str());
  }
}

std::vector<double> CorrelationMatrix::cholesky_psd() const {
  std::vector<double> L(dim_ * dim_, 0.0);
  for (std::size_t j = 0; j < dim_; ++j) {
    double d = (*this)(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= L[j * dim_ + k] * L[j * dim_ + k];
    if (d > 1e-12) {
      L[j * dim_ + j] = std::sqrt(d);
      for (std::size_t i = j + 1; i < dim_; ++i) {
        double s = (*this)(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= L[i * dim_ + k] * L[j * dim_ + k];
        L[i * dim_ + j] = s / L[j * dim_ + j];
      }
    } else if (d > -1e-8) {
      L[j * dim_ + j] = 0.0;  // semi-definite direction
    } else {
      require_psd();  // produces the diagnostic
      throw NumericError("correlation matrix: Cholesky pivot is negative");
    }
  }
  return L;
}

std::optional<std::vector<double>> CorrelationMatrix::product_structure(double tol) const {
  if (dim_ == 1) return std::vector<double>{0.0};
  std::vector<double> lambda(dim_, 0.0);
  // Rows with all-zero off-diagonals get lambda = 0.  The remaining rows must
  // pairwise factor; recover lambda_i^2 from a triple of nonzero entries.
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < dim_; ++i) {
    bool nonzero = false;
    for (std::size_t j = 0; j < dim_; ++j)
      if (j != i && std::fabs((*this)(i, j)) > tol) nonzero = true;
    if (nonzero) active.push_back(i);
  }
  if (active.empty()) return lambda;
  if (active.size() < 2) return std::nullopt;  // single correlated row is inconsistent
  if (active.size() == 2) {
    const double rho = (*this)(active[0], active[1]);
    if (rho < 0.0) return std::nullopt;
    lambda[active[0]] = lambda[active[1]] = std::sqrt(rho);
  } else {
    for (std::size_t ai = 0; ai < active.size(); ++ai) {
      const std::size_t i = active[ai];
      const std::size_t j = active[(ai + 1) % active.size()];
      const std::size_t k = active[(ai + 2) % active.size()];
      const double denom = (*this)(j, k);
      if (std::fabs(denom) <= tol) return std::nullopt;
      const double l2 = (*this)(i, j) * (*this)(i, k) / denom;
      if (l2 < 0.0) return std::nullopt;
      lambda[i] = std::sqrt(l2);
    }
  }
  for (double l : lambda)
    if (!(l >= 0.0 && l < 1.0)) return std::nullopt;
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = i + 1; j < dim_; ++j)
      if (std::fabs((*this)(i, j) - lambda[i] * lambda[j]) > tol) return std::nullopt;
  return lambda;
}

CorrelationMatrix CorrelationMatrix::submatrix(std::span<const std::size_t> keep) const {
  require(!keep.empty(), "correlation matrix: submatrix needs at least one index");
  for (std::size_t idx : keep)
    require(idx < dim_, "correlation matrix: submatrix index out of range");
  CorrelationMatrix out(keep.size());
  for (std::size_t a = 0; a < keep.size(); ++a)
    for (std::size_t b = 0; b < keep.size(); ++b)
      if (a != b) out.data_[a * keep.size() + b] = (*this)(keep[a], keep[b]);
  return out;
}

}  // namespace trialkit
