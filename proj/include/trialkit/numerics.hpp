#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "trialkit/errors.hpp"

namespace trialkit {

class CorrelationMatrix;

// A probability value, validated to lie in [0,1].  Values within 1e-9 of the
// interval (quadrature round-off) are clamped; anything further out throws.
class Probability {
 public:
  explicit Probability(double v);
  double value() const noexcept { return value_; }
  operator double() const noexcept { return value_; }

 private:
  double value_;
};

// Estimate from a stochastic quadrature together with a confidence half-width.
struct ErrorBound {
  double estimate = 0.0;
  double half_width = 0.0;  // >= 0
};

namespace numerics {

// Standard normal density, distribution function and quantile.
// cdf: absolute error below 1e-12 over the whole real line.
// quantile: cdf(quantile(p)) = p to ~1e-13; p in (0,1) required.
double std_normal_pdf(double x);
Probability std_normal_cdf(double x);
double std_normal_quantile(double p);

// P(X <= h, Y <= k) for a standard bivariate normal with correlation rho.
// Gauss-Legendre quadrature on the Drezner-Wesolowsky representation with the
// complementary expansion for |rho| > 0.925; absolute error below 1e-13.
// |rho| = 1 is handled as the degenerate limit, |rho| > 1 is rejected.
Probability bivariate_normal_cdf(double h, double k, double rho);

// P(Z_1 <= c_1, ..., Z_K <= c_K) when corr(Z_i, Z_j) = lambda_i * lambda_j
// (single-factor structure, all lambda_k in [0,1)).  Reduced to a 1-D
// integral of phi(u) * prod Phi((c_k - lambda_k u)/sqrt(1-lambda_k^2))
// evaluated by adaptive Gauss-Kronrod on [-8.5, 8.5]; absolute error
// below 1e-9 including the tail truncation.
Probability mvn_orthant_product_corr(std::span<const double> c,
                                     std::span<const double> lambda);

// P(Z <= c) for an arbitrary positive semi-definite correlation matrix via
// randomized quasi Monte Carlo (separation-of-variables transform over a
// shifted Richtmyer lattice).  The returned half_width is a 99% confidence
// bound and is driven below eps by doubling the lattice size; deterministic
// for a fixed seed.
ErrorBound mvn_cdf_qmc(std::span<const double> c, const CorrelationMatrix& corr,
                       double eps, std::uint64_t seed = 2024u);

// Root of a monotone function bracketed by [lo, hi]: Brent iteration
// (inverse-quadratic / secant acceleration with bisection fallback).
// Stops when |f(x)| <= tol or the bracket width drops below tol.
double find_root_monotone(const std::function<double(double)>& f, double lo,
                          double hi, double tol = 1e-8);

}  // namespace numerics
}  // namespace trialkit
