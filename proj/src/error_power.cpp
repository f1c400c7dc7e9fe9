#include "trialkit/error_power.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace trialkit::power {

namespace {

using numerics::std_normal_quantile;

void check_probs(std::span<const double> values, const char* what) {
  if (values.empty()) throw ConfigError(std::string(what) + ": empty list");
  for (double v : values)
    if (!(v > 0.0 && v < 1.0))
      throw ConfigError(std::string(what) + ": values must lie strictly in (0,1)");
}

}  // namespace

Probability mvn_lower_cdf(std::span<const double> c, const CorrelationMatrix& corr,
                          double qmc_eps) {
  if (c.size() != corr.dim()) throw NumericError("mvn_lower_cdf: dimension mismatch");
  corr.require_psd();
  if (c.size() == 1) return numerics::std_normal_cdf(c[0]);
  if (c.size() == 2) return numerics::bivariate_normal_cdf(c[0], c[1], corr(0, 1));
  if (auto lambda = corr.product_structure())
    return numerics::mvn_orthant_product_corr(c, *lambda);
  return Probability(numerics::mvn_cdf_qmc(c, corr, qmc_eps).estimate);
}

Probability fwer_sidak(std::span<const double> alphas) {
  check_probs(alphas, "fwer_sidak");
  double accept = 1.0;
  for (double a : alphas) accept *= (1.0 - a);
  return Probability(1.0 - accept);
}

Probability fwer_bonferroni(std::span<const double> alphas) {
  check_probs(alphas, "fwer_bonferroni");
  double sum = 0.0;
  for (double a : alphas) sum += a;
  return Probability(std::min(1.0, sum));
}

Probability fwer_dunnett(std::span<const double> alphas, const CorrelationMatrix& corr) {
  check_probs(alphas, "fwer_dunnett");
  if (alphas.size() != corr.dim()) throw ConfigError("fwer_dunnett: dimension mismatch");
  std::vector<double> z(alphas.size());
  for (std::size_t i = 0; i < alphas.size(); ++i) z[i] = std_normal_quantile(1.0 - alphas[i]);
  return Probability(1.0 - mvn_lower_cdf(z, corr).value());
}

FwerResult fwer_report(FwerMethod method, std::span<const double> alphas,
                       const CorrelationMatrix& corr) {
  switch (method) {
    case FwerMethod::sidak:
      return {fwer_sidak(alphas), method, std::nullopt};
    case FwerMethod::bonferroni:
      return {fwer_bonferroni(alphas), method, std::nullopt};
    case FwerMethod::dunnett:
      return {fwer_dunnett(alphas, corr), method, corr};
  }
  throw ConfigError("fwer_report: unknown method");
}

Probability disjunctive_power(std::span<const double> omegas, const CorrelationMatrix& corr) {
  check_probs(omegas, "disjunctive_power");
  if (omegas.size() != corr.dim()) throw ConfigError("disjunctive_power: dimension mismatch");
  std::vector<double> z(omegas.size());
  for (std::size_t i = 0; i < omegas.size(); ++i) z[i] = std_normal_quantile(1.0 - omegas[i]);
  return Probability(1.0 - mvn_lower_cdf(z, corr).value());
}

Probability conjunctive_power(std::span<const double> omegas, const CorrelationMatrix& corr) {
  check_probs(omegas, "conjunctive_power");
  if (omegas.size() != corr.dim()) throw ConfigError("conjunctive_power: dimension mismatch");
  std::vector<double> z(omegas.size());
  for (std::size_t i = 0; i < omegas.size(); ++i) z[i] = std_normal_quantile(omegas[i]);
  return Probability(mvn_lower_cdf(z, corr).value());
}

Probability pairwise_power(const OutcomeSpec& outcome, long n0_or_d,
                           double allocation_ratio, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ConfigError("pairwise_power: alpha must lie strictly in (0,1)");
  const double drift = std::fabs(noncentrality(outcome, n0_or_d, allocation_ratio));
  return numerics::std_normal_cdf(drift - std_normal_quantile(1.0 - alpha));
}

long required_events(double alpha, double power, double hazard_ratio,
                     double allocation_ratio) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("required_events: invalid alpha");
  if (!(power > 0.0 && power < 1.0)) throw ConfigError("required_events: invalid power");
  if (!(hazard_ratio > 0.0)) throw ConfigError("required_events: hazard ratio must be positive");
  if (hazard_ratio == 1.0) throw ConfigError("required_events: hazard ratio 1 has no finite target");
  if (!(allocation_ratio > 0.0)) throw ConfigError("required_events: invalid allocation ratio");
  const double A = allocation_ratio;
  const double z = std_normal_quantile(1.0 - alpha) + std_normal_quantile(power);
  const double lhr = std::log(hazard_ratio);
  return static_cast<long>(std::ceil(z * z * (1.0 + A) * (1.0 + A) / (A * lhr * lhr)));
}

double control_share_events(long total_events, double allocation_ratio) {
  if (total_events < 1) throw ConfigError("control_share_events: total events must be positive");
  if (!(allocation_ratio > 0.0))
    throw ConfigError("control_share_events: invalid allocation ratio");
  return static_cast<double>(total_events) / (1.0 + allocation_ratio);
}

Strategy strategy_recommend(const StrategyContext& ctx, const StrategyThresholds& th) {
  if (ctx.comparisons < 1) throw ConfigError("strategy_recommend: K must be at least 1");
  const bool control_needed = ctx.fwer_control_required || ctx.questions_related;
  if (!control_needed) return Strategy::control_pwer_only;
  if (ctx.unplanned_addition) return Strategy::recursive_adjust;
  double max_rho = 0.0;
  for (double r : ctx.correlations) max_rho = std::max(max_rho, std::fabs(r));
  return max_rho < th.correlation_cutover ? Strategy::split_sidak_or_bonferroni
                                          : Strategy::split_dunnett;
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::control_pwer_only: return "control_PWER_only";
    case Strategy::split_sidak_or_bonferroni: return "split_sidak_or_bonferroni";
    case Strategy::split_dunnett: return "split_dunnett";
    case Strategy::recursive_adjust: return "recursive_adjust";
  }
  return "unknown";
}

std::string to_string(FwerMethod m) {
  switch (m) {
    case FwerMethod::sidak: return "sidak";
    case FwerMethod::bonferroni: return "bonferroni";
    case FwerMethod::dunnett: return "dunnett";
  }
  return "unknown";
}

}  // namespace trialkit::power
