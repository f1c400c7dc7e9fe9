#include "trialkit/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "trialkit/trial_model.hpp"

namespace trialkit {

Probability::Probability(double v) {
  if (!std::isfinite(v)) throw NumericError("probability is not finite");
  if (v < -1e-9 || v > 1.0 + 1e-9) {
    std::ostringstream os;
    os << "probability " << v << " outside [0,1]";
    throw NumericError(os.str());
  }
  value_ = std::clamp(v, 0.0, 1.0);
}

namespace numerics {

namespace {

constexpr double kInvSqrt2 = std::numbers::sqrt2 / 2.0;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double phid(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

// Gauss-Legendre abscissae/weights used by the bivariate quadrature
// (6, 12 and 20 point rules, positive half).
constexpr std::array<double, 3> kW6 = {0.1713244923791705, 0.3607615730481384,
                                       0.4679139345726904};
constexpr std::array<double, 3> kX6 = {0.9324695142031522, 0.6612093864662647,
                                       0.2386191860831970};
constexpr std::array<double, 6> kW12 = {0.04717533638651177, 0.1069393259953183,
                                        0.1600783285433464,  0.2031674267230659,
                                        0.2334925365383547,  0.2491470458134029};
constexpr std::array<double, 6> kX12 = {0.9815606342467191, 0.9041172563704750,
                                        0.7699026741943050, 0.5873179542866171,
                                        0.3678314989981802, 0.1252334085114692};
constexpr std::array<double, 10> kW20 = {
    0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
    0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
    0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
    0.1527533871307259};
constexpr std::array<double, 10> kX20 = {
    0.9931285991850949,  0.9639719272779138, 0.9122344282513259,
    0.8391169718222188,  0.7463319064601508, 0.6360536807265150,
    0.5108670019508271,  0.3737060887154196, 0.2277858511416451,
    0.07652652113349733};

// Upper-orthant probability P(X > dh, Y > dk); Drezner-Wesolowsky quadrature
// with the complementary expansion near |r| = 1 (Genz 2004).
double bvnu(double dh, double dk, double r) {
  if (dh == std::numeric_limits<double>::infinity() ||
      dk == std::numeric_limits<double>::infinity())
    return 0.0;

  std::span<const double> ws, xs;
  if (std::fabs(r) < 0.3) {
    ws = kW6; xs = kX6;
  } else if (std::fabs(r) < 0.75) {
    ws = kW12; xs = kX12;
  } else {
    ws = kW20; xs = kX20;
  }

  double h = dh, k = dk, hk = h * k, bvn = 0.0;
  if (std::fabs(r) < 0.925) {
    if (std::fabs(r) > 0) {
      const double hs = (h * h + k * k) / 2.0;
      const double asr = std::asin(r);
      for (std::size_t i = 0; i < ws.size(); ++i) {
        for (int is = -1; is <= 1; is += 2) {
          const double sn = std::sin(asr * (is * xs[i] + 1.0) / 2.0);
          bvn += ws[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
        }
      }
      bvn = bvn * asr / (2.0 * kTwoPi);
    }
    bvn += phid(-h) * phid(-k);
  } else {
    if (r < 0) {
      k = -k;
      hk = -hk;
    }
    if (std::fabs(r) < 1) {
      const double as = (1.0 - r) * (1.0 + r);
      double a = std::sqrt(as);
      const double bs = (h - k) * (h - k);
      const double c = (4.0 - hk) / 8.0;
      const double d = (12.0 - hk) / 16.0;
      double asr = -(bs / as + hk) / 2.0;
      if (asr > -100.0)
        bvn = a * std::exp(asr) *
              (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 +
               c * d * as * as / 5.0);
      if (-hk < 100.0) {
        const double b = std::sqrt(bs);
        const double sp = std::sqrt(kTwoPi) * phid(-b / a);
        bvn -= std::exp(-hk / 2.0) * sp * b *
               (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
      }
      a /= 2.0;
      for (std::size_t i = 0; i < ws.size(); ++i) {
        for (int is = -1; is <= 1; is += 2) {
          const double x2 = a * (is * xs[i] + 1.0);
          const double xsq = x2 * x2;
          const double rs = std::sqrt(1.0 - xsq);
          asr = -(bs / xsq + hk) / 2.0;
          if (asr > -100.0) {
            const double sp = 1.0 + c * xsq * (1.0 + d * xsq);
            const double ep =
                std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs;
            bvn += a * ws[i] * std::exp(asr) * (ep - sp);
          }
        }
      }
      bvn = -bvn / kTwoPi;
    }
    if (r > 0) {
      bvn += phid(-std::max(h, k));
    } else {
      bvn = -bvn + std::max(0.0, phid(-h) - phid(-k));
    }
  }
  return std::clamp(bvn, 0.0, 1.0);
}

}  // namespace

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(kTwoPi);
}

Probability std_normal_cdf(double x) {
  if (!std::isfinite(x)) throw NumericError("std_normal_cdf: non-finite input");
  return Probability(phid(x));
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw NumericError("std_normal_quantile: p must lie strictly in (0,1)");
  static const boost::math::normal_distribution<double> kStdNormal;
  return boost::math::quantile(kStdNormal, p);
}

Probability bivariate_normal_cdf(double h, double k, double rho) {
  if (!std::isfinite(h) || !std::isfinite(k) || !std::isfinite(rho))
    throw NumericError("bivariate_normal_cdf: non-finite input");
  if (std::fabs(rho) > 1.0)
    throw NumericError("bivariate_normal_cdf: |rho| > 1");
  if (rho == 1.0) return Probability(std::min(phid(h), phid(k)));
  if (rho == -1.0) return Probability(std::max(0.0, phid(h) + phid(k) - 1.0));
  return Probability(bvnu(-h, -k, rho));
}

Probability mvn_orthant_product_corr(std::span<const double> c,
                                     std::span<const double> lambda) {
  if (c.size() != lambda.size())
    throw NumericError("mvn_orthant_product_corr: dimension mismatch");
  if (c.empty()) throw NumericError("mvn_orthant_product_corr: empty input");
  for (double l : lambda)
    if (!(l >= 0.0 && l < 1.0))
      throw NumericError("mvn_orthant_product_corr: lambda outside [0,1)");

  // Factors with lambda == 0 are independent of u; pull them out.
  double indep = 1.0;
  std::vector<double> cs, ls, ss;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (lambda[i] == 0.0) {
      indep *= phid(c[i]);
    } else {
      cs.push_back(c[i]);
      ls.push_back(lambda[i]);
      ss.push_back(std::sqrt((1.0 - lambda[i]) * (1.0 + lambda[i])));
    }
  }
  if (cs.empty()) return Probability(indep);

  const auto integrand = [&](double u) {
    double prod = std_normal_pdf(u);
    for (std::size_t i = 0; i < cs.size() && prod > 0.0; ++i)
      prod *= phid((cs[i] - ls[i] * u) / ss[i]);
    return prod;
  };
  double err = 0.0;
  const double val = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, -8.5, 8.5, 14, 1e-12, &err);
  if (err > 1e-9)
    throw NumericError("mvn_orthant_product_corr: quadrature error above budget");
  return Probability(indep * std::clamp(val, 0.0, 1.0));
}

namespace {

// splitmix64: seeds the lattice shifts.
std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double to_unit_double(std::uint64_t u) {
  return static_cast<double>(u >> 11) * 0x1.0p-53;
}

constexpr std::array<int, 32> kPrimes = {2,   3,   5,   7,   11,  13,  17,  19,
                                         23,  29,  31,  37,  41,  43,  47,  53,
                                         59,  61,  67,  71,  73,  79,  83,  89,
                                         97,  101, 103, 107, 109, 113, 127, 131};

}  // namespace

ErrorBound mvn_cdf_qmc(std::span<const double> c, const CorrelationMatrix& corr,
                       double eps, std::uint64_t seed) {
  const std::size_t dim = corr.dim();
  if (c.size() != dim) throw NumericError("mvn_cdf_qmc: dimension mismatch");
  if (!(eps > 0.0)) throw NumericError("mvn_cdf_qmc: eps must be positive");
  corr.require_psd();
  if (dim == 1) return {phid(c[0]), 0.0};
  if (dim > kPrimes.size()) throw NumericError("mvn_cdf_qmc: dimension too large");

  const std::vector<double> chol = corr.cholesky_psd();
  static const boost::math::normal_distribution<double> kStdNormal;

  // Separation-of-variables estimate for one unit-cube point u[0..dim-2].
  const auto sov = [&](std::span<const double> u) {
    double f = phid(c[0] / chol[0]);
    double e_prev = f;
    std::vector<double> y(dim - 1);
    for (std::size_t i = 1; i < dim; ++i) {
      const double t = std::clamp(u[i - 1] * e_prev, 1e-16, 1.0 - 1e-16);
      y[i - 1] = boost::math::quantile(kStdNormal, t);
      double num = c[i];
      for (std::size_t j = 0; j < i; ++j) num -= chol[i * dim + j] * y[j];
      const double lii = chol[i * dim + i];
      const double e = lii > 0.0 ? phid(num / lii) : (num >= 0.0 ? 1.0 : 0.0);
      f *= e;
      e_prev = e;
    }
    return f;
  };

  constexpr int kRandomizations = 12;
  const boost::math::students_t_distribution<double> tdist(kRandomizations - 1);
  const double tq = boost::math::quantile(tdist, 0.995);

  std::vector<double> q(dim - 1);
  for (std::size_t d = 0; d < dim - 1; ++d) {
    const double sq = std::sqrt(static_cast<double>(kPrimes[d]));
    q[d] = sq - std::floor(sq);
  }

  std::size_t n = 4096;
  for (; n <= (1u << 21); n *= 2) {
    std::array<double, kRandomizations> means{};
    for (int m = 0; m < kRandomizations; ++m) {
      std::uint64_t state = seed + 0x632be59bd9b4e019ULL * (m + 1);
      std::vector<double> shift(dim - 1);
      for (auto& s : shift) s = to_unit_double(splitmix64(state));
      double acc = 0.0;
      std::vector<double> u(dim - 1);
      for (std::size_t jj = 1; jj <= n; ++jj) {
        for (std::size_t d = 0; d < dim - 1; ++d) {
          double v = std::fma(static_cast<double>(jj), q[d], shift[d]);
          u[d] = v - std::floor(v);
        }
        acc += sov(u);
      }
      means[m] = acc / static_cast<double>(n);
    }
    double mean = 0.0;
    for (double v : means) mean += v;
    mean /= kRandomizations;
    double var = 0.0;
    for (double v : means) var += (v - mean) * (v - mean);
    var /= (kRandomizations - 1);
    const double half = tq * std::sqrt(var / kRandomizations);
    if (half <= eps) return {std::clamp(mean, 0.0, 1.0), half};
  }
  throw NumericError("mvn_cdf_qmc: half-width target not reached within budget");
}

double find_root_monotone(const std::function<double(double)>& f, double lo,
                          double hi, double tol) {
  if (!(lo < hi)) throw NumericError("find_root_monotone: empty bracket");
  if (!(tol > 0.0)) throw NumericError("find_root_monotone: tol must be positive");
  double a = lo, b = hi;
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0))
    throw NumericError("find_root_monotone: no sign change on bracket");

  // Brent: keep [a,b] bracketing, c is the previous iterate.
  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 0; iter < 200; ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a; fc = fa; d = b - a; e = d;
    }
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(b) + 0.5 * tol;
    const double xm = 0.5 * (c - b);
    if (std::fabs(xm) <= tol1 || std::fabs(fb) <= tol) return b;
    if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
      double p, qq;
      const double s = fb / fa;
      if (a == c) {  // secant
        p = 2.0 * xm * s;
        qq = 1.0 - s;
      } else {  // inverse quadratic
        const double r1 = fb / fc, r2 = fa / fc;
        p = s * (2.0 * xm * r2 * (r2 - r1) - (b - a) * (r1 - 1.0));
        qq = (r2 - 1.0) * (r1 - 1.0) * (s - 1.0);
      }
      if (p > 0.0) qq = -qq;
      p = std::fabs(p);
      if (2.0 * p < std::min(3.0 * xm * qq - std::fabs(tol1 * qq), std::fabs(e * qq))) {
        e = d; d = p / qq;
      } else {
        d = xm; e = d;  // bisection
      }
    } else {
      d = xm; e = d;
    }
    a = b; fa = fb;
    b += (std::fabs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
    fb = f(b);
  }
  throw NumericError("find_root_monotone: iteration limit reached");
}

}  // namespace numerics
}  // namespace trialkit
