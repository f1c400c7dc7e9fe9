#include "trialkit/sim_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <ostream>
#include <queue>
#include <sstream>
#include <thread>
#include <utility>

#include "trialkit/numerics.hpp"
#include "trialkit/rng.hpp"

namespace trialkit::sim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double control_hazard(const PlatformSchedule& schedule) {
  double lambda = -1.0;
  for (const auto& c : schedule.comparisons) {
    const auto* s = std::get_if<SurvivalOutcome>(&c.outcome);
    if (!s)
      throw ConfigError("simulation: only survival outcomes are simulated; '" +
                        c.id + "' is not a survival comparison");
    if (lambda < 0.0) {
      lambda = s->lambda0;
    } else if (std::fabs(lambda - s->lambda0) > 1e-12) {
      throw ConfigError("simulation: all comparisons share one control arm; "
                        "control hazards must agree");
    }
  }
  return lambda;
}

double control_rate_share(double accrual_rate, double allocation_ratio) {
  return accrual_rate / (1.0 + allocation_ratio);
}

double experimental_rate_share(double accrual_rate, double allocation_ratio) {
  return accrual_rate * allocation_ratio / (1.0 + allocation_ratio);
}

}  // namespace

double expected_events(double rate, double hazard, double a0, double a1, double t) {
  if (!(rate >= 0.0) || !(hazard > 0.0))
    throw ConfigError("expected_events: rate must be >= 0 and hazard > 0");
  if (a1 < a0) throw ConfigError("expected_events: empty accrual window");
  if (t <= a0) return 0.0;
  const double u = std::min(t, a1);
  return rate * ((u - a0) -
                 (std::exp(-hazard * (t - u)) - std::exp(-hazard * (t - a0))) / hazard);
}

namespace {

// Piecewise-constant control accrual rate defined by the comparisons' open
// windows: the stream serves the most control-hungry open comparison.
struct RateSegments {
  std::vector<double> knots;  // ascending
  std::vector<double> rates;  // rates[i] applies on [knots[i], knots[i+1])

  double rate_at(double t) const {
    std::size_t i = 0;
    while (i + 1 < knots.size() && t >= knots[i + 1]) ++i;
    return rates[i];
  }

  // Integral of rate * (1 - exp(-hazard (t-s))) over entries s in [w0, w1].
  double events(double hazard, double w0, double w1, double t) const {
    double total = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) {
      const double s0 = std::max(w0, knots[i]);
      const double s1 = std::min({w1, i + 1 < knots.size() ? knots[i + 1] : kInf, t});
      if (s1 > s0 && rates[i] > 0.0)
        total += expected_events(rates[i], hazard, s0, s1, t);
    }
    return total;
  }

  // Integral of the rate over [w0, w1] (expected patient count).
  double patients(double w0, double w1) const {
    double total = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) {
      const double s0 = std::max(w0, knots[i]);
      const double s1 = std::min(w1, i + 1 < knots.size() ? knots[i + 1] : kInf);
      if (s1 > s0) total += rates[i] * (s1 - s0);
    }
    return total;
  }
};

RateSegments control_segments(const PlatformSchedule& schedule,
                              std::span<const double> closes) {
  std::vector<double> knots{0.0};
  for (std::size_t k = 0; k < schedule.comparisons.size(); ++k) {
    knots.push_back(schedule.comparisons[k].open_time);
    if (std::isfinite(closes[k])) knots.push_back(closes[k]);
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end(),
                          [](double a, double b) { return std::fabs(a - b) < 1e-12; }),
              knots.end());
  RateSegments seg;
  seg.knots = knots;
  seg.rates.resize(knots.size());
  for (std::size_t i = 0; i < knots.size(); ++i) {
    const double t = knots[i];
    double r = 0.0;
    for (std::size_t k = 0; k < schedule.comparisons.size(); ++k) {
      const auto& c = schedule.comparisons[k];
      if (t >= c.open_time - 1e-12 && t < closes[k] - 1e-12)
        r = std::max(r, control_rate_share(schedule.accrual_rate, c.allocation_ratio));
    }
    seg.rates[i] = r;
  }
  return seg;
}

}  // namespace

std::vector<ComparisonProjection> project_schedule(const PlatformSchedule& schedule) {
  schedule.validate();
  const std::size_t n = schedule.comparisons.size();
  const bool survival = event_based(schedule.comparisons.front().outcome);
  for (const auto& c : schedule.comparisons)
    if (event_based(c.outcome) != survival)
      throw ConfigError("projection: outcome families must not be mixed across comparisons");

  std::vector<double> closes(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& c = schedule.comparisons[k];
    closes[k] = c.accrual_duration ? c.open_time + *c.accrual_duration : kInf;
  }

  std::vector<double> analysis(n, 0.0);
  const double lambda = survival ? control_hazard(schedule) : 0.0;

  // Closes feed the control rate which feeds the analysis times which (by
  // default) are the closes; iterate to the fixed point.
  for (int pass = 0; pass < 60; ++pass) {
    const RateSegments seg = control_segments(schedule, closes);
    double shift = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& c = schedule.comparisons[k];
      double tk;
      if (survival) {
        const double e0 = static_cast<double>(c.control_event_target);
        const auto f = [&](double t) {
          return seg.events(lambda, c.open_time, std::min(closes[k], t), t) - e0;
        };
        double hi = c.open_time + 1.0;
        while (f(hi) < 0.0 && hi < c.open_time + 1e5) hi *= 2.0;
        if (f(hi) < 0.0)
          throw NumericError("projection: comparison '" + c.id +
                             "' can never reach its control event target");
        tk = numerics::find_root_monotone(f, c.open_time + 1e-9, hi, 1e-10);
      } else {
        const double n0 = static_cast<double>(c.control_n_target);
        const auto f = [&](double t) {
          return seg.patients(c.open_time, std::min(closes[k], t)) - n0;
        };
        double hi = c.open_time + 1.0;
        while (f(hi) < 0.0 && hi < c.open_time + 1e5) hi *= 2.0;
        if (f(hi) < 0.0)
          throw NumericError("projection: comparison '" + c.id +
                             "' can never accrue its control sample target");
        tk = numerics::find_root_monotone(f, c.open_time + 1e-9, hi, 1e-10);
      }
      analysis[k] = tk;
      if (!schedule.comparisons[k].accrual_duration) {
        shift = std::max(shift, std::fabs((std::isfinite(closes[k]) ? closes[k] : 0.0) - tk));
        closes[k] = tk;
      }
    }
    if (pass > 0 && shift < 1e-9) break;
  }

  const RateSegments seg = control_segments(schedule, closes);
  std::vector<ComparisonProjection> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& c = schedule.comparisons[k];
    ComparisonProjection p;
    p.open = c.open_time;
    p.analysis_time = analysis[k];
    p.accrual_close = closes[k];
    p.control_rate = control_rate_share(schedule.accrual_rate, c.allocation_ratio);
    p.experimental_rate = experimental_rate_share(schedule.accrual_rate, c.allocation_ratio);
    if (survival) {
      const auto* s = std::get_if<SurvivalOutcome>(&c.outcome);
      p.expected_control_events = seg.events(s->lambda0, c.open_time, closes[k], analysis[k]);
      const double arm_events = expected_events(
          p.experimental_rate, s->lambda0 * s->hazard_ratio, c.open_time,
          std::min(closes[k], analysis[k]), analysis[k]);
      p.expected_total_events = p.expected_control_events + arm_events;
    } else {
      p.expected_control_events = 0.0;
      p.expected_total_events = 0.0;
    }
    out[k] = p;
  }
  return out;
}

std::vector<OverlapInfo> predicted_overlaps(const PlatformSchedule& schedule) {
  const auto proj = project_schedule(schedule);
  const std::size_t n = schedule.comparisons.size();
  const bool survival = event_based(schedule.comparisons.front().outcome);

  std::vector<double> closes(n);
  for (std::size_t k = 0; k < n; ++k) closes[k] = proj[k].accrual_close;
  const RateSegments seg = control_segments(schedule, closes);

  std::vector<OverlapInfo> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      OverlapInfo ov;
      ov.i = i;
      ov.j = j;
      const double w0 = std::max(proj[i].open, proj[j].open);
      const double w1 = std::min(proj[i].accrual_close, proj[j].accrual_close);
      if (survival) {
        const double lambda = control_hazard(schedule);
        const double cut = std::min(proj[i].analysis_time, proj[j].analysis_time);
        ov.shared = w1 > w0 ? seg.events(lambda, w0, std::min(w1, cut), cut) : 0.0;
        ov.total_i = static_cast<double>(schedule.comparisons[i].control_event_target);
        ov.total_j = static_cast<double>(schedule.comparisons[j].control_event_target);
      } else {
        ov.shared = w1 > w0 ? seg.patients(w0, w1) : 0.0;
        ov.total_i = static_cast<double>(schedule.comparisons[i].control_n_target);
        ov.total_j = static_cast<double>(schedule.comparisons[j].control_n_target);
      }
      ov.shared = std::min(ov.shared, std::min(ov.total_i, ov.total_j));
      out.push_back(ov);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Logrank
// ---------------------------------------------------------------------------

LogrankResult logrank_score(std::vector<SurvivalObservation> observations) {
  if (observations.empty()) throw NumericError("logrank: empty dataset");
  std::sort(observations.begin(), observations.end(),
            [](const SurvivalObservation& a, const SurvivalObservation& b) {
              if (a.time != b.time) return a.time < b.time;
              return a.event > b.event;  // deaths before censorings
            });
  long at_risk = static_cast<long>(observations.size());
  long at_risk_exp = 0;
  for (const auto& o : observations) at_risk_exp += o.experimental ? 1 : 0;

  double score = 0.0, variance = 0.0;
  std::size_t i = 0;
  while (i < observations.size()) {
    const double t = observations[i].time;
    long deaths = 0, deaths_exp = 0, leaving = 0, leaving_exp = 0;
    for (std::size_t j = i; j < observations.size() && observations[j].time == t; ++j) {
      ++leaving;
      leaving_exp += observations[j].experimental ? 1 : 0;
      if (observations[j].event) {
        ++deaths;
        deaths_exp += observations[j].experimental ? 1 : 0;
      }
      ++i;
    }
    if (deaths > 0 && at_risk > 1) {
      const double n = static_cast<double>(at_risk);
      const double n1 = static_cast<double>(at_risk_exp);
      const double d = static_cast<double>(deaths);
      score += deaths_exp - d * n1 / n;
      variance += d * (n1 / n) * (1.0 - n1 / n) * (n - d) / (n - 1.0);
    }
    at_risk -= leaving;
    at_risk_exp -= leaving_exp;
  }
  if (variance <= 0.0)
    throw NumericError("logrank: zero null variance (no usable events)");
  return {score, variance, score / std::sqrt(variance)};
}

// ---------------------------------------------------------------------------
// Patient-level replicate
// ---------------------------------------------------------------------------

void SimConfig::validate() const {
  schedule.validate();
  control_hazard(schedule);
  if (replications < 1) throw ConfigError("simulation: replications must be at least 1");
  if (!truth_hazard_ratios.empty() &&
      truth_hazard_ratios.size() != schedule.comparisons.size())
    throw ConfigError("simulation: truth vector length must match the comparisons");
  for (double hr : truth_hazard_ratios)
    if (!(hr > 0.0)) throw ConfigError("simulation: truth hazard ratios must be positive");
}

namespace {

enum StreamId : std::uint32_t {
  kControlArrivals = 0,
  kControlEvents = 1,
  kArmStreamBase = 2,  // arm k uses base + 2k (arrivals) and base + 2k + 1 (events)
};

struct DeterministicClock {
  double seg_start = 0.0;
  double owed = 0.0;
  double rate = 0.0;
  long emitted = 0;

  void set_rate(double t, double r) {
    owed += rate * (t - seg_start);
    seg_start = t;
    rate = r;
  }
  double next() const {
    if (rate <= 0.0) return kInf;
    return seg_start + (static_cast<double>(emitted) + 0.5 - owed) / rate;
  }
  void emit(double t) {
    owed = static_cast<double>(emitted) + 0.5;
    seg_start = t;
    ++emitted;
  }
};

struct PoissonClock {
  double rate = 0.0;
  double next_time = kInf;
  RngStream* rng = nullptr;

  void set_rate(double t, double r) {
    rate = r;
    next_time = rate > 0.0 ? t + rng->exponential(rate) : kInf;
  }
  double next() const { return next_time; }
  void emit(double t) { next_time = rate > 0.0 ? t + rng->exponential(rate) : kInf; }
};

}  // namespace

ReplicateResult run_single_replicate(const SimConfig& config, long replicate) {
  const auto& comparisons = config.schedule.comparisons;
  const std::size_t n = comparisons.size();
  const double lambda0 = control_hazard(config.schedule);
  const double rate = config.schedule.accrual_rate;

  RngStream control_arrival_rng(config.seed, static_cast<std::uint32_t>(replicate),
                                kControlArrivals);
  RngStream control_event_rng(config.seed, static_cast<std::uint32_t>(replicate),
                              kControlEvents);

  // Per-comparison accrual state and trigger targets.
  std::vector<double> open(n), explicit_close(n, kInf);
  std::vector<long> target(n);
  std::vector<double> truth_lambda(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& c = comparisons[k];
    open[k] = c.open_time;
    if (c.accrual_duration) explicit_close[k] = open[k] + *c.accrual_duration;
    target[k] = config.control_event_trigger
                    ? c.control_event_target
                    : std::lround(static_cast<double>(c.control_event_target) *
                                  (1.0 + c.allocation_ratio));
    const auto* surv = std::get_if<SurvivalOutcome>(&c.outcome);
    const double hr = config.global_null ? 1.0
                      : config.truth_hazard_ratios.empty()
                          ? surv->hazard_ratio
                          : config.truth_hazard_ratios[k];
    truth_lambda[k] = lambda0 * hr;
  }
  std::vector<bool> analyzed(n, false);
  std::vector<long> event_count(n, 0);
  std::vector<double> cutoff(n, kInf), accrual_close(n, kInf);

  const auto accruing = [&](std::size_t k, double t) {
    return !analyzed[k] && t >= open[k] && t < explicit_close[k];
  };
  const auto control_rate_now = [&](double t) {
    double r = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (accruing(k, t))
        r = std::max(r, control_rate_share(rate, comparisons[k].allocation_ratio));
    return r;
  };

  // One arrival clock for the shared control stream and one per experimental
  // arm; the Poisson variant redraws its gap on every rate change.
  std::vector<DeterministicClock> det(n + 1);
  std::vector<PoissonClock> poi(n + 1);
  std::vector<RngStream> arm_arrival_rng, arm_event_rng;
  for (std::size_t k = 0; k < n; ++k) {
    arm_arrival_rng.emplace_back(config.seed, static_cast<std::uint32_t>(replicate),
                                 kArmStreamBase + 2 * static_cast<std::uint32_t>(k));
    arm_event_rng.emplace_back(config.seed, static_cast<std::uint32_t>(replicate),
                               kArmStreamBase + 2 * static_cast<std::uint32_t>(k) + 1);
  }
  poi[0].rng = &control_arrival_rng;
  for (std::size_t k = 0; k < n; ++k) poi[k + 1].rng = &arm_arrival_rng[k];

  const auto clock_next = [&](std::size_t s) {
    return config.poisson_accrual ? poi[s].next() : det[s].next();
  };
  const auto clock_set_rate = [&](std::size_t s, double t, double r) {
    if (config.poisson_accrual)
      poi[s].set_rate(t, r);
    else
      det[s].set_rate(t, r);
  };
  const auto clock_emit = [&](std::size_t s, double t) {
    if (config.poisson_accrual)
      poi[s].emit(t);
    else
      det[s].emit(t);
  };
  const auto reset_rates = [&](double t) {
    clock_set_rate(0, t, control_rate_now(t));
    for (std::size_t k = 0; k < n; ++k)
      clock_set_rate(k + 1, t,
                     accruing(k, t)
                         ? experimental_rate_share(rate, comparisons[k].allocation_ratio)
                         : 0.0);
  };

  std::vector<PatientRecord> controls;
  controls.reserve(4096);
  std::vector<std::vector<PatientRecord>> arm_patients(n);

  // Pending events: calendar time, entry time, owning arm (n = control).
  struct DeathEntry {
    double time, entry;
    std::size_t arm;
    bool operator>(const DeathEntry& o) const { return time > o.time; }
  };
  std::priority_queue<DeathEntry, std::vector<DeathEntry>, std::greater<>> deaths;

  double now = 0.0;
  reset_rates(0.0);

  const auto remaining = [&]() {
    for (std::size_t k = 0; k < n; ++k)
      if (!analyzed[k]) return true;
    return false;
  };

  while (remaining()) {
    double t_open = kInf, t_close = kInf;
    for (std::size_t k = 0; k < n; ++k) {
      if (!analyzed[k] && open[k] > now) t_open = std::min(t_open, open[k]);
      if (!analyzed[k] && explicit_close[k] > now && std::isfinite(explicit_close[k]))
        t_close = std::min(t_close, explicit_close[k]);
    }
    double t_arrival = clock_next(0);
    std::size_t arrival_stream = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double ta = clock_next(k + 1);
      if (ta < t_arrival) {
        t_arrival = ta;
        arrival_stream = k + 1;
      }
    }
    const double t_death = deaths.empty() ? kInf : deaths.top().time;
    const double t = std::min({t_open, t_close, t_arrival, t_death});
    if (!std::isfinite(t)) {
      for (std::size_t k = 0; k < n; ++k)
        if (!analyzed[k])
          throw NumericError("simulation: comparison '" + comparisons[k].id +
                             "' can never reach its event target");
    }
    now = t;
    if (t == t_open || t == t_close) {
      reset_rates(now);
      continue;
    }
    if (t == t_arrival) {
      clock_emit(arrival_stream, now);
      PatientRecord p;
      p.entry = now;
      if (arrival_stream == 0) {
        p.event_time = control_event_rng.exponential(lambda0);
        deaths.push({p.entry + p.event_time, p.entry, n});
        controls.push_back(p);
      } else {
        const std::size_t k = arrival_stream - 1;
        p.event_time = arm_event_rng[k].exponential(truth_lambda[k]);
        deaths.push({p.entry + p.event_time, p.entry, k});
        arm_patients[k].push_back(p);
      }
      continue;
    }
    // a death: count it toward every open comparison that owns the patient
    const DeathEntry de = deaths.top();
    deaths.pop();
    bool closed_any = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (analyzed[k]) continue;
      const bool counts =
          de.arm == n ? (de.entry >= open[k] && de.entry < explicit_close[k])
                      : (de.arm == k && !config.control_event_trigger);
      if (!counts) continue;
      if (++event_count[k] == target[k]) {
        analyzed[k] = true;
        cutoff[k] = now;
        accrual_close[k] = std::isfinite(explicit_close[k]) ? explicit_close[k] : now;
        closed_any = true;
      }
    }
    if (closed_any) reset_rates(now);
  }

  // Z statistics per comparison.
  ReplicateResult result;
  result.replicate = replicate;
  result.z.resize(n);
  result.rejected.resize(n);
  result.cutoff.assign(cutoff.begin(), cutoff.end());

  for (std::size_t k = 0; k < n; ++k) {
    const auto& c = comparisons[k];
    std::vector<SurvivalObservation> obs;
    obs.reserve(controls.size() / 2 + arm_patients[k].size());
    for (const auto& p : arm_patients[k]) {
      if (p.entry >= cutoff[k]) continue;
      const double calendar_event = p.entry + p.event_time;
      obs.push_back({std::min(calendar_event, cutoff[k]) - p.entry,
                     calendar_event <= cutoff[k], true});
    }
    const ConcurrentWindow window{open[k], accrual_close[k]};
    for (const auto& p : controls) {
      if (!window.contains(p.entry) || p.entry >= cutoff[k]) continue;
      const double calendar_event = p.entry + p.event_time;
      obs.push_back({std::min(calendar_event, cutoff[k]) - p.entry,
                     calendar_event <= cutoff[k], false});
    }
    const LogrankResult lr = logrank_score(std::move(obs));
    result.z[k] = lr.z;
    // One-sided test in the beneficial ("smaller is better") direction.
    result.rejected[k] = -lr.z >= numerics::std_normal_quantile(1.0 - c.alpha);
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w0 = std::max(open[i], open[j]);
      const double w1 = std::min(accrual_close[i], accrual_close[j]);
      const double cut = std::min(cutoff[i], cutoff[j]);
      long count = 0;
      for (const auto& p : controls)
        if (p.entry >= w0 && p.entry < w1 && p.entry + p.event_time <= cut) ++count;
      result.shared_events.push_back(static_cast<double>(count));
    }
  }
  return result;
}

double shared_control_events(const ReplicateResult& rep, std::size_t i, std::size_t j) {
  if (i == j) throw ConfigError("shared_control_events: pair indices must differ");
  if (i > j) std::swap(i, j);
  const std::size_t n = rep.z.size();
  if (j >= n) throw ConfigError("shared_control_events: index out of range");
  // position of (i,j) in the upper triangle laid out row by row
  const std::size_t pos = i * n - i * (i + 1) / 2 + (j - i - 1);
  return rep.shared_events[pos];
}

double empirical_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ConfigError("empirical_correlation: need two samples of equal length >= 2");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double cxy = 0, cxx = 0, cyy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cxy += (x[i] - mx) * (y[i] - my);
    cxx += (x[i] - mx) * (x[i] - mx);
    cyy += (y[i] - my) * (y[i] - my);
  }
  if (cxx <= 0.0 || cyy <= 0.0)
    throw NumericError("empirical_correlation: zero-variance input");
  return cxy / std::sqrt(cxx * cyy);
}

namespace {

struct ChunkAccumulator {
  long reps = 0;
  double any_reject = 0.0, all_reject = 0.0;
  std::vector<double> reject, sum_z, sum_zz, sum_cutoff;
  std::vector<double> cross;       // upper-triangle sum of z_i z_j
  std::vector<double> sum_shared;  // upper triangle

  explicit ChunkAccumulator(std::size_t n)
      : reject(n, 0.0), sum_z(n, 0.0), sum_zz(n, 0.0), sum_cutoff(n, 0.0),
        cross(n * (n - 1) / 2, 0.0), sum_shared(n * (n - 1) / 2, 0.0) {}

  void add(const ReplicateResult& r) {
    ++reps;
    bool any = false, all = true;
    for (std::size_t k = 0; k < r.z.size(); ++k) {
      any = any || r.rejected[k];
      all = all && r.rejected[k];
      reject[k] += r.rejected[k] ? 1.0 : 0.0;
      sum_z[k] += r.z[k];
      sum_zz[k] += r.z[k] * r.z[k];
      sum_cutoff[k] += r.cutoff[k];
    }
    any_reject += any ? 1.0 : 0.0;
    all_reject += all ? 1.0 : 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < r.z.size(); ++i)
      for (std::size_t j = i + 1; j < r.z.size(); ++j, ++pos) {
        cross[pos] += r.z[i] * r.z[j];
        sum_shared[pos] += r.shared_events[pos];
      }
  }

  void merge(const ChunkAccumulator& other) {
    reps += other.reps;
    any_reject += other.any_reject;
    all_reject += other.all_reject;
    for (std::size_t k = 0; k < reject.size(); ++k) {
      reject[k] += other.reject[k];
      sum_z[k] += other.sum_z[k];
      sum_zz[k] += other.sum_zz[k];
      sum_cutoff[k] += other.sum_cutoff[k];
    }
    for (std::size_t p = 0; p < cross.size(); ++p) {
      cross[p] += other.cross[p];
      sum_shared[p] += other.sum_shared[p];
    }
  }
};

}  // namespace

SimSummary simulate_platform(const SimConfig& config) {
  config.validate();
  const std::size_t n = config.schedule.comparisons.size();
  const long reps = config.replications;

  // Fixed chunking keeps the merged sums independent of the worker count.
  const long chunk_size = std::max<long>(1, (reps + 255) / 256);
  const long chunks = (reps + chunk_size - 1) / chunk_size;
  std::vector<ChunkAccumulator> partials(chunks, ChunkAccumulator(n));

  int workers = config.threads > 0 ? config.threads
                                   : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, 64);

  std::atomic<long> next_chunk{0};
  std::atomic<bool> failed{false};
  std::string error_message;
  std::mutex error_mutex;

  const auto worker = [&]() {
    for (;;) {
      const long c = next_chunk.fetch_add(1);
      if (c >= chunks || failed.load()) return;
      try {
        const long lo = c * chunk_size;
        const long hi = std::min(reps, lo + chunk_size);
        for (long r = lo; r < hi; ++r) partials[c].add(run_single_replicate(config, r));
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) error_message = e.what();
        return;
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw NumericError("simulation failed: " + error_message);

  ChunkAccumulator total(n);
  for (const auto& p : partials) total.merge(p);

  const double m = static_cast<double>(total.reps);
  SimSummary s;
  s.replications = total.reps;
  s.fwer = total.any_reject / m;
  s.fwer_se = std::sqrt(s.fwer * (1.0 - s.fwer) / m);
  s.disjunctive = s.fwer;
  s.conjunctive = total.all_reject / m;
  s.conjunctive_se = std::sqrt(s.conjunctive * (1.0 - s.conjunctive) / m);
  s.pairwise_reject.resize(n);
  s.pairwise_reject_se.resize(n);
  s.mean_z.resize(n);
  s.mean_cutoff.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    s.pairwise_reject[k] = total.reject[k] / m;
    s.pairwise_reject_se[k] =
        std::sqrt(s.pairwise_reject[k] * (1.0 - s.pairwise_reject[k]) / m);
    s.mean_z[k] = total.sum_z[k] / m;
    s.mean_cutoff[k] = total.sum_cutoff[k] / m;
  }
  s.z_correlation = CorrelationMatrix(n);
  std::size_t pos = 0;
  s.mean_shared.resize(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++pos) {
      const double vi = total.sum_zz[i] / m - (total.sum_z[i] / m) * (total.sum_z[i] / m);
      const double vj = total.sum_zz[j] / m - (total.sum_z[j] / m) * (total.sum_z[j] / m);
      const double cij = total.cross[pos] / m - (total.sum_z[i] / m) * (total.sum_z[j] / m);
      s.z_correlation.set(i, j, cij / std::sqrt(vi * vj));
      s.mean_shared[pos] = total.sum_shared[pos] / m;
    }
  }
  return s;
}

void write_replicates_csv(const SimConfig& config, std::ostream& sink) {
  config.validate();
  const auto& comparisons = config.schedule.comparisons;
  sink << "replicate,comparison,z,cutoff";
  for (const auto& c : comparisons) sink << ",shared_" << c.id;
  sink << "\n";
  for (long r = 0; r < config.replications; ++r) {
    const ReplicateResult rep = run_single_replicate(config, r);
    for (std::size_t k = 0; k < comparisons.size(); ++k) {
      sink << r << ',' << comparisons[k].id << ',' << rep.z[k] << ',' << rep.cutoff[k];
      for (std::size_t j = 0; j < comparisons.size(); ++j) {
        sink << ',';
        if (j != k) sink << shared_control_events(rep, k, j);
      }
      sink << "\n";
    }
  }
}

}  // namespace trialkit::sim
