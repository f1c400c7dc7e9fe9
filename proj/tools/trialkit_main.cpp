// trialkit: familywise error, power, correlation and simulation calculator
// for platform trials that add experimental arms over time.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "trialkit/alpha_solver.hpp"
#include "trialkit/correlation.hpp"
#include "trialkit/error_power.hpp"
#include "trialkit/numerics.hpp"
#include "trialkit/scenario.hpp"
#include "trialkit/sim_engine.hpp"

using json = nlohmann::json;
using namespace trialkit;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitNonConvergence = 4;

struct CommonOptions {
  std::string scenario_path;
  std::string out = "table";  // table | json | csv (simulate only)
  std::vector<std::string> open_overrides;
  int threads = 0;
};

std::string fmt(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("TRIALKIT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 0;  // engine default: hardware concurrency
}

ScenarioFile load(const CommonOptions& common) {
  ScenarioFile sc = load_scenario(common.scenario_path);
  for (const std::string& ov : common.open_overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--open expects ID=TIME, got '" + ov + "'");
    const std::string id = ov.substr(0, eq);
    const double t = std::stod(ov.substr(eq + 1));
    bool found = false;
    for (auto& c : sc.schedule.comparisons)
      if (c.id == id) {
        c.open_time = t;
        found = true;
      }
    if (!found) throw ConfigError("--open: no comparison with id '" + id + "'");
  }
  sc.schedule.validate();
  return sc;
}

CorrelationMatrix scenario_correlation(const ScenarioFile& sc) {
  return correlation::build_correlation_matrix(sc.schedule,
                                               sim::predicted_overlaps(sc.schedule));
}

sim::SimConfig sim_config(const ScenarioFile& sc, long reps, long seed, bool null_truth,
                          int threads) {
  sim::SimConfig cfg;
  cfg.schedule = sc.schedule;
  cfg.global_null = null_truth;
  cfg.replications = reps > 0 ? reps : sc.replications;
  cfg.seed = seed >= 0 ? static_cast<std::uint64_t>(seed) : sc.seed;
  cfg.poisson_accrual = sc.poisson_accrual;
  cfg.control_event_trigger = sc.trigger == "control-events";
  cfg.threads = threads;
  return cfg;
}

void emit(const CommonOptions& common, const json& machine, const std::string& table) {
  if (common.out == "json")
    std::cout << machine.dump(2) << "\n";
  else
    std::cout << table;
}

// ---------------------------------------------------------------------------

int cmd_correlation(const CommonOptions& common, const std::string& pair_flag,
                    bool simulate, long reps, long seed) {
  const ScenarioFile sc = load(common);
  const auto overlaps = sim::predicted_overlaps(sc.schedule);
  const auto& cs = sc.schedule.comparisons;

  std::optional<std::pair<std::size_t, std::size_t>> only;
  if (!pair_flag.empty()) {
    const auto comma = pair_flag.find(',');
    if (comma == std::string::npos)
      throw ConfigError("--pair expects two comparison ids, e.g. E1,E2");
    const std::string a = pair_flag.substr(0, comma), b = pair_flag.substr(comma + 1);
    std::size_t ia = cs.size(), ib = cs.size();
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (cs[i].id == a) ia = i;
      if (cs[i].id == b) ib = i;
    }
    if (ia == cs.size() || ib == cs.size() || ia == ib)
      throw ConfigError("--pair: unknown comparison in '" + pair_flag + "'");
    only = std::minmax(ia, ib);
  }

  std::optional<sim::SimSummary> summary;
  if (simulate) {
    const auto cfg = sim_config(sc, reps, seed, /*null_truth=*/true,
                                resolve_threads(common.threads));
    summary = sim::simulate_platform(cfg);
  }

  json pairs = json::array();
  std::ostringstream table;
  table << "pair      shared    total_i  total_j  rho";
  if (simulate) table << "     rho_hat  se";
  table << "\n";
  std::size_t pos = 0;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    for (std::size_t j = i + 1; j < cs.size(); ++j, ++pos) {
      const auto& ov = overlaps[pos];
      if (only && (only->first != i || only->second != j)) continue;
      const double rho = correlation::general_pairwise_correlation(
          ov, cs[i].allocation_ratio, cs[j].allocation_ratio);
      json entry{{"i", cs[i].id},        {"j", cs[j].id},
                 {"shared", ov.shared},  {"total_i", ov.total_i},
                 {"total_j", ov.total_j}, {"rho", rho}};
      table << cs[i].id << "," << cs[j].id << "   " << fmt(ov.shared, 1) << "   "
            << fmt(ov.total_i, 0) << "      " << fmt(ov.total_j, 0) << "      "
            << fmt(rho, 2);
      if (summary) {
        const double rho_hat = summary->z_correlation(i, j);
        const double se =
            (1.0 - rho_hat * rho_hat) / std::sqrt(static_cast<double>(summary->replications));
        entry["rho_hat"] = rho_hat;
        entry["se"] = se;
        table << "    " << fmt(rho_hat, 2) << "    " << fmt(se, 4);
      }
      table << "\n";
      pairs.push_back(entry);
    }
  }
  emit(common, json{{"command", "correlation"}, {"scenario", common.scenario_path},
                    {"pairs", pairs}},
       table.str());
  return 0;
}

int cmd_fwer(const CommonOptions& common, const std::string& method) {
  const ScenarioFile sc = load(common);
  const auto corr = scenario_correlation(sc);
  std::vector<double> alphas;
  for (const auto& c : sc.schedule.comparisons) alphas.push_back(c.alpha);

  json out{{"command", "fwer"}, {"scenario", common.scenario_path}};
  std::ostringstream table;
  const bool all = method == "all";
  const auto row = [&](power::FwerMethod fm, const char* label) {
    const auto r = power::fwer_report(fm, alphas, corr);
    out[power::to_string(fm)] = r.value.value();
    table << label << fmt(r.value.value(), 4) << "\n";
  };
  if (all || method == "sidak") row(power::FwerMethod::sidak, "sidak       ");
  if (all || method == "bonferroni") row(power::FwerMethod::bonferroni, "bonferroni  ");
  if (all || method == "dunnett") row(power::FwerMethod::dunnett, "dunnett     ");
  json corr_json = json::array();
  table << "correlation matrix used:\n";
  for (std::size_t i = 0; i < corr.dim(); ++i) {
    json row = json::array();
    table << "  ";
    for (std::size_t j = 0; j < corr.dim(); ++j) {
      row.push_back(corr(i, j));
      table << fmt(corr(i, j), 2) << (j + 1 < corr.dim() ? " " : "\n");
    }
    corr_json.push_back(row);
  }
  out["correlation"] = corr_json;
  emit(common, out, table.str());
  return 0;
}

int cmd_power(const CommonOptions& common) {
  const ScenarioFile sc = load(common);
  const auto corr = scenario_correlation(sc);
  const auto& cs = sc.schedule.comparisons;
  std::vector<double> omegas;
  for (const auto& c : cs) omegas.push_back(c.power);

  const double dis = power::disjunctive_power(omegas, corr);
  const double con = power::conjunctive_power(omegas, corr);

  json per = json::array();
  std::ostringstream table;
  table << "comparison  target_power  pairwise_at_target\n";
  for (const auto& c : cs) {
    // pairwise power evaluated at the design event/sample target; survival
    // targets are control events, converted to total events by 1+A (the
    // allocation split of events).
    long count = c.target_count();
    if (event_based(c.outcome))
      count = static_cast<long>(std::lround(count * (1.0 + c.allocation_ratio)));
    const double pw = power::pairwise_power(c.outcome, count, c.allocation_ratio, c.alpha);
    per.push_back({{"id", c.id}, {"target", c.power}, {"pairwise", pw}});
    table << c.id << "          " << fmt(c.power, 4) << "        " << fmt(pw, 4) << "\n";
  }
  table << "disjunctive " << fmt(dis, 4) << "\nconjunctive " << fmt(con, 4) << "\n";
  emit(common,
       json{{"command", "power"},
            {"scenario", common.scenario_path},
            {"disjunctive", dis},
            {"conjunctive", con},
            {"comparisons", per}},
       table.str());
  return 0;
}

int cmd_solve(const CommonOptions& common, double target, const std::string& buyback,
              bool recursive) {
  const ScenarioFile sc = load(common);
  double t = target;
  if (t <= 0.0) {
    if (!sc.target_fwer)
      throw ConfigError("no --target given and no [solver] target_fwer in the scenario");
    t = *sc.target_fwer;
  }

  alpha::AlphaAllocation sol;
  std::vector<std::string> ids;
  if (!buyback.empty()) {
    PlatformSchedule remaining = sc.schedule;
    std::erase_if(remaining.comparisons,
                  [&](const ComparisonSpec& c) { return c.id == buyback; });
    if (remaining.comparisons.size() == sc.schedule.comparisons.size())
      throw ConfigError("--buyback: no comparison with id '" + buyback + "'");
    const auto corr = correlation::build_correlation_matrix(
        remaining, sim::predicted_overlaps(remaining));
    sol = alpha::buyback_alpha(t, corr);
    for (const auto& c : remaining.comparisons) ids.push_back(c.id);
  } else if (recursive) {
    sol = alpha::recursive_alpha_adjust(sc.schedule, t, sc.solver_max_iter,
                                        sc.solver_damping);
    for (const auto& c : sc.schedule.comparisons) ids.push_back(c.id);
  } else {
    sol = alpha::solve_uniform_alpha(t, scenario_correlation(sc));
    for (const auto& c : sc.schedule.comparisons) ids.push_back(c.id);
  }

  json out{{"command", "solve"},
           {"scenario", common.scenario_path},
           {"target_fwer", t},
           {"achieved_fwer", sol.achieved_fwer},
           {"iterations", sol.iterations},
           {"converged", sol.converged},
           {"alpha", sol.alphas.front()},
           {"comparisons", ids}};
  std::ostringstream table;
  table << "target FWER    " << fmt(t, 4) << "\n"
        << "solved alpha   " << fmt(sol.alphas.front(), 4) << " per comparison ("
        << ids.size() << " comparisons)\n"
        << "achieved FWER  " << fmt(sol.achieved_fwer, 4) << "\n";
  if (recursive)
    table << "iterations     " << sol.iterations
          << (sol.converged ? "" : "  (NOT CONVERGED)") << "\n";
  emit(common, out, table.str());
  return sol.converged ? 0 : kExitNonConvergence;
}

int cmd_simulate(const CommonOptions& common, long reps, long seed,
                 const std::string& truth) {
  const ScenarioFile sc = load(common);
  const bool null_truth = truth.empty() ? sc.truth == "null" : truth == "null";
  if (!truth.empty() && truth != "null" && truth != "design")
    throw ConfigError("--truth must be 'null' or 'design'");
  const auto cfg = sim_config(sc, reps, seed, null_truth, resolve_threads(common.threads));

  if (common.out == "csv") {
    sim::write_replicates_csv(cfg, std::cout);
    return 0;
  }

  const sim::SimSummary s = sim::simulate_platform(cfg);
  const auto& cs = sc.schedule.comparisons;

  json per = json::array();
  for (std::size_t k = 0; k < cs.size(); ++k)
    per.push_back({{"id", cs[k].id},
                   {"reject_rate", s.pairwise_reject[k]},
                   {"se", s.pairwise_reject_se[k]},
                   {"mean_z", s.mean_z[k]},
                   {"mean_cutoff", s.mean_cutoff[k]}});
  json pairs = json::array();
  std::size_t pos = 0;
  for (std::size_t i = 0; i < cs.size(); ++i)
    for (std::size_t j = i + 1; j < cs.size(); ++j, ++pos)
      pairs.push_back({{"i", cs[i].id},
                       {"j", cs[j].id},
                       {"rho_hat", s.z_correlation(i, j)},
                       {"mean_shared", s.mean_shared[pos]}});
  json out{{"command", "simulate"},
           {"scenario", common.scenario_path},
           {"replications", s.replications},
           {"seed", cfg.seed},
           {"truth", null_truth ? "null" : "design"},
           {"any_rejection", s.fwer},
           {"any_rejection_se", s.fwer_se},
           {"all_rejection", s.conjunctive},
           {"all_rejection_se", s.conjunctive_se},
           {"comparisons", per},
           {"pairs", pairs}};

  std::ostringstream table;
  table << "replications   " << s.replications << " (truth: "
        << (null_truth ? "global null" : "design effects") << ", seed " << cfg.seed
        << ")\n";
  table << (null_truth ? "FWER           " : "disjunctive    ") << fmt(s.fwer, 4)
        << " +- " << fmt(s.fwer_se, 4) << "\n";
  if (!null_truth)
    table << "conjunctive    " << fmt(s.conjunctive, 4) << " +- "
          << fmt(s.conjunctive_se, 4) << "\n";
  table << "comparison  reject    mean_z    mean_cutoff\n";
  for (std::size_t k = 0; k < cs.size(); ++k)
    table << cs[k].id << "          " << fmt(s.pairwise_reject[k], 4) << "    "
          << fmt(s.mean_z[k], 3) << "    " << fmt(s.mean_cutoff[k], 3) << "\n";
  if (!pairs.empty()) {
    table << "pair        rho_hat   mean_shared\n";
    pos = 0;
    for (std::size_t i = 0; i < cs.size(); ++i)
      for (std::size_t j = i + 1; j < cs.size(); ++j, ++pos)
        table << cs[i].id << "," << cs[j].id << "       "
              << fmt(s.z_correlation(i, j), 2) << "      "
              << fmt(s.mean_shared[pos], 1) << "\n";
  }
  emit(common, out, table.str());
  return 0;
}

int cmd_recommend(const CommonOptions& common, bool fwer_required, bool related,
                  bool unplanned) {
  const ScenarioFile sc = load(common);
  const auto corr = scenario_correlation(sc);

  power::StrategyContext ctx;
  ctx.fwer_control_required = fwer_required;
  ctx.questions_related = related;
  ctx.unplanned_addition = unplanned;
  ctx.comparisons = sc.schedule.comparisons.size();
  for (const auto& c : sc.schedule.comparisons)
    ctx.allocation_ratios.push_back(c.allocation_ratio);
  for (std::size_t i = 0; i < corr.dim(); ++i)
    for (std::size_t j = i + 1; j < corr.dim(); ++j)
      ctx.correlations.push_back(corr(i, j));

  const power::Strategy s = power::strategy_recommend(ctx);
  std::string text;
  switch (s) {
    case power::Strategy::control_pwer_only:
      text = "Control each pairwise error rate; no familywise adjustment is called for.";
      break;
    case power::Strategy::split_sidak_or_bonferroni:
      text = "Split the familywise level across the K comparisons with the Sidak "
             "(or Bonferroni) rule; the correlations are too small to buy anything back.";
      break;
    case power::Strategy::split_dunnett:
      text = "Split the familywise level using the Dunnett adjustment to exploit the "
             "shared-control correlation.";
      break;
    case power::Strategy::recursive_adjust:
      text = "Re-solve significance levels and event targets jointly (recursive "
             "procedure): changing the levels changes the overlap itself.";
      break;
  }
  emit(common,
       json{{"command", "recommend"},
            {"scenario", common.scenario_path},
            {"code", power::to_string(s)},
            {"text", text}},
       power::to_string(s) + "\n" + text + "\n");
  return 0;
}

int cmd_predict_events(const CommonOptions& common, double at) {
  const ScenarioFile sc = load(common);
  const auto proj = sim::project_schedule(sc.schedule);
  const auto& cs = sc.schedule.comparisons;

  json rows = json::array();
  std::ostringstream table;
  table << "comparison  open     accrual_close  analysis  control_events\n";
  for (std::size_t k = 0; k < cs.size(); ++k) {
    double events = proj[k].expected_control_events;
    double horizon = proj[k].analysis_time;
    if (at >= 0.0) {
      horizon = at;
      const auto* surv = std::get_if<SurvivalOutcome>(&cs[k].outcome);
      events = surv ? sim::expected_events(
                          proj[k].control_rate, surv->lambda0, proj[k].open,
                          std::min(proj[k].accrual_close, at), at)
                    : 0.0;
    }
    rows.push_back({{"id", cs[k].id},
                    {"open", proj[k].open},
                    {"accrual_close", proj[k].accrual_close},
                    {"analysis", proj[k].analysis_time},
                    {"at", horizon},
                    {"control_events", events}});
    table << cs[k].id << "          " << fmt(proj[k].open, 2) << "     "
          << fmt(proj[k].accrual_close, 3) << "          " << fmt(proj[k].analysis_time, 3)
          << "     " << fmt(events, 1) << "\n";
  }

  json pairs = json::array();
  const auto overlaps = sim::predicted_overlaps(sc.schedule);
  std::size_t pos = 0;
  table << "pair        expected_shared\n";
  for (std::size_t i = 0; i < cs.size(); ++i)
    for (std::size_t j = i + 1; j < cs.size(); ++j, ++pos) {
      double shared = overlaps[pos].shared;
      if (at >= 0.0) {
        const auto* surv = std::get_if<SurvivalOutcome>(&cs[i].outcome);
        const double w0 = std::max(proj[i].open, proj[j].open);
        const double w1 = std::min({proj[i].accrual_close, proj[j].accrual_close, at});
        const double cut = std::min({proj[i].analysis_time, proj[j].analysis_time, at});
        const double r0 = std::max(proj[i].control_rate, proj[j].control_rate);
        shared = (surv && w1 > w0) ? sim::expected_events(r0, surv->lambda0, w0, w1, cut) : 0.0;
      }
      pairs.push_back({{"i", cs[i].id}, {"j", cs[j].id}, {"expected_shared", shared}});
      table << cs[i].id << "," << cs[j].id << "       " << fmt(shared, 1) << "\n";
    }
  emit(common,
       json{{"command", "predict-events"},
            {"scenario", common.scenario_path},
            {"comparisons", rows},
            {"pairs", pairs}},
       table.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"familywise error rate, power and correlation toolkit for "
               "multi-arm platform trials with staggered arms"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string pair_flag, method = "all", buyback, truth;
  bool simulate_flag = false, recursive = false;
  bool fwer_required = false, related = false, unplanned = false;
  long reps = -1, seed = -1;
  double target = -1.0, at = -1.0;

  const auto add_common = [&](CLI::App* cmd, bool csv_ok = false) {
    cmd->add_option("scenario", common.scenario_path, "scenario file")->required();
    cmd->add_option("--out", common.out, "output format")
        ->check(CLI::IsMember(csv_ok ? std::vector<std::string>{"table", "json", "csv"}
                                     : std::vector<std::string>{"table", "json"}));
    cmd->add_option("--open", common.open_overrides,
                    "override a comparison's open time (ID=TIME, repeatable)");
    cmd->add_option("--threads", common.threads, "worker cap (or TRIALKIT_THREADS)");
  };

  auto* c_corr = app.add_subcommand("correlation", "pairwise Z-statistic correlations");
  add_common(c_corr);
  c_corr->add_option("--pair", pair_flag, "restrict to one pair: ID,ID");
  c_corr->add_flag("--simulate", simulate_flag, "add empirical correlations");
  c_corr->add_option("--reps", reps, "simulation replications");
  c_corr->add_option("--seed", seed, "simulation seed");

  auto* c_fwer = app.add_subcommand("fwer", "familywise type I error rate");
  add_common(c_fwer);
  c_fwer->add_option("--method", method, "sidak|bonferroni|dunnett|all")
      ->check(CLI::IsMember({"sidak", "bonferroni", "dunnett", "all"}));

  auto* c_power = app.add_subcommand("power", "disjunctive/conjunctive/pairwise power");
  add_common(c_power);

  auto* c_solve = app.add_subcommand("solve", "allocate significance levels for a target FWER");
  add_common(c_solve);
  c_solve->add_option("--target", target, "target familywise level");
  c_solve->add_option("--buyback", buyback, "drop this comparison and re-solve");
  c_solve->add_flag("--recursive", recursive, "overlap-aware fixed-point solve");

  auto* c_sim = app.add_subcommand("simulate", "patient-level Monte Carlo");
  add_common(c_sim, /*csv_ok=*/true);
  c_sim->add_option("--reps", reps, "replications");
  c_sim->add_option("--seed", seed, "RNG seed");
  c_sim->add_option("--truth", truth, "null|design");

  auto* c_rec = app.add_subcommand("recommend", "type I error strategy guidance");
  add_common(c_rec);
  c_rec->add_flag("--fwer-required", fwer_required, "familywise control is mandated");
  c_rec->add_flag("--related", related, "the comparisons pose related questions");
  c_rec->add_flag("--unplanned", unplanned, "arms were added post hoc");

  auto* c_pred = app.add_subcommand("predict-events", "expected control/shared events");
  add_common(c_pred);
  c_pred->add_option("--at", at, "evaluate at this platform time");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (c_corr->parsed()) return cmd_correlation(common, pair_flag, simulate_flag, reps, seed);
    if (c_fwer->parsed()) return cmd_fwer(common, method);
    if (c_power->parsed()) return cmd_power(common);
    if (c_solve->parsed()) return cmd_solve(common, target, buyback, recursive);
    if (c_sim->parsed()) return cmd_simulate(common, reps, seed, truth);
    if (c_rec->parsed()) return cmd_recommend(common, fwer_required, related, unplanned);
    if (c_pred->parsed()) return cmd_predict_events(common, at);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
