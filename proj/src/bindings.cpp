#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "trialkit/alpha_solver.hpp"
#include "trialkit/correlation.hpp"
#include "trialkit/error_power.hpp"
#include "trialkit/numerics.hpp"
#include "trialkit/scenario.hpp"
#include "trialkit/sim_engine.hpp"

namespace py = pybind11;
using namespace trialkit;

namespace {

CorrelationMatrix to_matrix(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  std::vector<double> flat;
  flat.reserve(n * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw ConfigError("correlation matrix must be square");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return CorrelationMatrix(n, std::move(flat));
}

std::vector<std::vector<double>> from_matrix(const CorrelationMatrix& m) {
  std::vector<std::vector<double>> rows(m.dim(), std::vector<double>(m.dim()));
  for (std::size_t i = 0; i < m.dim(); ++i)
    for (std::size_t j = 0; j < m.dim(); ++j) rows[i][j] = m(i, j);
  return rows;
}

py::dict summary_dict(const sim::SimSummary& s, const PlatformSchedule& schedule) {
  py::dict d;
  d["replications"] = s.replications;
  d["any_rejection"] = s.fwer;
  d["any_rejection_se"] = s.fwer_se;
  d["all_rejection"] = s.conjunctive;
  d["all_rejection_se"] = s.conjunctive_se;
  d["pairwise_reject"] = s.pairwise_reject;
  d["pairwise_reject_se"] = s.pairwise_reject_se;
  d["mean_z"] = s.mean_z;
  d["mean_cutoff"] = s.mean_cutoff;
  d["z_correlation"] = from_matrix(s.z_correlation);
  py::dict shared;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < schedule.comparisons.size(); ++i)
    for (std::size_t j = i + 1; j < schedule.comparisons.size(); ++j, ++pos)
      shared[py::str(schedule.comparisons[i].id + "," + schedule.comparisons[j].id)] =
          s.mean_shared[pos];
  d["mean_shared"] = shared;
  return d;
}

}  // namespace

PYBIND11_MODULE(_trialkit, m) {
  m.doc() = "Familywise error, power and correlation calculations for multi-arm "
            "platform trials that add experimental arms over time, plus the "
            "patient-level Monte Carlo engine backing them.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  // ---- normal-distribution machinery ----
  m.def("std_normal_cdf",
        [](double x) { return numerics::std_normal_cdf(x).value(); }, py::arg("x"));
  m.def("std_normal_quantile", &numerics::std_normal_quantile, py::arg("p"));
  m.def("bivariate_normal_cdf",
        [](double h, double k, double rho) {
          return numerics::bivariate_normal_cdf(h, k, rho).value();
        },
        py::arg("h"), py::arg("k"), py::arg("rho"));
  m.def("mvn_orthant_product_corr",
        [](const std::vector<double>& c, const std::vector<double>& lambda) {
          return numerics::mvn_orthant_product_corr(c, lambda).value();
        },
        py::arg("c"), py::arg("lambda_"));
  m.def("mvn_cdf_qmc",
        [](const std::vector<double>& c, const std::vector<std::vector<double>>& corr,
           double eps, std::uint64_t seed) {
          const auto r = numerics::mvn_cdf_qmc(c, to_matrix(corr), eps, seed);
          return py::make_tuple(r.estimate, r.half_width);
        },
        py::arg("c"), py::arg("corr"), py::arg("eps") = 1e-6, py::arg("seed") = 2024,
        "Lower orthant probability with a 99% confidence half-width.");
  m.def("find_root_monotone",
        [](const std::function<double(double)>& f, double lo, double hi, double tol) {
          return numerics::find_root_monotone(f, lo, hi, tol);
        },
        py::arg("f"), py::arg("lo"), py::arg("hi"), py::arg("tol") = 1e-8);

  // ---- outcome models ----
  py::class_<ContinuousOutcome>(m, "ContinuousOutcome")
      .def(py::init<double, double, double, double>(), py::arg("mu0"), py::arg("mu1"),
           py::arg("sigma0"), py::arg("sigma1"));
  py::enum_<BinaryScale>(m, "BinaryScale")
      .value("risk_difference", BinaryScale::risk_difference)
      .value("log_odds_ratio", BinaryScale::log_odds_ratio)
      .value("log_risk_ratio", BinaryScale::log_risk_ratio);
  py::class_<BinaryOutcome>(m, "BinaryOutcome")
      .def(py::init<double, double, BinaryScale>(), py::arg("p0"), py::arg("p1"),
           py::arg("scale") = BinaryScale::risk_difference);
  py::class_<SurvivalOutcome>(m, "SurvivalOutcome")
      .def(py::init<double, double>(), py::arg("control_hazard"), py::arg("hazard_ratio"));

  m.def("fisher_information", &fisher_information, py::arg("outcome"),
        py::arg("count"), py::arg("allocation_ratio"));
  m.def("effect_theta", &effect_theta, py::arg("outcome"));
  m.def("noncentrality", &noncentrality, py::arg("outcome"), py::arg("count"),
        py::arg("allocation_ratio"));

  // ---- correlations ----
  m.def("full_overlap_correlation", &correlation::full_overlap_correlation,
        py::arg("ratio_i"), py::arg("ratio_j"));
  m.def("partial_overlap_correlation", &correlation::partial_overlap_correlation,
        py::arg("allocation_ratio"), py::arg("shared"), py::arg("total"));
  m.def("general_pairwise_correlation",
        [](double shared, double total_i, double total_j, double ratio_i, double ratio_j) {
          return correlation::general_pairwise_correlation({0, 1, shared, total_i, total_j},
                                                           ratio_i, ratio_j);
        },
        py::arg("shared"), py::arg("total_i"), py::arg("total_j"), py::arg("ratio_i"),
        py::arg("ratio_j"));

  // ---- error rates and power ----
  m.def("fwer_sidak",
        [](const std::vector<double>& a) { return power::fwer_sidak(a).value(); },
        py::arg("alphas"));
  m.def("fwer_bonferroni",
        [](const std::vector<double>& a) { return power::fwer_bonferroni(a).value(); },
        py::arg("alphas"));
  m.def("fwer_dunnett",
        [](const std::vector<double>& a, const std::vector<std::vector<double>>& corr) {
          return power::fwer_dunnett(a, to_matrix(corr)).value();
        },
        py::arg("alphas"), py::arg("corr"));
  m.def("disjunctive_power",
        [](const std::vector<double>& w, const std::vector<std::vector<double>>& corr) {
          return power::disjunctive_power(w, to_matrix(corr)).value();
        },
        py::arg("omegas"), py::arg("corr"));
  m.def("conjunctive_power",
        [](const std::vector<double>& w, const std::vector<std::vector<double>>& corr) {
          return power::conjunctive_power(w, to_matrix(corr)).value();
        },
        py::arg("omegas"), py::arg("corr"));
  m.def("pairwise_power",
        [](const OutcomeSpec& o, long count, double ratio, double alpha) {
          return power::pairwise_power(o, count, ratio, alpha).value();
        },
        py::arg("outcome"), py::arg("count"), py::arg("allocation_ratio"), py::arg("alpha"));
  m.def("required_events", &power::required_events, py::arg("alpha"), py::arg("power"),
        py::arg("hazard_ratio"), py::arg("allocation_ratio"));
  m.def("control_share_events", &power::control_share_events, py::arg("total_events"),
        py::arg("allocation_ratio"));

  // ---- alpha allocation ----
  py::class_<alpha::AlphaAllocation>(m, "AlphaAllocation")
      .def_readonly("alphas", &alpha::AlphaAllocation::alphas)
      .def_readonly("achieved_fwer", &alpha::AlphaAllocation::achieved_fwer)
      .def_readonly("iterations", &alpha::AlphaAllocation::iterations)
      .def_readonly("converged", &alpha::AlphaAllocation::converged);
  m.def("solve_uniform_alpha",
        [](double target, const std::vector<std::vector<double>>& corr) {
          return alpha::solve_uniform_alpha(target, to_matrix(corr));
        },
        py::arg("target_fwer"), py::arg("corr"));
  m.def("buyback_alpha",
        [](double target, const std::vector<std::vector<double>>& corr) {
          return alpha::buyback_alpha(target, to_matrix(corr));
        },
        py::arg("target_fwer"), py::arg("remaining_corr"));

  // ---- scenarios and the simulation engine ----
  py::class_<ScenarioFile>(m, "Scenario")
      .def_property_readonly("replications",
                             [](const ScenarioFile& s) { return s.replications; })
      .def_property_readonly("seed", [](const ScenarioFile& s) { return s.seed; })
      .def_property_readonly("comparison_ids",
                             [](const ScenarioFile& s) {
                               std::vector<std::string> ids;
                               for (const auto& c : s.schedule.comparisons)
                                 ids.push_back(c.id);
                               return ids;
                             })
      .def("correlation_matrix",
           [](const ScenarioFile& s) {
             return from_matrix(correlation::build_correlation_matrix(
                 s.schedule, sim::predicted_overlaps(s.schedule)));
           })
      .def("predicted_overlaps",
           [](const ScenarioFile& s) {
             py::list out;
             for (const auto& ov : sim::predicted_overlaps(s.schedule)) {
               py::dict d;
               d["i"] = s.schedule.comparisons[ov.i].id;
               d["j"] = s.schedule.comparisons[ov.j].id;
               d["shared"] = ov.shared;
               d["total_i"] = ov.total_i;
               d["total_j"] = ov.total_j;
               out.append(d);
             }
             return out;
           })
      .def("solve",
           [](const ScenarioFile& s, double target) {
             return alpha::solve_uniform_alpha(
                 target, correlation::build_correlation_matrix(
                             s.schedule, sim::predicted_overlaps(s.schedule)));
           },
           py::arg("target_fwer"))
      .def("simulate",
           [](const ScenarioFile& s, long reps, long seed, bool null_truth, int threads) {
             sim::SimConfig cfg;
             cfg.schedule = s.schedule;
             cfg.global_null = null_truth;
             cfg.replications = reps > 0 ? reps : s.replications;
             cfg.seed = seed >= 0 ? static_cast<std::uint64_t>(seed) : s.seed;
             cfg.poisson_accrual = s.poisson_accrual;
             cfg.control_event_trigger = s.trigger == "control-events";
             cfg.threads = threads;
             return summary_dict(sim::simulate_platform(cfg), s.schedule);
           },
           py::arg("reps") = 0, py::arg("seed") = -1, py::arg("null_truth") = false,
           py::arg("threads") = 0);
  m.def("load_scenario", &load_scenario, py::arg("path"));

  m.def("expected_events", &sim::expected_events, py::arg("rate"), py::arg("hazard"),
        py::arg("accrual_start"), py::arg("accrual_end"), py::arg("t"));

  m.attr("__version__") = "0.1.0";
}
