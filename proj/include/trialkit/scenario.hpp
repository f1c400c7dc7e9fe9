#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "trialkit/trial_model.hpp"

namespace trialkit {

// A scenario document: TOML-style sections
//
//   spec = 1
//   [platform]                 accrual_rate, time_unit, control_label
//   [[comparison]]             id, alpha, power, allocation_ratio, open_time,
//                              e0 | n0, accrual_duration,
//                              outcome.type + family parameters
//   [simulation]               replications, seed, truth, poisson_accrual
//   [solver]                   target_fwer, max_iter, damping
//
// Unknown keys are rejected with their line number.  The subset understood
// here covers tables, arrays of tables, dotted keys, strings, numbers and
// booleans; that is the whole schema.
struct ScenarioFile {
  int spec_version = 1;
  PlatformSchedule schedule;
  std::string time_unit = "unit";

  long replications = 10000;
  std::uint64_t seed = 0;
  std::string truth = "design";  // "design" or "null"
  bool poisson_accrual = false;
  std::string trigger = "total-events";  // or "control-events"

  std::optional<double> target_fwer;
  int solver_max_iter = 50;
  double solver_damping = 1.0;
};

// Throws ConfigError with file/line context on any syntax or schema problem.
ScenarioFile load_scenario(const std::string& path);
ScenarioFile parse_scenario(std::istream& text, const std::string& origin);

}  // namespace trialkit
