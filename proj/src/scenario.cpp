#include "trialkit/scenario.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <vector>

namespace trialkit {

namespace {

struct RawValue {
  std::string text;
  int line = 0;
  bool quoted = false;
};

// section -> (key -> value); array-of-table sections keep one map per entry.
struct RawDocument {
  std::map<std::string, RawValue> top;
  std::map<std::string, std::map<std::string, RawValue>> tables;
  std::vector<std::map<std::string, RawValue>> comparisons;
};

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  std::ostringstream os;
  os << origin << ":" << line << ": " << msg;
  throw ConfigError(os.str());
}

std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Removes a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

RawDocument tokenize(std::istream& in, const std::string& origin) {
  RawDocument doc;
  std::string section;
  std::map<std::string, RawValue>* current = &doc.top;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = strip(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.size() >= 4 && body[1] == '[') {
        if (body.substr(body.size() - 2) != "]]")
          fail(origin, lineno, "malformed table array header");
        const std::string name = strip(body.substr(2, body.size() - 4));
        if (name != "comparison")
          fail(origin, lineno, "unknown table array [[" + name + "]]");
        doc.comparisons.emplace_back();
        current = &doc.comparisons.back();
      } else {
        if (body.back() != ']') fail(origin, lineno, "malformed section header");
        section = strip(body.substr(1, body.size() - 2));
        if (section.empty()) fail(origin, lineno, "empty section name");
        current = &doc.tables[section];
      }
      continue;
    }
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) fail(origin, lineno, "expected key = value");
    const std::string key = strip(body.substr(0, eq));
    std::string value = strip(body.substr(eq + 1));
    if (key.empty()) fail(origin, lineno, "empty key");
    if (value.empty()) fail(origin, lineno, "empty value for key '" + key + "'");
    bool quoted = false;
    if (value.front() == '"') {
      if (value.size() < 2 || value.back() != '"')
        fail(origin, lineno, "unterminated string for key '" + key + "'");
      value = value.substr(1, value.size() - 2);
      quoted = true;
    }
    if (current->count(key)) fail(origin, lineno, "duplicate key '" + key + "'");
    (*current)[key] = RawValue{value, lineno, quoted};
  }
  return doc;
}

class Section {
 public:
  Section(std::map<std::string, RawValue> kv, std::string name, std::string origin)
      : kv_(std::move(kv)), name_(std::move(name)), origin_(std::move(origin)) {}

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key) {
    const RawValue v = take(key);
    return v.text;
  }

  double get_number(const std::string& key) {
    const RawValue v = take(key);
    if (v.quoted) fail(origin_, v.line, "key '" + key + "' must be a number");
    try {
      std::size_t used = 0;
      const double d = std::stod(v.text, &used);
      if (used != v.text.size()) throw std::invalid_argument(v.text);
      return d;
    } catch (const std::exception&) {
      fail(origin_, v.line, "key '" + key + "' is not a valid number: '" + v.text + "'");
    }
  }

  long get_integer(const std::string& key) {
    const RawValue v = kv_.at(key);
    const double d = get_number(key);
    if (std::fabs(d - std::round(d)) > 1e-9)
      fail(origin_, v.line, "key '" + key + "' must be an integer");
    return static_cast<long>(std::llround(d));
  }

  bool get_bool(const std::string& key) {
    const RawValue v = take(key);
    if (v.text == "true") return true;
    if (v.text == "false") return false;
    fail(origin_, v.line, "key '" + key + "' must be true or false");
  }

  // After all expected keys were consumed, anything left is unknown.
  void reject_leftovers() const {
    for (const auto& [key, value] : kv_)
      fail(origin_, value.line,
           "unknown key '" + key + "' in " + (name_.empty() ? "document" : name_));
  }

  int line_of(const std::string& key) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? 0 : it->second.line;
  }

 private:
  RawValue take(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end())
      throw ConfigError(origin_ + ": missing required key '" + key + "' in " + name_);
    RawValue v = it->second;
    kv_.erase(it);
    return v;
  }

  std::map<std::string, RawValue> kv_;
  std::string name_;
  std::string origin_;
};

OutcomeSpec parse_outcome(Section& sec, const std::string& origin, int header_line) {
  if (!sec.has("outcome.type"))
    fail(origin, header_line, "comparison is missing 'outcome.type'");
  const std::string type = sec.get_string("outcome.type");
  if (type == "survival") {
    SurvivalOutcome o;
    o.lambda0 = sec.get_number("outcome.control_hazard");
    o.hazard_ratio = sec.get_number("outcome.hazard_ratio");
    return o;
  }
  if (type == "continuous") {
    ContinuousOutcome o;
    o.mu0 = sec.get_number("outcome.mu0");
    o.mu1 = sec.get_number("outcome.mu1");
    o.sigma0 = sec.get_number("outcome.sigma0");
    o.sigma1 = sec.get_number("outcome.sigma1");
    return o;
  }
  if (type == "binary") {
    BinaryOutcome o;
    o.p0 = sec.get_number("outcome.p0");
    o.p1 = sec.get_number("outcome.p1");
    const int line = sec.line_of("outcome.scale");
    const std::string scale = sec.get_string("outcome.scale");
    if (scale == "risk_difference") o.scale = BinaryScale::risk_difference;
    else if (scale == "log_odds_ratio") o.scale = BinaryScale::log_odds_ratio;
    else if (scale == "log_risk_ratio") o.scale = BinaryScale::log_risk_ratio;
    else fail(origin, line, "unknown binary scale '" + scale + "'");
    return o;
  }
  fail(origin, header_line, "unknown outcome.type '" + type + "'");
}

}  // namespace

ScenarioFile parse_scenario(std::istream& text, const std::string& origin) {
  RawDocument raw = tokenize(text, origin);
  ScenarioFile out;

  Section top(std::move(raw.top), "document", origin);
  if (!top.has("spec")) throw ConfigError(origin + ": missing schema version key 'spec'");
  out.spec_version = static_cast<int>(top.get_integer("spec"));
  if (out.spec_version != 1)
    throw ConfigError(origin + ": unsupported schema version " +
                      std::to_string(out.spec_version));
  top.reject_leftovers();

  for (const auto& [name, keys] : raw.tables) {
    if (name != "platform" && name != "simulation" && name != "solver") {
      const int line = keys.empty() ? 0 : keys.begin()->second.line;
      fail(origin, line, "unknown section [" + name + "]");
    }
  }

  {
    Section platform(raw.tables.count("platform") ? raw.tables["platform"]
                                                  : std::map<std::string, RawValue>{},
                     "[platform]", origin);
    out.schedule.accrual_rate = platform.get_number("accrual_rate");
    if (platform.has("time_unit")) out.time_unit = platform.get_string("time_unit");
    if (platform.has("control_label"))
      out.schedule.control_label = platform.get_string("control_label");
    platform.reject_leftovers();
  }

  if (raw.comparisons.empty())
    throw ConfigError(origin + ": at least one [[comparison]] is required");
  for (auto& kv : raw.comparisons) {
    const int header_line = kv.empty() ? 0 : kv.begin()->second.line;
    Section sec(std::move(kv), "[[comparison]]", origin);
    ComparisonSpec c;
    c.id = sec.get_string("id");
    c.alpha = sec.get_number("alpha");
    c.power = sec.get_number("power");
    c.allocation_ratio = sec.get_number("allocation_ratio");
    if (sec.has("open_time")) c.open_time = sec.get_number("open_time");
    c.outcome = parse_outcome(sec, origin, header_line);
    if (sec.has("e0")) c.control_event_target = sec.get_integer("e0");
    if (sec.has("n0")) c.control_n_target = sec.get_integer("n0");
    if (sec.has("accrual_duration")) c.accrual_duration = sec.get_number("accrual_duration");
    sec.reject_leftovers();
    out.schedule.comparisons.push_back(std::move(c));
  }

  if (raw.tables.count("simulation")) {
    Section sim(raw.tables["simulation"], "[simulation]", origin);
    if (sim.has("replications")) out.replications = sim.get_integer("replications");
    if (sim.has("seed")) out.seed = static_cast<std::uint64_t>(sim.get_integer("seed"));
    if (sim.has("poisson_accrual")) out.poisson_accrual = sim.get_bool("poisson_accrual");
    if (sim.has("truth")) {
      const int line = sim.line_of("truth");
      out.truth = sim.get_string("truth");
      if (out.truth != "design" && out.truth != "null")
        fail(origin, line, "truth must be \"design\" or \"null\"");
    }
    if (sim.has("trigger")) {
      const int line = sim.line_of("trigger");
      out.trigger = sim.get_string("trigger");
      if (out.trigger != "total-events" && out.trigger != "control-events")
        fail(origin, line, "trigger must be \"total-events\" or \"control-events\"");
    }
    sim.reject_leftovers();
  }

  if (raw.tables.count("solver")) {
    Section solver(raw.tables["solver"], "[solver]", origin);
    if (solver.has("target_fwer")) out.target_fwer = solver.get_number("target_fwer");
    if (solver.has("max_iter")) out.solver_max_iter = static_cast<int>(solver.get_integer("max_iter"));
    if (solver.has("damping")) out.solver_damping = solver.get_number("damping");
    solver.reject_leftovers();
  }

  out.schedule.validate();
  if (out.replications < 1) throw ConfigError(origin + ": replications must be positive");
  return out;
}

ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  return parse_scenario(in, path);
}

}  // namespace trialkit
