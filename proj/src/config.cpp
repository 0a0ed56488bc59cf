#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "yamabe/cli.hpp"
#include "yamabe/common.hpp"

namespace yamabe::cli {

namespace {

struct TaskName {
  Task task;
  const char* name;
};

constexpr TaskName kTasks[] = {
    {Task::Solve, "solve"},
    {Task::Thresholds, "thresholds"},
    {Task::BubbleCheck, "bubble-check"},
    {Task::Nonexistence, "nonexistence"},
    {Task::Multiplicity, "multiplicity"},
};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("config: " + key + ": cannot parse '" + text + "'");
  return value;
}

std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  Setter set;
  Getter get;  // empty result: key omitted from the echo
};

std::map<std::string, Key> make_keys() {
  std::map<std::string, Key> keys;
#define YAMABE_INT(name, field)                                                                  \
  keys[name] = {[](RunConfig& c, const std::string& v) { c.field = parse_number<int>(name, v); }, \
                [](const RunConfig& c) { return std::to_string(c.field); }}
#define YAMABE_LONG(name, field)                                                                  \
  keys[name] = {[](RunConfig& c, const std::string& v) { c.field = parse_number<long>(name, v); }, \
                [](const RunConfig& c) { return std::to_string(c.field); }}
#define YAMABE_DOUBLE(name, field)                                                                  \
  keys[name] = {[](RunConfig& c, const std::string& v) { c.field = parse_number<double>(name, v); }, \
                [](const RunConfig& c) { return format_double(c.field); }}
#define YAMABE_OPT_DOUBLE(name, field)                                                              \
  keys[name] = {[](RunConfig& c, const std::string& v) { c.field = parse_number<double>(name, v); }, \
                [](const RunConfig& c) { return c.field ? format_double(*c.field) : std::string(); }}
#define YAMABE_STRING(name, field) \
  keys[name] = {[](RunConfig& c, const std::string& v) { c.field = v; }, [](const RunConfig& c) { return c.field; }}

  keys["run.task"] = {[](RunConfig& c, const std::string& v) { c.task = parse_task(v); },
                      [](const RunConfig& c) { return std::string(to_string(c.task)); }};
  keys["run.seed"] = {[](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("run.seed", v); },
                      [](const RunConfig& c) { return std::to_string(c.seed); }};
  YAMABE_STRING("run.out_dir", out_dir);

  YAMABE_STRING("domain.kind", domain.kind);
  YAMABE_INT("domain.k", domain.k);
  YAMABE_INT("domain.n", domain.n);
  YAMABE_INT("domain.m", domain.m);
  YAMABE_INT("domain.N", domain.N);
  YAMABE_DOUBLE("domain.R", domain.R);
  YAMABE_INT("domain.orbit_n", domain.orbit_n);
  YAMABE_STRING("domain.orbit_mode", domain.orbit_mode);
  YAMABE_STRING("domain.grid", domain.grid);
  YAMABE_STRING("domain.a", domain.a);
  YAMABE_STRING("domain.b", domain.b);
  YAMABE_STRING("domain.c", domain.c);

  YAMABE_OPT_DOUBLE("problem.kappa", problem.kappa);

  YAMABE_DOUBLE("solver.grad_tol", solver.grad_tol);
  YAMABE_LONG("solver.max_steps", solver.max_steps);
  YAMABE_DOUBLE("solver.armijo_c", solver.armijo_c);
  YAMABE_DOUBLE("solver.step_init", solver.step_init);
  YAMABE_OPT_DOUBLE("solver.rho", solver.rho);
  YAMABE_STRING("solver.linear", solver.linear);
  YAMABE_STRING("solver.initial", solver.initial);

  YAMABE_INT("multiplicity.k", multiplicity.k);

  YAMABE_INT("analysis.m", analysis.m);
  YAMABE_INT("analysis.quad_N", analysis.quad_N);
  YAMABE_DOUBLE("analysis.quad_R", analysis.quad_R);
  YAMABE_OPT_DOUBLE("analysis.lambda", analysis.lambda);
  YAMABE_DOUBLE("analysis.alpha", analysis.alpha);
  YAMABE_DOUBLE("analysis.eps_max", analysis.eps_max);
  YAMABE_INT("analysis.eps_count", analysis.eps_count);
  YAMABE_DOUBLE("analysis.btilde_radius", analysis.btilde_radius);
  YAMABE_DOUBLE("analysis.btilde_height", analysis.btilde_height);

#undef YAMABE_INT
#undef YAMABE_LONG
#undef YAMABE_DOUBLE
#undef YAMABE_OPT_DOUBLE
#undef YAMABE_STRING
  return keys;
}

const std::map<std::string, Key>& keys() {
  static const std::map<std::string, Key> table = make_keys();
  return table;
}

void check(const RunConfig& c) {
  const auto& d = c.domain;
  if (d.kind != "sphere_kn" && d.kind != "zonal" && d.kind != "radial" && d.kind != "custom")
    throw ConfigError("config: domain.kind must be sphere_kn, zonal, radial or custom");
  if (d.orbit_mode != "weighting" && d.orbit_mode != "cardinality")
    throw ConfigError("config: domain.orbit_mode must be weighting or cardinality");
  if (d.orbit_n < 0) throw ConfigError("config: domain.orbit_n must be nonnegative");
  if (d.kind == "custom" && d.grid.empty()) throw ConfigError("config: domain.kind = custom needs domain.grid");
  if (c.problem.kappa && !(*c.problem.kappa > 0))
    throw ConfigError("config: problem.kappa must be positive (the Yamabe problem is posed with kappa > 0)");
  if (c.solver.linear != "direct" && c.solver.linear != "cg")
    throw ConfigError("config: solver.linear must be direct or cg");
  if (c.solver.initial != "random" && c.solver.initial.rfind("bumps:", 0) != 0)
    throw ConfigError("config: solver.initial must be random or bumps:<j>");
  if (c.multiplicity.k < 1) throw ConfigError("config: multiplicity.k must be at least 1");
  if (c.analysis.eps_count < 2) throw ConfigError("config: analysis.eps_count must be at least 2");
  if (!(c.analysis.alpha > 0.5) || !(c.analysis.alpha < 1))
    throw ConfigError("config: analysis.alpha must lie in (1/2, 1)");
}

}  // namespace

const char* to_string(Task task) {
  for (const auto& t : kTasks)
    if (t.task == task) return t.name;
  return "?";
}

Task parse_task(const std::string& name) {
  for (const auto& t : kTasks)
    if (name == t.name) return t.task;
  throw ConfigError("config: unknown task '" + name +
                    "' (expected solve, thresholds, bubble-check, nonexistence or multiplicity)");
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  RunConfig config;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(number) + ": expected 'section.key = value'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.rfind("result.", 0) == 0 || key.rfind("meta.", 0) == 0) continue;
    const auto it = keys().find(key);
    if (it == keys().end()) throw ConfigError(source + ":" + std::to_string(number) + ": unknown key '" + key + "'");
    try {
      it->second.set(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  check(config);
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  RunConfig config = parse_config(in, path.string());
  config.base_dir = path.parent_path();
  return config;
}

std::string config_text(const RunConfig& config) {
  std::ostringstream os;
  for (const auto& [name, key] : keys()) {
    const std::string value = key.get(config);
    if (!value.empty()) os << name << " = " << value << "\n";
  }
  return os.str();
}

bool RunConfig::equivalent(const RunConfig& o) const {
  return task == o.task && seed == o.seed && out_dir == o.out_dir && domain == o.domain && problem == o.problem &&
         solver == o.solver && multiplicity == o.multiplicity && analysis == o.analysis;
}

int worker_threads() {
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* cap = std::getenv("SOLVER_THREADS")) {
    int value = 0;
    const std::string text(cap);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec == std::errc() && ptr == text.data() + text.size() && value >= 1) threads = std::min(threads, value);
  }
  return threads;
}

}  // namespace yamabe::cli
