#include <charconv>
#include <fstream>
#include <sstream>

#include "yamabe/analysis.hpp"
#include "yamabe/cli.hpp"

namespace yamabe::cli {

namespace {

double to_double(const std::string& text, const std::string& what) {
  double value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError(what + ": cannot parse '" + text + "'");
  return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, sep)) out.push_back(item);
  return out;
}

/// Two-column numeric CSV; a first line that does not parse is a header.
std::pair<Vector<double>, Vector<double>> read_two_columns(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<double> xs, ys;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cols = split(line, ',');
    if (cols.size() < 2) throw ConfigError(path.string() + ": expected two columns");
    try {
      xs.push_back(to_double(cols[0], path.string()));
      ys.push_back(to_double(cols[1], path.string()));
    } catch (const ConfigError&) {
      if (!first) throw;
    }
    first = false;
  }
  if (xs.size() < 2) throw ConfigError(path.string() + ": need at least two rows");
  return {Eigen::Map<Vector<double>>(xs.data(), xs.size()), Eigen::Map<Vector<double>>(ys.data(), ys.size())};
}

bool is_number(const std::string& text) {
  double value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

/// Applies a coefficient selector to `field`; "default" leaves it untouched.
void apply_selector(const RunConfig& config, const ReducedDomain<double>& dom, const std::string& name,
                    const std::string& selector, Vector<double>& field) {
  const std::string what = "domain." + name;
  if (selector == "default") return;
  if (is_number(selector)) {
    field.setConstant(to_double(selector, what));
    return;
  }
  if (selector == "round") {
    field.setConstant(conformal_constant<double>(dom.m) * dom.m * (dom.m - 1));
    return;
  }
  if (selector.rfind("bump:", 0) == 0) {
    const auto parts = split(selector.substr(5), ':');
    if (parts.size() != 4) throw ConfigError(what + ": expected bump:base:center:width:height");
    const double base = to_double(parts[0], what), center = to_double(parts[1], what);
    const double width = to_double(parts[2], what), height = to_double(parts[3], what);
    if (!(width > 0)) throw ConfigError(what + ": bump width must be positive");
    field = sample(dom, [&](double t) { return base + height * cutoff((t - center) / width); });
    return;
  }
  std::filesystem::path path(selector);
  if (path.is_relative()) path = config.base_dir / path;
  const auto [t, v] = read_two_columns(path);
  const double slack = 1e-9 * (1 + std::abs(dom.span()));
  if (t(0) > dom.grid(0) + slack || t(t.size() - 1) < dom.grid(dom.nodes() - 1) - slack)
    throw ConfigError(what + ": table " + path.string() + " does not cover the domain");
  try {
    const MonotoneCubic<double> interp(t, v);
    field = sample(dom, [&](double x) { return interp(x); });
  } catch (const InvalidAction& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

}  // namespace

ReducedDomain<double> build_domain(const RunConfig& config) {
  const DomainBlock& d = config.domain;
  ReducedDomain<double> dom;
  try {
    if (d.kind == "sphere_kn") {
      dom = build_cohomogeneity_one_sphere<double>(d.k, d.n, d.N);
    } else if (d.kind == "zonal") {
      dom = build_zonal_sphere<double>(d.m, d.N);
    } else if (d.kind == "radial") {
      dom = build_radial_euclidean<double>(d.m, d.R, d.N);
    } else {
      std::filesystem::path path(d.grid);
      if (path.is_relative()) path = config.base_dir / path;
      const auto [t, density] = read_two_columns(path);
      dom = build_custom<double>(d.m, t, density);
    }
    if (config.problem.kappa) {
      if (d.a != "default" || d.c != "default")
        throw ConfigError("config: problem.kappa fixes a = 1 and c = kappa; leave domain.a and domain.c at default");
      dom.a.setOnes();
      dom.c.setConstant(*config.problem.kappa);
    }
    apply_selector(config, dom, "a", d.a, dom.a);
    apply_selector(config, dom, "b", d.b, dom.b);
    apply_selector(config, dom, "c", d.c, dom.c);
    if (d.orbit_n > 0)
      dom = d.orbit_mode == "weighting" ? apply_finite_orbit_weighting(dom, d.orbit_n)
                                        : with_orbit_cardinality(dom, d.orbit_n);
    dom.validate();
  } catch (const InvalidAction& e) {
    throw ConfigError(std::string("domain: ") + e.what());
  }
  return dom;
}

}  // namespace yamabe::cli
