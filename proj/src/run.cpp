#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "yamabe/cli.hpp"
#include "yamabe/multiplicity.hpp"
#include "yamabe/random.hpp"
#include "yamabe/version.hpp"

namespace yamabe::cli {

namespace {

namespace fs = std::filesystem;

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

/// Ordered key = value pairs for run.txt.
class Manifest {
 public:
  void add(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }
  void add(const std::string& key, double value) { add(key, num(value)); }
  void add(const std::string& key, long value) { add(key, std::to_string(value)); }
  void add(const std::string& key, int value) { add(key, std::to_string(value)); }
  void add(const std::string& key, bool value) { add(key, std::string(value ? "pass" : "fail")); }
  void add(const std::string& key, const char* value) { add(key, std::string(value)); }

  void write(const fs::path& path, const RunConfig& config) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "# solver run manifest\n" << config_text(config);
    for (const auto& [key, value] : entries_) out << key << " = " << value << "\n";
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

void write_csv(const fs::path& path, const std::string& header, const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << header << "\n";
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << num(row[j]);
    out << "\n";
  }
}

void write_trace(const fs::path& path, const std::vector<TraceRow>& trace) {
  std::vector<std::vector<double>> rows;
  rows.reserve(trace.size());
  for (const auto& r : trace)
    rows.push_back({double(r.step), r.flow_time, r.energy, r.grad_norm, r.dist_plus, r.dist_minus, r.nehari_residual});
  write_csv(path, "step,flow_time,energy,grad_norm,dist_plus,dist_minus,nehari_residual", rows);
}

void write_field(const fs::path& path, const Vector<double>& grid, const Vector<double>& u) {
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < grid.size(); ++i) rows.push_back({grid(i), u(i)});
  write_csv(path, "t,u", rows);
}

FlowConfig<double> flow_config(const SolverBlock& s) {
  FlowConfig<double> f;
  f.grad_tol = s.grad_tol;
  f.max_steps = s.max_steps;
  f.armijo_c = s.armijo_c;
  f.step_init = s.step_init;
  f.rho = s.rho;
  try {
    f.validate();
  } catch (const InvalidAction& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return f;
}

struct Constants {
  ThresholdReport<double> thresholds;
  ConeRadius<double> cone;
};

/// Threshold ladder and cone radius for k bumps; written under result.*.
Constants constants(const Problem<double>& pb, int k, const std::optional<double>& rho, Manifest& manifest) {
  Constants out;
  const auto bumps = build_invariant_bumps(pb.dom, pb.ops, k);
  out.thresholds = threshold_report(pb, bumps);
  out.cone = estimate_cone_radius(pb, bumps);
  if (rho) out.cone.rho = *rho;
  const auto& t = out.thresholds;
  manifest.add("result.mu", t.mu);
  manifest.add("result.A", t.A);
  manifest.add("result.mu_bar", t.mu_bar);
  manifest.add("result.S", t.S);
  manifest.add("result.S_pow", t.S_pow);
  manifest.add("result.ell_gamma", std::isinf(t.ell_gamma) ? std::string("inf") : num(t.ell_gamma));
  for (std::size_t j = 0; j < t.tau_k.size(); ++j) {
    manifest.add("result.tau_" + std::to_string(j + 1), t.tau_k[j]);
    manifest.add("result.ell_" + std::to_string(j + 1), t.ell_k[j]);
  }
  manifest.add("result.hypothesis", t.hypothesis);
  manifest.add("result.embedding_C", out.cone.C);
  manifest.add("result.rho_cap", out.cone.rho_cap);
  manifest.add("result.rho", out.cone.rho);
  return out;
}

Problem<double> problem(const RunConfig& config) {
  return make_problem(build_domain(config),
                      config.solver.linear == "cg" ? LinearSolverKind::ConjugateGradient : LinearSolverKind::Direct);
}

void add_report(Manifest& manifest, const std::string& prefix, const CriticalReport<double>& r) {
  manifest.add(prefix + "classification", to_string(r.classification));
  manifest.add(prefix + "energy", r.energy);
  manifest.add(prefix + "power_integral", r.power_integral);
  manifest.add(prefix + "nodal_count", r.nodal_count);
  manifest.add(prefix + "pde_residual", r.pde_residual);
  manifest.add(prefix + "nehari_residual", r.nehari_residual);
  manifest.add(prefix + "piece_nehari_residual", r.piece_nehari_residual);
  manifest.add(prefix + "steps", r.steps);
}

std::vector<double> census_row(int index, const CriticalReport<double>& r, double bound, bool holds) {
  return {double(index),           double(static_cast<int>(r.classification)),
          r.energy,                r.power_integral,
          double(r.nodal_count),   r.pde_residual,
          r.nehari_residual,       bound,
          double(holds ? 1 : 0)};
}

void write_census(const fs::path& path, const std::vector<std::vector<double>>& rows,
                  const std::vector<std::string>& classes) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "index,classification,energy,power_integral,nodal_count,pde_residual,nehari_residual,bound,bound_holds,"
         "field\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const int index = static_cast<int>(r[0]);
    out << index << "," << classes[i] << "," << num(r[2]) << "," << num(r[3]) << "," << static_cast<int>(r[4])
        << "," << num(r[5]) << "," << num(r[6]) << "," << num(r[7]) << "," << static_cast<int>(r[8]) << ",u_"
        << index << ".csv\n";
  }
}

/// Blow-up diagnostics for a non-convergent iterate.
void concentration(const RunConfig& config, const Problem<double>& pb, const Field<double>& u, Manifest& manifest,
                   std::ostream& log) {
  try {
    const auto con = levy_concentration(pb.dom, u, config.analysis.lambda);
    manifest.add("result.concentration.node", static_cast<long>(con.node));
    manifest.add("result.concentration.t", pb.dom.grid(con.node));
    manifest.add("result.concentration.radius", con.radius);
    const auto profile = rescale_at(pb.dom, u, con.node, con.radius);
    const auto match = bubble_match(profile, pb.m(), pb.dom.a(con.node), pb.dom.c(con.node));
    manifest.add("result.concentration.bubble_eps", match.eps * con.radius);
    manifest.add("result.concentration.bubble_residual", match.residual);
  } catch (const Error& e) {
    log << "concentration diagnostics unavailable: " << e.what() << "\n";
  }
}

int task_solve(const RunConfig& config, const fs::path& out, Manifest& manifest, std::ostream& log) {
  int j = 1;
  if (config.solver.initial != "random") {
    try {
      j = std::stoi(config.solver.initial.substr(6));
    } catch (const std::exception&) {
      throw ConfigError("config: solver.initial: bad bump count");
    }
    if (j < 1) throw ConfigError("config: solver.initial: bump count must be at least 1");
  }
  const Problem<double> pb = problem(config);
  const FlowConfig<double> fc = flow_config(config.solver);
  const Constants consts = constants(pb, std::max(j, config.multiplicity.k), config.solver.rho, manifest);
  Field<double> u0;
  if (config.solver.initial == "random") {
    FieldRng rng(config.seed);
    u0 = random_positive_field(pb.dom, rng);
  } else {
    u0 = census_seeds(build_invariant_bumps(pb.dom, pb.ops, j)).back();
  }
  try {
    const CriticalReport<double> r = run_to_critical(pb, u0, fc);
    write_trace(out / "trace_1.csv", r.trace);
    write_field(out / "u_1.csv", pb.dom.grid, r.u);
    const double bound = consts.thresholds.ell_k[j - 1] * consts.thresholds.S_pow;
    const bool holds = r.power_integral <= bound * (1 + kHypothesisMargin);
    write_census(out / "census.csv", {census_row(1, r, bound, holds)}, {to_string(r.classification)});
    add_report(manifest, "result.solution_1.", r);
    const auto inv = monitor_invariance(r.trace, consts.cone.rho);
    manifest.add("result.invariance.violations_plus", inv.violations_plus);
    manifest.add("result.invariance.violations_minus", inv.violations_minus);
    return kOk;
  } catch (const NonConvergence& e) {
    write_trace(out / "trace_1.csv", e.trace);
    const Field<double> last = Eigen::Map<const Vector<double>>(e.last_u.data(), e.last_u.size());
    write_field(out / "u_1.csv", pb.dom.grid, last);
    manifest.add("result.converged", false);
    concentration(config, pb, last, manifest, log);
    log << e.what() << " (the Palais-Smale condition may fail at this energy level; see the concentration "
        << "diagnostics in run.txt)\n";
    return kFailure;
  }
}

int task_thresholds(const RunConfig& config, Manifest& manifest) {
  const Problem<double> pb = problem(config);
  constants(pb, config.multiplicity.k, config.solver.rho, manifest);
  return kOk;
}

int task_multiplicity(const RunConfig& config, const fs::path& out, Manifest& manifest, std::ostream& log) {
  const Problem<double> pb = problem(config);
  const FlowConfig<double> fc = flow_config(config.solver);
  const SolutionCensus<double> census = find_solutions(pb, config.multiplicity.k, fc, worker_threads());
  // Same numbers as constants(), taken from the census so tau_gamma is the census minimum.
  const auto& t = census.thresholds;
  manifest.add("result.mu", t.mu);
  manifest.add("result.A", t.A);
  manifest.add("result.mu_bar", t.mu_bar);
  manifest.add("result.S", t.S);
  manifest.add("result.S_pow", t.S_pow);
  manifest.add("result.ell_gamma", std::isinf(t.ell_gamma) ? std::string("inf") : num(t.ell_gamma));
  for (std::size_t j = 0; j < t.tau_k.size(); ++j) {
    manifest.add("result.tau_" + std::to_string(j + 1), t.tau_k[j]);
    manifest.add("result.ell_" + std::to_string(j + 1), t.ell_k[j]);
  }
  manifest.add("result.tau_gamma", t.tau_gamma);
  manifest.add("result.hypothesis", t.hypothesis);
  manifest.add("result.embedding_C", census.cone.C);
  manifest.add("result.rho", fc.rho ? *fc.rho : census.cone.rho);

  std::vector<std::vector<double>> rows;
  std::vector<std::string> classes;
  for (std::size_t j = 0; j < census.entries.size(); ++j) {
    const auto& e = census.entries[j];
    const int index = static_cast<int>(j + 1);
    rows.push_back(census_row(index, e.report, e.bound, e.bound_holds));
    classes.emplace_back(to_string(e.report.classification));
    write_trace(out / ("trace_" + std::to_string(index) + ".csv"), e.report.trace);
    write_field(out / ("u_" + std::to_string(index) + ".csv"), pb.dom.grid, e.report.u);
    const std::string prefix = "result.solution_" + std::to_string(index) + ".";
    add_report(manifest, prefix, e.report);
    manifest.add(prefix + "seed_bumps", e.seed);
    manifest.add(prefix + "bound", e.bound);
    manifest.add(prefix + "bound_holds", e.bound_holds);
  }
  write_census(out / "census.csv", rows, classes);
  manifest.add("result.found", static_cast<int>(census.entries.size()));
  manifest.add("result.requested", census.requested);
  for (std::size_t i = 0; i < census.warnings.size(); ++i) {
    manifest.add("result.warning_" + std::to_string(i + 1), census.warnings[i]);
    log << "warning: " << census.warnings[i] << "\n";
  }
  return census.partial() ? kPartialCensus : kOk;
}

int task_bubble_check(const RunConfig& config, Manifest& manifest, std::ostream& log) {
  const int m = config.analysis.m > 0 ? config.analysis.m : config.domain.m;
  manifest.add("result.m", m);
  try {
    const auto s = sobolev_constant<double>(m, config.analysis.quad_N, config.analysis.quad_R);
    manifest.add("result.S", s.S);
    manifest.add("result.S_pow", s.S_pow);
    manifest.add("result.grad_integral", s.grad_integral);
    manifest.add("result.sobolev_mismatch", s.mismatch);
    manifest.add("result.S_closed_form", s.closed_form);
    manifest.add("result.rayleigh_quotient", s.grad_integral / std::pow(s.S_pow, (m - 2.0) / m));
    manifest.add("result.sobolev_cross_check", true);
    if (config.domain.kind == "radial") {
      // Discrete J of the sampled U - U(R) against its continuum value and against S^{m/2}/m.
      RunConfig radial = config;
      radial.domain.m = m;
      const auto dom = build_domain(radial);
      const auto ops = assemble_operators(dom);
      Field<double> U = sample(dom, [&](double r) { return bubble_value(m, 1.0, r); });
      U.array() -= U(U.size() - 1);
      const double J = energy(dom, ops, U);
      const double continuum = truncated_bubble_energy<double>(m, 1.0, dom.grid(dom.nodes() - 1));
      const double target = s.S_pow / m;
      manifest.add("result.discrete_bubble_energy", J);
      manifest.add("result.truncated_bubble_energy", continuum);
      manifest.add("result.bubble_energy_target", target);
      manifest.add("result.discretization_error", std::abs(J - continuum) / continuum);
      manifest.add("result.truncation_error", std::abs(continuum - target) / target);
    }
    return kOk;
  } catch (const QuadratureError& e) {
    manifest.add("result.sobolev_cross_check", false);
    log << e.what() << "\n";
    return kFailure;
  }
}

int task_nonexistence(const RunConfig& config, const fs::path& out, Manifest& manifest) {
  const AnalysisBlock& a = config.analysis;
  const int m = a.m > 0 ? a.m : config.domain.m;
  std::vector<double> eps;
  for (int i = 0; i < a.eps_count; ++i) eps.push_back(std::ldexp(a.eps_max, -i));
  const double radius = a.btilde_radius, height = a.btilde_height;
  if (!(radius > 0)) throw ConfigError("config: analysis.btilde_radius must be positive");
  const auto rep = ground_state_gap_experiment<double>(
      m, std::function<double(double)>([=](double r) { return height * cutoff(r / radius); }), radius, eps, a.alpha);
  std::vector<std::vector<double>> rows;
  for (const auto& r : rep.rows) rows.push_back({r.eps, r.quotient, r.quotient - rep.S, r.perturbation});
  write_csv(out / "gap.csv", "eps,quotient,gap,perturbation", rows);
  manifest.add("result.m", m);
  manifest.add("result.S", rep.S);
  manifest.add("result.decay_exponent", rep.decay_exponent);
  manifest.add("result.exponent_lower", rep.exponent_lower);
  manifest.add("result.exponent_upper", rep.exponent_upper);
  manifest.add("result.strict_gap", rep.strict_gap);
  manifest.add("result.monotone", rep.monotone);
  manifest.add("result.exponent_in_range", rep.exponent_in_range);
  return kOk;
}

}  // namespace

int run(const RunConfig& config, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path out(config.out_dir);
  Manifest manifest;
  int status = kOk;
  try {
    fs::create_directories(out);
    switch (config.task) {
      case Task::Solve: status = task_solve(config, out, manifest, log); break;
      case Task::Thresholds: status = task_thresholds(config, manifest); break;
      case Task::Multiplicity: status = task_multiplicity(config, out, manifest, log); break;
      case Task::BubbleCheck: status = task_bubble_check(config, manifest, log); break;
      case Task::Nonexistence: status = task_nonexistence(config, out, manifest); break;
    }
  } catch (const NonCoercive& e) {
    log << "coercivity hypothesis violated: " << e.what()
        << "; the flow needs -div(a grad) + b to be coercive on invariant functions\n";
    manifest.add("result.error", "non-coercive");
    status = kNonCoercive;
  } catch (const ConfigError& e) {
    log << e.what() << "\n";
    manifest.add("result.error", "config");
    status = kConfigError;
  } catch (const fs::filesystem_error& e) {
    log << "output directory: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    manifest.add("result.error", e.what());
    status = kFailure;
  }
  manifest.add("result.exit_status", status);
  manifest.add("meta.version", kVersion);
  manifest.add("meta.threads", worker_threads());
  manifest.add("meta.wall_time_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  try {
    manifest.write(out / "run.txt", config);
  } catch (const Error& e) {
    log << e.what() << "\n";
    return kFailure;
  }
  return status;
}

}  // namespace yamabe::cli
