#pragma once

// Run configuration, its text format, and task dispatch for the `solver` tool.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "yamabe/domain.hpp"

namespace yamabe::cli {

enum class Task { Solve, Thresholds, BubbleCheck, Nonexistence, Multiplicity };

const char* to_string(Task task);
Task parse_task(const std::string& name);

/// Exit statuses of `run`.
enum ExitCode : int { kOk = 0, kFailure = 1, kNonCoercive = 2, kPartialCensus = 3, kConfigError = 4 };

struct DomainBlock {
  std::string kind = "sphere_kn";  // sphere_kn | zonal | radial | custom
  int k = 2, n = 2;
  int m = 3;
  int N = 1024;
  double R = 50;
  int orbit_n = 0;                        // 0: no finite orbit weighting
  std::string orbit_mode = "weighting";  // weighting | cardinality
  std::string grid;                       // custom: CSV of t,density
  // Coefficient selectors: "default", a number, "round",
  // "bump:base:center:width:height", or a path to a CSV of t,value.
  std::string a = "default", b = "default", c = "default";

  bool operator==(const DomainBlock&) const = default;
};

struct ProblemBlock {
  std::optional<double> kappa;  // Yamabe mode: a = 1, b = c_m R, c = kappa

  bool operator==(const ProblemBlock&) const = default;
};

struct SolverBlock {
  double grad_tol = 1e-8;
  long max_steps = 200000;
  double armijo_c = 1e-4;
  double step_init = 1;
  std::optional<double> rho;
  std::string linear = "direct";     // direct | cg
  std::string initial = "random";    // random | bumps:<j>

  bool operator==(const SolverBlock&) const = default;
};

struct MultiplicityBlock {
  int k = 3;

  bool operator==(const MultiplicityBlock&) const = default;
};

struct AnalysisBlock {
  int m = 0;  // bubble-check / nonexistence dimension; 0 means domain.m
  int quad_N = 4096;
  double quad_R = 100;
  std::optional<double> lambda;  // concentration level; default a tenth of the mass
  double alpha = 0.75;
  double eps_max = 1;
  int eps_count = 7;
  double btilde_radius = 4;
  double btilde_height = 1;

  bool operator==(const AnalysisBlock&) const = default;
};

struct RunConfig {
  Task task = Task::Solve;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  DomainBlock domain;
  ProblemBlock problem;
  SolverBlock solver;
  MultiplicityBlock multiplicity;
  AnalysisBlock analysis;
  std::filesystem::path base_dir;  // relative CSV paths resolve against this; not echoed

  bool equivalent(const RunConfig& other) const;
};

/// Parses `section.key = value` lines. Blank lines and lines starting with
/// '#' are skipped, as are the manifest's result.* and meta.* keys, so a
/// manifest re-parses to the configuration that produced it.
RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Canonical config text: every key, one per line, 17 significant digits.
std::string config_text(const RunConfig& config);

/// Domain described by the domain and problem blocks. Coefficient CSVs are
/// read relative to base_dir. Throws ConfigError on bad input.
ReducedDomain<double> build_domain(const RunConfig& config);

/// Number of worker threads: hardware concurrency capped by SOLVER_THREADS.
int worker_threads();

/// Dispatches the task, writes run.txt and the task's CSVs into out_dir and
/// returns an ExitCode. Messages go to `log`.
int run(const RunConfig& config, std::ostream& log);

}  // namespace yamabe::cli
