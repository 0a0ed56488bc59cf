#pragma once

// Disjoint invariant bumps, the tau/ell energy ladder, the compactness
// threshold, and the solution census seeded from alternating bump sums.

#include <future>
#include <string>
#include <vector>

#include "yamabe/analysis.hpp"
#include "yamabe/flow.hpp"

namespace yamabe {

/// Supports [left_i, right_i] of a bump family, ordered and separated by at
/// least one cell so that no two bumps are nonzero at neighbouring nodes.
/// The outer ends may stick out of the domain; the bumps are then clipped.
template <typename Scalar>
struct BumpLayout {
  std::vector<Scalar> left, right;
  std::size_t size() const { return left.size(); }
};

template <typename Scalar>
Field<Scalar> bump_field(const ReducedDomain<Scalar>& dom, Scalar left, Scalar right) {
  const Scalar center = Scalar(0.5) * (left + right), half = Scalar(0.5) * (right - left);
  Field<Scalar> u(dom.nodes());
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = cutoff((dom.grid(i) - center) / half);
  if (dom.bc[0] == BoundaryTag::Dirichlet) u(0) = 0;
  if (dom.bc[1] == BoundaryTag::Dirichlet) u(u.size() - 1) = 0;
  return u;
}

namespace detail {

template <typename Scalar>
Scalar max_spacing(const ReducedDomain<Scalar>& dom) {
  Scalar h = 0;
  for (Eigen::Index i = 0; i + 1 < dom.nodes(); ++i) h = std::max(h, dom.grid(i + 1) - dom.grid(i));
  return h;
}

template <typename Scalar>
bool layout_admissible(const ReducedDomain<Scalar>& dom, const BumpLayout<Scalar>& layout) {
  const Scalar h = max_spacing(dom);
  const Scalar lo = dom.grid(0), hi = dom.grid(dom.nodes() - 1);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (!(layout.right[i] - layout.left[i] >= Scalar(4) * h)) return false;
    if (layout.right[i] <= lo + h || layout.left[i] >= hi - h) return false;
    if (i > 0 && !(layout.left[i] - layout.right[i - 1] >= h)) return false;
  }
  return true;
}

/// Nehari level of a single bump: max_t J(t w) = (1/m) (|w|^2_{ab})^{p/(p-2)} / (|w|^p_{c,p})^{2/(p-2)}.
template <typename Scalar>
Scalar nehari_level(const ReducedDomain<Scalar>& dom, const EllipticOperatorSet<Scalar>& ops, const Field<Scalar>& w) {
  using std::pow;
  const Scalar p = dom.exponent();
  const Scalar quad = norm_ab_sq(ops, w), power = power_integral(ops, w, p);
  if (!(quad > 0) || !(power > 0)) return std::numeric_limits<Scalar>::infinity();
  return pow(quad, p / (p - Scalar(2))) / pow(power, Scalar(2) / (p - Scalar(2))) / Scalar(dom.m);
}

}  // namespace detail

/// k equal, evenly spaced supports covering the quotient interval.
template <typename Scalar>
BumpLayout<Scalar> default_layout(const ReducedDomain<Scalar>& dom, int k) {
  if (k < 1) throw InvalidAction("bumps: k must be at least 1");
  if (dom.nodes() - 2 < 4 * k) throw InvalidAction("bumps: need at least 4k interior nodes");
  const Scalar lo = dom.grid(0), hi = dom.grid(dom.nodes() - 1);
  const Scalar h = detail::max_spacing(dom);
  const Scalar width = (hi - lo) / Scalar(k);
  BumpLayout<Scalar> layout;
  for (int i = 0; i < k; ++i) {
    layout.left.push_back(lo + width * Scalar(i) + (i == 0 ? -width / 2 : Scalar(0.75) * h));
    layout.right.push_back(lo + width * Scalar(i + 1) - (i + 1 == k ? -width / 2 : Scalar(0.75) * h));
  }
  if (!detail::layout_admissible(dom, layout)) throw InvalidAction("bumps: grid too coarse for k bumps");
  return layout;
}

/// Nehari-projected bumps for a layout.
template <typename Scalar>
std::vector<Field<Scalar>> layout_bumps(const ReducedDomain<Scalar>& dom, const EllipticOperatorSet<Scalar>& ops,
                                        const BumpLayout<Scalar>& layout) {
  std::vector<Field<Scalar>> bumps;
  for (std::size_t i = 0; i < layout.size(); ++i)
    bumps.push_back(nehari_project(dom, ops, bump_field(dom, layout.left[i], layout.right[i])));
  return bumps;
}

/// Coordinate search minimizing sum_i J(omega_i) over the support ends,
/// shared boundaries and translations, keeping the supports disjoint.
template <typename Scalar>
BumpLayout<Scalar> optimize_layout(const ReducedDomain<Scalar>& dom, const EllipticOperatorSet<Scalar>& ops,
                                   BumpLayout<Scalar> layout, int max_rounds = 200) {
  const Scalar h = detail::max_spacing(dom);
  const std::size_t k = layout.size();
  auto level = [&](const BumpLayout<Scalar>& l, std::size_t i) {
    return detail::nehari_level(dom, ops, bump_field(dom, l.left[i], l.right[i]));
  };
  std::vector<Scalar> levels(k);
  for (std::size_t i = 0; i < k; ++i) levels[i] = level(layout, i);

  // A move shifts a set of ends by +-step: (bump, side) pairs.
  using Move = std::vector<std::pair<std::size_t, int>>;
  std::vector<Move> moves;
  for (std::size_t i = 0; i < k; ++i) {
    moves.push_back({{i, 0}});
    moves.push_back({{i, 1}});
    moves.push_back({{i, 0}, {i, 1}});
    if (i + 1 < k) moves.push_back({{i, 1}, {i + 1, 0}});
  }
  Scalar step = dom.span() / Scalar(8 * k);
  for (int round = 0; round < max_rounds && step >= h / 4; ++round) {
    bool improved = false;
    for (const Move& move : moves) {
      for (Scalar dir : {Scalar(1), Scalar(-1)}) {
        BumpLayout<Scalar> trial = layout;
        for (auto [i, side] : move) (side == 0 ? trial.left[i] : trial.right[i]) += dir * step;
        if (!detail::layout_admissible(dom, trial)) continue;
        std::vector<Scalar> next = levels;
        Scalar before = 0, after = 0;
        for (auto [i, side] : move) {
          if (next[i] != levels[i]) continue;
          next[i] = level(trial, i);
          before += levels[i];
          after += next[i];
        }
        if (after < before * (Scalar(1) - Scalar(1e-12))) {
          layout = std::move(trial);
          levels = std::move(next);
          improved = true;
        }
      }
    }
    if (!improved) step /= 2;
  }
  return layout;
}

/// k disjoint, Nehari-projected invariant bumps (optimized layout).
template <typename Scalar>
std::vector<Field<Scalar>> build_invariant_bumps(const ReducedDomain<Scalar>& dom,
                                                 const EllipticOperatorSet<Scalar>& ops, int k) {
  return layout_bumps(dom, ops, optimize_layout(dom, ops, default_layout(dom, k)));
}

template <typename Scalar>
struct Ladder {
  std::vector<Scalar> tau;
  std::vector<Scalar> ell;
};

/// tau_j = sum_{i<=j} (1/m) ||omega_i||^2_{a,b};  ell_j = m tau_j / S^{m/2}.
template <typename Scalar>
Ladder<Scalar> tau_ell_ladder(const ReducedDomain<Scalar>& dom, const EllipticOperatorSet<Scalar>& ops,
                              const std::vector<Field<Scalar>>& bumps) {
  using std::pow;
  const Scalar S_pow = pow(sobolev_constant_closed_form<Scalar>(dom.m), Scalar(dom.m) / 2);
  Ladder<Scalar> out;
  Scalar tau = 0;
  for (const auto& w : bumps) {
    tau += norm_ab_sq(ops, w) / Scalar(dom.m);
    out.tau.push_back(tau);
    out.ell.push_back(tau * Scalar(dom.m) / S_pow);
  }
  return out;
}

/// min over nodes of #orbit a^{m/2} / c^{(m-2)/2}; infinity when every orbit
/// is infinite.
template <typename Scalar>
Scalar threshold(const ReducedDomain<Scalar>& dom) {
  using std::pow;
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < dom.nodes(); ++i) {
    if (dom.orbit_card[i] == kInfiniteOrbit) continue;
    const Scalar value = Scalar(dom.orbit_card[i]) * pow(dom.a(i), Scalar(dom.m) / 2) /
                         pow(dom.c(i), Scalar(dom.m - 2) / 2);
    best = std::min(best, value);
  }
  return best;
}

template <typename Scalar>
struct ThresholdReport {
  Scalar mu = 0, A = 0, mu_bar = 0;
  Scalar S = 0, S_pow = 0;
  Scalar ell_gamma = 0;
  std::vector<Scalar> tau_k, ell_k;
  Scalar tau_gamma = 0;
  bool hypothesis = false;  // ell_gamma > ell_k
};

/// Relative margin by which ell_gamma must exceed ell_k.
inline constexpr double kHypothesisMargin = 1e-6;

template <typename Scalar>
ThresholdReport<Scalar> threshold_report(const Problem<Scalar>& pb, const std::vector<Field<Scalar>>& bumps) {
  using std::pow;
  ThresholdReport<Scalar> rep;
  rep.mu = pb.spec.mu;
  rep.A = pb.spec.A;
  rep.mu_bar = pb.spec.mu_bar;
  rep.S = sobolev_constant_closed_form<Scalar>(pb.m());
  rep.S_pow = pow(rep.S, Scalar(pb.m()) / 2);
  rep.ell_gamma = threshold(pb.dom);
  const Ladder<Scalar> ladder = tau_ell_ladder(pb.dom, pb.ops, bumps);
  rep.tau_k = ladder.tau;
  rep.ell_k = ladder.ell;
  rep.tau_gamma = rep.tau_k.empty() ? Scalar(0) : rep.tau_k.front();
  rep.hypothesis = !rep.ell_k.empty() && rep.ell_gamma > rep.ell_k.back() * (Scalar(1) + Scalar(kHypothesisMargin));
  return rep;
}

// ---------------------------------------------------------------------------

/// Seeds: omega_1 and the alternating sums sum_{i<=j} (-1)^i omega_i.
template <typename Scalar>
std::vector<Field<Scalar>> census_seeds(const std::vector<Field<Scalar>>& bumps) {
  std::vector<Field<Scalar>> seeds;
  Field<Scalar> acc = Field<Scalar>::Zero(bumps.empty() ? 0 : bumps.front().size());
  for (std::size_t j = 0; j < bumps.size(); ++j) {
    acc += (j % 2 == 0 ? Scalar(1) : Scalar(-1)) * bumps[j];
    seeds.push_back(acc);
  }
  return seeds;
}

template <typename Scalar>
struct ConeRadius {
  Scalar C = 0;        // discrete embedding constant
  Scalar rho_cap = 0;  // half the smallest cone distance of the nodal probes
  Scalar rho = 0;
};

/// Cone radius from the Nehari-projected alternating seeds of `bumps`. With a
/// single bump there is no nodal probe and the cap is infinite.
template <typename Scalar>
ConeRadius<Scalar> estimate_cone_radius(const Problem<Scalar>& pb, const std::vector<Field<Scalar>>& bumps) {
  const Scalar p = pb.exponent();
  ConeRadius<Scalar> out;
  out.rho_cap = std::numeric_limits<Scalar>::infinity();
  std::vector<Field<Scalar>> probes;
  const auto seeds = census_seeds(bumps);
  for (std::size_t j = 1; j < seeds.size(); ++j) {
    const Field<Scalar> probe = nodal_nehari_project(pb.ops, seeds[j], p, nodal_pieces(seeds[j]));
    const Scalar plus = cone_distance(pb, probe, ConeSign::Plus).distance;
    const Scalar minus = cone_distance(pb, probe, ConeSign::Minus).distance;
    out.rho_cap = std::min({out.rho_cap, Scalar(0.5) * plus, Scalar(0.5) * minus});
    probes.push_back(probe.cwiseAbs());
  }
  out.C = estimate_embedding_constant(pb, probes);
  out.rho = cone_radius(pb.spec, out.C, p, out.rho_cap);
  return out;
}

template <typename Scalar>
struct CensusEntry {
  int seed = 0;  // number of bumps in the seed
  CriticalReport<Scalar> report;
  Scalar bound = 0;  // ell_j S^{m/2}
  bool bound_holds = false;
};

template <typename Scalar>
struct SolutionCensus {
  ThresholdReport<Scalar> thresholds;
  ConeRadius<Scalar> cone;
  std::vector<CensusEntry<Scalar>> entries;  // distinct critical points in seed order
  std::vector<std::string> warnings;
  int requested = 0;
  bool partial() const { return static_cast<int>(entries.size()) < requested; }
};

/// Same critical point (up to sign): energies within 1e-6 relative and
/// L^2 distance within 1e-4 relative.
template <typename Scalar>
bool same_solution(const Problem<Scalar>& pb, const CriticalReport<Scalar>& a, const CriticalReport<Scalar>& b) {
  using std::abs;
  using std::sqrt;
  const Scalar scale = std::max(abs(a.energy), abs(b.energy));
  if (abs(a.energy - b.energy) > Scalar(1e-6) * scale) return false;
  auto l2 = [&](const Field<Scalar>& f) { return sqrt(pb.ops.mass_1.dot(f.cwiseAbs2())); };
  const Scalar norm = std::max(l2(a.u), l2(b.u));
  const Scalar dist = std::min(l2(a.u - b.u), l2(a.u + b.u));
  return dist < Scalar(1e-4) * norm;
}

/// Runs the flow from the k census seeds (concurrently, at most `threads` at a
/// time) and keeps the distinct critical points in seed order.
template <typename Scalar>
SolutionCensus<Scalar> find_solutions(const Problem<Scalar>& pb, int k, const FlowConfig<Scalar>& config,
                                      int threads = 1) {
  if (k < 1) throw InvalidAction("find_solutions: k must be at least 1");
  SolutionCensus<Scalar> census;
  census.requested = k;
  const auto bumps = build_invariant_bumps(pb.dom, pb.ops, k);
  census.thresholds = threshold_report(pb, bumps);
  if (!census.thresholds.hypothesis)
    census.warnings.push_back(
        "compactness hypothesis fails: min a^{m/2} #orbit / c^{(m-2)/2} does not exceed ell_k; "
        "continuing in best-effort mode");
  census.cone = estimate_cone_radius(pb, bumps);
  const auto seeds = census_seeds(bumps);

  using Outcome = std::pair<std::optional<CriticalReport<Scalar>>, std::string>;
  auto run = [&](std::size_t j) -> Outcome {
    try {
      return {run_to_critical(pb, seeds[j], config), {}};
    } catch (const NonConvergence& e) {
      return {std::nullopt, "seed " + std::to_string(j + 1) + ": " + e.what()};
    } catch (const Error& e) {
      return {std::nullopt, "seed " + std::to_string(j + 1) + ": " + e.what()};
    }
  };
  std::vector<Outcome> outcomes(seeds.size());
  const std::size_t width = static_cast<std::size_t>(std::max(1, threads));
  for (std::size_t start = 0; start < seeds.size(); start += width) {
    const std::size_t stop = std::min(seeds.size(), start + width);
    if (stop - start == 1) {
      outcomes[start] = run(start);
      continue;
    }
    std::vector<std::future<Outcome>> batch;
    for (std::size_t j = start; j < stop; ++j) batch.push_back(std::async(std::launch::async, run, j));
    for (std::size_t j = start; j < stop; ++j) outcomes[j] = batch[j - start].get();
  }

  for (std::size_t j = 0; j < outcomes.size(); ++j) {
    auto& [report, message] = outcomes[j];
    if (!report) {
      census.warnings.push_back(message);
      continue;
    }
    if (report->classification == Classification::NearZero) {
      census.warnings.push_back("seed " + std::to_string(j + 1) + ": flow collapsed to zero");
      continue;
    }
    bool duplicate = false;
    for (const auto& entry : census.entries)
      if (same_solution(pb, entry.report, *report)) duplicate = true;
    if (duplicate) {
      census.warnings.push_back("seed " + std::to_string(j + 1) + ": duplicate of an earlier solution");
      continue;
    }
    CensusEntry<Scalar> entry;
    entry.seed = static_cast<int>(j + 1);
    const std::size_t rank = census.entries.size();
    entry.bound = census.thresholds.ell_k[std::min(rank, census.thresholds.ell_k.size() - 1)] *
                  census.thresholds.S_pow;
    entry.bound_holds = report->power_integral <= entry.bound * (Scalar(1) + Scalar(kHypothesisMargin));
    entry.report = std::move(*report);
    census.entries.push_back(std::move(entry));
  }
  if (!census.entries.empty()) {
    Scalar lowest = census.entries.front().report.energy;
    for (const auto& e : census.entries) lowest = std::min(lowest, e.report.energy);
    census.thresholds.tau_gamma = lowest;
  }
  if (census.partial())
    census.warnings.push_back("partial census: " + std::to_string(census.entries.size()) + " of " +
                              std::to_string(k) + " solutions found");
  return census;
}

}  // namespace yamabe
