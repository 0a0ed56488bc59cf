#pragma once

// Negative gradient flow of J in the A-metric, discretized as Armijo
// backtracked descent. After every step the iterate is pulled back onto the
// nodal Nehari set (each sign piece rescaled onto the Nehari set), so that
// flows seeded with j sign pieces stay in the stratum of j-domain fields.

#include <optional>
#include <string>
#include <vector>

#include "yamabe/cone.hpp"

namespace yamabe {

template <typename Scalar>
struct FlowConfig {
  Scalar grad_tol = Scalar(1e-8);
  long max_steps = 200000;
  Scalar armijo_c = Scalar(1e-4);
  Scalar step_init = Scalar(1);
  std::optional<Scalar> rho;  // cone radius; only used for monitoring
  bool track_cones = true;

  void validate() const {
    if (!(grad_tol > 0) || max_steps <= 0 || !(armijo_c > 0) || !(armijo_c < 1) || !(step_init > 0))
      throw InvalidAction("flow config: parameters must be positive and armijo_c < 1");
    if (rho && !(*rho > 0)) throw InvalidAction("flow config: rho must be positive");
  }
};

template <typename Scalar>
struct FlowState {
  Field<Scalar> u;
  Field<Scalar> grad;
  Scalar energy = 0;
  Scalar grad_norm_A = 0;
  Scalar norm_A = 0;
  Scalar dist_plus = 0;
  Scalar dist_minus = 0;
  Scalar nehari_residual = 0;
  Scalar last_step = 0;
  long step = 0;
  Scalar flow_time = 0;
  int pieces = 0;
  std::vector<char> active_plus, active_minus;  // warm starts for the cone projections
};

/// One row of the persisted trace.
struct TraceRow {
  long step = 0;
  double flow_time = 0;
  double energy = 0;
  double grad_norm = 0;
  double dist_plus = 0;
  double dist_minus = 0;
  double nehari_residual = 0;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, std::vector<TraceRow> trace, std::vector<double> last_u)
      : Error(what), trace(std::move(trace)), last_u(std::move(last_u)) {}
  std::vector<TraceRow> trace;
  std::vector<double> last_u;
};

enum class Classification { Positive, Negative, Nodal, NearZero };

inline const char* to_string(Classification c) {
  switch (c) {
    case Classification::Positive: return "positive";
    case Classification::Negative: return "negative";
    case Classification::Nodal: return "nodal";
    case Classification::NearZero: return "near_zero";
  }
  return "?";
}

template <typename Scalar>
struct CriticalReport {
  Field<Scalar> u;
  Scalar energy = 0;
  Classification classification = Classification::NearZero;
  int nodal_count = 0;
  Scalar pde_residual = 0;
  Scalar nehari_residual = 0;
  Scalar piece_nehari_residual = 0;  // max_j |J'(u) u_j| / ||u_j||^2_{a,b}
  Scalar power_integral = 0;         // sum quad c |u|^p
  Scalar grad_norm_A = 0;
  Scalar dist_plus = 0;
  Scalar dist_minus = 0;
  long steps = 0;
  std::vector<TraceRow> trace;
};

template <typename Scalar>
Classification classify(const Problem<Scalar>& pb, const Field<Scalar>& u) {
  const Scalar nu = norm_A(pb, u);
  if (nu <= Scalar(1e-8)) return Classification::NearZero;
  if (cone_distance(pb, u, ConeSign::Plus).distance <= Scalar(1e-10) * nu) return Classification::Positive;
  if (cone_distance(pb, u, ConeSign::Minus).distance <= Scalar(1e-10) * nu) return Classification::Negative;
  return Classification::Nodal;
}

/// max_j |J'(u) u_j| / ||u_j||^2_{a,b} over the sign pieces u_j of u.
template <typename Scalar>
Scalar piece_nehari_residual(const Problem<Scalar>& pb, const Field<Scalar>& u) {
  using std::abs;
  Scalar worst = 0;
  for (const Piece& piece : nodal_pieces(u)) {
    Field<Scalar> part = Field<Scalar>::Zero(u.size());
    part.segment(piece.begin, piece.end - piece.begin) = u.segment(piece.begin, piece.end - piece.begin);
    const Scalar scale = norm_ab_sq(pb.ops, part);
    if (scale > Scalar(0)) worst = std::max(worst, abs(derivative(pb, u, part)) / scale);
  }
  return worst;
}

namespace detail {

template <typename Scalar>
void refresh(const Problem<Scalar>& pb, const FlowConfig<Scalar>& config, FlowState<Scalar>& s) {
  s.energy = energy(pb, s.u);
  s.grad = gradient(pb, s.u);
  s.grad_norm_A = norm_A(pb, s.grad);
  s.norm_A = norm_A(pb, s.u);
  s.nehari_residual = nehari_residual(pb.ops, s.u, pb.exponent());
  if (config.track_cones) {
    auto plus = cone_distance(pb, s.u, ConeSign::Plus, ConeMethod::ActiveSet, &s.active_plus);
    auto minus = cone_distance(pb, s.u, ConeSign::Minus, ConeMethod::ActiveSet, &s.active_minus);
    s.dist_plus = plus.distance;
    s.dist_minus = minus.distance;
    s.active_plus = std::move(plus.active);
    s.active_minus = std::move(minus.active);
  }
}

template <typename Scalar>
TraceRow trace_row(const FlowState<Scalar>& s) {
  return {s.step,
          static_cast<double>(s.flow_time),
          static_cast<double>(s.energy),
          static_cast<double>(s.grad_norm_A),
          static_cast<double>(s.dist_plus),
          static_cast<double>(s.dist_minus),
          static_cast<double>(s.nehari_residual)};
}

}  // namespace detail

/// Projects u0 onto the nodal Nehari set and evaluates all monitors.
template <typename Scalar>
FlowState<Scalar> start_flow(const Problem<Scalar>& pb, const Field<Scalar>& u0, const FlowConfig<Scalar>& config) {
  require_finite(u0, "run_to_critical");
  if (u0.size() != pb.ops.size()) throw InvalidField("flow: field length mismatch");
  if (u0.cwiseAbs().maxCoeff() == Scalar(0)) throw InvalidField("flow: initial field is zero");
  Field<Scalar> u = u0;
  if (pb.ops.dirichlet[0]) u(0) = 0;
  if (pb.ops.dirichlet[1]) u(u.size() - 1) = 0;
  const auto pieces = nodal_pieces(u);
  FlowState<Scalar> s;
  s.u = nodal_nehari_project(pb.ops, u, pb.exponent(), pieces);
  s.pieces = static_cast<int>(pieces.size());
  detail::refresh(pb, config, s);
  return s;
}

/// One accepted descent step. The step length s is halved from step_init
/// until the retracted trial point keeps the number of sign pieces and
/// satisfies J(u') <= J(u) - armijo_c s ||grad J||_A^2 (up to rounding in J).
template <typename Scalar>
FlowState<Scalar> step(const Problem<Scalar>& pb, const FlowState<Scalar>& state, const FlowConfig<Scalar>& config) {
  using std::abs;
  FlowState<Scalar> next = state;
  ++next.step;
  if (state.grad_norm_A == Scalar(0)) return next;
  const Scalar p = pb.exponent();
  const Scalar g2 = state.grad_norm_A * state.grad_norm_A;
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  Scalar s = config.step_init;
  for (int halving = 0; halving <= 60; ++halving, s *= Scalar(0.5)) {
    Field<Scalar> trial = state.u - s * state.grad;
    const auto pieces = nodal_pieces(trial);
    if (static_cast<int>(pieces.size()) != state.pieces) continue;
    Field<Scalar> projected;
    try {
      projected = nodal_nehari_project(pb.ops, trial, p, pieces);
    } catch (const InvalidField&) {
      continue;
    }
    const EnergyChange<Scalar> change = energy_change(pb.ops, state.u, projected, p);
    if (change.value <= -config.armijo_c * s * g2 + Scalar(8) * eps * change.magnitude) {
      next.u = std::move(projected);
      next.last_step = s;
      next.flow_time += s;
      detail::refresh(pb, config, next);
      return next;
    }
  }
  throw StagnationError("flow: line search exhausted 60 halvings");
}

template <typename Scalar>
CriticalReport<Scalar> finish(const Problem<Scalar>& pb, const FlowState<Scalar>& s, std::vector<TraceRow> trace) {
  CriticalReport<Scalar> r;
  r.u = s.u;
  r.energy = s.energy;
  r.classification = classify(pb, s.u);
  r.nodal_count = r.classification == Classification::NearZero ? 0 : count_nodal_domains(s.u);
  r.pde_residual = pde_residual(pb.ops, s.u, pb.exponent());
  r.nehari_residual = s.nehari_residual;
  r.piece_nehari_residual = piece_nehari_residual(pb, s.u);
  r.power_integral = power_integral(pb.ops, s.u, pb.exponent());
  r.grad_norm_A = s.grad_norm_A;
  r.dist_plus = s.dist_plus;
  r.dist_minus = s.dist_minus;
  r.steps = s.step;
  r.trace = std::move(trace);
  return r;
}

/// Iterates `step` until ||grad J||_A <= grad_tol max(1, ||u||_A).
template <typename Scalar>
CriticalReport<Scalar> run_to_critical(const Problem<Scalar>& pb, const Field<Scalar>& u0,
                                       const FlowConfig<Scalar>& config) {
  config.validate();
  FlowState<Scalar> s = start_flow(pb, u0, config);
  std::vector<TraceRow> trace{detail::trace_row(s)};
  auto converged = [&] { return s.grad_norm_A <= config.grad_tol * std::max(Scalar(1), s.norm_A); };
  while (!converged()) {
    if (s.step >= config.max_steps) {
      std::vector<double> last(s.u.data(), s.u.data() + s.u.size());
      throw NonConvergence("flow: no critical point within " + std::to_string(config.max_steps) + " steps",
                           std::move(trace), std::move(last));
    }
    try {
      s = step(pb, s, config);
    } catch (const StagnationError&) {
      // Rounding floor of J reached before the gradient tolerance.
      std::vector<double> last(s.u.data(), s.u.data() + s.u.size());
      throw NonConvergence("flow: line search stalled at step " + std::to_string(s.step), std::move(trace),
                           std::move(last));
    }
    trace.push_back(detail::trace_row(s));
  }
  return finish(pb, s, std::move(trace));
}

// ---------------------------------------------------------------------------

struct InvarianceReport {
  double rho = 0;
  long violations_plus = 0;
  long violations_minus = 0;
  long inside_plus = 0;  // trace points with dist_plus <= rho
  long inside_minus = 0;
  double min_dist_plus = 0;
  double min_dist_minus = 0;
};

/// Checks that B_rho(P) and B_rho(-P) are never left once entered: a step
/// from a point with dist <= rho must end with dist <= rho or a smaller dist.
inline InvarianceReport monitor_invariance(const std::vector<TraceRow>& trace, double rho, std::size_t from = 0) {
  InvarianceReport r;
  r.rho = rho;
  r.min_dist_plus = r.min_dist_minus = std::numeric_limits<double>::infinity();
  for (std::size_t i = from; i < trace.size(); ++i) {
    const TraceRow& row = trace[i];
    r.min_dist_plus = std::min(r.min_dist_plus, row.dist_plus);
    r.min_dist_minus = std::min(r.min_dist_minus, row.dist_minus);
    if (row.dist_plus <= rho) ++r.inside_plus;
    if (row.dist_minus <= rho) ++r.inside_minus;
    if (i + 1 == trace.size()) break;
    const TraceRow& nx = trace[i + 1];
    if (row.dist_plus <= rho && nx.dist_plus > rho && nx.dist_plus > row.dist_plus) ++r.violations_plus;
    if (row.dist_minus <= rho && nx.dist_minus > rho && nx.dist_minus > row.dist_minus) ++r.violations_minus;
  }
  return r;
}

/// rho = min(rho_cap, ((nu - mu_bar)/C^p)^{1/(p-2)}), nu = (1 + mu_bar)/2.
template <typename Scalar>
Scalar cone_radius(const InnerProductSpec<Scalar>& spec, Scalar embedding_C, Scalar p, Scalar rho_cap) {
  using std::pow;
  if (!(embedding_C > 0)) throw InvalidAction("cone_radius: embedding constant must be positive");
  const Scalar nu = Scalar(0.5) * (Scalar(1) + spec.mu_bar);
  const Scalar bound = pow((nu - spec.mu_bar) / pow(embedding_C, p), Scalar(1) / (p - Scalar(2)));
  return std::min(rho_cap, bound);
}

}  // namespace yamabe
