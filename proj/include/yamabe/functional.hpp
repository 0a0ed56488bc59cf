#pragma once

// The energy J(u) = 1/2 ||u||^2_{a,b} - 1/p |u|^p_{c,p}, p = 2m/(m-2), its
// gradient in the shifted inner product <u,v>_A = v^T (K_a + A M_1) u, and
// the Nehari bookkeeping built on top of them.

#include <memory>
#include <utility>
#include <vector>

#include "yamabe/operators.hpp"

namespace yamabe {

template <typename Scalar>
struct InnerProductSpec {
  Scalar mu = 0;      // coercivity constant
  Scalar A = 0;       // shift of the inner product
  Scalar mu_bar = 0;  // contraction factor (A - mu)/(A + mu)
};

namespace detail {

/// Number of generalized eigenvalues of (K + M_b, K + M_1) below sigma, from
/// the LDL^T inertia of the tridiagonal pencil restricted to the free nodes.
template <typename Scalar>
Eigen::Index pencil_count_below(const EllipticOperatorSet<Scalar>& ops, Scalar sigma) {
  const Eigen::Index n = ops.size();
  const Eigen::Index first = ops.dirichlet[0] ? 1 : 0;
  const Eigen::Index last = ops.dirichlet[1] ? n - 2 : n - 1;
  const Scalar tiny = std::numeric_limits<Scalar>::min() * Scalar(1e6);
  Eigen::Index negatives = 0;
  Scalar pivot = 0;
  for (Eigen::Index i = first; i <= last; ++i) {
    Scalar kii = 0;
    if (i > 0) kii += ops.conductance(i - 1);
    if (i + 1 < n) kii += ops.conductance(i);
    Scalar d = (Scalar(1) - sigma) * kii + ops.mass_b(i) - sigma * ops.mass_1(i);
    if (i > first) {
      const Scalar e = -(Scalar(1) - sigma) * ops.conductance(i - 1);
      d -= e * e / pivot;
    }
    if (d == Scalar(0)) d = -tiny;
    if (d < 0) ++negatives;
    pivot = d;
  }
  return negatives;
}

}  // namespace detail

/// Smallest generalized eigenvalue of (K_a + M_b) x = mu (K_a + M_1) x.
/// Throws NonCoercive when it does not exceed `tolerance`.
template <typename Scalar>
Scalar estimate_coercivity(const EllipticOperatorSet<Scalar>& ops, Scalar tolerance = Scalar(1e-10)) {
  const Eigen::Index n = ops.size();
  Scalar bmin = 1, bmax = 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (ops.mass_1(i) <= Scalar(0)) continue;
    const Scalar b = ops.mass_b(i) / ops.mass_1(i);
    bmin = std::min(bmin, b);
    bmax = std::max(bmax, b);
  }
  // The Rayleigh quotient is a mediant of 1 and the values of b.
  Scalar lo = bmin - Scalar(1e-3) * (Scalar(1) + std::abs(bmin));
  Scalar hi = bmax + Scalar(1e-3) * (Scalar(1) + std::abs(bmax));
  for (int it = 0; it < 400; ++it) {
    const Scalar mid = Scalar(0.5) * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (detail::pencil_count_below(ops, mid) >= 1)
      hi = mid;
    else
      lo = mid;
  }
  const Scalar mu = Scalar(0.5) * (lo + hi);
  if (!(mu > tolerance))
    throw NonCoercive("the operator -div(a grad) + b is not coercive on invariant functions (mu = " +
                      std::to_string(static_cast<double>(mu)) + ")");
  return mu;
}

/// A = max{1, mu, |b|_inf} + 1 and mu_bar = (A - mu)/(A + mu).
template <typename Scalar>
InnerProductSpec<Scalar> choose_A(Scalar mu, Scalar b_sup) {
  using std::abs;
  if (!(mu > Scalar(0))) throw InvalidAction("choose_A: mu must be positive");
  InnerProductSpec<Scalar> spec;
  spec.mu = mu;
  spec.A = std::max({Scalar(1), mu, abs(b_sup)}) + Scalar(1);
  spec.mu_bar = (spec.A - mu) / (spec.A + mu);
  return spec;
}

// ---------------------------------------------------------------------------
// Norms and forms.

/// ||u||^2_{a,b} = u^T (K_a + M_b) u
template <typename Scalar>
Scalar norm_ab_sq(const EllipticOperatorSet<Scalar>& ops, const Field<Scalar>& u) {
  return stiffness_form(ops, u, u) + (ops.mass_b.array() * u.array().square()).sum();
}

/// <u, v>_{a,b}
template <typename Scalar>
Scalar inner_ab(const EllipticOperatorSet<Scalar>& ops, const Field<Scalar>& u, const Field<Scalar>& v) {
  return stiffness_form(ops, u, v) + (ops.mass_b.array() * u.array() * v.array()).sum();
}

/// <u, v>_{a,A}
template <typename Scalar>
Scalar inner_A(const EllipticOperatorSet<Scalar>& ops, Scalar A, const Field<Scalar>& u, const Field<Scalar>& v) {
  return stiffness_form(ops, u, v) + A * (ops.mass_1.array() * u.array() * v.array()).sum();
}

template <typename Scalar>
Scalar norm_A(const EllipticOperatorSet<Scalar>& ops, Scalar A, const Field<Scalar>& u) {
  using std::sqrt;
  return sqrt(inner_A(ops, A, u, u));
}

/// |u|^p_{c,p} = sum_i quad_i c_i |u_i|^p
template <typename Scalar>
Scalar power_integral(const EllipticOperatorSet<Scalar>& ops, const Field<Scalar>& u, Scalar p) {
  using std::abs;
  using std::pow;
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (u(i) != Scalar(0)) sum += ops.mass_c(i) * pow(abs(u(i)), p);
  return sum;
}

/// Nonlinear load vector quad_i c_i |u_i|^{p-2} u_i.
template <typename Scalar>
Field<Scalar> nonlinear_load(const EllipticOperatorSet<Scalar>& ops, const Field<Scalar>& u, Scalar p) {
  Field<Scalar> out(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) out(i) = ops.mass_c(i) * signed_power(u(i), p);
  return out;
}

template <typename Scalar>
Scalar energy(const ReducedDomain<Scalar>& dom, const EllipticOperatorSet<Scalar>& ops, const Field<Scalar>& u) {
  require_finite(u, "energy");
  const Scalar p = dom.exponent();
  return Scalar(0.5) * norm_ab_sq(ops, u) - power_integral(ops, u, p) / p;
}

template <typename Scalar>
struct EnergyChange {
  Scalar value = 0;      // J(v) - J(u)
  Scalar magnitude = 0;  // sum of absolute contributions, for rounding bounds
};

/// J(v) - J(u) evaluated without forming J(u) and J(v), so the result stays
/// accurate when the change is far below eps |J|.
template <typename Scalar>
EnergyChange<Scalar> energy_change(const EllipticOperatorSet<Scalar>& ops, const Field<Scalar>& u,
                                   const Field<Scalar>& v, Scalar p) {
  using std::abs;
  using std::expm1;
  using std::log1p;
  using std::pow;
  const Field<Scalar> d = v - u;
  const Field<Scalar> s = v + u;
  EnergyChange<Scalar> out;
  Scalar quad = 0;
  for (Eigen::Index i = 0; i + 1 < ops.size(); ++i) {
    const Scalar term = ops.conductance(i) * (d(i + 1) - d(i)) * (s(i + 1) - s(i));
    quad += term;
    out.magnitude += abs(term);
  }
  for (Eigen::Index i = 0; i < ops.size(); ++i) {
    const Scalar term = ops.mass_b(i) * d(i) * s(i);
    quad += term;
    out.magnitude += abs(term);
  }
  out.value = Scalar(0.5) * quad;
  out.magnitude *= Scalar(0.5);
  Scalar nonlinear = 0;
  for (Eigen::Index i = 0; i < ops.size(); ++i) {
    const Scalar a = abs(u(i)), b = abs(v(i));
    Scalar change;
    const Scalar delta = u(i) > 0 ? d(i) : -d(i);
    if (a == Scalar(0) || b == Scalar(0) || (u(i) > 0) != (v(i) > 0) || abs(delta) > a)
      change = pow(b, p) - pow(a, p);
    else
      change = pow(a, p) * expm1(p * log1p(delta / a));
    nonlinear += ops.mass_c(i) * change;
    out.magnitude += abs(ops.mass_c(i) * change) / p;
  }
  out.value -= nonlinear / p;
  return out;
}

/// |‖u‖²_{a,b} - |u|^p_{c,p}| / ‖u‖²_{a,b}
template <typename Scalar>
Scalar nehari_residual(const EllipticOperatorSet<Scalar>& ops, const Field<Scalar>& u, Scalar p) {
  using std::abs;
  const Scalar quad = norm_ab_sq(ops, u);
  if (quad == Scalar(0)) return Scalar(0);
  return abs(quad - power_integral(ops, u, p)) / abs(quad);
}

/// Relative L^2 size of the pointwise residual of
/// -div(a grad u) + b u - c |u|^{p-2} u at the free nodes.
template <typename Scalar>
Scalar pde_residual(const EllipticOperatorSet<Scalar>& ops, const Field<Scalar>& u, Scalar p) {
  using std::sqrt;
  const Field<Scalar> load = nonlinear_load(ops, u, p);
  const Field<Scalar> r = stiffness_apply(ops, u) + ops.mass_b.cwiseProduct(u) - load;
  Scalar num = 0, den = 0;
  const Eigen::Index n = u.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((i == 0 && ops.dirichlet[0]) || (i == n - 1 && ops.dirichlet[1])) continue;
    if (ops.mass_1(i) <= Scalar(0)) continue;
    num += r(i) * r(i) / ops.mass_1(i);
    den += load(i) * load(i) / ops.mass_1(i);
  }
  if (den == Scalar(0)) return sqrt(num);
  return sqrt(num / den);
}

// ---------------------------------------------------------------------------
// Problem bundle: operators, inner product and the factorized shifted operator.

template <typename Scalar>
struct Problem {
  ReducedDomain<Scalar> dom;
  EllipticOperatorSet<Scalar> ops;
  InnerProductSpec<Scalar> spec;
  std::shared_ptr<const ShiftedSolver<Scalar>> solver;

  Scalar exponent() const { return dom.exponent(); }
  int m() const { return dom.m; }
};

template <typename Scalar>
Problem<Scalar> make_problem(ReducedDomain<Scalar> dom, LinearSolverKind kind = LinearSolverKind::Direct) {
  Problem<Scalar> pb;
  pb.ops = assemble_operators(dom);
  const Scalar mu = estimate_coercivity(pb.ops);
  pb.spec = choose_A(mu, dom.b.cwiseAbs().maxCoeff());
  pb.solver = std::make_shared<const ShiftedSolver<Scalar>>(pb.ops, pb.spec.A, kind);
  pb.dom = std::move(dom);
  return pb;
}

template <typename Scalar>
Scalar norm_A(const Problem<Scalar>& pb, const Field<Scalar>& u) {
  return norm_A(pb.ops, pb.spec.A, u);
}

template <typename Scalar>
Scalar energy(const Problem<Scalar>& pb, const Field<Scalar>& u) {
  return energy(pb.dom, pb.ops, u);
}

/// Lu solves (K_a + A M_1) x = (A M_1 - M_b) u.
template <typename Scalar>
Field<Scalar> apply_L(const Problem<Scalar>& pb, const Field<Scalar>& u) {
  require_finite(u, "apply_L");
  return pb.solver->solve((pb.spec.A * pb.ops.mass_1 - pb.ops.mass_b).cwiseProduct(u));
}

/// Gu solves (K_a + A M_1) x = quad c |u|^{p-2} u.
template <typename Scalar>
Field<Scalar> apply_G(const Problem<Scalar>& pb, const Field<Scalar>& u) {
  require_finite(u, "apply_G");
  return pb.solver->solve(nonlinear_load(pb.ops, u, pb.exponent()));
}

/// Gradient of J in <.,.>_{a,A}: u - Lu - Gu.
template <typename Scalar>
Field<Scalar> gradient(const Problem<Scalar>& pb, const Field<Scalar>& u) {
  require_finite(u, "gradient");
  const Field<Scalar> rhs =
      (pb.spec.A * pb.ops.mass_1 - pb.ops.mass_b).cwiseProduct(u) + nonlinear_load(pb.ops, u, pb.exponent());
  return u - pb.solver->solve(rhs);
}

/// J'(u) v computed from the forms directly (no linear solve).
template <typename Scalar>
Scalar derivative(const Problem<Scalar>& pb, const Field<Scalar>& u, const Field<Scalar>& v) {
  return inner_ab(pb.ops, u, v) - nonlinear_load(pb.ops, u, pb.exponent()).dot(v);
}

/// Scaling factor t* that puts t u on the Nehari set.
template <typename Scalar>
Scalar nehari_scale(const EllipticOperatorSet<Scalar>& ops, const Field<Scalar>& u, Scalar p) {
  using std::pow;
  require_finite(u, "nehari_project");
  const Scalar quad = norm_ab_sq(ops, u);
  const Scalar power = power_integral(ops, u, p);
  if (!(quad > Scalar(0)) || !(power > Scalar(0))) throw InvalidField("nehari_project: field must be nonzero");
  return pow(quad / power, Scalar(1) / (p - Scalar(2)));
}

template <typename Scalar>
Field<Scalar> nehari_project(const ReducedDomain<Scalar>& dom, const EllipticOperatorSet<Scalar>& ops,
                             const Field<Scalar>& u) {
  return nehari_scale(ops, u, dom.exponent()) * u;
}

// ---------------------------------------------------------------------------
// Nodal pieces. A field is split into maximal index ranges between sign
// changes; entries with |u_i| <= threshold * |u|_inf never start a new piece.

struct Piece {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;  // one past the last node
  int sign = 0;
};

template <typename Scalar>
std::vector<Piece> nodal_pieces(const Field<Scalar>& u, Scalar threshold = Scalar(1e-9)) {
  std::vector<Piece> pieces;
  const Eigen::Index n = u.size();
  const Scalar cutoff = threshold * u.cwiseAbs().maxCoeff();
  Eigen::Index start = 0;
  int sign = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(u(i)) <= cutoff) continue;
    const int s = u(i) > 0 ? 1 : -1;
    if (sign == 0) {
      sign = s;
    } else if (s != sign) {
      // Split halfway through any run of negligible entries.
      Eigen::Index j = i - 1;
      while (j > start && std::abs(u(j)) <= cutoff) --j;
      const Eigen::Index split = (j + 1 + i) / 2;
      pieces.push_back({start, split, sign});
      start = split;
      sign = s;
    }
  }
  if (sign != 0) pieces.push_back({start, n, sign});
  return pieces;
}

/// Number of nodal domains, ignoring entries below 1e-9 |u|_inf.
template <typename Scalar>
int count_nodal_domains(const Field<Scalar>& u) {
  require_finite(u, "count_nodal_domains");
  if (u.size() == 0 || u.cwiseAbs().maxCoeff() == Scalar(0)) throw InvalidField("count_nodal_domains: zero field");
  return static_cast<int>(nodal_pieces(u).size());
}

/// Rescales every piece of u independently so that J'(u) u_j = 0 for each
/// piece u_j, i.e. maximizes J(sum t_j u_j) over t in the positive orthant.
/// With one piece this is the ordinary Nehari projection.
template <typename Scalar>
Field<Scalar> nodal_nehari_project(const EllipticOperatorSet<Scalar>& ops, const Field<Scalar>& u, Scalar p,
                                   const std::vector<Piece>& pieces) {
  using std::abs;
  using std::pow;
  const std::size_t k = pieces.size();
  if (k == 0) throw InvalidField("nodal_nehari_project: zero field");
  std::vector<Field<Scalar>> parts(k);
  for (std::size_t j = 0; j < k; ++j) {
    parts[j] = Field<Scalar>::Zero(u.size());
    parts[j].segment(pieces[j].begin, pieces[j].end - pieces[j].begin) =
        u.segment(pieces[j].begin, pieces[j].end - pieces[j].begin);
  }
  if (k == 1) return nehari_scale(ops, u, p) * u;

  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat gram(k, k);
  Vector<Scalar> beta(k);
  for (std::size_t i = 0; i < k; ++i) {
    beta(i) = power_integral(ops, parts[i], p);
    if (!(beta(i) > Scalar(0))) throw InvalidField("nodal_nehari_project: empty nodal piece");
    for (std::size_t j = i; j < k; ++j) gram(i, j) = gram(j, i) = inner_ab(ops, parts[i], parts[j]);
  }
  Vector<Scalar> t(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(gram(i, i) > Scalar(0))) throw InvalidField("nodal_nehari_project: degenerate nodal piece");
    t(i) = pow(gram(i, i) / beta(i), Scalar(1) / (p - Scalar(2)));
  }
  // Newton on (gram t)_i = beta_i t_i^{p-1}.
  auto residual = [&](const Vector<Scalar>& s) {
    Vector<Scalar> r = gram * s;
    for (std::size_t i = 0; i < k; ++i) r(i) -= beta(i) * pow(s(i), p - Scalar(1));
    return r;
  };
  const Scalar scale = gram.diagonal().cwiseAbs().maxCoeff();
  Vector<Scalar> r = residual(t);
  for (int it = 0; it < 100 && r.cwiseAbs().maxCoeff() > Scalar(1e-15) * scale * t.cwiseAbs().maxCoeff(); ++it) {
    Mat jac = gram;
    for (std::size_t i = 0; i < k; ++i) jac(i, i) -= (p - Scalar(1)) * beta(i) * pow(t(i), p - Scalar(2));
    const Vector<Scalar> step = jac.partialPivLu().solve(r);
    Scalar lambda = 1;
    Vector<Scalar> trial = t - step;
    while ((trial.array() <= Scalar(0)).any() || residual(trial).norm() > r.norm()) {
      lambda *= Scalar(0.5);
      if (lambda < Scalar(1e-12)) break;
      trial = t - lambda * step;
    }
    if ((trial.array() <= Scalar(0)).any()) throw InvalidField("nodal_nehari_project: scaling left the positive orthant");
    t = trial;
    r = residual(t);
  }
  Field<Scalar> out = Field<Scalar>::Zero(u.size());
  for (std::size_t j = 0; j < k; ++j) out += t(j) * parts[j];
  return out;
}

// ---------------------------------------------------------------------------

/// Discrete embedding constant sup |w|_{c,p} / ||w||_{a,A}.
///
/// The supremum is attained at a nonnegative field; it is located by the
/// normalized fixed-point iteration w <- G(w)/||G(w)||_A started from the
/// constant field and from each supplied probe.
template <typename Scalar>
Scalar estimate_embedding_constant(const Problem<Scalar>& pb, const std::vector<Field<Scalar>>& probes = {},
                                   int iterations = 200) {
  using std::pow;
  const Scalar p = pb.exponent();
  auto ratio = [&](const Field<Scalar>& w) {
    return pow(power_integral(pb.ops, w, p), Scalar(1) / p) / norm_A(pb, w);
  };
  std::vector<Field<Scalar>> starts = {Field<Scalar>::Ones(pb.ops.size())};
  for (const auto& probe : probes) starts.push_back(probe.cwiseAbs());
  Scalar best = 0;
  for (Field<Scalar> w : starts) {
    if (pb.ops.dirichlet[1]) w(w.size() - 1) = 0;
    if (pb.ops.dirichlet[0]) w(0) = 0;
    if (w.isZero(0)) continue;
    w /= norm_A(pb, w);
    Scalar value = ratio(w);
    for (int it = 0; it < iterations; ++it) {
      Field<Scalar> next = apply_G(pb, w);
      const Scalar nn = norm_A(pb, next);
      if (!(nn > Scalar(0))) break;
      next /= nn;
      const Scalar next_value = ratio(next);
      const bool done = std::abs(next_value - value) <= Scalar(1e-13) * value;
      w = std::move(next);
      value = std::max(value, next_value);
      if (done) break;
    }
    best = std::max(best, value);
  }
  return best;
}

}  // namespace yamabe
