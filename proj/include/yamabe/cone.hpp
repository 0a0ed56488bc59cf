#pragma once

// Distance in the A-norm to the cones P = {v >= 0} and -P, i.e. the convex QP
// min_{v >= 0} (u - v)^T H (u - v) with H = K_a + A M_1.

#include <vector>

#include "yamabe/functional.hpp"

namespace yamabe {

enum class ConeSign { Plus, Minus };
enum class ConeMethod { ActiveSet, ProjectedSOR };

template <typename Scalar>
struct ConeDistance {
  Scalar distance = 0;
  Scalar upper_bound = 0;  // ||u - u^+||_A, from the feasible point u^+
  Field<Scalar> projection;
  std::vector<char> active;  // nodes held at zero by the projection
  int iterations = 0;
};

namespace detail {

/// Tridiagonal H = K_a + A M_1 as (diag, off) with off(i) = H(i, i+1).
template <typename Scalar>
std::pair<Vector<Scalar>, Vector<Scalar>> a_metric_tridiagonal(const EllipticOperatorSet<Scalar>& ops, Scalar A) {
  const Eigen::Index n = ops.size();
  Vector<Scalar> diag = A * ops.mass_1;
  Vector<Scalar> off = -ops.conductance;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    diag(i) += ops.conductance(i);
    diag(i + 1) += ops.conductance(i);
  }
  return {diag, off};
}

/// Solve H_FF x_F = rhs_F with x = 0 on the active set.
template <typename Scalar>
Vector<Scalar> solve_free(const Vector<Scalar>& diag, const Vector<Scalar>& off, const Vector<Scalar>& rhs,
                          const std::vector<char>& active) {
  const Eigen::Index n = diag.size();
  Vector<Scalar> c(n), d(n), x = Vector<Scalar>::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar lower = (i > 0 && !active[i] && !active[i - 1]) ? off(i - 1) : Scalar(0);
    const Scalar upper = (i + 1 < n && !active[i] && !active[i + 1]) ? off(i) : Scalar(0);
    const Scalar a = active[i] ? Scalar(1) : diag(i);
    const Scalar r = active[i] ? Scalar(0) : rhs(i);
    const Scalar denom = i > 0 ? a - lower * c(i - 1) : a;
    c(i) = upper / denom;
    d(i) = (i > 0 ? r - lower * d(i - 1) : r) / denom;
  }
  for (Eigen::Index i = n - 1; i >= 0; --i) x(i) = d(i) - (i + 1 < n ? c(i) * x(i + 1) : Scalar(0));
  return x;
}

template <typename Scalar>
Vector<Scalar> tridiagonal_apply(const Vector<Scalar>& diag, const Vector<Scalar>& off, const Vector<Scalar>& u) {
  Vector<Scalar> out = diag.cwiseProduct(u);
  for (Eigen::Index i = 0; i + 1 < u.size(); ++i) {
    out(i) += off(i) * u(i + 1);
    out(i + 1) += off(i) * u(i);
  }
  return out;
}

/// Projection of u onto P in the H-metric by a primal-dual active set
/// iteration. H is a tridiagonal M-matrix, for which the iteration terminates
/// after finitely many monotone updates of the active set.
template <typename Scalar>
Vector<Scalar> project_active_set(const Vector<Scalar>& diag, const Vector<Scalar>& off, const Vector<Scalar>& u,
                                  std::vector<char>& active, int& iterations) {
  const Eigen::Index n = u.size();
  if (n == 0 || u.minCoeff() >= Scalar(0)) {
    active.assign(n, 0);
    iterations = 0;
    return u;
  }
  const Vector<Scalar> Hu = tridiagonal_apply(diag, off, u);
  if (static_cast<Eigen::Index>(active.size()) != n) {
    active.assign(n, 0);
    for (Eigen::Index i = 0; i < n; ++i) active[i] = u(i) < Scalar(0);
  }
  const int cap = 2 * static_cast<int>(n) + 10;
  for (iterations = 1; iterations <= cap; ++iterations) {
    Vector<Scalar> v = solve_free(diag, off, Hu, active);
    const Vector<Scalar> lambda = tridiagonal_apply(diag, off, v) - Hu;
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool next = active[i] ? lambda(i) > Scalar(0) : v(i) < Scalar(0);
      if (next != static_cast<bool>(active[i])) {
        active[i] = next;
        changed = true;
      }
    }
    if (!changed) return v.cwiseMax(Scalar(0));
  }
  throw ConeProjectionError("cone projection: active set did not settle");
}

/// Projected SOR on the same QP, warm-started from max(u, 0).
template <typename Scalar>
Vector<Scalar> project_psor(const Vector<Scalar>& diag, const Vector<Scalar>& off, const Vector<Scalar>& u,
                            int& iterations, Scalar tol = Scalar(1e-8), Scalar omega = Scalar(1.5),
                            int max_sweeps = 1000000) {
  using std::abs;
  const Eigen::Index n = u.size();
  const Vector<Scalar> Hu = tridiagonal_apply(diag, off, u);
  Vector<Scalar> v = u.cwiseMax(Scalar(0));
  for (iterations = 1; iterations <= max_sweeps; ++iterations) {
    Scalar change = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Scalar r = diag(i) * v(i) - Hu(i);
      if (i > 0) r += off(i - 1) * v(i - 1);
      if (i + 1 < n) r += off(i) * v(i + 1);
      const Scalar next = std::max(Scalar(0), v(i) - omega * r / diag(i));
      change = std::max(change, abs(next - v(i)));
      v(i) = next;
    }
    if (change <= tol * std::max(Scalar(1e-300), u.cwiseAbs().maxCoeff())) return v;
  }
  throw ConeProjectionError("cone projection: projected SOR did not converge");
}

}  // namespace detail

/// dist_A(u, +P) or dist_A(u, -P). The active-set method may be warm-started
/// from the active set of a nearby field.
template <typename Scalar>
ConeDistance<Scalar> cone_distance(const EllipticOperatorSet<Scalar>& ops, Scalar A, const Field<Scalar>& u,
                                   ConeSign sign, ConeMethod method = ConeMethod::ActiveSet,
                                   const std::vector<char>* warm = nullptr) {
  using std::sqrt;
  require_finite(u, "cone_distance");
  const Field<Scalar> w = sign == ConeSign::Plus ? u : Field<Scalar>(-u);
  const auto [diag, off] = detail::a_metric_tridiagonal(ops, A);
  ConeDistance<Scalar> out;
  Field<Scalar> v;
  if (method == ConeMethod::ActiveSet) {
    if (warm) out.active = *warm;
    try {
      v = detail::project_active_set(diag, off, w, out.active, out.iterations);
    } catch (const ConeProjectionError&) {
      if (!warm) throw;
      out.active.clear();
      v = detail::project_active_set(diag, off, w, out.active, out.iterations);
    }
  } else {
    v = detail::project_psor(diag, off, w, out.iterations);
  }
  const Field<Scalar> diff = w - v;
  out.distance = sqrt(std::max(Scalar(0), diff.dot(detail::tridiagonal_apply(diag, off, diff))));
  const Field<Scalar> neg = w.cwiseMin(Scalar(0));
  out.upper_bound = sqrt(std::max(Scalar(0), neg.dot(detail::tridiagonal_apply(diag, off, neg))));
  out.projection = sign == ConeSign::Plus ? v : Field<Scalar>(-v);
  return out;
}

template <typename Scalar>
ConeDistance<Scalar> cone_distance(const Problem<Scalar>& pb, const Field<Scalar>& u, ConeSign sign,
                                   ConeMethod method = ConeMethod::ActiveSet,
                                   const std::vector<char>* warm = nullptr) {
  return cone_distance(pb.ops, pb.spec.A, u, sign, method, warm);
}

}  // namespace yamabe
