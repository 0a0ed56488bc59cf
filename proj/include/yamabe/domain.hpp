#pragma once

// Symmetry-reduced domains: a one-dimensional quotient coordinate carrying
// the orbit-volume density, orbit cardinalities and coefficient fields of a
// cohomogeneity-one problem.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "yamabe/common.hpp"

namespace yamabe {

enum class BoundaryTag { Neumann, Dirichlet };

/// Cardinality of a group orbit; kInfiniteOrbit marks positive-dimensional orbits.
using OrbitCount = std::uint64_t;
inline constexpr OrbitCount kInfiniteOrbit = std::numeric_limits<OrbitCount>::max();

template <typename Scalar>
struct ReducedDomain {
  int m = 3;                       // dimension of the manifold upstairs
  Vector<Scalar> grid;             // t_0 < ... < t_N
  Vector<Scalar> midpoint_weight;  // volume density at cell midpoints (N entries)
  Vector<Scalar> quad;             // node quadrature for dV (N+1 entries)
  std::vector<OrbitCount> orbit_card;
  Vector<Scalar> a, b, c;
  std::array<BoundaryTag, 2> bc{BoundaryTag::Neumann, BoundaryTag::Neumann};

  Eigen::Index nodes() const { return grid.size(); }
  Eigen::Index cells() const { return grid.size() - 1; }
  Scalar exponent() const { return critical_exponent<Scalar>(m); }
  Scalar span() const { return grid(grid.size() - 1) - grid(0); }

  void validate() const;
};

namespace detail {

template <typename Scalar>
Vector<Scalar> node_quadrature(const Vector<Scalar>& grid, const Vector<Scalar>& midpoint_weight) {
  const Eigen::Index n = grid.size();
  Vector<Scalar> quad = Vector<Scalar>::Zero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const Scalar half = Scalar(0.5) * (grid(i + 1) - grid(i)) * midpoint_weight(i);
    quad(i) += half;
    quad(i + 1) += half;
  }
  return quad;
}

template <typename Scalar, typename Density>
ReducedDomain<Scalar> uniform_domain(int m, Scalar lo, Scalar hi, int N, Density density) {
  ReducedDomain<Scalar> dom;
  dom.m = m;
  dom.grid.resize(N + 1);
  const Scalar h = (hi - lo) / Scalar(N);
  for (int i = 0; i <= N; ++i) dom.grid(i) = lo + h * Scalar(i);
  dom.grid(N) = hi;
  dom.midpoint_weight.resize(N);
  for (int i = 0; i < N; ++i) dom.midpoint_weight(i) = density(Scalar(0.5) * (dom.grid(i) + dom.grid(i + 1)));
  dom.quad = node_quadrature(dom.grid, dom.midpoint_weight);
  dom.orbit_card.assign(N + 1, kInfiniteOrbit);
  dom.a = Vector<Scalar>::Ones(N + 1);
  dom.b = Vector<Scalar>::Zero(N + 1);
  dom.c = Vector<Scalar>::Ones(N + 1);
  return dom;
}

}  // namespace detail

template <typename Scalar>
void ReducedDomain<Scalar>::validate() const {
  if (m < 3) throw InvalidAction("domain: dimension m must be at least 3");
  const Eigen::Index n = grid.size();
  if (n < 2) throw InvalidAction("domain: grid needs at least two nodes");
  if (midpoint_weight.size() != n - 1 || quad.size() != n || a.size() != n || b.size() != n ||
      c.size() != n || static_cast<Eigen::Index>(orbit_card.size()) != n)
    throw InvalidAction("domain: field lengths disagree with the grid");
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    if (!(grid(i + 1) > grid(i))) throw InvalidAction("domain: grid must be strictly increasing");
  if (!grid.allFinite() || !quad.allFinite() || !a.allFinite() || !b.allFinite() || !c.allFinite())
    throw InvalidAction("domain: non-finite entries");
  if ((midpoint_weight.array() < Scalar(0)).any()) throw InvalidAction("domain: negative volume density");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (quad(i) < Scalar(0)) throw InvalidAction("domain: negative quadrature weight");
    if (quad(i) == Scalar(0) && i != 0 && i != n - 1)
      throw InvalidAction("domain: zero quadrature weight at an interior node");
    if (!(a(i) > Scalar(0))) throw InvalidAction("domain: coefficient a must be positive");
    if (!(c(i) > Scalar(0))) throw InvalidAction("domain: coefficient c must be positive");
  }
}

/// Quotient of the round S^m, m = k+n-1, by O(k) x O(n).
///
/// A point (sin t x, cos t y) with x in S^{k-1}, y in S^{n-1} and t in
/// [0, pi/2]; the orbit through it has volume |S^{k-1}||S^{n-1}| sin^{k-1} t
/// cos^{n-1} t. Defaults: a = 1, c = 1 and b the conformal-Laplacian potential
/// c_m m(m-1) of the round metric.
template <typename Scalar = double>
ReducedDomain<Scalar> build_cohomogeneity_one_sphere(int k, int n, int N) {
  using std::cos;
  using std::pow;
  using std::sin;
  if (k < 2 || n < 2) throw InvalidAction("sphere_kn: k and n must be at least 2 (orbits must be positive-dimensional)");
  if (N < 8) throw InvalidAction("sphere_kn: need N >= 8 cells");
  const int m = k + n - 1;
  const Scalar orbit = unit_sphere_area<Scalar>(k - 1) * unit_sphere_area<Scalar>(n - 1);
  auto dom = detail::uniform_domain<Scalar>(m, Scalar(0), std::numbers::pi_v<Scalar> / 2, N, [&](Scalar t) {
    return orbit * pow(sin(t), k - 1) * pow(cos(t), n - 1);
  });
  dom.b.setConstant(conformal_constant<Scalar>(m) * Scalar(m * (m - 1)));
  return dom;
}

/// Zonal (O(m)-invariant) functions on the round S^m: colatitude t in [0, pi]
/// measured from the pole that stereographic projection sends to the origin.
/// The two poles are single points, so their orbit cardinality is 1.
template <typename Scalar = double>
ReducedDomain<Scalar> build_zonal_sphere(int m, int N) {
  using std::pow;
  using std::sin;
  if (m < 3) throw InvalidAction("zonal sphere: m must be at least 3");
  if (N < 8) throw InvalidAction("zonal sphere: need N >= 8 cells");
  const Scalar orbit = unit_sphere_area<Scalar>(m - 1);
  auto dom = detail::uniform_domain<Scalar>(m, Scalar(0), std::numbers::pi_v<Scalar>, N,
                                            [&](Scalar t) { return orbit * pow(sin(t), m - 1); });
  dom.orbit_card.front() = 1;
  dom.orbit_card.back() = 1;
  dom.b.setConstant(conformal_constant<Scalar>(m) * Scalar(m * (m - 1)));
  return dom;
}

/// Radial functions on the ball of radius R in R^m, Dirichlet at r = R.
template <typename Scalar = double>
ReducedDomain<Scalar> build_radial_euclidean(int m, Scalar R, int N) {
  using std::pow;
  if (m < 3) throw InvalidAction("radial: m must be at least 3");
  if (!(R > Scalar(0))) throw InvalidAction("radial: radius must be positive");
  if (N < 8) throw InvalidAction("radial: need N >= 8 cells");
  const Scalar orbit = unit_sphere_area<Scalar>(m - 1);
  auto dom = detail::uniform_domain<Scalar>(m, Scalar(0), R, N, [&](Scalar r) { return orbit * pow(r, m - 1); });
  dom.orbit_card.front() = 1;
  dom.bc = {BoundaryTag::Neumann, BoundaryTag::Dirichlet};
  return dom;
}

/// Domain from an arbitrary strictly increasing grid and a volume density
/// sampled at the nodes (the midpoint density is the average of its ends).
template <typename Scalar = double>
ReducedDomain<Scalar> build_custom(int m, const Vector<Scalar>& grid, const Vector<Scalar>& node_density) {
  if (grid.size() != node_density.size()) throw InvalidAction("custom: grid and density lengths differ");
  if (grid.size() < 9) throw InvalidAction("custom: need N >= 8 cells");
  ReducedDomain<Scalar> dom;
  dom.m = m;
  dom.grid = grid;
  dom.midpoint_weight = Scalar(0.5) * (node_density.head(grid.size() - 1) + node_density.tail(grid.size() - 1));
  dom.quad = detail::node_quadrature(dom.grid, dom.midpoint_weight);
  dom.orbit_card.assign(grid.size(), kInfiniteOrbit);
  dom.a = Vector<Scalar>::Ones(grid.size());
  dom.b = Vector<Scalar>::Zero(grid.size());
  dom.c = Vector<Scalar>::Ones(grid.size());
  dom.validate();
  return dom;
}

/// Free Z/n action whose quotient is `dom`: every integral is multiplied by n
/// and every orbit has n points.
template <typename Scalar>
ReducedDomain<Scalar> apply_finite_orbit_weighting(const ReducedDomain<Scalar>& dom, int n) {
  if (n < 1) throw InvalidAction("orbit weighting: n must be at least 1");
  if (n == 1) return dom;
  ReducedDomain<Scalar> out = dom;
  out.midpoint_weight *= Scalar(n);
  out.quad *= Scalar(n);
  out.orbit_card.assign(dom.orbit_card.size(), static_cast<OrbitCount>(n));
  return out;
}

/// Same geometry, but every orbit now has exactly n points: a finite subgroup
/// of the symmetry group acting on the same manifold. Integrals are unchanged.
template <typename Scalar>
ReducedDomain<Scalar> with_orbit_cardinality(const ReducedDomain<Scalar>& dom, int n) {
  if (n < 1) throw InvalidAction("orbit cardinality: n must be at least 1");
  ReducedDomain<Scalar> out = dom;
  out.orbit_card.assign(dom.orbit_card.size(), static_cast<OrbitCount>(n));
  return out;
}

template <typename Scalar>
Scalar integrate(const ReducedDomain<Scalar>& dom, const Field<Scalar>& f) {
  require_finite(f, "integrate");
  if (f.size() != dom.nodes()) throw InvalidField("integrate: field length mismatch");
  return dom.quad.dot(f);
}

/// (sum_i quad_i c_i |u_i|^p)^{1/p}
template <typename Scalar>
Scalar lp_norm_c(const ReducedDomain<Scalar>& dom, const Field<Scalar>& u, Scalar p) {
  using std::abs;
  using std::pow;
  require_finite(u, "lp_norm_c");
  if (!(p >= Scalar(1))) throw InvalidAction("lp_norm_c: p must be at least 1");
  if (u.size() != dom.nodes()) throw InvalidField("lp_norm_c: field length mismatch");
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i) sum += dom.quad(i) * dom.c(i) * pow(abs(u(i)), p);
  return pow(sum, Scalar(1) / p);
}

/// Sample a function of the quotient coordinate at the grid nodes.
template <typename Scalar, typename F>
Field<Scalar> sample(const ReducedDomain<Scalar>& dom, F&& f) {
  Field<Scalar> u(dom.nodes());
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = f(dom.grid(i));
  return u;
}

}  // namespace yamabe
