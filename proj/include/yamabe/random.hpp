#pragma once

// Reproducible random fields. Draws go through mt19937_64 and a fixed
// bit-to-double map, so the same seed gives the same field on every platform.

#include <random>

#include "yamabe/domain.hpp"

namespace yamabe {

class FieldRng {
 public:
  explicit FieldRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

/// sum_j c_j cos(j pi s), s the normalized coordinate, j = 0..modes, with
/// c_j uniform in [-1, 1] / (1 + j). Smooth and Neumann-compatible.
template <typename Scalar>
Field<Scalar> random_field(const ReducedDomain<Scalar>& dom, FieldRng& rng, int modes = 6) {
  using std::cos;
  std::vector<Scalar> coef(modes + 1);
  for (int j = 0; j <= modes; ++j) coef[j] = Scalar(rng.uniform(-1, 1)) / Scalar(1 + j);
  const Scalar lo = dom.grid(0), span = dom.span();
  Field<Scalar> u = sample(dom, [&](Scalar t) {
    Scalar sum = 0;
    for (int j = 0; j <= modes; ++j) sum += coef[j] * cos(Scalar(j) * std::numbers::pi_v<Scalar> * (t - lo) / span);
    return sum;
  });
  if (dom.bc[0] == BoundaryTag::Dirichlet) u(0) = 0;
  if (dom.bc[1] == BoundaryTag::Dirichlet) u(u.size() - 1) = 0;
  return u;
}

/// Strictly positive smooth field: exp of a random field.
template <typename Scalar>
Field<Scalar> random_positive_field(const ReducedDomain<Scalar>& dom, FieldRng& rng, int modes = 6) {
  Field<Scalar> u = random_field(dom, rng, modes).array().exp().matrix();
  if (dom.bc[0] == BoundaryTag::Dirichlet) u(0) = 0;
  if (dom.bc[1] == BoundaryTag::Dirichlet) u(u.size() - 1) = 0;
  return u;
}

}  // namespace yamabe
