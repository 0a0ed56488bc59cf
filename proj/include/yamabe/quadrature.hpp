#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "yamabe/common.hpp"

namespace yamabe {

/// Gauss-Legendre nodes and weights on [-1, 1].
template <typename Scalar = double>
std::pair<std::vector<Scalar>, std::vector<Scalar>> gauss_legendre(int n) {
  using std::abs;
  using std::cos;
  if (n < 1) throw InvalidAction("gauss_legendre: need at least one node");
  std::vector<Scalar> x(n), w(n);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    Scalar z = cos(pi * (Scalar(i) + Scalar(0.75)) / (Scalar(n) + Scalar(0.5)));
    Scalar dp = 0;
    for (int it = 0; it < 100; ++it) {
      Scalar p0 = 1, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const Scalar p2 = (Scalar(2 * k - 1) * z * p1 - Scalar(k - 1) * p0) / Scalar(k);
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1;
      dp = Scalar(n) * (z * p1 - p0) / (z * z - Scalar(1));
      const Scalar dz = p1 / dp;
      z -= dz;
      if (abs(dz) <= Scalar(4) * std::numeric_limits<Scalar>::epsilon()) break;
    }
    // Recompute the derivative at the converged root.
    Scalar p0 = 1, p1 = z;
    for (int k = 2; k <= n; ++k) {
      const Scalar p2 = (Scalar(2 * k - 1) * z * p1 - Scalar(k - 1) * p0) / Scalar(k);
      p0 = p1;
      p1 = p2;
    }
    if (n == 1) p0 = 1;
    dp = Scalar(n) * (z * p1 - p0) / (z * z - Scalar(1));
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = Scalar(2) / ((Scalar(1) - z * z) * dp * dp);
  }
  return {x, w};
}

/// Integral of f over [lo, hi] split into `panels` equal panels, each with an
/// `order`-point Gauss-Legendre rule.
template <typename Scalar, typename F>
Scalar integrate_panels(F&& f, Scalar lo, Scalar hi, int panels, int order = 8) {
  const auto [x, w] = gauss_legendre<Scalar>(order);
  const Scalar h = (hi - lo) / Scalar(panels);
  Scalar total = 0;
  for (int j = 0; j < panels; ++j) {
    const Scalar a = lo + h * Scalar(j);
    Scalar sum = 0;
    for (int q = 0; q < order; ++q) sum += w[q] * f(a + Scalar(0.5) * h * (x[q] + Scalar(1)));
    total += Scalar(0.5) * h * sum;
  }
  return total;
}

/// Same rule on geometrically graded panels between lo > 0 and hi.
template <typename Scalar, typename F>
Scalar integrate_log_panels(F&& f, Scalar lo, Scalar hi, int panels, int order = 8) {
  using std::exp;
  using std::log;
  if (!(lo > 0) || !(hi > lo)) throw InvalidAction("integrate_log_panels: need 0 < lo < hi");
  const auto [x, w] = gauss_legendre<Scalar>(order);
  const Scalar step = (log(hi) - log(lo)) / Scalar(panels);
  Scalar total = 0;
  for (int j = 0; j < panels; ++j) {
    const Scalar a = exp(log(lo) + step * Scalar(j));
    const Scalar b = j + 1 == panels ? hi : exp(log(lo) + step * Scalar(j + 1));
    Scalar sum = 0;
    for (int q = 0; q < order; ++q) sum += w[q] * f(a + Scalar(0.5) * (b - a) * (x[q] + Scalar(1)));
    total += Scalar(0.5) * (b - a) * sum;
  }
  return total;
}

/// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson slopes).
template <typename Scalar>
class MonotoneCubic {
 public:
  MonotoneCubic(Vector<Scalar> x, Vector<Scalar> y) : x_(std::move(x)), y_(std::move(y)) {
    const Eigen::Index n = x_.size();
    if (n < 2 || y_.size() != n) throw InvalidAction("interpolation: need matching samples, at least two");
    Vector<Scalar> delta(n - 1);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      const Scalar h = x_(i + 1) - x_(i);
      if (!(h > 0)) throw InvalidAction("interpolation: abscissae must increase");
      delta(i) = (y_(i + 1) - y_(i)) / h;
    }
    slope_.resize(n);
    slope_(0) = delta(0);
    slope_(n - 1) = delta(n - 2);
    for (Eigen::Index i = 1; i + 1 < n; ++i)
      slope_(i) = delta(i - 1) * delta(i) <= 0 ? Scalar(0) : Scalar(0.5) * (delta(i - 1) + delta(i));
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      if (delta(i) == Scalar(0)) {
        slope_(i) = slope_(i + 1) = 0;
        continue;
      }
      const Scalar a = slope_(i) / delta(i), b = slope_(i + 1) / delta(i);
      const Scalar s = a * a + b * b;
      if (s > Scalar(9)) {
        const Scalar tau = Scalar(3) / std::sqrt(s);
        slope_(i) = tau * a * delta(i);
        slope_(i + 1) = tau * b * delta(i);
      }
    }
  }

  Scalar lower() const { return x_(0); }
  Scalar upper() const { return x_(x_.size() - 1); }

  Scalar operator()(Scalar t) const {
    const Eigen::Index n = x_.size();
    if (t <= x_(0)) return y_(0);
    if (t >= x_(n - 1)) return y_(n - 1);
    const Scalar* begin = x_.data();
    Eigen::Index i = std::upper_bound(begin, begin + n, t) - begin - 1;
    i = std::clamp<Eigen::Index>(i, 0, n - 2);
    const Scalar h = x_(i + 1) - x_(i);
    const Scalar s = (t - x_(i)) / h;
    const Scalar s2 = s * s, s3 = s2 * s;
    return (Scalar(2) * s3 - Scalar(3) * s2 + Scalar(1)) * y_(i) + (s3 - Scalar(2) * s2 + s) * h * slope_(i) +
           (Scalar(-2) * s3 + Scalar(3) * s2) * y_(i + 1) + (s3 - s2) * h * slope_(i + 1);
  }

 private:
  Vector<Scalar> x_, y_, slope_;
};

}  // namespace yamabe
