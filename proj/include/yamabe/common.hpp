#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace yamabe {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// A real-valued grid function on a reduced domain.
template <typename Scalar>
using Field = Vector<Scalar>;

// ---------------------------------------------------------------------------
// Errors. Every failure mode of the solver has its own type so that callers
// (in particular the CLI) can map them onto exit statuses.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidAction : public Error {
 public:
  using Error::Error;
};

class InvalidField : public Error {
 public:
  using Error::Error;
};

class AssemblyError : public Error {
 public:
  using Error::Error;
};

class NonCoercive : public Error {
 public:
  using Error::Error;
};

class LinearSolveError : public Error {
 public:
  using Error::Error;
};

class ConeProjectionError : public Error {
 public:
  using Error::Error;
};

class StagnationError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------

/// Critical Sobolev exponent 2m/(m-2).
template <typename Scalar = double>
constexpr Scalar critical_exponent(int m) {
  return Scalar(2 * m) / Scalar(m - 2);
}

/// Conformal Laplacian constant (m-2)/(4(m-1)).
template <typename Scalar = double>
constexpr Scalar conformal_constant(int m) {
  return Scalar(m - 2) / Scalar(4 * (m - 1));
}

/// Surface area of the unit sphere S^d embedded in R^{d+1}.
template <typename Scalar = double>
Scalar unit_sphere_area(int d) {
  using std::pow;
  using std::tgamma;
  const Scalar half = Scalar(d + 1) / 2;
  return Scalar(2) * pow(std::numbers::pi_v<Scalar>, half) / tgamma(half);
}

template <typename Scalar>
void require_finite(const Field<Scalar>& u, const char* what) {
  if (!u.allFinite()) throw InvalidField(std::string(what) + ": field has non-finite entries");
}

/// |x|^{p-2} x, the odd power nonlinearity.
template <typename Scalar>
inline Scalar signed_power(Scalar x, Scalar p) {
  using std::abs;
  using std::pow;
  if (x == Scalar(0)) return Scalar(0);
  return pow(abs(x), p - Scalar(1)) * (x > 0 ? Scalar(1) : Scalar(-1));
}

}  // namespace yamabe
