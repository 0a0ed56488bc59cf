#pragma once

// Bubbles, the Sobolev constant and blow-up diagnostics.

#include <functional>
#include <optional>
#include <tuple>
#include <vector>

#include "yamabe/domain.hpp"
#include "yamabe/quadrature.hpp"

namespace yamabe {

/// Smooth cutoff: 1 on [0, 2/3], 0 on [1, inf), C-infinity in between.
template <typename Scalar>
Scalar cutoff(Scalar s) {
  using std::exp;
  s = std::abs(s);
  if (s <= Scalar(2) / 3) return Scalar(1);
  if (s >= Scalar(1)) return Scalar(0);
  const Scalar x = (Scalar(1) - s) * Scalar(3);  // 1 at s = 2/3, 0 at s = 1
  const Scalar a = exp(-Scalar(1) / x), b = exp(-Scalar(1) / (Scalar(1) - x));
  return a / (a + b);
}

/// U_eps(r) = eps^{(2-m)/2} [m(m-2)]^{(m-2)/4} (1 + (r/eps)^2)^{-(m-2)/2}
template <typename Scalar = double>
Scalar bubble_value(int m, Scalar eps, Scalar r) {
  using std::pow;
  const Scalar x = r / eps;
  return pow(eps, Scalar(2 - m) / 2) * pow(Scalar(m * (m - 2)), Scalar(m - 2) / 4) *
         pow(Scalar(1) + x * x, -Scalar(m - 2) / 2);
}

/// dU_eps/dr
template <typename Scalar = double>
Scalar bubble_derivative(int m, Scalar eps, Scalar r) {
  using std::pow;
  const Scalar x = r / eps;
  return -Scalar(m - 2) * pow(eps, Scalar(2 - m) / 2) * pow(Scalar(m * (m - 2)), Scalar(m - 2) / 4) * x / eps *
         pow(Scalar(1) + x * x, -Scalar(m) / 2);
}

template <typename Scalar = double>
struct BubbleProfile {
  int m = 3;
  Scalar eps = 1;
  Vector<Scalar> r;
  Vector<Scalar> values;
};

template <typename Scalar = double>
BubbleProfile<Scalar> standard_bubble(int m, Scalar eps, const Vector<Scalar>& grid) {
  if (m < 3) throw InvalidAction("bubble: m must be at least 3");
  if (!(eps > 0)) throw InvalidAction("bubble: eps must be positive");
  BubbleProfile<Scalar> b{m, eps, grid, Vector<Scalar>(grid.size())};
  for (Eigen::Index i = 0; i < grid.size(); ++i) b.values(i) = bubble_value(m, eps, grid(i));
  return b;
}

/// S = m(m-2)/4 |S^m|^{2/m}
template <typename Scalar = double>
Scalar sobolev_constant_closed_form(int m) {
  using std::pow;
  return Scalar(m * (m - 2)) / 4 * pow(unit_sphere_area<Scalar>(m), Scalar(2) / Scalar(m));
}

namespace detail {

/// int_R^inf r^a (1 + r^2)^{-k} dr for R > 1 and a - 2k < -1, by the
/// binomial series in r^{-2}.
template <typename Scalar>
Scalar power_tail_series(Scalar a, int k, Scalar R) {
  using std::abs;
  using std::pow;
  Scalar sum = 0;
  Scalar coeff = 1;  // binom(-k, j)
  for (int j = 0; j < 400; ++j) {
    const Scalar expo = a - Scalar(2 * k) - Scalar(2 * j) + Scalar(1);
    const Scalar term = coeff * pow(R, expo) / (-expo);
    sum += term;
    if (abs(term) <= std::numeric_limits<Scalar>::epsilon() * abs(sum)) break;
    coeff *= -Scalar(k + j) / Scalar(j + 1);
  }
  return sum;
}

}  // namespace detail

template <typename Scalar = double>
struct SobolevReport {
  int m = 3;
  Scalar S = 0;
  Scalar S_pow = 0;          // S^{m/2} = int U^{2*}
  Scalar grad_integral = 0;  // int |grad U|^2
  Scalar mismatch = 0;       // |grad - power| / power
  Scalar closed_form = 0;
  bool cross_check = false;
};

namespace detail {

/// int |grad U_eps|^2 dx and int U_eps^{2*} dx over R^m: Gauss-Legendre panels
/// on [0, R eps] plus the series tail beyond.
template <typename Scalar>
std::pair<Scalar, Scalar> bubble_integrals(int m, Scalar eps, int N, Scalar R) {
  using std::pow;
  const Scalar area = unit_sphere_area<Scalar>(m - 1);
  const Scalar p = critical_exponent<Scalar>(m);
  const Scalar amp = pow(Scalar(m * (m - 2)), Scalar(m - 2) / 4);
  auto power = [&](Scalar r) { return pow(bubble_value<Scalar>(m, eps, r), p) * pow(r, m - 1); };
  auto grad = [&](Scalar r) {
    const Scalar d = bubble_derivative<Scalar>(m, eps, r);
    return d * d * pow(r, m - 1);
  };
  // In s = r/eps: U^{2*} r^{m-1} dr = amp^{2*} s^{m-1} (1+s^2)^{-m} ds and
  // U'^2 r^{m-1} dr = amp^2 (m-2)^2 s^{m+1} (1+s^2)^{-m} ds.
  const Scalar power_tail = pow(amp, p) * power_tail_series(Scalar(m - 1), m, R);
  const Scalar grad_tail = amp * amp * Scalar((m - 2) * (m - 2)) * power_tail_series(Scalar(m + 1), m, R);
  return {area * (integrate_panels<Scalar>(grad, 0, R * eps, N) + grad_tail),
          area * (integrate_panels<Scalar>(power, 0, R * eps, N) + power_tail)};
}

}  // namespace detail

/// S^{m/2} as int U^{2*} dx by Gauss-Legendre panels on [0, R] plus the
/// series tail, cross-checked against int |grad U|^2 dx.
template <typename Scalar = double>
SobolevReport<Scalar> sobolev_constant(int m, int N = 4096, Scalar R = Scalar(100), Scalar tolerance = Scalar(1e-6)) {
  using std::abs;
  using std::pow;
  if (m < 3) throw InvalidAction("sobolev_constant: m must be at least 3");
  if (!(R > 1) || N < 1) throw InvalidAction("sobolev_constant: need R > 1 and N >= 1");
  SobolevReport<Scalar> out;
  out.m = m;
  std::tie(out.grad_integral, out.S_pow) = detail::bubble_integrals<Scalar>(m, Scalar(1), N, R);
  out.mismatch = abs(out.grad_integral - out.S_pow) / out.S_pow;
  out.S = pow(out.S_pow, Scalar(2) / Scalar(m));
  out.closed_form = sobolev_constant_closed_form<Scalar>(m);
  out.cross_check = out.mismatch <= tolerance;
  if (!out.cross_check)
    throw QuadratureError("sobolev_constant: int |grad U|^2 and int U^{2*} disagree (relative " +
                          std::to_string(static_cast<double>(out.mismatch)) + ")");
  return out;
}

/// J(U_eps - U_eps(R)) on the ball of radius R with a = c = 1, b = 0, by
/// Gauss-Legendre panels. Tends to S^{m/2}/m as R grows.
template <typename Scalar = double>
Scalar truncated_bubble_energy(int m, Scalar eps, Scalar R, int N = 4096) {
  using std::abs;
  using std::pow;
  if (m < 3) throw InvalidAction("truncated_bubble_energy: m must be at least 3");
  if (!(R > 0) || !(eps > 0) || N < 1) throw InvalidAction("truncated_bubble_energy: need R, eps > 0 and N >= 1");
  const Scalar p = critical_exponent<Scalar>(m);
  const Scalar edge = bubble_value<Scalar>(m, eps, R);
  auto grad = [&](Scalar r) {
    const Scalar d = bubble_derivative<Scalar>(m, eps, r);
    return d * d * pow(r, m - 1);
  };
  auto power = [&](Scalar r) { return pow(abs(bubble_value<Scalar>(m, eps, r) - edge), p) * pow(r, m - 1); };
  const Scalar area = unit_sphere_area<Scalar>(m - 1);
  return area * (Scalar(0.5) * integrate_panels<Scalar>(grad, 0, R, N) - integrate_panels<Scalar>(power, 0, R, N) / p);
}

// ---------------------------------------------------------------------------
// Concentration diagnostics.

template <typename Scalar>
struct Concentration {
  Eigen::Index node = 0;
  Scalar radius = 0;
  Scalar mass = 0;  // total int c |u|^{2*}
};

namespace detail {

/// Cumulative int_{t_0}^t c |u|^{2*} dV, linear within each cell.
template <typename Scalar>
Vector<Scalar> cumulative_mass(const ReducedDomain<Scalar>& dom, const Field<Scalar>& u) {
  using std::abs;
  using std::pow;
  const Scalar p = dom.exponent();
  const Eigen::Index n = dom.nodes();
  Vector<Scalar> F(n);
  F(0) = 0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const Scalar h = dom.grid(i + 1) - dom.grid(i);
    const Scalar left = dom.c(i) * pow(abs(u(i)), p), right = dom.c(i + 1) * pow(abs(u(i + 1)), p);
    F(i + 1) = F(i) + Scalar(0.5) * h * dom.midpoint_weight(i) * (left + right);
  }
  return F;
}

template <typename Scalar>
Scalar cumulative_at(const ReducedDomain<Scalar>& dom, const Vector<Scalar>& F, Scalar t) {
  const Eigen::Index n = dom.nodes();
  if (t <= dom.grid(0)) return Scalar(0);
  if (t >= dom.grid(n - 1)) return F(n - 1);
  const Scalar* g = dom.grid.data();
  const Eigen::Index i = std::clamp<Eigen::Index>(std::upper_bound(g, g + n, t) - g - 1, 0, n - 2);
  const Scalar s = (t - dom.grid(i)) / (dom.grid(i + 1) - dom.grid(i));
  return F(i) + s * (F(i + 1) - F(i));
}

}  // namespace detail

/// Q(r) = max_p int_{B(t_p, r)} c |u|^{2*} dV and its first maximizing node.
template <typename Scalar>
std::pair<Scalar, Eigen::Index> levy_function(const ReducedDomain<Scalar>& dom, const Vector<Scalar>& F, Scalar r) {
  Scalar best = -1;
  Eigen::Index arg = 0;
  for (Eigen::Index i = 0; i < dom.nodes(); ++i) {
    const Scalar q = detail::cumulative_at(dom, F, dom.grid(i) + r) - detail::cumulative_at(dom, F, dom.grid(i) - r);
    if (q > best) {
      best = q;
      arg = i;
    }
  }
  return {best, arg};
}

/// Smallest r with Q(r) = lambda, by bisection; lambda defaults to a tenth
/// of the total mass.
template <typename Scalar>
Concentration<Scalar> levy_concentration(const ReducedDomain<Scalar>& dom, const Field<Scalar>& u,
                                         std::optional<Scalar> lambda = std::nullopt) {
  require_finite(u, "levy_concentration");
  if (u.size() != dom.nodes()) throw InvalidField("levy_concentration: field length mismatch");
  const Vector<Scalar> F = detail::cumulative_mass(dom, u);
  Concentration<Scalar> out;
  out.mass = F(F.size() - 1);
  const Scalar level = lambda ? *lambda : Scalar(0.1) * out.mass;
  if (!(level > 0) || !(level < out.mass))
    throw InvalidAction("levy_concentration: lambda must lie strictly between 0 and the total mass");
  Scalar lo = 0, hi = dom.span();
  for (int it = 0; it < 200; ++it) {
    const Scalar mid = Scalar(0.5) * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (levy_function(dom, F, mid).first >= level)
      hi = mid;
    else
      lo = mid;
  }
  out.radius = hi;
  out.node = levy_function(dom, F, hi).second;
  return out;
}

template <typename Scalar>
struct RadialProfile {
  Vector<Scalar> x;
  Vector<Scalar> v;
};

/// v(x) = r^{(m-2)/2} u(t_p + r x) on 0 <= x <= min(3 delta, reach) / r with
/// delta a quarter of the span and reach the larger distance from t_p to an
/// end of the domain; both sides of t_p are averaged where both lie in the
/// domain.
template <typename Scalar>
RadialProfile<Scalar> rescale_at(const ReducedDomain<Scalar>& dom, const Field<Scalar>& u, Eigen::Index p, Scalar r,
                                 int samples = 1024) {
  using std::pow;
  require_finite(u, "rescale_at");
  if (!(r > 0)) throw InvalidAction("rescale_at: r must be positive");
  if (p < 0 || p >= dom.nodes()) throw InvalidAction("rescale_at: node out of range");
  if (samples < 2) throw InvalidAction("rescale_at: need at least two samples");
  const MonotoneCubic<Scalar> interp(dom.grid, u);
  const Scalar delta = dom.span() / 4;
  const Scalar tp = dom.grid(p);
  const Scalar reach = std::max(dom.grid(dom.nodes() - 1) - tp, tp - dom.grid(0));
  const Scalar xmax = std::min(Scalar(3) * delta, reach) / r;
  if (!(xmax >= 1)) throw InvalidAction("rescale_at: the node is too close to the boundary to sample a unit ball");
  const Scalar scale = pow(r, Scalar(dom.m - 2) / 2);
  RadialProfile<Scalar> out{Vector<Scalar>(samples), Vector<Scalar>(samples)};
  for (int i = 0; i < samples; ++i) {
    const Scalar x = xmax * Scalar(i) / Scalar(samples - 1);
    const Scalar right = tp + r * x, left = tp - r * x;
    const bool has_right = right <= interp.upper(), has_left = left >= interp.lower();
    Scalar value;
    if (has_right && has_left)
      value = Scalar(0.5) * (interp(right) + interp(left));
    else
      value = has_right ? interp(right) : interp(left);
    out.x(i) = x;
    out.v(i) = scale * value;
  }
  return out;
}

template <typename Scalar>
struct BubbleMatch {
  Scalar eps = 0;
  Scalar residual = 0;
  Scalar amplitude_scale = 1;  // (c_p/a_p)^{(m-2)/4}
};

/// Fits v_hat = (c_p/a_p)^{(m-2)/4} v against the bubbles U_eps, minimizing
/// the relative L^2 distance over the sampled profile (uniform weights in x).
template <typename Scalar>
BubbleMatch<Scalar> bubble_match(const RadialProfile<Scalar>& profile, int m, Scalar a_p, Scalar c_p) {
  using std::exp;
  using std::log;
  using std::pow;
  using std::sqrt;
  if (!(a_p > 0) || !(c_p > 0)) throw InvalidAction("bubble_match: a_p and c_p must be positive");
  if (profile.x.size() < 2) throw InvalidAction("bubble_match: profile too short");
  BubbleMatch<Scalar> out;
  out.amplitude_scale = pow(c_p / a_p, Scalar(m - 2) / 4);
  const Vector<Scalar> target = out.amplitude_scale * profile.v;
  const Scalar norm = sqrt(target.squaredNorm());
  if (!(norm > 0)) throw InvalidField("bubble_match: zero profile");
  auto residual = [&](Scalar log_eps) {
    const Scalar eps = exp(log_eps);
    Scalar sum = 0;
    for (Eigen::Index i = 0; i < target.size(); ++i) {
      const Scalar d = target(i) - bubble_value(m, eps, profile.x(i));
      sum += d * d;
    }
    return sqrt(sum) / norm;
  };
  const Scalar dx = profile.x(1) - profile.x(0);
  const Scalar xmax = profile.x(profile.x.size() - 1);
  Scalar lo = log(dx / 8), hi = log(xmax * 8);
  const int coarse = 200;
  Scalar best = lo, best_value = residual(lo);
  for (int i = 1; i <= coarse; ++i) {
    const Scalar t = lo + (hi - lo) * Scalar(i) / Scalar(coarse);
    const Scalar value = residual(t);
    if (value < best_value) {
      best_value = value;
      best = t;
    }
  }
  const Scalar cell = (hi - lo) / Scalar(coarse);
  Scalar a = best - cell, b = best + cell;
  const Scalar phi = (sqrt(Scalar(5)) - 1) / 2;
  Scalar c = b - phi * (b - a), d = a + phi * (b - a);
  Scalar fc = residual(c), fd = residual(d);
  for (int it = 0; it < 200 && b - a > Scalar(1e-14); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = residual(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = residual(d);
    }
  }
  const Scalar t = Scalar(0.5) * (a + b);
  out.eps = exp(t);
  out.residual = std::min(residual(t), best_value);
  if (best_value < residual(t)) out.eps = exp(best);
  return out;
}

// ---------------------------------------------------------------------------
// Stereographic transfer of zonal fields on S^m to radial fields on R^m.

template <typename Scalar>
struct TransferResult {
  Vector<Scalar> r;
  Vector<Scalar> v;
  Scalar tail_estimate = 0;  // estimate of int_{|x| > R} |v|^{2*} dx
  bool truncation_warning = false;
};

/// phi(x) = (2 / (1 + |x|^2))^{(m-2)/2}
template <typename Scalar>
Scalar conformal_factor(int m, Scalar r) {
  using std::pow;
  return pow(Scalar(2) / (Scalar(1) + r * r), Scalar(m - 2) / 2);
}

/// v = phi (u o sigma^{-1}), sampled on a uniform radial grid of [0, R].
/// The colatitude t of the zonal grid is measured from the pole sent to the
/// origin, so r = tan(t/2). The tail beyond R is estimated from the value of u
/// at the opposite pole; truncation_warning is raised when it exceeds
/// `tail_tolerance` relative to the captured integral.
template <typename Scalar>
TransferResult<Scalar> stereographic_transfer(const ReducedDomain<Scalar>& zonal, const Field<Scalar>& u, Scalar R,
                                              int N, Scalar tail_tolerance = Scalar(1e-6)) {
  using std::abs;
  using std::atan;
  using std::pow;
  require_finite(u, "stereographic_transfer");
  if (u.size() != zonal.nodes()) throw InvalidField("stereographic_transfer: field length mismatch");
  const Scalar pi = std::numbers::pi_v<Scalar>;
  if (abs(zonal.grid(0)) > Scalar(1e-12) || abs(zonal.grid(zonal.nodes() - 1) - pi) > Scalar(1e-9))
    throw InvalidAction("stereographic_transfer: expects a zonal grid on [0, pi]");
  if (!(R > 0) || N < 8) throw InvalidAction("stereographic_transfer: need R > 0 and N >= 8");
  const int m = zonal.m;
  const Scalar p = zonal.exponent();
  const MonotoneCubic<Scalar> interp(zonal.grid, u);
  TransferResult<Scalar> out{Vector<Scalar>(N + 1), Vector<Scalar>(N + 1)};
  for (int i = 0; i <= N; ++i) {
    const Scalar r = R * Scalar(i) / Scalar(N);
    out.r(i) = r;
    out.v(i) = conformal_factor(m, r) * interp(Scalar(2) * atan(r));
  }
  // |v|^{2*} ~ (2^{(m-2)/2} |u(pi)|)^{2*} r^{-2m}
  const Scalar far = pow(Scalar(2), Scalar(m - 2) / 2) * abs(u(u.size() - 1));
  out.tail_estimate = unit_sphere_area<Scalar>(m - 1) * pow(far, p) * pow(R, -Scalar(m)) / Scalar(m);
  Scalar captured = 0;
  for (int i = 0; i < N; ++i) {
    const Scalar rm = Scalar(0.5) * (out.r(i) + out.r(i + 1));
    const Scalar vm = Scalar(0.5) * (abs(out.v(i)) + abs(out.v(i + 1)));
    captured += pow(vm, p) * pow(rm, m - 1) * (out.r(i + 1) - out.r(i));
  }
  captured *= unit_sphere_area<Scalar>(m - 1);
  out.truncation_warning = out.tail_estimate > tail_tolerance * std::max(captured, std::numeric_limits<Scalar>::min());
  return out;
}

// ---------------------------------------------------------------------------
// Ground-state gap along the bubble family.

template <typename Scalar = double>
struct GapRow {
  Scalar eps = 0;
  Scalar quotient = 0;      // Q(eps)
  Scalar perturbation = 0;  // int b~ U_eps^2
};

template <typename Scalar = double>
struct GapReport {
  int m = 3;
  Scalar S = 0;
  Scalar alpha = 0.75;
  std::vector<GapRow<Scalar>> rows;
  Scalar decay_exponent = 0;
  Scalar exponent_lower = 0;  // 0.9 * 2 (1 - alpha)
  Scalar exponent_upper = 0;  // 1.1 * 2
  bool strict_gap = false;
  bool monotone = false;
  bool exponent_in_range = false;
};

/// Q(eps) = (int |grad U_eps|^2 + int b~ U_eps^2) / (int U_eps^{2*})^{2/2*}
/// for a radial b~ >= 0 supported in [0, support]. The first and last
/// integrals are scale invariant and equal S^{m/2}.
template <typename Scalar = double>
GapReport<Scalar> ground_state_gap_experiment(int m, const std::function<Scalar(Scalar)>& btilde, Scalar support,
                                              const std::vector<Scalar>& eps_list, Scalar alpha = Scalar(0.75)) {
  using std::log;
  using std::pow;
  if (m < 3) throw InvalidAction("gap experiment: m must be at least 3");
  if (!(support > 0)) throw InvalidAction("gap experiment: support radius must be positive");
  if (eps_list.size() < 2) throw InvalidAction("gap experiment: need at least two values of eps");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0)) throw InvalidAction("gap experiment: eps must be positive");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw InvalidAction("gap experiment: eps_list must decrease");
  }
  const Scalar area = unit_sphere_area<Scalar>(m - 1);
  const Scalar S = sobolev_constant_closed_form<Scalar>(m);
  GapReport<Scalar> rep;
  rep.m = m;
  rep.S = S;
  rep.alpha = alpha;
  for (int i = 0; i <= 4096; ++i) {
    const Scalar r = support * Scalar(i) / Scalar(4096);
    if (btilde(r) < 0) throw InvalidAction("gap experiment: perturbation must be nonnegative");
  }
  for (Scalar eps : eps_list) {
    auto integrand = [&](Scalar r) {
      const Scalar U = bubble_value(m, eps, r);
      return btilde(r) * U * U * pow(r, m - 1);
    };
    const Scalar lo = std::min(eps, support) * Scalar(1e-6);
    const Scalar P = area * (integrate_panels<Scalar>(integrand, Scalar(0), lo, 1) +
                             integrate_log_panels<Scalar>(integrand, lo, support, 400));
    const auto [grad, power] = detail::bubble_integrals<Scalar>(m, eps, 4096, Scalar(100));
    rep.rows.push_back({eps, (grad + P) / pow(power, Scalar(m - 2) / Scalar(m)), P});
  }
  rep.strict_gap = std::all_of(rep.rows.begin(), rep.rows.end(), [&](const auto& r) { return r.quotient > S; });
  rep.monotone = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i)
    if (!(rep.rows[i].quotient < rep.rows[i - 1].quotient)) rep.monotone = false;
  // Least-squares slope of log P against log eps.
  Scalar sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  for (const auto& row : rep.rows) {
    if (!(row.perturbation > 0)) continue;
    const Scalar x = log(row.eps), y = log(row.perturbation);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count >= 2) rep.decay_exponent = (Scalar(count) * sxy - sx * sy) / (Scalar(count) * sxx - sx * sx);
  rep.exponent_lower = Scalar(0.9) * Scalar(2) * (Scalar(1) - alpha);
  rep.exponent_upper = Scalar(1.1) * Scalar(2);
  rep.exponent_in_range = rep.decay_exponent >= rep.exponent_lower && rep.decay_exponent <= rep.exponent_upper;
  return rep;
}

}  // namespace yamabe
