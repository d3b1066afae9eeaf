#pragma once

// Three-mass-point input family, the rate of change of its mutual
// information with the peak amplitude, and detection of the amplitude at
// which the optimal input stops being binary.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "slipt/channel.hpp"
#include "slipt/error.hpp"
#include "slipt/measure.hpp"
#include "slipt/solver.hpp"

namespace slipt {

/// Masses q0 at 0, q at x1 and q2 at A with mean epsilon:
/// q2 = (epsilon - x1 q) / A, q0 = 1 - q - q2.
struct ThreePointDist {
  double A = 0.0;
  double epsilon = 0.0;
  double x1 = 0.0;
  double q = 0.0;
  double q0 = 0.0;
  double q2 = 0.0;

  double mean() const { return x1 * q + A * q2; }
  std::vector<double> locations() const { return {0.0, x1, A}; }
  std::vector<double> masses() const { return {q0, q, q2}; }
};

inline ThreePointDist three_point(double A, double epsilon, double x1, double q) {
  if (!(A > 0.0)) throw DomainError("three_point: A must be > 0");
  if (!(x1 > 0.0 && x1 < A)) throw DomainError("three_point: x1 must lie in (0, A)");
  if (!(epsilon >= 0.0)) throw DomainError("three_point: epsilon must be >= 0");
  ThreePointDist d{A, epsilon, x1, q, 0.0, 0.0};
  d.q2 = (epsilon - x1 * q) / A;
  d.q0 = 1.0 - q - d.q2;
  auto check = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError(std::string("three_point: mass ") + name + " = " + std::to_string(v) +
                        " outside [0, 1]");
    }
  };
  check(d.q, "q");
  check(d.q2, "q2");
  check(d.q0, "q0");
  return d;
}

/// Largest interior mass q keeping the family valid for a given x1.
inline double three_point_q_max(double A, double epsilon, double x1) {
  double q = 1.0;
  q = std::min(q, epsilon / x1);
  q = std::min(q, (1.0 - epsilon / A) / (1.0 - x1 / A));
  q = std::max(q, 0.0);
  // step below the boundary when rounding leaves q0 or q2 a hair negative
  for (int i = 0; i < 64 && q > 0.0; ++i) {
    const double q2 = (epsilon - x1 * q) / A;
    if (q2 >= 0.0 && 1.0 - q - q2 >= 0.0) break;
    q = std::nextafter(q, 0.0);
  }
  return q;
}

/// Central differences in A with (epsilon, x1, q) held fixed, bits per unit
/// amplitude. `total` moves both the top location and the masses,
/// `location_only` moves the top location with masses frozen at A.
struct DerivativeRecord {
  double total = 0.0;
  double location_only = 0.0;
  double dH_Y = 0.0;
  double dH_Y_given_X = 0.0;
  double step = 0.0;
};

inline DerivativeRecord dI_dA_numeric(double A, double epsilon, double x1, double q,
                                      const ChannelSpec& spec, double h,
                                      const OutputGridConfig& out = {},
                                      const QuadratureConfig& quad = {}) {
  if (!(h > 0.0)) throw DomainError("dI_dA_numeric: step must be > 0");
  const auto mid = three_point(A, epsilon, x1, q);
  const auto up = three_point(A + h, epsilon, x1, q);
  const auto down = three_point(A - h, epsilon, x1, q);
  const DiscreteChannel ch(spec, {0.0, x1, A - h, A, A + h}, make_output_grid(spec, A + h, out),
                           quad);
  auto pmf = [](double q0, double q1, double lo, double at, double hi) {
    return std::vector<double>{q0, q1, lo, at, hi};
  };
  const auto p_up = pmf(up.q0, up.q, 0.0, 0.0, up.q2);
  const auto p_down = pmf(down.q0, down.q, down.q2, 0.0, 0.0);
  const auto l_up = pmf(mid.q0, mid.q, 0.0, 0.0, mid.q2);
  const auto l_down = pmf(mid.q0, mid.q, mid.q2, 0.0, 0.0);
  DerivativeRecord r;
  r.step = h;
  r.total = (ch.mutual_information(p_up) - ch.mutual_information(p_down)) / (2.0 * h);
  r.location_only = (ch.mutual_information(l_up) - ch.mutual_information(l_down)) / (2.0 * h);
  r.dH_Y = (ch.output_entropy(p_up) - ch.output_entropy(p_down)) / (2.0 * h);
  r.dH_Y_given_X =
      (ch.conditional_entropy(p_up) - ch.conditional_entropy(p_down)) / (2.0 * h);
  return r;
}

/// q2 times the integral of dp(y|A)/dA log2(p(y|A) / p_Y(y)), with the
/// derivative taken term by term from the Hermite expansion of p(y|x) and
/// truncated after n_terms. The log ratio uses the quadrature densities.
struct SeriesDerivative {
  double prefactor = 0.0;
  double integral = 0.0;
  double value = 0.0;
  double last_term = 0.0;  // contribution of the final series term to value
  std::size_t terms = 0;
};

namespace detail {

// d/dx of the truncated Hermite expansion of p(y|x); also returns the last
// term on its own.
inline std::pair<double, double> hermite_pdf_derivative(double y, double x,
                                                        const ChannelSpec& spec,
                                                        std::size_t n_terms) {
  const double sigma = spec.noise_sigma();
  const double z = y / sigma;
  const double g = spec.signal_gain() / sigma;
  const double base = normal_pdf(z, 1.0) / sigma;
  double he_prev = 0.0;
  double he = 1.0;
  double sum = 0.0;
  double last = 0.0;
  for (std::size_t n = 1; n < n_terms; ++n) {
    const double next = z * he - static_cast<double>(n - 1) * he_prev;
    he_prev = he;
    he = next;
    const double nd = static_cast<double>(n);
    // n g^n x^(n-1) E[h^n] / n!
    double coeff = 0.0;
    if (x > 0.0) {
      coeff = std::exp(nd * std::log(g) + (nd - 1.0) * std::log(x) +
                       2.0 * nd * spec.fading.mu_Xl + 2.0 * nd * nd * spec.fading.sigma2_Xl -
                       std::lgamma(nd));
    } else if (n == 1) {
      coeff = std::exp(std::log(g) + 2.0 * spec.fading.mu_Xl + 2.0 * spec.fading.sigma2_Xl);
    }
    last = base * he * coeff;
    sum += last;
  }
  return {sum, last};
}

}  // namespace detail

inline SeriesDerivative dI_dA_series(double A, double epsilon, double x1, double q,
                                     const ChannelSpec& spec, std::size_t n_terms,
                                     const OutputGridConfig& out = {},
                                     const QuadratureConfig& quad = {}) {
  const auto d = three_point(A, epsilon, x1, q);
  const DiscreteChannel ch(spec, {0.0, x1, A}, make_output_grid(spec, A, out), quad);
  const auto p_y = ch.output_density(d.masses());
  const auto& row = ch.row(2);
  const auto& grid = ch.output_grid();
  SeriesDerivative s;
  s.prefactor = d.q2;
  s.terms = n_terms;
  double last = 0.0;
  for (std::size_t j = 0; j < row.density.size(); ++j) {
    const std::size_t at = row.begin + j;
    if (row.density[j] <= kDensityFloor || p_y[at] <= kDensityFloor) continue;
    const double ratio = std::log2(row.density[j] / p_y[at]);
    const auto [deriv, tail] = detail::hermite_pdf_derivative(grid.y[at], A, spec, n_terms);
    s.integral += grid.w[at] * deriv * ratio;
    last += grid.w[at] * tail * ratio;
  }
  s.value = s.prefactor * s.integral;
  s.last_term = s.prefactor * last;
  return s;
}

struct BestThreePoint {
  double x1 = 0.0;
  double q = 0.0;
  double mi_bits = 0.0;
  double binary_mi_bits = 0.0;  // q = 0 member, {0, A} with mass epsilon / A at A
};

/// Maximizes I over the three-point family: a coarse grid in (x1, q), then
/// compass search around the best cell.
inline BestThreePoint best_three_point(double A, double epsilon, const ChannelSpec& spec,
                                       std::size_t coarse = 50,
                                       const OutputGridConfig& out = {},
                                       const QuadratureConfig& quad = {}) {
  if (!(epsilon < A)) throw DomainError("best_three_point: needs epsilon < A");
  if (coarse < 2) throw DomainError("best_three_point: coarse grid too small");
  const auto grid = make_output_grid(spec, A, out);
  std::vector<double> xs(coarse);
  for (std::size_t i = 0; i < coarse; ++i) {
    xs[i] = A * static_cast<double>(i + 1) / static_cast<double>(coarse + 1);
  }
  std::vector<double> points{0.0, A};
  points.insert(points.end(), xs.begin(), xs.end());
  const DiscreteChannel ch(spec, points, grid, quad);

  auto mi_with = [&](const ChannelRow& interior, double x1, double q) {
    const auto d = three_point(A, epsilon, x1, q);
    // p_Y and I assembled from the three rows directly
    std::vector<double> p_y(grid.size(), 0.0);
    const ChannelRow* rows[3] = {&ch.row(0), &interior, &ch.row(1)};
    const double m[3] = {d.q0, d.q, d.q2};
    for (int r = 0; r < 3; ++r) {
      for (std::size_t j = 0; j < rows[r]->density.size(); ++j) {
        p_y[rows[r]->begin + j] += m[r] * rows[r]->density[j];
      }
    }
    const auto log_out = DiscreteChannel::log_density(p_y);
    double nats = 0.0;
    for (int r = 0; r < 3; ++r) {
      if (m[r] > 0.0) nats += m[r] * DiscreteChannel::info_density_nats(*rows[r], log_out);
    }
    return nats / std::numbers::ln2;
  };

  BestThreePoint best;
  best.binary_mi_bits = mi_with(ch.row(2), xs[0], 0.0);
  best.mi_bits = best.binary_mi_bits;
  best.x1 = xs[0];
  for (std::size_t i = 0; i < coarse; ++i) {
    const double qmax = three_point_q_max(A, epsilon, xs[i]);
    for (std::size_t j = 0; j < coarse; ++j) {
      const double q =
          j + 1 == coarse ? qmax : qmax * static_cast<double>(j) / static_cast<double>(coarse - 1);
      const double v = mi_with(ch.row(2 + i), xs[i], q);
      if (v > best.mi_bits) best = {xs[i], q, v, best.binary_mi_bits};
    }
  }

  ChannelRow current = ch.make_row(best.x1);
  double dx = A / static_cast<double>(coarse + 1);
  double dq = 1.0 / static_cast<double>(coarse - 1);
  while (dx > 1e-6 * A || dq > 1e-6) {
    bool moved = false;
    const double steps[4][2] = {{dx, 0.0}, {-dx, 0.0}, {0.0, dq}, {0.0, -dq}};
    for (const auto& st : steps) {
      const double x1 = best.x1 + st[0];
      if (!(x1 > 0.0 && x1 < A)) continue;
      const double q = std::clamp(best.q + st[1], 0.0, three_point_q_max(A, epsilon, x1));
      ChannelRow row = st[0] == 0.0 ? current : ch.make_row(x1);
      const double v = mi_with(row, x1, q);
      if (v > best.mi_bits) {
        best.x1 = x1;
        best.q = q;
        best.mi_bits = v;
        current = std::move(row);
        moved = true;
        break;
      }
    }
    if (!moved) {
      dx *= 0.5;
      dq *= 0.5;
    }
  }
  return best;
}

struct TransitionOptions {
  std::size_t N = 201;
  double A_tol = 0.05;  // bisection stops when the bracket is this narrow
  bool evidence = true;
  std::size_t series_terms = 40;
  double derivative_step = 5e-3;
  SolveOptions solve{};
};

struct TransitionEvidence {
  double dI_dA_numeric = std::numeric_limits<double>::quiet_NaN();
  double dI_dA_location = std::numeric_limits<double>::quiet_NaN();
  double dI_dA_series = std::numeric_limits<double>::quiet_NaN();
  double series_last_term = std::numeric_limits<double>::quiet_NaN();
  double x1 = std::numeric_limits<double>::quiet_NaN();
  double q = std::numeric_limits<double>::quiet_NaN();
};

struct TransitionResult {
  double epsilon = 0.0;
  double E_th = 0.0;
  bool found = false;
  double transition_A = std::numeric_limits<double>::quiet_NaN();
  double bracket_lo = std::numeric_limits<double>::quiet_NaN();
  double bracket_hi = std::numeric_limits<double>::quiet_NaN();
  std::size_t count_lo = 0;
  std::size_t count_hi = 0;
  TransitionEvidence evidence;
};

/// Support size of the solver optimum at peak A; 0 when infeasible.
inline std::size_t support_count(double A, double epsilon, double E_th, const ChannelSpec& spec,
                                 const TransitionOptions& opt) {
  const ConstraintSet c{A, epsilon, E_th};
  const InputGrid grid(A, opt.N);
  if (!feasibility_check(c, grid, spec).feasible) return 0;
  return solve_capacity(c, grid, spec, opt.solve).support.size();
}

/// Bisection on A for the smallest peak amplitude whose solver optimum has
/// more than two mass points. Not found when the count at A_lo already
/// exceeds two or the count at A_hi does not.
inline TransitionResult find_transition(double epsilon, double E_th, const ChannelSpec& spec,
                                        double A_lo, double A_hi,
                                        const TransitionOptions& opt = {}) {
  if (!(A_lo > 0.0 && A_lo < A_hi)) throw DomainError("find_transition: needs 0 < A_lo < A_hi");
  if (!(opt.A_tol > 0.0)) throw DomainError("find_transition: A_tol must be > 0");
  TransitionResult r;
  r.epsilon = epsilon;
  r.E_th = E_th;
  double lo = A_lo, hi = A_hi;
  std::size_t n_lo = support_count(lo, epsilon, E_th, spec, opt);
  std::size_t n_hi = support_count(hi, epsilon, E_th, spec, opt);
  r.count_lo = n_lo;
  r.count_hi = n_hi;
  if (n_lo > 2 || n_hi <= 2) return r;
  while (hi - lo > opt.A_tol) {
    const double mid = 0.5 * (lo + hi);
    const std::size_t n = support_count(mid, epsilon, E_th, spec, opt);
    if (n > 2) {
      hi = mid;
      n_hi = n;
    } else {
      lo = mid;
      n_lo = n;
    }
  }
  r.found = true;
  r.transition_A = hi;
  r.bracket_lo = lo;
  r.bracket_hi = hi;
  r.count_lo = n_lo;
  r.count_hi = n_hi;
  if (opt.evidence && epsilon < hi) {
    const auto best = best_three_point(hi, epsilon, spec, 50, opt.solve.output,
                                       opt.solve.quadrature);
    r.evidence.x1 = best.x1;
    r.evidence.q = best.q;
    const double h = std::min(opt.derivative_step, 0.5 * (hi - std::max(best.x1, epsilon)));
    try {
      const auto num = dI_dA_numeric(hi, epsilon, best.x1, best.q, spec, h, opt.solve.output,
                                     opt.solve.quadrature);
      r.evidence.dI_dA_numeric = num.total;
      r.evidence.dI_dA_location = num.location_only;
    } catch (const DomainError&) {
    }
    const auto ser = dI_dA_series(hi, epsilon, best.x1, best.q, spec, opt.series_terms,
                                  opt.solve.output, opt.solve.quadrature);
    r.evidence.dI_dA_series = ser.value;
    r.evidence.series_last_term = ser.last_term;
  }
  return r;
}

}  // namespace slipt
