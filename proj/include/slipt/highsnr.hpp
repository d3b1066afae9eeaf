#pragma once

// Exponential-family input law p_k = exp(-lambda1 x_k - lambda2 E(x_k)) / Z
// on an amplitude grid, calibrated to the moment constraints.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "slipt/channel.hpp"
#include "slipt/error.hpp"
#include "slipt/measure.hpp"
#include "slipt/solver.hpp"

namespace slipt {

/// lambda1 per unit amplitude and lambda2 per joule, in the exponent's own
/// sign convention: lambda2 < 0 favors high-energy amplitudes.
struct HighSnrSolution {
  InputDistribution dist;
  MultiplierSet multipliers;
  double Z = 1.0;
  double log_Z = 0.0;
};

inline HighSnrSolution highsnr_pmf(double lambda1, double lambda2, const InputGrid& grid,
                                   const ChannelSpec& spec) {
  if (!std::isfinite(lambda1) || !std::isfinite(lambda2)) {
    throw DomainError("highsnr_pmf: multipliers must be finite");
  }
  std::vector<double> expo(grid.N);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.N; ++k) {
    const double x = grid.points[k];
    expo[k] = -lambda1 * x - lambda2 * eh_energy(x, spec);
    top = std::max(top, expo[k]);
  }
  double sum = 0.0;
  for (double& v : expo) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : expo) v /= sum;
  HighSnrSolution s;
  s.multipliers.lambda1 = lambda1;
  s.multipliers.lambda2 = lambda2;
  s.log_Z = top + std::log(sum);
  s.Z = std::exp(s.log_Z);
  s.dist = InputDistribution(grid, std::move(expo));
  return s;
}

namespace detail {

struct Moments {
  double mean, eh, var_x, var_e, cov_xe;
};

inline Moments highsnr_moments(const InputDistribution& d, std::span<const double> energy) {
  Moments m{};
  for (std::size_t k = 0; k < d.pmf.size(); ++k) {
    m.mean += d.pmf[k] * d.grid.points[k];
    m.eh += d.pmf[k] * energy[k];
  }
  for (std::size_t k = 0; k < d.pmf.size(); ++k) {
    const double dx = d.grid.points[k] - m.mean;
    const double de = energy[k] - m.eh;
    m.var_x += d.pmf[k] * dx * dx;
    m.var_e += d.pmf[k] * de * de;
    m.cov_xe += d.pmf[k] * dx * de;
  }
  return m;
}

// Root of a decreasing function on the real line by bracket expansion and
// TOMS 748.
inline double decreasing_root(const std::function<double(double)>& f, double scale) {
  double lo = -scale, hi = scale;
  for (int i = 0; f(lo) < 0.0; ++i) {
    if (i > 60) throw CalibrationError("no bracket for multiplier", f(lo), 0.0);
    lo *= 2.0;
  }
  for (int i = 0; f(hi) > 0.0; ++i) {
    if (i > 60) throw CalibrationError("no bracket for multiplier", f(hi), 0.0);
    hi *= 2.0;
  }
  std::uintmax_t iters = 300;
  const auto r = boost::math::tools::toms748_solve(
      f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace detail

/// Chooses (lambda1, lambda2) so that the mean equals epsilon and the average
/// harvested energy equals E_th. When the energy target is already met with
/// lambda2 = 0, returns the mean-only calibration. When epsilon >= A no
/// finite lambda1 reaches mean = epsilon; the amplitude constraint cannot
/// bind and lambda1 is held at 0.
inline HighSnrSolution calibrate_multipliers(const ConstraintSet& c, const InputGrid& grid,
                                             const ChannelSpec& spec) {
  const auto feas = feasibility_check(c, grid, spec);
  if (!feas.feasible) {
    throw InfeasibleError("high-SNR calibration: energy threshold not achievable", feas.max_eh);
  }
  const double e_peak = eh_energy(grid.A, spec);
  std::vector<double> energy(grid.N);
  for (std::size_t k = 0; k < grid.N; ++k) energy[k] = eh_energy(grid.points[k], spec);

  // scaled multipliers: t1 = lambda1 A, t2 = lambda2 E(A)
  auto solution = [&](double t1, double t2) {
    return highsnr_pmf(t1 / grid.A, t2 / e_peak, grid, spec);
  };
  auto moments = [&](double t1, double t2) {
    return detail::highsnr_moments(solution(t1, t2).dist, energy);
  };
  const bool ap_binds = c.epsilon < grid.A;
  const double tol = 1e-8;

  auto mean_root = [&](double t2) {
    if (!ap_binds) return 0.0;
    return detail::decreasing_root(
        [&](double t1) { return (moments(t1, t2).mean - c.epsilon) / grid.A; }, 1.0);
  };

  const double t1_ap = mean_root(0.0);
  if (moments(t1_ap, 0.0).eh >= c.E_th) return solution(t1_ap, 0.0);

  auto residual = [&](double t1, double t2) {
    const auto m = moments(t1, t2);
    return std::pair{ap_binds ? (m.mean - c.epsilon) / grid.A : 0.0, (m.eh - c.E_th) / e_peak};
  };

  // damped Newton; the Jacobian of the moments is the (negated) covariance
  double t1 = t1_ap, t2 = 0.0;
  auto [r1, r2] = residual(t1, t2);
  for (int iter = 0; iter < 200 && std::max(std::abs(r1), std::abs(r2)) > tol; ++iter) {
    const auto m = moments(t1, t2);
    const double j11 = -m.var_x / (grid.A * grid.A);
    const double j12 = -m.cov_xe / (grid.A * e_peak);
    const double j21 = j12;
    const double j22 = -m.var_e / (e_peak * e_peak);
    double d1 = 0.0, d2 = 0.0;
    if (ap_binds) {
      const double det = j11 * j22 - j12 * j21;
      if (!(std::abs(det) > 1e-300)) break;
      d1 = -(j22 * r1 - j12 * r2) / det;
      d2 = -(j11 * r2 - j21 * r1) / det;
    } else {
      if (!(std::abs(j22) > 1e-300)) break;
      d2 = -r2 / j22;
    }
    const double norm = std::max(std::abs(r1), std::abs(r2));
    double step = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      const auto [n1, n2] = residual(t1 + step * d1, t2 + step * d2);
      if (std::isfinite(n1) && std::isfinite(n2) && std::max(std::abs(n1), std::abs(n2)) < norm) {
        t1 += step * d1;
        t2 += step * d2;
        r1 = n1;
        r2 = n2;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }

  if (std::max(std::abs(r1), std::abs(r2)) > tol) {
    // nested bisection: energy along the mean = epsilon curve falls as t2 grows
    try {
      t2 = detail::decreasing_root(
          [&](double s2) { return (moments(mean_root(s2), s2).eh - c.E_th) / e_peak; }, 1.0);
      t1 = mean_root(t2);
      std::tie(r1, r2) = residual(t1, t2);
    } catch (const CalibrationError&) {
    }
  }
  if (std::max(std::abs(r1), std::abs(r2)) > tol) {
    throw CalibrationError("high-SNR calibration did not converge", r1 * grid.A, r2 * e_peak);
  }
  return solution(t1, t2);
}

struct SolverComparison {
  double total_variation = 0.0;
  double mi_gap_bits = 0.0;  // I(solver) - I(high-SNR)
  double mi_highsnr_bits = 0.0;
  double mi_solver_bits = 0.0;
  double power_delta = 0.0;  // E[X] high-SNR minus solver
  double eh_delta = 0.0;     // J
};

inline SolverComparison compare_to_solver(const HighSnrSolution& hs, const SolveReport& report,
                                          const DiscreteChannel& channel) {
  if (!(hs.dist.grid == report.dist.grid) || channel.size() != hs.dist.grid.N) {
    throw ShapeError("compare_to_solver: grids differ");
  }
  SolverComparison out;
  for (std::size_t k = 0; k < hs.dist.pmf.size(); ++k) {
    out.total_variation += std::abs(hs.dist.pmf[k] - report.dist.pmf[k]);
  }
  out.total_variation *= 0.5;
  out.mi_highsnr_bits = channel.mutual_information(hs.dist.pmf);
  out.mi_solver_bits = channel.mutual_information(report.dist.pmf);
  out.mi_gap_bits = out.mi_solver_bits - out.mi_highsnr_bits;
  out.power_delta = avg_power(hs.dist) - avg_power(report.dist);
  out.eh_delta = avg_eh(hs.dist, channel.spec()) - avg_eh(report.dist, channel.spec());
  return out;
}

inline SolverComparison compare_to_solver(const HighSnrSolution& hs, const SolveReport& report,
                                          const ChannelSpec& spec,
                                          const SolveOptions& options = {}) {
  if (!(hs.dist.grid == report.dist.grid)) throw ShapeError("compare_to_solver: grids differ");
  const DiscreteChannel channel(spec, hs.dist.grid, options.output, options.quadrature,
                                options.threads);
  return compare_to_solver(hs, report, channel);
}

}  // namespace slipt
