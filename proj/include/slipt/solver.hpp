#pragma once

// Capacity of the peak/average/harvested-energy constrained channel over an
// amplitude grid, optimality certificates, support extraction and sweeps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "slipt/channel.hpp"
#include "slipt/error.hpp"
#include "slipt/measure.hpp"
#include "slipt/parallel.hpp"

namespace slipt {

/// Lagrange multipliers in bits: lambda1 per unit amplitude (average power),
/// lambda2 per joule (harvested energy), lambda3 the normalization constant,
/// i.e. the common value of i(x) - lambda1 x + lambda2 E(x) on the support.
struct MultiplierSet {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
};

struct SupportPoint {
  double location = 0.0;
  double mass = 0.0;
};

struct SolveOptions {
  std::size_t max_iterations = 200000;
  double gap_tol = 1e-5;  // duality gap at which iteration stops, bits
  double max_step = 64.0;  // largest mirror-ascent step exponent
  double kkt_tol = 1e-3;  // largest acceptable gap after max_iterations, bits
  double mass_tol = 1e-6;
  std::size_t cluster_width = 3;
  OutputGridConfig output{};
  QuadratureConfig quadrature{};
  unsigned threads = 1;
};

struct SolveReport {
  double capacity_bits = 0.0;
  InputDistribution dist;
  MultiplierSet multipliers;
  std::vector<SupportPoint> support;
  double kkt_residual = 0.0;     // max_k s(x_k) on the solve grid, bits
  double kkt_support_gap = 0.0;  // max |s| at the heaviest cell of each support cluster
  bool feasible = false;
  std::size_t iterations = 0;
  double duality_gap = 0.0;  // bits
  double avg_power = 0.0;
  double avg_eh = 0.0;  // J
};

struct Feasibility {
  bool feasible = false;
  double max_eh = 0.0;  // J
};

/// Since E is convex with E(0) = 0, E(x) <= (x / A) E(A) on [0, A]; the
/// largest average energy under E[X] <= epsilon is therefore reached by
/// {0, A} with mass min(epsilon, A) / A at A.
inline Feasibility feasibility_check(const ConstraintSet& c, const InputGrid& grid,
                                     const ChannelSpec& spec) {
  c.validate();
  if (grid.A != c.A) throw ShapeError("grid peak differs from constraint A");
  Feasibility f;
  f.max_eh = std::min(c.epsilon, c.A) / c.A * eh_energy(c.A, spec);
  f.feasible = f.max_eh >= c.E_th;
  return f;
}

namespace detail {

// Exponential-family fit solved at every iteration: minimize over l >= 0
//   phi(l) = log sum_k exp(u_k - l1 x_k + l2 e_k) + l1 eps - l2 eth,
// whose minimizer tilts exp(u) onto {E[x] <= eps, E[e] >= eth} with
// complementary slackness. x, e, eps, eth are scaled to O(1).
struct TiltFit {
  double l1 = 0.0;
  double l2 = 0.0;
  double log_norm = 0.0;
};

inline TiltFit fit_tilt(std::span<const double> u, std::span<const double> x,
                        std::span<const double> e, double eps, double eth, TiltFit start) {
  const std::size_t n = u.size();
  std::vector<double> q(n);
  struct Eval {
    double phi, g1, g2, vxx, vee, vxe, log_norm;
  };
  auto evaluate = [&](double l1, double l2, bool moments) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      q[k] = u[k] - l1 * x[k] + l2 * e[k];
      top = std::max(top, q[k]);
    }
    double z = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      q[k] = std::exp(q[k] - top);
      z += q[k];
    }
    Eval ev{};
    ev.log_norm = top + std::log(z);
    ev.phi = ev.log_norm + l1 * eps - l2 * eth;
    if (!moments) return ev;
    double mx = 0.0, me = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      q[k] /= z;
      mx += q[k] * x[k];
      me += q[k] * e[k];
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double dx = x[k] - mx;
      const double de = e[k] - me;
      ev.vxx += q[k] * dx * dx;
      ev.vee += q[k] * de * de;
      ev.vxe += q[k] * dx * de;
    }
    ev.g1 = eps - mx;
    ev.g2 = me - eth;
    return ev;
  };

  auto projected_norm = [](const Eval& ev, double l1, double l2) {
    const double a = l1 > 0.0 || ev.g1 < 0.0 ? std::abs(ev.g1) : 0.0;
    const double b = l2 > 0.0 || ev.g2 < 0.0 ? std::abs(ev.g2) : 0.0;
    return std::max(a, b);
  };

  double l1 = std::max(0.0, start.l1);
  double l2 = std::max(0.0, start.l2);
  for (int iter = 0; iter < 500; ++iter) {
    const Eval ev = evaluate(l1, l2, true);
    const bool free1 = l1 > 0.0 || ev.g1 < 0.0;
    const bool free2 = l2 > 0.0 || ev.g2 < 0.0;
    const double pg1 = free1 ? ev.g1 : 0.0;
    const double pg2 = free2 ? ev.g2 : 0.0;
    if (std::abs(pg1) <= 1e-14 && std::abs(pg2) <= 1e-14) {
      return {l1, l2, ev.log_norm};
    }
    // Newton step on the free coordinates, Hessian = Cov(-x, e)
    double d1 = 0.0, d2 = 0.0;
    const double h11 = ev.vxx, h22 = ev.vee, h12 = -ev.vxe;
    if (free1 && free2) {
      const double det = h11 * h22 - h12 * h12;
      if (det > 1e-300 && det > 1e-14 * h11 * h22) {
        d1 = -(h22 * pg1 - h12 * pg2) / det;
        d2 = -(h11 * pg2 - h12 * pg1) / det;
      } else {
        d1 = -pg1 / std::max(h11, 1e-300);
        d2 = -pg2 / std::max(h22, 1e-300);
      }
    } else if (free1) {
      d1 = -pg1 / std::max(h11, 1e-300);
    } else if (free2) {
      d2 = -pg2 / std::max(h22, 1e-300);
    }
    // a near-degenerate tilt (all mass on one cell) gives astronomically long
    // Newton steps; cap the change in log-weights per step
    const double len = std::max(std::abs(d1), std::abs(d2));
    if (len > 64.0) {
      d1 *= 64.0 / len;
      d2 *= 64.0 / len;
    }
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 80; ++ls, t *= 0.5) {
      const double n1 = std::max(0.0, l1 + t * d1);
      const double n2 = std::max(0.0, l2 + t * d2);
      const double decrease = ev.g1 * (n1 - l1) + ev.g2 * (n2 - l2);
      const Eval trial = evaluate(n1, n2, true);
      // Near the optimum phi is flat to rounding; fall back to the size of
      // the projected gradient there.
      const bool flat = trial.phi <= ev.phi + 1e-13 * std::max(1.0, std::abs(ev.phi)) &&
                        projected_norm(trial, n1, n2) < projected_norm(ev, l1, l2);
      if (trial.phi <= ev.phi + 1e-4 * decrease || flat || (n1 == l1 && n2 == l2)) {
        moved = n1 != l1 || n2 != l2;
        l1 = n1;
        l2 = n2;
        break;
      }
    }
    if (!moved) {
      // No representable progress left; accept if the moments are met to
      // rounding level.
      if (std::abs(pg1) <= 1e-11 && std::abs(pg2) <= 1e-11) return {l1, l2, ev.log_norm};
      break;
    }
  }
  const Eval ev = evaluate(l1, l2, true);
  throw ConvergenceError("multiplier fit did not converge", std::max(std::abs(ev.g1), std::abs(ev.g2)));
}

inline std::vector<SupportPoint> cluster_cells(std::span<const double> points,
                                               std::span<const double> pmf, double mass_tol,
                                               std::size_t cluster_width) {
  std::vector<SupportPoint> out;
  double total = 0.0;
  double weighted = 0.0;
  double mass = 0.0;
  std::size_t last = 0;
  bool open = false;
  auto close = [&] {
    if (open) out.push_back({weighted / mass, mass});
    weighted = mass = 0.0;
    open = false;
  };
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    if (pmf[k] < mass_tol) continue;
    if (open && k - last > cluster_width) close();
    open = true;
    weighted += pmf[k] * points[k];
    mass += pmf[k];
    total += pmf[k];
    last = k;
  }
  close();
  for (auto& s : out) s.mass /= total;
  return out;
}

// Index of the heaviest cell in each cluster formed as in cluster_cells.
inline std::vector<std::size_t> cluster_peaks(std::span<const double> pmf, double mass_tol,
                                              std::size_t cluster_width) {
  std::vector<std::size_t> out;
  std::size_t last = 0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    if (pmf[k] < mass_tol) continue;
    if (out.empty() || k - last > cluster_width) {
      out.push_back(k);
    } else if (pmf[k] > pmf[out.back()]) {
      out.back() = k;
    }
    last = k;
  }
  return out;
}

}  // namespace detail

/// Groups the cells carrying at least `mass_tol` into mass points: retained
/// cells at most `cluster_width` grid steps apart merge into one point at
/// their mass-weighted centroid. Masses are renormalized over the retained
/// cells, so they sum to one; output is ordered by location.
inline std::vector<SupportPoint> extract_support(const InputDistribution& dist, double mass_tol,
                                                 std::size_t cluster_width) {
  dist.validate();
  return detail::cluster_cells(dist.grid.points, dist.pmf, mass_tol, cluster_width);
}

/// s(x) = i(x; F) - lambda1 (x - eps) + lambda2 (E(x) - E_th) - C in bits;
/// optimality requires s <= 0 everywhere with equality on the support.
inline double kkt_slack(double info_bits, double x, double energy, const MultiplierSet& m,
                        const ConstraintSet& c, double capacity_bits) {
  return info_bits - m.lambda1 * (x - c.epsilon) + m.lambda2 * (energy - c.E_th) -
         capacity_bits;
}

/// Maximizes I(F) over pmfs on `grid` subject to E[X] <= epsilon and
/// E[b X ln(1 + c X)] >= E_th.
///
/// Blahut-Arimoto iteration in which the exponential tilt
/// exp(-lambda1 x + lambda2 E(x)) is refitted at every step so that the new
/// iterate meets both moment constraints with complementary slackness. The
/// iterate is therefore always feasible and
/// max_k s(x_k) bounds C - I(F) from above; iteration stops once that
/// duality gap drops below options.gap_tol. Starts from the uniform pmf; no
/// randomness.
inline SolveReport solve_capacity(const ConstraintSet& constraints, const InputGrid& grid,
                                  const DiscreteChannel& channel,
                                  const SolveOptions& options = {}) {
  const auto& spec = channel.spec();
  const auto feas = feasibility_check(constraints, grid, spec);
  if (!feas.feasible) {
    throw InfeasibleError("harvested-energy threshold exceeds the largest achievable average " +
                              std::to_string(feas.max_eh) + " J",
                          feas.max_eh);
  }
  if (channel.size() != grid.N) throw ShapeError("channel table does not match grid");

  const std::size_t n = grid.N;
  const double e_peak = eh_energy(grid.A, spec);
  std::vector<double> xs(n), es(n), energy(n);
  for (std::size_t k = 0; k < n; ++k) {
    xs[k] = grid.points[k] / grid.A;
    energy[k] = eh_energy(grid.points[k], spec);
    es[k] = energy[k] / e_peak;
  }
  const double eps = constraints.epsilon / grid.A;
  const double eth = constraints.E_th / e_peak;

  std::vector<double> log_p(n, -std::log(static_cast<double>(n)));
  std::vector<double> p(n, 1.0 / static_cast<double>(n));
  std::vector<double> info(n), u(n);
  std::vector<double> next_log_p(n), next_p(n), next_info(n);
  double lambda1 = 0.0, lambda2 = 0.0;  // nats per scaled unit
  double gap = std::numeric_limits<double>::infinity();
  const double gap_tol = options.gap_tol * std::numbers::ln2;

  auto information = [&](const std::vector<double>& pmf, std::vector<double>& out) {
    const auto log_out = DiscreteChannel::log_density(channel.output_density(pmf));
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      out[k] = DiscreteChannel::info_density_nats(channel.row(k), log_out);
      total += pmf[k] * out[k];
    }
    return total;
  };

  // Mirror-ascent step p <- p exp(omega D) projected onto the constraint set;
  // omega = 1 is the classical monotone update, larger steps are kept only
  // while they increase I.
  double value = information(p, info);
  double omega = 1.0;
  bool fitted = false;
  std::size_t it = 0;
  for (;; ++it) {
    if (fitted) {
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < n; ++k) {
        top = std::max(top, info[k] - lambda1 * (xs[k] - eps) + lambda2 * (es[k] - eth));
      }
      gap = top - value;
      if (gap <= gap_tol) break;
    }
    if (it >= options.max_iterations) break;
    for (;;) {
      for (std::size_t k = 0; k < n; ++k) u[k] = log_p[k] + omega * info[k];
      const auto tilt =
          detail::fit_tilt(u, xs, es, eps, eth, {omega * lambda1, omega * lambda2, 0.0});
      double total = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        next_log_p[k] = u[k] - tilt.l1 * xs[k] + tilt.l2 * es[k] - tilt.log_norm;
        next_p[k] = std::exp(next_log_p[k]);
        total += next_p[k];
      }
      for (double& v : next_p) v /= total;
      const double next_value = information(next_p, next_info);
      if (!fitted || omega == 1.0 || next_value >= value) {
        lambda1 = tilt.l1 / omega;
        lambda2 = tilt.l2 / omega;
        std::swap(log_p, next_log_p);
        std::swap(p, next_p);
        std::swap(info, next_info);
        value = next_value;
        if (fitted) omega = std::min(2.0 * omega, options.max_step);
        fitted = true;
        break;
      }
      omega = std::max(1.0, omega / 4.0);
    }
  }
  if (gap / std::numbers::ln2 > options.kkt_tol) {
    throw ConvergenceError("capacity iteration stopped at duality gap " +
                               std::to_string(gap / std::numbers::ln2) + " bits",
                           gap / std::numbers::ln2);
  }

  SolveReport r;
  r.iterations = it;
  r.duality_gap = gap / std::numbers::ln2;
  r.dist = InputDistribution(grid, p);
  r.avg_power = avg_power(grid.points, p);
  r.avg_eh = avg_eh(grid.points, p, spec);
  r.multipliers.lambda1 = lambda1 / (grid.A * std::numbers::ln2);
  r.multipliers.lambda2 = lambda2 / (e_peak * std::numbers::ln2);
  double capacity = 0.0;
  for (std::size_t k = 0; k < n; ++k) capacity += p[k] * info[k];
  r.capacity_bits = capacity / std::numbers::ln2;
  r.multipliers.lambda3 = r.capacity_bits - r.multipliers.lambda1 * constraints.epsilon +
                          r.multipliers.lambda2 * constraints.E_th;
  r.feasible = r.avg_power <= constraints.epsilon + 1e-9 && r.avg_eh >= constraints.E_th - 1e-9;
  r.support = extract_support(r.dist, options.mass_tol, options.cluster_width);
  std::vector<double> slack(n);
  for (std::size_t k = 0; k < n; ++k) {
    slack[k] = kkt_slack(info[k] / std::numbers::ln2, grid.points[k], energy[k], r.multipliers,
                         constraints, r.capacity_bits);
    r.kkt_residual = std::max(r.kkt_residual, slack[k]);
  }
  for (std::size_t k : detail::cluster_peaks(p, options.mass_tol, options.cluster_width)) {
    r.kkt_support_gap = std::max(r.kkt_support_gap, std::abs(slack[k]));
  }
  return r;
}

inline SolveReport solve_capacity(const ConstraintSet& constraints, const InputGrid& grid,
                                  const ChannelSpec& spec, const SolveOptions& options = {}) {
  const auto feas = feasibility_check(constraints, grid, spec);
  if (!feas.feasible) {
    throw InfeasibleError("harvested-energy threshold exceeds the largest achievable average " +
                              std::to_string(feas.max_eh) + " J",
                          feas.max_eh);
  }
  const DiscreteChannel channel(spec, grid, options.output, options.quadrature, options.threads);
  return solve_capacity(constraints, grid, channel, options);
}

struct KktRecord {
  double max_violation = 0.0;       // max_x s(x) over the fine grid, bits
  double violation_location = 0.0;  // argmax
  double max_support_defect = 0.0;  // max |s| at the heaviest cell of each cluster
  std::size_t fine_points = 0;
};

/// Evaluates the optimality slack s(x) of a solved law on a grid
/// `fine_factor` times denser than the solve grid.
inline KktRecord kkt_verify(const SolveReport& report, const ConstraintSet& constraints,
                            const DiscreteChannel& channel, std::size_t fine_factor,
                            const SolveOptions& options = {}) {
  if (fine_factor == 0) throw DomainError("kkt_verify: fine_factor must be >= 1");
  const auto& grid = report.dist.grid;
  if (channel.size() != grid.N) throw ShapeError("channel table does not match report grid");
  const auto& spec = channel.spec();
  const auto log_out = DiscreteChannel::log_density(channel.output_density(report.dist.pmf));
  const std::size_t count = fine_factor * (grid.N - 1) + 1;
  std::vector<double> slack(count);
  std::vector<double> where(count);
  parallel_for(count, options.threads, [&](std::size_t i) {
    const double x =
        i + 1 == count ? grid.A : grid.A * static_cast<double>(i) / static_cast<double>(count - 1);
    const double nats = i % fine_factor == 0
                            ? DiscreteChannel::info_density_nats(channel.row(i / fine_factor), log_out)
                            : DiscreteChannel::info_density_nats(channel.make_row(x), log_out);
    where[i] = x;
    slack[i] = kkt_slack(nats / std::numbers::ln2, x, eh_energy(x, spec), report.multipliers,
                         constraints, report.capacity_bits);
  });
  KktRecord rec;
  rec.fine_points = count;
  rec.max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count; ++i) {
    if (slack[i] > rec.max_violation) {
      rec.max_violation = slack[i];
      rec.violation_location = where[i];
    }
  }
  for (std::size_t k :
       detail::cluster_peaks(report.dist.pmf, options.mass_tol, options.cluster_width)) {
    rec.max_support_defect = std::max(rec.max_support_defect, std::abs(slack[k * fine_factor]));
  }
  return rec;
}

inline KktRecord kkt_verify(const SolveReport& report, const ConstraintSet& constraints,
                            const ChannelSpec& spec, std::size_t fine_factor,
                            const SolveOptions& options = {}) {
  const DiscreteChannel channel(spec, report.dist.grid, options.output, options.quadrature,
                                options.threads);
  return kkt_verify(report, constraints, channel, fine_factor, options);
}

/// One point of the information-energy region. capacity_bits is NaN when the
/// threshold is infeasible.
struct RegionPoint {
  double E_th = 0.0;
  double capacity_bits = 0.0;
  bool feasible = false;
};

/// One solve per threshold on a shared channel table; infeasible thresholds
/// are flagged rather than thrown.
inline std::vector<RegionPoint> sweep_region(const ConstraintSet& base,
                                             std::span<const double> E_th_list,
                                             const InputGrid& grid, const DiscreteChannel& channel,
                                             const SolveOptions& options = {}) {
  if (!std::is_sorted(E_th_list.begin(), E_th_list.end())) {
    throw DomainError("sweep_region: thresholds must be ascending");
  }
  std::vector<RegionPoint> out(E_th_list.size());
  SolveOptions inner = options;
  inner.threads = 1;
  parallel_for(E_th_list.size(), options.threads, [&](std::size_t i) {
    ConstraintSet c = base;
    c.E_th = E_th_list[i];
    out[i].E_th = c.E_th;
    if (!feasibility_check(c, grid, channel.spec()).feasible) {
      out[i].capacity_bits = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    out[i].capacity_bits = solve_capacity(c, grid, channel, inner).capacity_bits;
    out[i].feasible = true;
  });
  return out;
}

inline std::vector<RegionPoint> sweep_region(const ConstraintSet& base,
                                             std::span<const double> E_th_list,
                                             const InputGrid& grid, const ChannelSpec& spec,
                                             const SolveOptions& options = {}) {
  const DiscreteChannel channel(spec, grid, options.output, options.quadrature, options.threads);
  return sweep_region(base, E_th_list, grid, channel, options);
}

struct MassPointRow {
  double A = 0.0;
  bool feasible = false;
  std::size_t support_count = 0;
  std::vector<SupportPoint> support;
  double capacity_bits = std::numeric_limits<double>::quiet_NaN();
  MultiplierSet multipliers;
};

/// Solves on an N-point grid for every peak amplitude in A_list, keeping
/// epsilon and E_th from `base`.
inline std::vector<MassPointRow> sweep_masspoints(std::span<const double> A_list,
                                                  const ConstraintSet& base,
                                                  const ChannelSpec& spec, std::size_t N,
                                                  const SolveOptions& options = {}) {
  if (!std::is_sorted(A_list.begin(), A_list.end())) {
    throw DomainError("sweep_masspoints: amplitudes must be ascending");
  }
  std::vector<MassPointRow> out(A_list.size());
  SolveOptions inner = options;
  inner.threads = 1;
  parallel_for(A_list.size(), options.threads, [&](std::size_t i) {
    ConstraintSet c = base;
    c.A = A_list[i];
    const InputGrid grid(c.A, N);
    out[i].A = c.A;
    if (!feasibility_check(c, grid, spec).feasible) return;
    const auto r = solve_capacity(c, grid, spec, inner);
    out[i].feasible = true;
    out[i].support = r.support;
    out[i].support_count = r.support.size();
    out[i].capacity_bits = r.capacity_bits;
    out[i].multipliers = r.multipliers;
  });
  return out;
}

}  // namespace slipt
