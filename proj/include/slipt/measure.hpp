#pragma once

// Information functionals of discrete input laws: output density, marginal
// information density, mutual information and the power/energy moments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slipt/channel.hpp"
#include "slipt/error.hpp"
#include "slipt/parallel.hpp"

namespace slipt {

inline constexpr double kDensityFloor = 1e-300;

/// Equally spaced amplitude alphabet {0, l, ..., (N-1) l}, l = A / (N-1).
struct InputGrid {
  double A = 1.0;
  std::size_t N = 2;
  std::vector<double> points;

  InputGrid() = default;
  InputGrid(double peak, std::size_t count) : A(peak), N(count) {
    if (!(peak > 0.0) || !std::isfinite(peak)) throw DomainError("InputGrid: A must be > 0");
    if (count < 2) throw DomainError("InputGrid: N must be >= 2");
    const double step = peak / static_cast<double>(count - 1);
    points.resize(count);
    for (std::size_t k = 0; k < count; ++k) points[k] = step * static_cast<double>(k);
    points.back() = peak;
  }

  double spacing() const { return A / static_cast<double>(N - 1); }
  bool operator==(const InputGrid& o) const { return A == o.A && N == o.N; }
};

/// Probability masses on an InputGrid.
struct InputDistribution {
  InputGrid grid;
  std::vector<double> pmf;

  InputDistribution() = default;
  InputDistribution(InputGrid g, std::vector<double> masses)
      : grid(std::move(g)), pmf(std::move(masses)) {
    validate();
  }

  static InputDistribution uniform(const InputGrid& g) {
    return {g, std::vector<double>(g.N, 1.0 / static_cast<double>(g.N))};
  }
  static InputDistribution point_mass(const InputGrid& g, std::size_t index) {
    if (index >= g.N) throw DomainError("point_mass: index outside grid");
    std::vector<double> p(g.N, 0.0);
    p[index] = 1.0;
    return {g, std::move(p)};
  }

  void validate() const {
    if (pmf.size() != grid.N) throw ShapeError("pmf length does not match grid size");
    double total = 0.0;
    for (double p : pmf) {
      if (!(p >= 0.0 && p <= 1.0)) throw DomainError("pmf entries must lie in [0, 1]");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw DomainError("pmf must sum to 1 (sum = " + std::to_string(total) + ")");
    }
  }
};

/// Peak amplitude A, average-amplitude bound epsilon, harvested-energy
/// threshold E_th (J).
struct ConstraintSet {
  double A = 1.0;
  double epsilon = 1.0;
  double E_th = 0.0;

  void validate() const {
    if (!(A > 0.0)) throw DomainError("constraint A must be > 0");
    if (!(epsilon > 0.0)) throw DomainError("constraint epsilon must be > 0");
    if (!(E_th >= 0.0)) throw DomainError("constraint E_th must be >= 0");
  }
};

/// Trapezoid nodes and weights for integrals over the channel output.
///
/// With fading the nodes are uniform in t for y = sigma_g sinh(t): spacing
/// about step * sigma_g near the origin, relative spacing `step` far from it,
/// which follows the lognormal spread at every amplitude. Without fading every
/// conditional density is a Gaussian of width sigma_g, so the nodes are
/// uniform with spacing step * sigma_g * 12.5.
struct OutputGrid {
  std::vector<double> y;
  std::vector<double> w;
  double step = 0.0;
  std::size_t size() const { return y.size(); }
};

struct OutputGridConfig {
  double step = 0.02;  // refine by lowering
};

inline OutputGrid make_output_grid(const ChannelSpec& spec, double x_max,
                                   const OutputGridConfig& cfg = {}) {
  if (!(cfg.step > 0.0)) throw ConfigError("output grid step must be > 0");
  const auto range = output_range(spec, x_max);
  const double sigma = spec.noise_sigma();
  OutputGrid grid;
  grid.step = cfg.step;
  if (spec.model == ChannelModel::gaussian) {
    const double dy = 12.5 * cfg.step * sigma;
    const auto n = static_cast<std::size_t>(std::ceil((range.hi - range.lo) / dy)) + 1;
    grid.y.resize(n);
    grid.w.assign(n, dy);
    for (std::size_t j = 0; j < n; ++j) grid.y[j] = range.lo + dy * static_cast<double>(j);
  } else {
    const double t_lo = std::asinh(range.lo / sigma);
    const double t_hi = std::asinh(range.hi / sigma);
    const double dt = cfg.step;
    const auto n = static_cast<std::size_t>(std::ceil((t_hi - t_lo) / dt)) + 1;
    grid.y.resize(n);
    grid.w.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double t = t_lo + dt * static_cast<double>(j);
      grid.y[j] = sigma * std::sinh(t);
      grid.w[j] = sigma * std::cosh(t) * dt;
    }
  }
  grid.w.front() *= 0.5;
  grid.w.back() *= 0.5;
  return grid;
}

/// One conditional density p(.|x) sampled on a window [begin, begin + size)
/// of an OutputGrid; zero outside the window.
struct ChannelRow {
  double x = 0.0;
  std::size_t begin = 0;
  std::vector<double> density;
  std::vector<double> weighted;  // w_j * p(y_j|x)
  double mass = 0.0;             // sum_j w_j p(y_j|x)
  double neg_entropy = 0.0;      // sum_j w_j p log p (nats) = -h(Y|X=x)
};

namespace detail {

inline double xlogx(double p) { return p > kDensityFloor ? p * std::log(p) : 0.0; }

}  // namespace detail

/// Conditional densities of a finite input alphabet tabulated on a fixed
/// output grid. Construction is the only writing phase; every query is const
/// and may run concurrently.
class DiscreteChannel {
 public:
  DiscreteChannel(const ChannelSpec& spec, std::vector<double> points, OutputGrid grid,
                  const QuadratureConfig& quad = {}, unsigned threads = 1)
      : spec_(spec), points_(std::move(points)), grid_(std::move(grid)), quad_(quad) {
    rows_.resize(points_.size());
    parallel_for(points_.size(), threads, [&](std::size_t k) { rows_[k] = make_row(points_[k]); });
  }

  DiscreteChannel(const ChannelSpec& spec, const InputGrid& input,
                  const OutputGridConfig& out = {}, const QuadratureConfig& quad = {},
                  unsigned threads = 1)
      : DiscreteChannel(spec, input.points, make_output_grid(spec, input.A, out), quad,
                        threads) {}

  const ChannelSpec& spec() const { return spec_; }
  const std::vector<double>& points() const { return points_; }
  const OutputGrid& output_grid() const { return grid_; }
  const ChannelRow& row(std::size_t k) const { return rows_.at(k); }
  std::size_t size() const { return points_.size(); }

  /// Tabulates p(.|x) for an arbitrary amplitude on this output grid. Throws
  /// ToleranceError when the sampled density does not integrate to one
  /// within 1e-6 (x outside the range the grid was built for, or
  /// unresolved quadrature).
  ChannelRow make_row(double x) const {
    const auto& y = grid_.y;
    const double sigma = spec_.noise_sigma();
    const double m = spec_.signal_gain() * x;
    double lo = m - 12.0 * sigma;
    double hi = m + 12.0 * sigma;
    if (spec_.model == ChannelModel::lognormal && m > 0.0) {
      lo = -12.0 * sigma;
      hi = m * std::exp(spec_.fading.log_mean() + 10.0 * spec_.fading.log_stddev()) +
           12.0 * sigma;
    }
    auto first = static_cast<std::size_t>(std::lower_bound(y.begin(), y.end(), lo) - y.begin());
    auto last = static_cast<std::size_t>(std::upper_bound(y.begin(), y.end(), hi) - y.begin());
    if (first > 0) --first;
    if (last < y.size()) ++last;

    ChannelRow row;
    row.x = x;
    std::vector<double> values(last - first);
    double peak = 0.0;
    for (std::size_t j = first; j < last; ++j) {
      values[j - first] = conditional_pdf(y[j], x, spec_, quad_);
      peak = std::max(peak, values[j - first]);
    }
    // drop the negligible tails of the window
    const double cut = peak * 1e-30;
    std::size_t a = 0;
    std::size_t b = values.size();
    while (a < b && values[a] < cut) ++a;
    while (b > a && values[b - 1] < cut) --b;
    row.begin = first + a;
    row.density.assign(values.begin() + static_cast<std::ptrdiff_t>(a),
                       values.begin() + static_cast<std::ptrdiff_t>(b));
    row.weighted.resize(row.density.size());
    for (std::size_t j = 0; j < row.density.size(); ++j) {
      const double wj = grid_.w[row.begin + j];
      row.weighted[j] = wj * row.density[j];
      row.mass += row.weighted[j];
      row.neg_entropy += wj * detail::xlogx(row.density[j]);
    }
    if (!(std::abs(row.mass - 1.0) <= 1e-6)) {
      throw ToleranceError("conditional density at x = " + std::to_string(x) +
                               " integrates to " + std::to_string(row.mass) +
                               " on the output grid",
                           row.mass - 1.0);
    }
    return row;
  }

  /// p(y_j; F) on the output grid.
  std::vector<double> output_density(std::span<const double> pmf) const {
    check_pmf(pmf);
    std::vector<double> out(grid_.size(), 0.0);
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      if (pmf[k] == 0.0) continue;
      const auto& r = rows_[k];
      double* dst = out.data() + r.begin;
      for (std::size_t j = 0; j < r.density.size(); ++j) dst[j] += pmf[k] * r.density[j];
    }
    return out;
  }

  /// ln p(y_j; F) with the density floored at kDensityFloor.
  static std::vector<double> log_density(std::span<const double> density) {
    std::vector<double> out(density.size());
    for (std::size_t j = 0; j < density.size(); ++j) {
      out[j] = std::log(std::max(density[j], kDensityFloor));
    }
    return out;
  }

  /// i(x; F) in nats for a tabulated row against a precomputed ln p(y; F).
  static double info_density_nats(const ChannelRow& r, std::span<const double> log_output) {
    double cross = 0.0;
    const double* lp = log_output.data() + r.begin;
    for (std::size_t j = 0; j < r.weighted.size(); ++j) cross += r.weighted[j] * lp[j];
    return r.neg_entropy - cross;
  }

  /// i(x_k; F) in bits for every tabulated point.
  std::vector<double> info_densities(std::span<const double> pmf) const {
    const auto log_out = log_density(output_density(pmf));
    std::vector<double> out(rows_.size());
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      out[k] = info_density_nats(rows_[k], log_out) / std::numbers::ln2;
    }
    return out;
  }

  /// i(x; F) in bits at an arbitrary amplitude.
  double info_density(double x, std::span<const double> pmf) const {
    const auto log_out = log_density(output_density(pmf));
    return info_density_nats(make_row(x), log_out) / std::numbers::ln2;
  }

  /// I(F) = sum_k p_k i(x_k; F), bits.
  double mutual_information(std::span<const double> pmf) const {
    const auto dens = info_densities(pmf);
    double total = 0.0;
    for (std::size_t k = 0; k < dens.size(); ++k) total += pmf[k] * dens[k];
    return total;
  }

  /// Differential entropy of the output, bits.
  double output_entropy(std::span<const double> pmf) const {
    const auto out = output_density(pmf);
    double h = 0.0;
    for (std::size_t j = 0; j < out.size(); ++j) h -= grid_.w[j] * detail::xlogx(out[j]);
    return h / std::numbers::ln2;
  }

  /// H(Y|X) = sum_k p_k h(Y | X = x_k), bits.
  double conditional_entropy(std::span<const double> pmf) const {
    check_pmf(pmf);
    double h = 0.0;
    for (std::size_t k = 0; k < rows_.size(); ++k) h -= pmf[k] * rows_[k].neg_entropy;
    return h / std::numbers::ln2;
  }

 private:
  void check_pmf(std::span<const double> pmf) const {
    if (pmf.size() != rows_.size()) throw ShapeError("pmf length does not match channel table");
  }

  ChannelSpec spec_;
  std::vector<double> points_;
  OutputGrid grid_;
  QuadratureConfig quad_;
  std::vector<ChannelRow> rows_;
};

/// p(y; F) = sum_k p_k p(y | x_k).
inline double output_pdf(double y, const InputDistribution& dist, const ChannelSpec& spec) {
  double total = 0.0;
  for (std::size_t k = 0; k < dist.grid.N; ++k) {
    if (dist.pmf[k] > 0.0) total += dist.pmf[k] * conditional_pdf(y, dist.grid.points[k], spec);
  }
  return total;
}

/// i(x; F) in bits, tabulating the channel for the distribution's grid.
inline double info_density(double x, const InputDistribution& dist, const ChannelSpec& spec) {
  if (!(x >= 0.0 && x <= dist.grid.A)) throw DomainError("info_density: x outside [0, A]");
  const DiscreteChannel channel(spec, dist.grid);
  return channel.info_density(x, dist.pmf);
}

inline double mutual_information(const InputDistribution& dist, const ChannelSpec& spec) {
  const DiscreteChannel channel(spec, dist.grid);
  return channel.mutual_information(dist.pmf);
}

/// Mutual information of an arbitrary finite input law (locations need not
/// lie on a grid), bits.
inline double mutual_information(std::span<const double> locations,
                                 std::span<const double> masses, const ChannelSpec& spec,
                                 const OutputGridConfig& out = {}) {
  const double x_max = *std::max_element(locations.begin(), locations.end());
  const DiscreteChannel channel(spec, {locations.begin(), locations.end()},
                                make_output_grid(spec, x_max, out));
  return channel.mutual_information(masses);
}

inline double avg_power(std::span<const double> points, std::span<const double> pmf) {
  double total = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) total += pmf[k] * points[k];
  return total;
}

inline double avg_power(const InputDistribution& dist) {
  return avg_power(dist.grid.points, dist.pmf);
}

inline double avg_eh(std::span<const double> points, std::span<const double> pmf,
                     const ChannelSpec& spec) {
  double total = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) total += pmf[k] * eh_energy(points[k], spec);
  return total;
}

inline double avg_eh(const InputDistribution& dist, const ChannelSpec& spec) {
  return avg_eh(dist.grid.points, dist.pmf, spec);
}

}  // namespace slipt
