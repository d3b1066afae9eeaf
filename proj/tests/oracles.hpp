#pragma once

// Reference computations for the tests. Each one avoids the library's own
// numerical machinery: brute-force Simpson rules on uniform grids, the
// Boost lognormal law, and exhaustive search.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/distributions/lognormal.hpp>

#include "slipt/channel.hpp"

namespace oracle {

inline double path_loss(double eta_t, double eta_r, double c_lambda, double l, double theta_0,
                        double theta_rx, double area) {
  return eta_t * eta_r * std::exp(-c_lambda * l / std::cos(theta_rx)) * area *
         std::cos(theta_rx) / (2.0 * std::numbers::pi * l * l * (1.0 - std::cos(theta_0)));
}

// h = exp(2 X), X ~ N(mu, s2): ln h ~ N(2 mu, 4 s2)
inline double fading_pdf(double h, double mu, double s2) {
  boost::math::lognormal_distribution<double> d(2.0 * mu, 2.0 * std::sqrt(s2));
  return boost::math::pdf(d, h);
}

inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + h * i);
  return s * h / 3.0;
}

// p(y|x) = int fading_pdf(h) N(y; g x h, sigma^2) dh, integrated in u = ln h
// with a dense Simpson rule over +-12 standard deviations.
inline double conditional_pdf(double y, double x, const slipt::ChannelSpec& spec,
                              int panels = 20000) {
  const double sigma = std::sqrt(spec.devices.sigma2_g);
  const double m = spec.devices.a * spec.devices.R_P * spec.h1l * x;
  auto gauss = [&](double v) {
    return std::exp(-0.5 * v * v / (sigma * sigma)) / (sigma * std::sqrt(2.0 * std::numbers::pi));
  };
  if (spec.model == slipt::ChannelModel::gaussian || x == 0.0) return gauss(y - m);
  const double mu = 2.0 * spec.fading.mu_Xl;
  const double sd = 2.0 * std::sqrt(spec.fading.sigma2_Xl);
  auto f = [&](double u) {
    const double z = (u - mu) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi)) *
           gauss(y - m * std::exp(u));
  };
  // resolve the ridge u ~ ln(y / m), whose width is about sigma / |y|
  const double ridge = sigma / std::max(std::abs(y), sigma);
  const double needed = 24.0 * sd / (0.05 * ridge);
  return simpson(f, mu - 12.0 * sd, mu + 12.0 * sd,
                 std::max(panels, static_cast<int>(std::min(needed, 2e7))));
}

// Table of p(y_j | x_k) on a uniform y-grid, for mutual information by a
// plain Riemann sum.
struct Table {
  std::vector<double> y;
  double dy = 0.0;
  std::vector<std::vector<double>> p;  // p[k][j]
};

inline Table make_table(const std::vector<double>& xs, const slipt::ChannelSpec& spec,
                        double y_lo, double y_hi, int count, int panels = 4000) {
  Table t;
  t.dy = (y_hi - y_lo) / (count - 1);
  for (int j = 0; j < count; ++j) t.y.push_back(y_lo + t.dy * j);
  for (double x : xs) {
    std::vector<double> row;
    for (double y : t.y) row.push_back(conditional_pdf(y, x, spec, panels));
    t.p.push_back(std::move(row));
  }
  return t;
}

inline double mutual_information(const Table& t, const std::vector<double>& pmf) {
  double total = 0.0;
  for (std::size_t j = 0; j < t.y.size(); ++j) {
    double py = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) py += pmf[k] * t.p[k][j];
    if (py <= 0.0) continue;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
      const double w = t.p[k][j];
      if (pmf[k] > 0.0 && w > 0.0) total += pmf[k] * w * std::log2(w / py);
    }
  }
  return total * t.dy;
}

// Exhaustive search over the probability simplex on up to four points: a
// lattice of resolution 1/steps, then repeated lattice zooms around the best
// feasible pmf. `feasible` screens each candidate.
inline double simplex_max(std::size_t n, const std::function<double(const std::vector<double>&)>& f,
                          const std::function<bool(const std::vector<double>&)>& feasible,
                          int steps = 40, int zooms = 4000) {
  double best = -1.0;
  std::vector<double> best_p;
  std::vector<double> p(n);
  // coarse lattice over all compositions of `steps`
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
    if (i + 1 == n) {
      p[i] = static_cast<double>(left) / steps;
      if (feasible(p)) {
        const double v = f(p);
        if (v > best) {
          best = v;
          best_p = p;
        }
      }
      return;
    }
    for (int c = 0; c <= left; ++c) {
      p[i] = static_cast<double>(c) / steps;
      rec(i + 1, left - c);
    }
  };
  rec(0, steps);
  if (best_p.empty()) return -1.0;
  // zoom: perturb pairs of coordinates by +-delta, shrinking delta
  double delta = 1.0 / steps;
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int z = 0; z < zooms; ++z) {
    bool improved = false;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b) continue;
        for (double frac : {1.0, 0.5, 0.25}) {
          auto q = best_p;
          const double move = std::min(delta * frac, q[b]);
          if (move <= 0.0) continue;
          q[a] += move;
          q[b] -= move;
          if (!feasible(q)) continue;
          const double v = f(q);
          if (v > best) {
            best = v;
            best_p = q;
            improved = true;
          }
        }
      }
    }
    // random sum-zero directions reach faces where two constraints bind
    for (int trial = 0; trial < 64; ++trial) {
      std::vector<double> d(n);
      double mean = 0.0;
      for (auto& v : d) {
        v = unit(rng) - 0.5;
        mean += v;
      }
      mean /= static_cast<double>(n);
      auto q = best_p;
      bool ok = true;
      for (std::size_t i = 0; i < n; ++i) {
        q[i] += delta * (d[i] - mean);
        if (q[i] < 0.0) ok = false;
      }
      if (!ok || !feasible(q)) continue;
      const double v = f(q);
      if (v > best) {
        best = v;
        best_p = q;
        improved = true;
      }
    }
    if (!improved) {
      delta *= 0.5;
      if (delta < 1e-9) break;
    }
  }
  return best;
}

}  // namespace oracle
