#pragma once

// Physical link model: geometric path loss, lognormal turbulence fading, the
// nonlinear photovoltaic harvesting law and the information-channel
// transition density p(y|x).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include "slipt/error.hpp"
#include "slipt/gauss_hermite.hpp"

namespace slipt {

enum class ChannelModel { lognormal, gaussian };

inline std::string to_string(ChannelModel model) {
  return model == ChannelModel::lognormal ? "lognormal" : "gaussian";
}

inline ChannelModel channel_model_from_string(const std::string& name) {
  if (name == "lognormal") return ChannelModel::lognormal;
  if (name == "gaussian") return ChannelModel::gaussian;
  throw ConfigError("unknown channel model '" + name +
                    "' (expected lognormal or gaussian)");
}

/// Transmitter-receiver geometry of one optical link. Angles in radians,
/// lengths in metres, area in square metres.
struct ChannelGeometry {
  double eta_t = 1.0;
  double eta_r = 1.0;
  double c_lambda = 0.0;
  double l = 1.0;
  double theta_0 = 0.1;
  double theta_rx = 0.0;
  double area_rx = 1e-3;

  void validate() const {
    if (!(eta_t > 0.0 && eta_t <= 1.0)) throw DomainError("eta_t must lie in (0, 1]");
    if (!(eta_r > 0.0 && eta_r <= 1.0)) throw DomainError("eta_r must lie in (0, 1]");
    if (!(c_lambda >= 0.0)) throw DomainError("c_lambda must be >= 0");
    if (!(l > 0.0)) throw DomainError("l must be > 0");
    if (theta_0 == 0.0) throw GeometryError("beam divergence theta_0 is zero");
    if (!(theta_0 > 0.0 && theta_0 < std::numbers::pi / 2)) {
      throw DomainError("theta_0 must lie in (0, pi/2)");
    }
    if (!(theta_rx >= 0.0 && theta_rx < std::numbers::pi / 2)) {
      throw DomainError("theta_rx must lie in [0, pi/2)");
    }
    if (!(area_rx > 0.0)) throw DomainError("area_rx must be > 0");
  }
};

/// Geometric gain of a directed line-of-sight optical link with Beer-Lambert
/// extinction along the slanted path.
inline double path_loss(const ChannelGeometry& g) {
  g.validate();
  const double cos_rx = std::cos(g.theta_rx);
  const double spread = 2.0 * std::numbers::pi * g.l * g.l * (1.0 - std::cos(g.theta_0));
  if (!(spread > 0.0)) throw GeometryError("beam solid angle underflows to zero");
  return g.eta_t * g.eta_r * std::exp(-g.c_lambda * g.l / cos_rx) * g.area_rx * cos_rx /
         spread;
}

/// Log-amplitude statistics of the turbulence fading h = exp(2 X), with
/// X ~ N(mu_Xl, sigma2_Xl).
struct FadingParams {
  double sigma2_Xl = 0.1;
  double mu_Xl = -0.1;

  /// Unit-mean fading: mu = -sigma^2.
  static FadingParams normalized(double sigma2) { return {sigma2, -sigma2}; }
  bool is_normalized() const { return mu_Xl == -sigma2_Xl; }

  // ln h ~ N(log_mean, log_stddev^2)
  double log_mean() const { return 2.0 * mu_Xl; }
  double log_stddev() const { return 2.0 * std::sqrt(sigma2_Xl); }
  /// E[h^n] = exp(2 n mu + 2 n^2 sigma^2).
  double moment(double n) const { return std::exp(2.0 * n * mu_Xl + 2.0 * n * n * sigma2_Xl); }

  void validate() const {
    if (!(sigma2_Xl > 0.0)) throw DomainError("sigma2_Xl must be > 0");
    if (!std::isfinite(mu_Xl)) throw DomainError("mu_Xl must be finite");
  }
};

/// Transmitter, detector and harvester constants (SI units).
struct DeviceParams {
  double a = 20.0;          // W/A
  double R_P = 0.5;         // A/W
  double R_E = 0.75;        // A/W
  double sigma2_g = 1e-12;  // A^2
  double f_E = 0.5;
  double v_t = 0.025;  // V
  double T = 1.0;      // s
  double I_0 = 1e-9;   // A

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be > 0");
    };
    positive(a, "a");
    positive(R_P, "R_P");
    positive(R_E, "R_E");
    positive(sigma2_g, "sigma2_g");
    positive(v_t, "v_t");
    positive(T, "T");
    positive(I_0, "I_0");
    if (!(f_E > 0.0 && f_E <= 1.0)) throw DomainError("f_E must lie in (0, 1]");
  }
};

/// Full link description. The trailing four members are derived from the
/// primitive ones by refresh_derived().
struct ChannelSpec {
  ChannelGeometry geometry_pd;
  ChannelGeometry geometry_pv;
  FadingParams fading;
  DeviceParams devices;
  ChannelModel model = ChannelModel::lognormal;

  double h1l = 0.0;  // information-link path loss
  double h2l = 0.0;  // harvesting-link path loss
  double b = 0.0;    // J
  double c = 0.0;    // 1 / input unit

  /// Mean received information amplitude per unit input, a R_P h1l.
  double signal_gain() const { return devices.a * devices.R_P * h1l; }
  double noise_sigma() const { return std::sqrt(devices.sigma2_g); }
};

inline void refresh_derived(ChannelSpec& spec) {
  spec.geometry_pd.validate();
  spec.geometry_pv.validate();
  spec.fading.validate();
  spec.devices.validate();
  spec.h1l = path_loss(spec.geometry_pd);
  spec.h2l = path_loss(spec.geometry_pv);
  const auto& d = spec.devices;
  spec.b = d.f_E * d.v_t * d.T * d.a * d.R_E * spec.h2l;
  spec.c = d.a * d.R_E * spec.h2l / d.I_0;
  if (!(spec.h1l > 0.0 && spec.h2l > 0.0 && spec.b > 0.0 && spec.c > 0.0)) {
    throw GeometryError("derived link constants must be positive");
  }
}

inline ChannelSpec make_channel_spec(const ChannelGeometry& pd, const ChannelGeometry& pv,
                                     const FadingParams& fading, const DeviceParams& devices,
                                     ChannelModel model = ChannelModel::lognormal) {
  ChannelSpec spec{pd, pv, fading, devices, model};
  refresh_derived(spec);
  return spec;
}

/// Reference link used by the scenario drivers: 10 m vertical link, 10 degree
/// beam, 1 mm^2-scale photodiode and a 0.01 m^2 panel tilted by 5 degrees,
/// unit-mean lognormal fading with log-amplitude variance 0.1.
inline ChannelSpec baseline_channel(ChannelModel model = ChannelModel::lognormal) {
  constexpr double deg = std::numbers::pi / 180.0;
  ChannelGeometry pd{1.0, 1.0, 0.03, 10.0, 10.0 * deg, 0.0, 0.001};
  ChannelGeometry pv = pd;
  pv.theta_rx = 5.0 * deg;
  pv.area_rx = 0.01;
  return make_channel_spec(pd, pv, FadingParams::normalized(0.1), DeviceParams{}, model);
}

/// Density of the fading gain h.
inline double fading_pdf(double h, const FadingParams& fading) {
  if (!(h > 0.0)) throw DomainError("fading_pdf: h must be > 0");
  const double s2 = fading.sigma2_Xl;
  const double z = std::log(h) - 2.0 * fading.mu_Xl;
  return std::exp(-z * z / (8.0 * s2)) / (2.0 * h * std::sqrt(2.0 * std::numbers::pi * s2));
}

/// `count` fading gains drawn from a generator seeded with `seed`. Each call
/// owns its generator, so equal seeds give equal sequences.
inline std::vector<double> fading_sample(const FadingParams& fading, std::size_t count,
                                         std::uint64_t seed) {
  fading.validate();
  if (count == 0) throw DomainError("fading_sample: count must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double sd = std::sqrt(fading.sigma2_Xl);
  std::vector<double> out(count);
  for (double& h : out) h = std::exp(2.0 * (fading.mu_Xl + sd * unit(rng)));
  return out;
}

/// Harvested energy per symbol for drive level x: b x ln(1 + c x).
inline double eh_energy(double x, const ChannelSpec& spec) {
  if (!(x >= 0.0)) throw DomainError("eh_energy: x must be >= 0");
  return spec.b * x * std::log1p(spec.c * x);
}

inline double normal_pdf(double v, double sigma) {
  const double z = v / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

/// Conditional density without fading: N(y; a R_P h1l x, sigma_g^2).
inline double gaussian_conditional_pdf(double y, double x, const ChannelSpec& spec) {
  if (!(x >= 0.0)) throw DomainError("gaussian_conditional_pdf: x must be >= 0");
  return normal_pdf(y - spec.signal_gain() * x, spec.noise_sigma());
}

struct QuadratureConfig {
  std::size_t nodes = 64;      // initial Gauss-Hermite size
  std::size_t min_nodes = 8;   // smaller initial sizes are rejected
  std::size_t max_nodes = 512; // doubling stops here
  double tolerance = 1e-8;     // relative agreement of successive rules
};

namespace detail {

inline double gh_fading_average(double y, double m, double sigma, const FadingParams& f,
                                std::size_t n) {
  const auto& rule = gauss_hermite(n);
  const double mean = f.log_mean();
  const double sd = f.log_stddev();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double k = mean + sd * rule.nodes[i];
    acc += rule.weights[i] * normal_pdf(y - m * std::exp(k), sigma);
  }
  return acc;
}

// Composite 16-point Gauss-Legendre in the log-fading variable. Panels are
// one fading standard deviation wide, except inside the window of +-12 ridge
// widths around the noise ridge k* = ln(y / m), whose width in k is
// sigma / y; there the panels shrink to 1.5 ridge widths.
inline double panel_fading_average(double y, double m, double sigma, const FadingParams& f) {
  using Rule = boost::math::quadrature::gauss<double, 16>;
  const double mean = f.log_mean();
  const double sd = f.log_stddev();
  auto integrand = [&](double k) {
    const double z = (k - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi)) *
           normal_pdf(y - m * std::exp(k), sigma);
  };
  auto integrate = [&](double a, double b, double max_width) {
    if (!(b > a)) return 0.0;
    const auto panels = static_cast<std::size_t>(std::ceil((b - a) / max_width));
    const double h = (b - a) / static_cast<double>(panels);
    double total = 0.0;
    for (std::size_t i = 0; i < panels; ++i) {
      const double pa = a + h * static_cast<double>(i);
      total += Rule::integrate(integrand, pa, pa + h);
    }
    return total;
  };
  const double lo = mean - 9.0 * sd;
  const double hi = mean + 9.0 * sd;
  if (!(y > 0.0)) return integrate(lo, hi, sd);
  const double ridge = std::log(y / m);
  const double width = sigma / y;
  const double w_lo = std::clamp(ridge - 12.0 * width, lo, hi);
  const double w_hi = std::clamp(ridge + 12.0 * width, lo, hi);
  return integrate(lo, w_lo, sd) + integrate(w_lo, w_hi, std::min(sd, 1.5 * width)) +
         integrate(w_hi, hi, sd);
}

}  // namespace detail

/// p(y|x) for the lognormal-fading channel: the Gaussian noise density
/// averaged over the log-fading variable k ~ N(2 mu, 4 sigma^2). Gauss-Hermite
/// in k with node doubling; when the noise ridge is much narrower than the
/// fading spread the rule cannot resolve it, and composite Gauss-Legendre
/// panels refined around the ridge are used instead.
inline double conditional_pdf_quadrature(double y, double x, const ChannelSpec& spec,
                                         const QuadratureConfig& cfg = {}) {
  if (cfg.nodes < cfg.min_nodes) {
    throw ConfigError("quadrature node count " + std::to_string(cfg.nodes) +
                      " below configured minimum " + std::to_string(cfg.min_nodes));
  }
  if (!(x >= 0.0)) throw DomainError("conditional_pdf_quadrature: x must be >= 0");
  const double sigma = spec.noise_sigma();
  const double m = spec.signal_gain() * x;
  if (m == 0.0) return normal_pdf(y, sigma);

  const auto& f = spec.fading;
  const double ridge_width = y > 0.0 ? sigma / y : std::numeric_limits<double>::infinity();
  if (ridge_width >= 0.5 * f.log_stddev()) {
    const double floor = 1e-12 * normal_pdf(0.0, sigma);
    std::size_t n = cfg.nodes;
    double prev = detail::gh_fading_average(y, m, sigma, f, n);
    while (2 * n <= cfg.max_nodes) {
      n *= 2;
      const double cur = detail::gh_fading_average(y, m, sigma, f, n);
      if (std::abs(cur - prev) <= cfg.tolerance * std::abs(cur) + floor) return cur;
      prev = cur;
    }
  }
  return detail::panel_fading_average(y, m, sigma, f);
}

/// Partial sum of the Hermite expansion of p(y|x) together with the magnitude
/// of its last included term. Noise is scaled out (y / sigma_g and
/// a R_P h1l x / sigma_g), so the series applies at any sigma_g. The series is
/// asymptotic: for large sigma2_Xl * n the terms eventually grow.
struct HermiteSum {
  double value = 0.0;
  double last_term = 0.0;
  std::size_t terms = 0;
};

inline HermiteSum conditional_pdf_hermite(double y, double x, const ChannelSpec& spec,
                                          std::size_t n_terms) {
  if (!(x >= 0.0)) throw DomainError("conditional_pdf_hermite: x must be >= 0");
  const double sigma = spec.noise_sigma();
  const double z = y / sigma;
  const double t = spec.signal_gain() * x / sigma;
  const double base = normal_pdf(z, 1.0) / sigma;
  HermiteSum out;
  double he_prev = 0.0;  // He_{n-1}
  double he = 1.0;       // He_n
  for (std::size_t n = 0; n < n_terms; ++n) {
    if (n > 0) {
      const double next = z * he - static_cast<double>(n - 1) * he_prev;
      he_prev = he;
      he = next;
    }
    double coeff = 1.0;
    if (n > 0) {
      if (t == 0.0) {
        coeff = 0.0;
      } else {
        const double nd = static_cast<double>(n);
        coeff = std::exp(nd * std::log(t) + 2.0 * nd * spec.fading.mu_Xl +
                         2.0 * nd * nd * spec.fading.sigma2_Xl - std::lgamma(nd + 1.0));
      }
    }
    const double term = base * he * coeff;
    out.value += term;
    out.last_term = std::abs(term);
    out.terms = n + 1;
  }
  return out;
}

/// p(y|x) under the configured channel model.
inline double conditional_pdf(double y, double x, const ChannelSpec& spec,
                              const QuadratureConfig& cfg = {}) {
  return spec.model == ChannelModel::gaussian ? gaussian_conditional_pdf(y, x, spec)
                                              : conditional_pdf_quadrature(y, x, spec, cfg);
}

/// Upper fading gain used to bound the output domain: the 1 - 1e-8 quantile
/// (exactly 1 without fading).
inline double fading_gain_cap(const ChannelSpec& spec) {
  if (spec.model == ChannelModel::gaussian) return 1.0;
  static const double z = boost::math::quantile(boost::math::normal(), 1.0 - 1e-8);
  return std::exp(spec.fading.log_mean() + spec.fading.log_stddev() * z);
}

struct OutputRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// Output interval holding all but a negligible part of p(y|x) for
/// 0 <= x <= x_max.
inline OutputRange output_range(const ChannelSpec& spec, double x_max) {
  const double sigma = spec.noise_sigma();
  return {-10.0 * sigma, spec.signal_gain() * x_max * fading_gain_cap(spec) + 10.0 * sigma};
}

}  // namespace slipt
