#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "slipt/channel.hpp"
#include "slipt/gauss_hermite.hpp"

using namespace slipt;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

ChannelSpec noisy_spec(double sigma2_g, double sigma2_Xl, ChannelModel model) {
  auto spec = baseline_channel(model);
  spec.devices.sigma2_g = sigma2_g;
  spec.fading = FadingParams::normalized(sigma2_Xl);
  refresh_derived(spec);
  return spec;
}

}  // namespace

TEST(PathLoss, ReferenceLinksMatchHandEvaluation) {
  const auto spec = baseline_channel();
  const double h1 = oracle::path_loss(1, 1, 0.03, 10, 10 * kDeg, 0, 0.001);
  const double h2 = oracle::path_loss(1, 1, 0.03, 10, 10 * kDeg, 5 * kDeg, 0.01);
  EXPECT_NEAR(spec.h1l, h1, 1e-15);
  EXPECT_NEAR(spec.h2l, h2, 1e-15);
  EXPECT_NEAR(spec.h1l, 7.76e-5, 0.01e-5);
  EXPECT_NEAR(spec.h2l, 7.72e-4, 0.01e-4);
}

TEST(PathLoss, ClearAirNormalIncidenceIsPureSpreading) {
  ChannelGeometry g{1.0, 1.0, 0.0, 3.0, 0.2, 0.0, 0.05};
  EXPECT_DOUBLE_EQ(path_loss(g), 0.05 / (2 * std::numbers::pi * 9.0 * (1 - std::cos(0.2))));
}

TEST(PathLoss, ZeroDivergenceRejected) {
  ChannelGeometry g{1.0, 1.0, 0.0, 3.0, 0.0, 0.0, 0.05};
  EXPECT_THROW(path_loss(g), GeometryError);
}

TEST(PathLoss, OutOfRangeGeometryRejected) {
  ChannelGeometry g{1.0, 1.0, 0.0, -1.0, 0.2, 0.0, 0.05};
  EXPECT_THROW(g.validate(), DomainError);
}

TEST(Derived, HarvestingConstants) {
  const auto spec = baseline_channel();
  const auto& d = spec.devices;
  EXPECT_DOUBLE_EQ(spec.b, d.f_E * d.v_t * d.T * d.a * d.R_E * spec.h2l);
  EXPECT_DOUBLE_EQ(spec.c, d.a * d.R_E * spec.h2l / d.I_0);
  EXPECT_NEAR(eh_energy(1.0, spec), 2.35513e-3, 1e-8);
  EXPECT_EQ(eh_energy(0.0, spec), 0.0);
}

TEST(Derived, RecomputationIsIdempotent) {
  auto spec = baseline_channel();
  const auto before = spec;
  refresh_derived(spec);
  EXPECT_EQ(spec.h1l, before.h1l);
  EXPECT_EQ(spec.h2l, before.h2l);
  EXPECT_EQ(spec.b, before.b);
  EXPECT_EQ(spec.c, before.c);
}

TEST(Fading, MatchesLognormalLaw) {
  const auto f = FadingParams::normalized(0.1);
  for (double h : {0.05, 0.3, 1.0, 2.5, 7.0}) {
    EXPECT_NEAR(fading_pdf(h, f), oracle::fading_pdf(h, f.mu_Xl, f.sigma2_Xl),
                1e-13 * oracle::fading_pdf(h, f.mu_Xl, f.sigma2_Xl));
  }
}

TEST(Fading, IntegratesToOneWithUnitMean) {
  const auto f = FadingParams::normalized(0.1);
  // substitute h = e^u so both integrands are smooth Gaussians in u
  const double mu = 2 * f.mu_Xl, sd = 2 * std::sqrt(f.sigma2_Xl);
  const double mass = oracle::simpson(
      [&](double u) { return fading_pdf(std::exp(u), f) * std::exp(u); }, mu - 14 * sd,
      mu + 14 * sd, 4000);
  const double mean = oracle::simpson(
      [&](double u) { return fading_pdf(std::exp(u), f) * std::exp(2 * u); }, mu - 14 * sd,
      mu + 14 * sd, 4000);
  EXPECT_NEAR(mass, 1.0, 1e-8);
  EXPECT_NEAR(mean, 1.0, 1e-8);
  EXPECT_NEAR(f.moment(1), 1.0, 1e-15);
}

TEST(Fading, NonPositiveGainRejected) {
  const auto f = FadingParams::normalized(0.1);
  EXPECT_THROW(fading_pdf(0.0, f), DomainError);
  EXPECT_THROW(fading_pdf(-1.0, f), DomainError);
}

TEST(Fading, SamplesAreSeededAndUnitMean) {
  const auto f = FadingParams::normalized(0.1);
  const auto a = fading_sample(f, 200000, 7);
  const auto b = fading_sample(f, 200000, 7);
  EXPECT_EQ(a, b);
  double mean = 0;
  for (double h : a) mean += h;
  mean /= static_cast<double>(a.size());
  // sd of h is sqrt(e^{0.4} - 1) ~ 0.7
  EXPECT_NEAR(mean, 1.0, 5 * 0.7 / std::sqrt(200000.0));
  EXPECT_NE(a, fading_sample(f, 200000, 8));
}

TEST(GaussHermite, IntegratesPolynomialsExactly) {
  const auto& rule = gauss_hermite(20);
  double m0 = 0, m2 = 0, m4 = 0, m6 = 0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = rule.nodes[i];
    m0 += rule.weights[i];
    m2 += rule.weights[i] * x * x;
    m4 += rule.weights[i] * std::pow(x, 4);
    m6 += rule.weights[i] * std::pow(x, 6);
  }
  EXPECT_NEAR(m0, 1.0, 1e-13);
  EXPECT_NEAR(m2, 1.0, 1e-12);
  EXPECT_NEAR(m4, 3.0, 1e-11);
  EXPECT_NEAR(m6, 15.0, 1e-10);
}

TEST(GaussianPdf, MeanAndVariance) {
  const auto spec = baseline_channel(ChannelModel::gaussian);
  const double sigma = spec.noise_sigma();
  const double x = 0.7;
  const double m = spec.signal_gain() * x;
  auto p = [&](double y) { return gaussian_conditional_pdf(y, x, spec); };
  const double lo = m - 14 * sigma, hi = m + 14 * sigma;
  const double mass = oracle::simpson(p, lo, hi, 4000);
  const double mean = oracle::simpson([&](double y) { return y * p(y); }, lo, hi, 4000);
  const double var =
      oracle::simpson([&](double y) { return (y - m) * (y - m) * p(y); }, lo, hi, 4000);
  EXPECT_NEAR(mass, 1.0, 1e-10);
  // tolerances relative to the natural scales of y
  EXPECT_NEAR(mean / sigma, m / sigma, 1e-8);
  EXPECT_NEAR(var / (sigma * sigma), 1.0, 1e-8);
}

TEST(QuadraturePdf, MatchesBruteForceIntegration) {
  const auto spec = baseline_channel();
  const double sigma = spec.noise_sigma();
  const double g = spec.signal_gain();
  for (double x : {0.0, 0.004, 0.05, 0.5, 1.0, 6.0}) {
    for (double t : {-2.0, 0.0, 0.3, 1.0, 1.7, 3.0}) {
      const double y = x == 0.0 ? t * sigma : g * x * t + 0.5 * sigma;
      const double ref = oracle::conditional_pdf(y, x, spec);
      const double got = conditional_pdf_quadrature(y, x, spec);
      EXPECT_NEAR(got, ref, 1e-6 * ref + 1e-12 / sigma) << "x=" << x << " y=" << y;
    }
  }
}

TEST(QuadraturePdf, NormalizedWithCorrectMean) {
  const auto spec = baseline_channel();
  const double sigma = spec.noise_sigma();
  const double g = spec.signal_gain();
  const double A = 1.0;
  const double hcap = fading_gain_cap(spec);
  for (double x : {0.0, A / 2, A}) {
    const double lo = -12 * sigma, hi = g * x * hcap + 12 * sigma;
    auto p = [&](double y) { return conditional_pdf_quadrature(y, x, spec); };
    const int n = static_cast<int>((hi - lo) / (0.1 * sigma)) + 2;
    const double mass = oracle::simpson(p, lo, hi, n);
    const double mean = oracle::simpson([&](double y) { return y * p(y); }, lo, hi, n);
    EXPECT_NEAR(mass, 1.0, 1e-6) << "x=" << x;
    if (x > 0) {
      EXPECT_NEAR(mean, g * x, 1e-4 * g * x) << "x=" << x;
    }
    EXPECT_GE(p(lo), 0.0);
  }
}

TEST(QuadraturePdf, ZeroAmplitudeIsNoise) {
  const auto spec = baseline_channel();
  for (double y : {-3e-6, 0.0, 1e-6}) {
    EXPECT_DOUBLE_EQ(conditional_pdf_quadrature(y, 0.0, spec),
                     normal_pdf(y, spec.noise_sigma()));
  }
}

TEST(QuadraturePdf, VanishingFadingApproachesGaussian) {
  const double sigma = 1e-6;
  double previous = 1.0;
  for (double s2 : {1e-8, 1e-12, 1e-16, 1e-20}) {
    const auto ln = noisy_spec(sigma * sigma, s2, ChannelModel::lognormal);
    const auto ga = noisy_spec(sigma * sigma, s2, ChannelModel::gaussian);
    double worst = 0.0;
    for (double x : {0.1, 0.5, 1.0}) {
      const double m = ga.signal_gain() * x;
      for (double z = -6; z <= 6; z += 0.25) {
        const double y = m + z * sigma;
        const double ref = gaussian_conditional_pdf(y, x, ga);
        worst = std::max(worst, std::abs(conditional_pdf_quadrature(y, x, ln) - ref) / ref);
      }
    }
    EXPECT_LE(worst, previous * 1.0001);
    previous = worst;
    if (s2 == 1e-20) {
      EXPECT_LE(worst, 1e-6);
    }
  }
}

TEST(QuadraturePdf, RejectsBadConfiguration) {
  const auto spec = baseline_channel();
  QuadratureConfig cfg;
  cfg.nodes = 4;
  EXPECT_THROW(conditional_pdf_quadrature(0.0, 1.0, spec, cfg), ConfigError);
  EXPECT_THROW(conditional_pdf_quadrature(0.0, -1.0, spec), DomainError);
}

TEST(HermiteSeries, MatchesQuadratureInSmallRegime) {
  // unit noise, sigma2_Xl = 0.01, gain * x <= 0.1, |y| <= 3
  const auto spec = noisy_spec(1.0, 0.01, ChannelModel::lognormal);
  const double g = spec.signal_gain();
  for (double gx : {0.01, 0.05, 0.1}) {
    const double x = gx / g;
    for (double y = -3.0; y <= 3.0; y += 0.5) {
      const auto h = conditional_pdf_hermite(y, x, spec, 30);
      const double q = conditional_pdf_quadrature(y, x, spec);
      EXPECT_NEAR(h.value, q, 1e-4 * q) << "gx=" << gx << " y=" << y;
      EXPECT_LT(h.last_term, 1e-12 * q);
    }
  }
}

TEST(HermiteSeries, ZeroAmplitudeKeepsOnlyFirstTerm) {
  const auto spec = noisy_spec(1.0, 0.01, ChannelModel::lognormal);
  EXPECT_DOUBLE_EQ(conditional_pdf_hermite(0.7, 0.0, spec, 10).value, normal_pdf(0.7, 1.0));
}

TEST(HermiteSeries, LargeSignalToNoiseDiverges) {
  // the reference link has gain / sigma ~ 776 per unit amplitude
  const auto spec = baseline_channel();
  const auto h = conditional_pdf_hermite(0.0, 1.0, spec, 31);
  EXPECT_GT(h.last_term, 1e6 * normal_pdf(0.0, spec.noise_sigma()));
}

TEST(OutputRange, CoversFadingTail) {
  const auto spec = baseline_channel();
  const auto r = output_range(spec, 2.0);
  EXPECT_LT(r.lo, -9 * spec.noise_sigma());
  EXPECT_GT(r.hi, spec.signal_gain() * 2.0 * fading_gain_cap(spec));
  EXPECT_GT(fading_gain_cap(spec), 1.0);
}

TEST(Model, NamesRoundTrip) {
  EXPECT_EQ(channel_model_from_string("lognormal"), ChannelModel::lognormal);
  EXPECT_EQ(channel_model_from_string("gaussian"), ChannelModel::gaussian);
  EXPECT_EQ(to_string(ChannelModel::gaussian), "gaussian");
  EXPECT_THROW(channel_model_from_string("rician"), ConfigError);
}
