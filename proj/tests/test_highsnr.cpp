#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "slipt/highsnr.hpp"

using namespace slipt;

namespace {

ChannelSpec overlap_spec(double snr, ChannelModel model = ChannelModel::lognormal) {
  auto spec = baseline_channel(model);
  const double sigma = spec.signal_gain() / snr;
  spec.devices.sigma2_g = sigma * sigma;
  refresh_derived(spec);
  return spec;
}

double mean_of(const InputDistribution& d) {
  double m = 0;
  for (std::size_t k = 0; k < d.pmf.size(); ++k) m += d.pmf[k] * d.grid.points[k];
  return m;
}

// plain bisection on lambda1 for a target mean, lambda2 = 0
double bisect_lambda1(double target, const InputGrid& g, const ChannelSpec& spec) {
  double lo = -1e4, hi = 1e4;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mean_of(highsnr_pmf(mid, 0.0, g, spec).dist) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(HighSnrPmf, ZeroMultipliersGiveUniform) {
  const InputGrid g(1.0, 17);
  const auto s = highsnr_pmf(0.0, 0.0, g, baseline_channel());
  for (double p : s.dist.pmf) EXPECT_NEAR(p, 1.0 / 17, 1e-15);
  EXPECT_NEAR(s.Z, 17.0, 1e-12);
}

TEST(HighSnrPmf, PositiveLambda1IsStrictlyDecreasing) {
  const InputGrid g(2.0, 31);
  const auto s = highsnr_pmf(1.5, 0.0, g, baseline_channel());
  for (std::size_t k = 1; k < g.N; ++k) EXPECT_LT(s.dist.pmf[k], s.dist.pmf[k - 1]);
}

TEST(HighSnrPmf, MatchesTheClosedFormAndReevaluatesExactly) {
  const auto spec = baseline_channel();
  const InputGrid g(3.0, 25);
  const double l1 = 0.7, l2 = -150.0;
  const auto s = highsnr_pmf(l1, l2, g, spec);
  double sum = 0;
  for (std::size_t k = 0; k < g.N; ++k) {
    const double x = g.points[k];
    const double ref = std::exp(-l1 * x - l2 * spec.b * x * std::log1p(spec.c * x)) / s.Z;
    EXPECT_NEAR(s.dist.pmf[k], ref, 1e-12 * ref);
    sum += s.dist.pmf[k];
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  const auto again = highsnr_pmf(s.multipliers.lambda1, s.multipliers.lambda2, g, spec);
  EXPECT_EQ(again.dist.pmf, s.dist.pmf);
  EXPECT_EQ(again.log_Z, s.log_Z);
}

TEST(HighSnrPmf, LogConcaveForNonNegativeMultipliers) {
  const auto spec = baseline_channel();
  const InputGrid g(5.0, 41);
  const auto s = highsnr_pmf(0.3, 200.0, g, spec);
  for (std::size_t k = 2; k < g.N; ++k) {
    const double d1 = std::log(s.dist.pmf[k - 1]) - std::log(s.dist.pmf[k - 2]);
    const double d2 = std::log(s.dist.pmf[k]) - std::log(s.dist.pmf[k - 1]);
    EXPECT_LE(d2, d1 + 1e-12);
  }
}

TEST(HighSnrPmf, LargeExponentsDoNotOverflow) {
  const InputGrid g(1.0, 11);
  const auto s = highsnr_pmf(-5000.0, 0.0, g, baseline_channel());
  EXPECT_NEAR(s.dist.pmf.back(), 1.0, 1e-12);
  EXPECT_TRUE(std::isfinite(s.log_Z));
  EXPECT_NEAR(s.log_Z, 5000.0, 1e-9);
  EXPECT_THROW(highsnr_pmf(std::nan(""), 0.0, g, baseline_channel()), DomainError);
}

TEST(Calibration, MeanOnlyBranchMatchesBisection) {
  const auto spec = baseline_channel();
  const InputGrid g(1.0, 51);
  const ConstraintSet c{1.0, 0.3, 0.0};
  const auto s = calibrate_multipliers(c, g, spec);
  EXPECT_EQ(s.multipliers.lambda2, 0.0);
  EXPECT_NEAR(mean_of(s.dist), 0.3, 1e-9);
  EXPECT_NEAR(s.multipliers.lambda1, bisect_lambda1(0.3, g, spec), 1e-6);
}

TEST(Calibration, UniformMomentsGiveZeroMultipliers) {
  const auto spec = baseline_channel();
  const InputGrid g(1.0, 21);
  const auto u = InputDistribution::uniform(g);
  const auto s = calibrate_multipliers({1.0, avg_power(u), avg_eh(u, spec)}, g, spec);
  EXPECT_NEAR(s.multipliers.lambda1, 0.0, 1e-6);
  EXPECT_NEAR(s.multipliers.lambda2, 0.0, 1e-6);
}

TEST(Calibration, BindingEnergyHitsBothTargets) {
  const auto spec = baseline_channel();
  const InputGrid g(1.0, 101);
  const double e_max = feasibility_check({1.0, 0.3, 0.0}, g, spec).max_eh;
  // the mean-only law already reaches about 0.947 of the bound
  const ConstraintSet c{1.0, 0.3, 0.99 * e_max};
  const auto s = calibrate_multipliers(c, g, spec);
  EXPECT_NEAR(avg_power(s.dist), c.epsilon, 1e-8 * c.A);
  EXPECT_NEAR(avg_eh(s.dist, spec), c.E_th, 1e-8 * eh_energy(c.A, spec));
  EXPECT_LT(s.multipliers.lambda2, 0.0);
}

TEST(Calibration, AmplitudeConstraintSlackWhenEpsilonExceedsPeak) {
  const auto spec = baseline_channel();
  const InputGrid g(1.0, 101);
  const auto s = calibrate_multipliers({1.0, 1.0, 1e-3}, g, spec);
  EXPECT_EQ(s.multipliers.lambda1, 0.0);
  EXPECT_GE(avg_eh(s.dist, spec), 1e-3 - 1e-8 * eh_energy(1.0, spec));
}

TEST(Calibration, InfeasibleThrows) {
  const auto spec = baseline_channel();
  const InputGrid g(1.0, 11);
  EXPECT_THROW(calibrate_multipliers({1.0, 0.2, 0.5 * eh_energy(1.0, spec)}, g, spec),
               InfeasibleError);
}

TEST(CompareToSolver, IdenticalInputsGiveZeros) {
  const auto spec = overlap_spec(10.0);
  const InputGrid g(1.0, 21);
  const auto hs = highsnr_pmf(1.0, 0.0, g, spec);
  SolveReport r;
  r.dist = hs.dist;
  const auto cmp = compare_to_solver(hs, r, spec);
  EXPECT_EQ(cmp.total_variation, 0.0);
  EXPECT_EQ(cmp.mi_gap_bits, 0.0);
  EXPECT_EQ(cmp.power_delta, 0.0);
  EXPECT_EQ(cmp.eh_delta, 0.0);
}

TEST(CompareToSolver, UniformAgainstPointMass) {
  const auto spec = overlap_spec(10.0);
  const InputGrid g(1.0, 2);
  const auto hs = highsnr_pmf(0.0, 0.0, g, spec);
  SolveReport r;
  r.dist = InputDistribution::point_mass(g, 1);
  const auto cmp = compare_to_solver(hs, r, spec);
  EXPECT_DOUBLE_EQ(cmp.total_variation, 0.5);
  EXPECT_NEAR(cmp.mi_solver_bits, 0.0, 1e-6);
  EXPECT_DOUBLE_EQ(cmp.power_delta, -0.5);

  r.dist = InputDistribution::uniform(InputGrid(1.0, 3));
  EXPECT_THROW(compare_to_solver(hs, r, spec), ShapeError);
}

TEST(CompareToSolver, DistanceShrinksAsNoiseFalls) {
  // without fading the grid becomes noiseless and the exponential family is
  // the entropy maximizer; lognormal fading keeps a floor instead
  const InputGrid g(1.0, 41);
  const ConstraintSet c{1.0, 0.3, 0.0};
  double previous = 1.0;
  for (double snr : {3.0, 10.0, 30.0, 100.0, 300.0}) {
    const auto spec = overlap_spec(snr, ChannelModel::gaussian);
    const auto hs = calibrate_multipliers(c, g, spec);
    const auto r = solve_capacity(c, g, spec);
    const double tv = compare_to_solver(hs, r, spec).total_variation;
    EXPECT_LE(tv, previous + 1e-9) << "snr=" << snr;
    previous = tv;
  }
  EXPECT_LT(previous, 1e-3);
}
