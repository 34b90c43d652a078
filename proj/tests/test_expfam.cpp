#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "hafi/expfam.hpp"
#include "hafi/stats.hpp"

using namespace hafi;

namespace {

ExpFamDensity standard_gaussian() { return fit_coefficients(2, {-10.0, 10.0}, 0.0, {1.0}); }

// Scaled Beta(alpha, beta) on [0, width]: mean, variance, third central moment.
std::array<double, 3> beta_moments(double alpha, double beta, double width) {
  const double s = alpha + beta;
  const double mean = alpha / s;
  const double var = alpha * beta / (s * s * (s + 1.0));
  const double skew = 2.0 * (beta - alpha) * std::sqrt(s + 1.0) / ((s + 2.0) * std::sqrt(alpha * beta));
  return {width * mean, width * width * var, skew * std::pow(width * width * var, 1.5)};
}

}  // namespace

TEST(ExpFamFit, UniformIsMaximumEntropy) {
  const auto d = fit_coefficients(3, {0.0, 1.0}, 0.5, {1.0 / 12.0, 0.0});
  for (double c : d.coeffs) EXPECT_NEAR(c, 0.0, 1e-12);
}

TEST(ExpFamFit, GaussianOnWideSupport) {
  const auto d = standard_gaussian();
  EXPECT_NEAR(d.coeffs[2], -0.5, 1e-6);
  EXPECT_NEAR(d.coeffs[1], 0.0, 1e-8);
  EXPECT_NEAR(d.coeffs[0], -0.5 * std::log(2.0 * std::numbers::pi) - 0.5, 1e-6);
  EXPECT_NEAR(d.coeffs[0], -1.41894, 1e-5);
}

TEST(ExpFamFit, RoundTripOnRandomFeasibleMoments) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> shape(1.2, 6.0);
  for (int rep = 0; rep < 25; ++rep) {
    const auto [m1, m2, m3] = beta_moments(shape(rng), shape(rng), 5.0);
    const auto d = fit_coefficients(3, {0.0, 5.0}, m1, {m2, m3});
    const auto mom = moments_of(d, 3);
    EXPECT_NEAR(mom.mass, 1.0, 1e-8);
    EXPECT_NEAR(mom.mean, m1, 1e-8);
    EXPECT_NEAR(mom[2], m2, 1e-8);
    EXPECT_NEAR(mom[3], m3, 1e-8);
    EXPECT_LE(d.residual, 1e-10);
  }
}

TEST(ExpFamFit, InvariantToRecentering) {
  const double shift = 3.25;
  const auto a = fit_coefficients(3, {0.0, 5.0}, 1.7, {0.9, 0.4});
  const auto b = fit_coefficients(3, {shift, 5.0 + shift}, 1.7 + shift, {0.9, 0.4});
  for (double x = 0.05; x < 5.0; x += 0.37) EXPECT_NEAR(density_at(a, x), density_at(b, x + shift), 1e-8);
}

TEST(ExpFamFit, OrderOneAndFour) {
  const auto d1 = fit_coefficients(1, {0.0, 2.0}, 0.6, {});
  EXPECT_NEAR(moments_of(d1, 1).mean, 0.6, 1e-9);
  EXPECT_LT(d1.coeffs[1], 0.0);
  const auto d4 = fit_coefficients(4, {-10.0, 10.0}, 0.0, {1.0, 0.0, 3.0});
  EXPECT_NEAR(d4.coeffs[2], -0.5, 1e-5);
  EXPECT_NEAR(d4.coeffs[4], 0.0, 1e-6);
}

TEST(ExpFamFit, RejectsInfeasibleMoments) {
  // Variance above (m1 - lo)(hi - m1).
  EXPECT_THROW(fit_coefficients(2, {0.0, 1.0}, 0.5, {0.3}), InfeasibleMoments);
  EXPECT_THROW(fit_coefficients(2, {0.0, 1.0}, 1.5, {0.01}), InfeasibleMoments);
  EXPECT_THROW(fit_coefficients(2, {0.0, 1.0}, 0.5, {-0.01}), InfeasibleMoments);
  EXPECT_THROW(fit_coefficients(4, {-5.0, 5.0}, 0.0, {1.0, 0.0, 0.5}), InfeasibleMoments);
  EXPECT_THROW(fit_coefficients(3, {0.0, 1.0}, 0.5, {0.01}), InvalidInput);
  EXPECT_THROW(fit_coefficients(0, {0.0, 1.0}, 0.5, {}), InvalidInput);
}

TEST(ExpFamFit, NonConvergenceCarriesResidual) {
  try {
    fit_coefficients(3, {0.0, 5.0}, 0.8, {0.5, 0.6}, {}, {1e-10, 1});
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_GT(e.residual(), 1e-10);
  }
}

TEST(ExpFamDensityAt, UniformInsideAndOutside) {
  const auto d = fit_coefficients(3, {0.0, 1.0}, 0.5, {1.0 / 12.0, 0.0});
  EXPECT_NEAR(density_at(d, 0.3), 1.0, 1e-12);
  EXPECT_EQ(density_at(d, -0.1), 0.0);
  EXPECT_EQ(density_at(d, 1.1), 0.0);
}

TEST(ExpFamDensityAt, GaussianPeakAndScaling) {
  auto d = standard_gaussian();
  EXPECT_NEAR(density_at(d, 0.0), stats::normal_pdf(0.0), 1e-7);
  EXPECT_NEAR(density_at(d, 0.0), 0.39894, 1e-5);
  const double before = density_at(d, 0.7);
  d.coeffs[0] += std::log(2.0);
  EXPECT_NEAR(density_at(d, 0.7), 2.0 * before, 1e-14);
}

TEST(ExpFamMoments, UniformAnalytic) {
  const auto d = fit_coefficients(3, {0.0, 1.0}, 0.5, {1.0 / 12.0, 0.0});
  const auto m = moments_of(d, 4);
  EXPECT_NEAR(m[2], 1.0 / 12.0, 1e-12);
  EXPECT_NEAR(m[4], 1.0 / 80.0, 1e-12);
}

TEST(ExpFamMoments, GaussianKurtosis) {
  const auto m = moments_of(standard_gaussian(), 4);
  EXPECT_NEAR(m[4], 3.0 * m[2] * m[2], 1e-8);
}

TEST(ExpFamMoments, NodeDoublingConverged) {
  auto d = fit_coefficients(3, {0.0, 5.0}, 1.4, {0.8, 0.5});
  const auto coarse = moments_of(d, 6);
  d.quad.nodes *= 2;
  const auto fine = moments_of(d, 6);
  EXPECT_LT(std::abs(coarse.mass - fine.mass), 1e-9);
  for (int k = 2; k <= 6; ++k) EXPECT_LT(std::abs(coarse[k] - fine[k]), 1e-9) << "k=" << k;
  auto g = standard_gaussian();
  const auto gc = moments_of(g, 4);
  g.quad.nodes *= 2;
  EXPECT_LT(std::abs(gc[4] - moments_of(g, 4)[4]), 1e-9);
}

TEST(ExpFamCdf, EndpointsAndMonotone) {
  const auto d = fit_coefficients(3, {0.0, 5.0}, 1.4, {0.8, 0.5});
  EXPECT_EQ(cdf_at(d, 5.0), 1.0);
  EXPECT_EQ(cdf_at(d, 0.0), 0.0);
  EXPECT_NEAR(cdf_at(d, 5.0 - 1e-12), 1.0, 1e-9);
  double prev = 0.0;
  for (double a = 0.1; a < 5.0; a += 0.1) {
    const double f = cdf_at(d, a);
    EXPECT_GE(f, prev);
    prev = f;
  }
}

TEST(ExpFamSample, KolmogorovSmirnovAndMean) {
  const auto d = fit_coefficients(3, {0.0, 5.0}, 1.4, {0.8, 0.5});
  const std::size_t n = 10000;
  const auto draws = sample(d, n, 17);
  const double ks = stats::ks_statistic(draws, [&](double a) { return cdf_at(d, a); });
  EXPECT_GT(stats::ks_pvalue(ks, n), 0.01);
  EXPECT_LT(ks, 1.628 / std::sqrt(static_cast<double>(n)));
  EXPECT_LT(std::abs(stats::mean(draws) - 1.4), 4.0 * std::sqrt(0.8 / n));
  EXPECT_EQ(draws, sample(d, n, 17));
}
