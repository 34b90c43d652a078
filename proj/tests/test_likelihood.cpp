#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "hafi/likelihood.hpp"
#include "hafi/models/simulate.hpp"
#include "hafi/models/toy.hpp"
#include "test_support.hpp"

using namespace hafi;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd toy_theta(const LinearGaussianToy& toy) { return toy.parameters().full_values(); }

// Dense joint Gaussian of (x_1..x_T, y_{t,i}) for the toy.
double dense_toy_joint(const ToyParams& p, const Eigen::MatrixXd& x, const MicroDataset& micro) {
  const int T = static_cast<int>(x.rows());
  std::vector<int> time_of;  // period of each stacked entry
  std::vector<double> value;
  std::vector<bool> is_micro;
  for (int t = 1; t <= T; ++t) {
    time_of.push_back(t);
    value.push_back(x(t - 1, 0));
    is_micro.push_back(false);
  }
  for (const auto& b : micro.blocks)
    for (std::size_t i = 0; i < b.size(); ++i) {
      time_of.push_back(b.t);
      value.push_back(b.y(static_cast<Eigen::Index>(i), 0));
      is_micro.push_back(true);
    }
  const std::size_t n = value.size();
  Eigen::MatrixXd cov(n, n);
  const double v0 = p.sigma_zeta * p.sigma_zeta / (1.0 - p.rho * p.rho);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      cov(a, b) = v0 * std::pow(p.rho, std::abs(time_of[a] - time_of[b]));
      if (a == b) cov(a, b) += is_micro[a] ? p.sigma_u * p.sigma_u : p.sigma_e * p.sigma_e;
    }
  return oracle::dense_gaussian_logpdf(Eigen::Map<Eigen::VectorXd>(value.data(), static_cast<Eigen::Index>(n)),
                                       Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), cov);
}

}  // namespace

TEST(LogMeanExp, Examples) {
  EXPECT_DOUBLE_EQ(logmeanexp(std::vector<double>{-3.7}), -3.7);
  EXPECT_DOUBLE_EQ(logmeanexp(std::vector<double>{0.0, 0.0}), 0.0);
  EXPECT_NEAR(logmeanexp(std::vector<double>{0.0, std::log(3.0)}), std::log(2.0), 1e-15);
  EXPECT_NEAR(logmeanexp(std::vector<double>{-1000.0, -1000.0 + std::log(3.0)}), -1000.0 + std::log(2.0), 1e-12);
  EXPECT_NEAR(logmeanexp(std::vector<double>{-kInf, 0.0}), std::log(0.5), 1e-15);
  EXPECT_EQ(logmeanexp(std::vector<double>{-kInf, -kInf}), -kInf);
  EXPECT_THROW(logmeanexp(std::vector<double>{}), InvalidInput);
}

TEST(MicroLoglik, EmptyAndSingle) {
  const LinearGaussianToy toy;
  const auto theta = toy_theta(toy);
  const auto fam = toy.micro_family(theta);
  Eigen::MatrixXd z(3, 1);
  z << 0.1, -0.4, 0.7;
  MicroDataset empty;
  EXPECT_EQ(micro_loglik_given_states(*fam, z, empty), 0.0);
  MicroDataset one;
  one.observables = {"y"};
  CrossSection cs;
  cs.t = 2;
  cs.ids = {9};
  cs.y = RowMatrix::Constant(1, 1, 0.25);
  one.blocks.push_back(cs);
  const double expected = -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * 0.65 * 0.65;
  EXPECT_NEAR(micro_loglik_given_states(*fam, z, one), expected, 1e-14);
  one.blocks[0].t = 4;
  EXPECT_THROW(micro_loglik_given_states(*fam, z, one), InvalidInput);
}

TEST(MicroLoglik, WorkerCountDoesNotChangeBits) {
  const LinearGaussianToy toy;
  const auto theta = toy_theta(toy);
  const auto sample = simulate_joint(toy, theta, 12, {2, 5, 9, 12}, 10000, 3);
  const auto fam = toy.micro_family(theta);
  const double serial = micro_loglik_given_states(*fam, sample.z, sample.micro, 1);
  for (unsigned w : {2u, 3u, 8u}) EXPECT_EQ(micro_loglik_given_states(*fam, sample.z, sample.micro, w), serial);
}

TEST(ExactToy, MatchesDenseJointGaussian) {
  for (double sigma_e : {0.3, 0.0}) {
    LinearGaussianToy toy(ToyParams{0.7, 0.6, sigma_e, 0.9});
    const auto theta = toy_theta(toy);
    const auto sample = simulate_joint(toy, theta, 3, {1, 2, 3}, 2, 41);
    const ToyParams p = toy.unpack(theta);
    EXPECT_NEAR(exact_joint_loglik_toy(toy, theta, sample.x, sample.micro), dense_toy_joint(p, sample.x, sample.micro),
                1e-8);
    const auto partial = simulate_joint(toy, theta, 5, {2, 5}, 3, 42);
    EXPECT_NEAR(exact_joint_loglik_toy(toy, theta, partial.x, partial.micro),
                dense_toy_joint(p, partial.x, partial.micro), 1e-8);
  }
}

TEST(ExactToy, SingleUnitPerPeriod) {
  LinearGaussianToy toy(ToyParams{0.5, 1.0, 0.4, 0.4});
  const auto theta = toy_theta(toy);
  const auto sample = simulate_joint(toy, theta, 4, {1, 2, 3, 4}, 1, 5);
  EXPECT_NEAR(exact_joint_loglik_toy(toy, theta, sample.x, sample.micro),
              dense_toy_joint(toy.unpack(theta), sample.x, sample.micro), 1e-9);
}

TEST(FullInfo, ObservedStatesHaveNoSeedNoise) {
  LinearGaussianToy toy(ToyParams{0.8, 0.5, 0.0, 1.0});
  const auto theta = toy_theta(toy);
  const auto sample = simulate_joint(toy, theta, 10, {3, 7}, 20, 8);
  const double exact = exact_micro_loglik_toy(toy, theta, sample.x, sample.micro);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto est = full_info_loglik(toy, theta, sample.x, sample.micro, 3, seed);
    EXPECT_NEAR(est.micro_loglik_estimate, exact, 1e-9);
    EXPECT_EQ(est.per_draw_logliks.size(), 3u);
    EXPECT_EQ(est.J, 3);
    EXPECT_EQ(est.seed, seed);
  }
}

TEST(FullInfo, UnbiasedInLevels) {
  const LinearGaussianToy toy;
  const auto theta = toy_theta(toy);
  const auto sample = simulate_joint(toy, theta, 20, {5, 10, 15, 20}, 50, 123);
  const double exact = exact_micro_loglik_toy(toy, theta, sample.x, sample.micro);
  const int reps = 3000;
  std::vector<double> ratio(reps);
  for (int r = 0; r < reps; ++r)
    ratio[r] = std::exp(full_info_loglik(toy, theta, sample.x, sample.micro, 1, 1000 + r).micro_loglik_estimate - exact);
  const double m = stats::mean(ratio);
  const double se = std::sqrt(stats::variance(ratio) / reps);
  EXPECT_LT(std::abs(m - 1.0), 4.0 * se) << "mean " << m << " se " << se;
}

TEST(FullInfo, VarianceShrinksWithDraws) {
  const LinearGaussianToy toy;
  const auto theta = toy_theta(toy);
  const auto sample = simulate_joint(toy, theta, 20, {5, 10, 15, 20}, 50, 321);
  const double exact = exact_micro_loglik_toy(toy, theta, sample.x, sample.micro);
  double prev_var = kInf, prev_err = kInf;
  for (int J : {1, 10, 100}) {
    std::vector<double> est(150);
    for (std::size_t r = 0; r < est.size(); ++r)
      est[r] = full_info_loglik(toy, theta, sample.x, sample.micro, J, 50000 + r).micro_loglik_estimate;
    const double var = stats::variance(est);
    const double err = std::abs(stats::mean(est) - exact);
    EXPECT_LE(var, prev_var) << "J=" << J;
    EXPECT_LE(err, prev_err) << "J=" << J;
    prev_var = var;
    prev_err = err;
  }
}

TEST(FullInfo, DeterministicAcrossWorkers) {
  const LinearGaussianToy toy;
  const auto theta = toy_theta(toy);
  const auto sample = simulate_joint(toy, theta, 15, {3, 6, 9}, 5000, 77);
  const auto a = full_info_loglik(toy, theta, sample.x, sample.micro, 7, 99, 1);
  const auto b = full_info_loglik(toy, theta, sample.x, sample.micro, 7, 99, 4);
  EXPECT_EQ(a.per_draw_logliks, b.per_draw_logliks);
  EXPECT_EQ(a.micro_loglik_estimate, b.micro_loglik_estimate);
  EXPECT_EQ(a.macro_loglik, b.macro_loglik);
  const auto c = full_info_loglik(toy, theta, sample.x, sample.micro, 7, 100, 1);
  EXPECT_NE(a.micro_loglik_estimate, c.micro_loglik_estimate);
}

TEST(FullInfo, DifferencesAcrossThetaMatchExact) {
  const LinearGaussianToy toy;
  const auto theta0 = toy_theta(toy);
  const auto sample = simulate_joint(toy, theta0, 20, {5, 10, 15, 20}, 50, 555);
  auto theta1 = theta0;
  theta1[0] = 0.6;
  const double exact_diff = exact_joint_loglik_toy(toy, theta1, sample.x, sample.micro) -
                            exact_joint_loglik_toy(toy, theta0, sample.x, sample.micro);
  const int J = 100000;
  const auto e0 = full_info_loglik(toy, theta0, sample.x, sample.micro, J, 1);
  const auto e1 = full_info_loglik(toy, theta1, sample.x, sample.micro, J, 2);
  EXPECT_NEAR(e1.total() - e0.total(), exact_diff, 0.05);
}

TEST(FullInfo, Errors) {
  const LinearGaussianToy toy;
  const auto theta = toy_theta(toy);
  const auto sample = simulate_joint(toy, theta, 5, {2}, 4, 1);
  EXPECT_THROW(full_info_loglik(toy, theta, sample.x, sample.micro, 0, 1), InvalidInput);
  auto bad = theta;
  bad[0] = 1.2;
  EXPECT_THROW(full_info_loglik(toy, bad, sample.x, sample.micro, 1, 1), NonStationary);
}
