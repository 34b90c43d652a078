#pragma once

// Linear-Gaussian toy model with an exact joint likelihood:
//   z_t = rho z_{t-1} + sigma_zeta eps_t,  x_t = z_t + e_t, e_t ~ N(0, sigma_e^2),
//   y_it ~ N(z_t, sigma_u^2).
// Cross-sectional means are sufficient for theta.

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hafi/errors.hpp"
#include "hafi/likelihood.hpp"
#include "hafi/provider.hpp"
#include "hafi/random.hpp"
#include "hafi/stats.hpp"

namespace hafi {

struct ToyParams {
  double rho = 0.8;
  double sigma_zeta = 0.5;
  double sigma_e = 0.3;
  double sigma_u = 1.0;
};

class LinearGaussianToy final : public ModelProvider {
 public:
  explicit LinearGaussianToy(ToyParams defaults = {}) {
    space_ = ParameterSpace({{"rho", defaults.rho, -0.99, 0.99, false},
                             {"sigma_zeta", defaults.sigma_zeta, 1e-3, 5.0, false},
                             {"sigma_e", defaults.sigma_e, 0.0, 5.0, false},
                             {"sigma_u", defaults.sigma_u, 1e-3, 10.0, false}});
  }
  explicit LinearGaussianToy(ParameterSpace space) : space_(std::move(space)) {
    for (const char* n : {"rho", "sigma_zeta", "sigma_e", "sigma_u"}) (void)space_.index(n);
  }

  std::string name() const override { return "toy"; }
  const ParameterSpace& parameters() const override { return space_; }
  ParameterSpace& parameters() { return space_; }

  ToyParams unpack(const Eigen::VectorXd& theta) const {
    if (static_cast<std::size_t>(theta.size()) != space_.size())
      throw InvalidInput("toy: expected " + std::to_string(space_.size()) + " parameters");
    ToyParams p{theta[static_cast<Eigen::Index>(space_.index("rho"))],
                theta[static_cast<Eigen::Index>(space_.index("sigma_zeta"))],
                theta[static_cast<Eigen::Index>(space_.index("sigma_e"))],
                theta[static_cast<Eigen::Index>(space_.index("sigma_u"))]};
    if (!(std::abs(p.rho) < 1.0)) throw NonStationary("toy: |rho| must be < 1");
    if (!(p.sigma_zeta > 0.0) || !(p.sigma_e >= 0.0) || !(p.sigma_u > 0.0))
      throw InvalidInput("toy: standard deviations must be positive (sigma_e may be 0)");
    return p;
  }

  StateSpaceModel state_space(const Eigen::VectorXd& theta) const override {
    const ToyParams p = unpack(theta);
    StateSpaceModel m;
    m.zbar = Eigen::VectorXd::Zero(1);
    m.A = Eigen::MatrixXd::Constant(1, 1, p.rho);
    m.B = Eigen::MatrixXd::Constant(1, 1, p.sigma_zeta);
    m.S = Eigen::MatrixXd::Ones(1, 1);
    m.sigma_e = Eigen::VectorXd::Constant(1, p.sigma_e);
    return m;
  }

  std::shared_ptr<const MicroDensityFamily> micro_family(const Eigen::VectorXd& theta) const override {
    return std::make_shared<Family>(unpack(theta).sigma_u);
  }

  std::optional<AffineMomentMap> moment_map(const Eigen::VectorXd& theta) const override {
    const ToyParams p = unpack(theta);
    AffineMomentMap map;
    map.labels = {{0, 1}, {0, 2}, {0, 3}};
    map.intercept = Eigen::Vector3d(0.0, p.sigma_u * p.sigma_u, 0.0);
    map.loading = Eigen::MatrixXd::Zero(3, 1);
    map.loading(0, 0) = 1.0;
    return map;
  }

  std::vector<std::string> micro_observables() const override { return {"y"}; }

  CrossSection simulate_micro(const Eigen::VectorXd& theta, const Eigen::MatrixXd& z_path, int t, std::size_t N,
                              std::uint64_t seed) const override {
    const ToyParams p = unpack(theta);
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(t), stream_domain::cross_section);
    std::normal_distribution<double> normal(0.0, 1.0);
    CrossSection cs;
    cs.t = t;
    cs.y.resize(static_cast<Eigen::Index>(N), 1);
    const double z = z_path(t - 1, 0);
    for (std::size_t i = 0; i < N; ++i) {
      cs.ids.push_back(static_cast<std::int64_t>(i + 1));
      cs.y(static_cast<Eigen::Index>(i), 0) = z + p.sigma_u * normal(rng);
    }
    return cs;
  }

 private:
  struct Period final : PeriodDensity {
    double z, var;
    Period(double z_, double var_) : z(z_), var(var_) {}
    double log_density(const CrossSection& block, std::size_t i) const override {
      return stats::normal_logpdf(block.y(static_cast<Eigen::Index>(i), 0), z, var);
    }
  };
  struct Family final : MicroDensityFamily {
    double sigma_u;
    explicit Family(double s) : sigma_u(s) {}
    std::unique_ptr<const PeriodDensity> at(const Eigen::MatrixXd& z_path, int t) const override {
      return std::make_unique<Period>(z_path(t - 1, 0), sigma_u * sigma_u);
    }
  };

  ParameterSpace space_;
};

/// Exact log p(x, y | theta) for the toy: a Kalman filter whose period-t
/// observation also includes the micro mean ybar_t with noise variance
/// sigma_u^2 / N_t, plus the log density of the within-period deviations.
inline double exact_joint_loglik_toy(const ModelProvider& provider, const Eigen::VectorXd& theta,
                                     const Eigen::MatrixXd& x, const MicroDataset& micro) {
  const auto* toy = dynamic_cast<const LinearGaussianToy*>(&provider);
  if (!toy) throw InvalidInput("exact_joint_loglik_toy: provider is not the linear-Gaussian toy");
  const ToyParams p = toy->unpack(theta);
  const StateSpaceModel model = toy->state_space(theta);
  ObservationSequence obs = macro_observations(model, x);
  const double su2 = p.sigma_u * p.sigma_u;
  double within = 0.0;
  for (const auto& b : micro.blocks) {
    if (b.t < 1 || b.t > x.rows()) throw InvalidInput("micro data outside the macro sample");
    if (b.y.cols() != 1) throw InvalidInput("toy micro data must have one observable");
    const double n = static_cast<double>(b.size());
    const double ybar = b.y.col(0).mean();
    const double ss = (b.y.col(0).array() - ybar).square().sum();
    within += -0.5 * (n - 1.0) * (stats::kLogTwoPi + std::log(su2)) - 0.5 * std::log(n) - ss / (2.0 * su2);

    auto& o = obs[static_cast<std::size_t>(b.t - 1)];
    const Eigen::Index k = o.size();
    Eigen::VectorXd value(k + 1);
    value << o.value, ybar;
    Eigen::MatrixXd loading(k + 1, 1);
    loading << o.loading, Eigen::MatrixXd::Ones(1, 1);
    Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(k + 1, k + 1);
    noise.topLeftCorner(k, k) = o.noise_cov;
    noise(k, k) = su2 / n;
    o = Observation{value, loading, noise};
  }
  return kalman_filter(model, obs).loglik + within;
}

/// Exact log p(y | x, theta) for the toy.
inline double exact_micro_loglik_toy(const ModelProvider& provider, const Eigen::VectorXd& theta,
                                     const Eigen::MatrixXd& x, const MicroDataset& micro) {
  return exact_joint_loglik_toy(provider, theta, x, micro) - macro_loglik(provider, theta, x);
}

/// Flat-prior posterior of the toy on a rectangular grid over the free
/// parameters (one or two). Masses use trapezoid weights.
struct GridPosterior {
  std::vector<std::vector<double>> axes;  // grid per free parameter
  std::vector<Eigen::VectorXd> points;    // row-major over axes
  std::vector<double> log_posterior;      // normalized so the weighted density integrates to 1
  std::vector<double> mass;               // probability of each grid cell's trapezoid weight

  Eigen::VectorXd mean() const {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(axes.size()));
    for (std::size_t k = 0; k < points.size(); ++k) m += mass[k] * points[k];
    return m;
  }
  Eigen::VectorXd sd() const {
    const Eigen::VectorXd mu = mean();
    Eigen::VectorXd v = Eigen::VectorXd::Zero(mu.size());
    for (std::size_t k = 0; k < points.size(); ++k) v += mass[k] * (points[k] - mu).cwiseAbs2();
    return v.cwiseSqrt();
  }
  /// Marginal CDF of free parameter `dim`, piecewise linear in the density.
  double cdf(std::size_t dim, double value) const {
    const auto& ax = axes.at(dim);
    const std::size_t n1 = axes.size() == 2 ? axes[1].size() : 1;
    std::vector<double> dens(ax.size(), 0.0);
    for (std::size_t k = 0; k < points.size(); ++k) {
      const std::size_t i = dim == 0 ? k / n1 : k % n1;
      double w = 1.0;
      if (axes.size() == 2) w = dim == 0 ? trapezoid_weight(axes[1], k % n1) : trapezoid_weight(axes[0], k / n1);
      dens[i] += std::exp(log_posterior[k]) * w;
    }
    if (value <= ax.front()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 1; i < ax.size(); ++i) {
      const double h = ax[i] - ax[i - 1];
      if (value < ax[i]) {
        const double s = value - ax[i - 1];
        const double slope = (dens[i] - dens[i - 1]) / h;
        return std::min(1.0, acc + dens[i - 1] * s + 0.5 * slope * s * s);
      }
      acc += 0.5 * h * (dens[i] + dens[i - 1]);
    }
    return 1.0;
  }

  static double trapezoid_weight(const std::vector<double>& ax, std::size_t i) {
    if (ax.size() == 1) return 1.0;
    double w = 0.0;
    if (i > 0) w += 0.5 * (ax[i] - ax[i - 1]);
    if (i + 1 < ax.size()) w += 0.5 * (ax[i + 1] - ax[i]);
    return w;
  }
};

inline GridPosterior toy_exact_posterior(const LinearGaussianToy& toy, std::vector<std::vector<double>> axes,
                                         const Eigen::MatrixXd& x, const MicroDataset& micro) {
  const auto& space = toy.parameters();
  const std::size_t d = space.free_indices().size();
  if (d < 1 || d > 2 || axes.size() != d) throw InvalidInput("toy_exact_posterior: need one axis per free parameter (1 or 2)");
  GridPosterior gp;
  gp.axes = std::move(axes);
  std::vector<double> logw;
  auto add = [&](Eigen::VectorXd free, double w) {
    gp.points.push_back(free);
    gp.log_posterior.push_back(exact_joint_loglik_toy(toy, space.expand(free), x, micro));
    logw.push_back(std::log(w));
  };
  if (d == 1) {
    for (std::size_t i = 0; i < gp.axes[0].size(); ++i)
      add(Eigen::VectorXd::Constant(1, gp.axes[0][i]), GridPosterior::trapezoid_weight(gp.axes[0], i));
  } else {
    for (std::size_t i = 0; i < gp.axes[0].size(); ++i)
      for (std::size_t j = 0; j < gp.axes[1].size(); ++j)
        add(Eigen::Vector2d(gp.axes[0][i], gp.axes[1][j]),
            GridPosterior::trapezoid_weight(gp.axes[0], i) * GridPosterior::trapezoid_weight(gp.axes[1], j));
  }
  std::vector<double> lw(gp.points.size());
  for (std::size_t k = 0; k < lw.size(); ++k) lw[k] = gp.log_posterior[k] + logw[k];
  const double log_norm = logmeanexp(lw) + std::log(static_cast<double>(lw.size()));
  gp.mass.resize(lw.size());
  for (std::size_t k = 0; k < lw.size(); ++k) {
    gp.log_posterior[k] -= log_norm;
    gp.mass[k] = std::exp(lw[k] - log_norm);
  }
  return gp;
}

}  // namespace hafi
