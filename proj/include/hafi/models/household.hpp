#pragma once

// Stylized household model with employment risk, a borrowing constraint and
// lognormal permanent productivity.
//
// States z = (zeta, psi, log Y):
//   zeta    aggregate log TFP, AR(1)
//   psi     per employment state e in {0, 1}: (logit pi_e, m1_e, m2_e, m3_e),
//           the point mass at zero assets and the moments of the continuous
//           part of the asset distribution
//   log Y   log output
// The law for psi is a stand-in for a solved equilibrium:
//   psi_t - psibar = Phi (psi_{t-1} - psibar) + Gamma zeta_t,  Phi = beta * diag(persistence).
// Steady-state capital follows from r = 1/beta - 1 and Cobb-Douglas
// production; psibar is scaled so that aggregate assets equal that capital.
// Output, wages and returns are linearized around the steady state. The
// permanent productivity parameter mu_lambda only enters the micro side.

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hafi/errors.hpp"
#include "hafi/expfam.hpp"
#include "hafi/microdens.hpp"
#include "hafi/provider.hpp"
#include "hafi/random.hpp"
#include "hafi/statespace.hpp"

namespace hafi {

/// Structural settings of the household provider that are not estimated.
struct HouseholdSettings {
  std::array<double, 2> pi0 = {0.30, 0.05};       // steady-state point mass at zero, by e
  std::array<double, 2> rel_mean = {0.5, 1.0};     // relative continuous-part means, by e
  std::array<double, 2> cv = {0.9, 0.8};           // sd / mean of the continuous part
  std::array<double, 2> skew = {1.0, 0.8};         // standardized third moment
  double asset_max = 6.0;                          // upper support bound as a multiple of steady-state capital
  std::array<double, 8> persistence = {0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9};
  // Response of psi to zeta: logit entries in levels, moment entries as
  // elasticities.
  std::array<double, 8> response = {-2.0, 1.5, 2.0, 3.0, -2.0, 1.5, 2.0, 3.0};
  int q = 3;
  int expfam_nodes = 64;
  IntegrationSpec integration;
};

/// Deep parameters used by the household provider.
struct HouseholdParams {
  double beta = 0.96;
  double alpha = 0.36;
  double delta = 0.10;
  double b = 0.15;
  double mu_lambda = -0.25;
  double sigma_e = 0.02;
  double rho_zeta = 0.859;
  double sigma_zeta = 0.014;
  double p01 = 0.5;
  double p10 = 0.038;

  double employment() const { return p01 / (p01 + p10); }
  double tax() const { return b * (1.0 - employment()) / employment(); }
};

class StylizedHousehold final : public ModelProvider {
 public:
  static constexpr Eigen::Index kStates = 10;
  static constexpr Eigen::Index kLogY = 9;

  explicit StylizedHousehold(HouseholdSettings settings = {}, HouseholdParams defaults = {})
      : settings_(std::move(settings)) {
    space_ = ParameterSpace({{"beta", defaults.beta, 0.90, 0.99, false},
                             {"sigma_e", defaults.sigma_e, 1e-3, 0.2, false},
                             {"mu_lambda", defaults.mu_lambda, -1.0, -0.01, false},
                             {"alpha", defaults.alpha, 0.2, 0.5, false},
                             {"delta", defaults.delta, 0.02, 0.2, false},
                             {"b", defaults.b, 0.0, 0.5, false},
                             {"rho_zeta", defaults.rho_zeta, 0.0, 0.99, false},
                             {"sigma_zeta", defaults.sigma_zeta, 0.0, 0.1, false},
                             {"p01", defaults.p01, 0.01, 0.99, false},
                             {"p10", defaults.p10, 0.001, 0.5, false}});
    check_settings();
  }
  StylizedHousehold(HouseholdSettings settings, ParameterSpace space)
      : settings_(std::move(settings)), space_(std::move(space)) {
    for (const char* n : {"beta", "sigma_e", "mu_lambda", "alpha", "delta", "b", "rho_zeta", "sigma_zeta", "p01", "p10"})
      (void)space_.index(n);
    check_settings();
  }

  std::string name() const override { return "household"; }
  const ParameterSpace& parameters() const override { return space_; }
  ParameterSpace& parameters() { return space_; }
  const HouseholdSettings& settings() const { return settings_; }

  HouseholdParams unpack(const Eigen::VectorXd& theta) const {
    if (static_cast<std::size_t>(theta.size()) != space_.size())
      throw InvalidInput("household: expected " + std::to_string(space_.size()) + " parameters");
    const auto at = [&](const char* n) { return theta[static_cast<Eigen::Index>(space_.index(n))]; };
    HouseholdParams p{at("beta"), at("alpha"), at("delta"), at("b"), at("mu_lambda"),
                      at("sigma_e"), at("rho_zeta"), at("sigma_zeta"), at("p01"), at("p10")};
    if (!(p.beta > 0.0 && p.beta < 1.0)) throw InvalidInput("household: beta must lie in (0, 1)");
    if (!(p.alpha > 0.0 && p.alpha < 1.0)) throw InvalidInput("household: alpha must lie in (0, 1)");
    if (!(p.delta >= 0.0 && p.delta <= 1.0)) throw InvalidInput("household: delta must lie in [0, 1]");
    if (!(p.b >= 0.0)) throw InvalidInput("household: b must be >= 0");
    if (!(p.mu_lambda < 0.0)) throw InvalidInput("household: mu_lambda must be negative");
    if (!(p.sigma_e >= 0.0) || !(p.sigma_zeta >= 0.0)) throw InvalidInput("household: standard deviations must be >= 0");
    if (!(p.p01 > 0.0 && p.p01 < 1.0 && p.p10 > 0.0 && p.p10 < 1.0))
      throw InvalidInput("household: transition probabilities must lie in (0, 1)");
    if (!(std::abs(p.rho_zeta) < 1.0)) throw NonStationary("household: |rho_zeta| must be < 1");
    if (!(p.tax() < 1.0)) throw InvalidInput("household: implied tax rate must be < 1");
    for (double ph : settings_.persistence)
      if (!(std::abs(ph * p.beta) < 1.0)) throw NonStationary("household: psi persistence times beta must be < 1");
    return p;
  }

  /// Steady state and the aggregate quantities derived from it.
  struct Steady {
    double K = 0.0, L = 0.0, w = 0.0, r = 0.0, logY = 0.0, hi = 0.0;
    Eigen::VectorXd zbar;
    Eigen::VectorXd dlogK;  // d log K / d z at the steady state
  };

  Steady steady_state(const HouseholdParams& p) const {
    Steady s;
    s.L = p.employment();
    s.r = 1.0 / p.beta - 1.0;
    s.K = s.L * std::pow(p.alpha / (s.r + p.delta), 1.0 / (1.0 - p.alpha));
    s.w = (1.0 - p.alpha) * std::pow(s.K / s.L, p.alpha);
    s.logY = p.alpha * std::log(s.K) + (1.0 - p.alpha) * std::log(s.L);
    s.hi = settings_.asset_max * s.K;
    const std::array<double, 2> share = {1.0 - s.L, s.L};
    double scale = 0.0;
    for (int e = 0; e < 2; ++e) scale += share[e] * (1.0 - settings_.pi0[e]) * settings_.rel_mean[e];
    s.zbar = Eigen::VectorXd::Zero(kStates);
    s.dlogK = Eigen::VectorXd::Zero(kStates);
    for (int e = 0; e < 2; ++e) {
      const double pi = settings_.pi0[e];
      const double m1 = s.K * settings_.rel_mean[e] / scale;
      const double sd = settings_.cv[e] * m1;
      const Eigen::Index o = 1 + 4 * e;
      s.zbar[o] = std::log(pi / (1.0 - pi));
      s.zbar[o + 1] = m1;
      s.zbar[o + 2] = sd * sd;
      s.zbar[o + 3] = settings_.skew[e] * sd * sd * sd;
      s.dlogK[o] = -share[e] * m1 * pi * (1.0 - pi) / s.K;
      s.dlogK[o + 1] = share[e] * (1.0 - pi) / s.K;
    }
    s.zbar[kLogY] = s.logY;
    return s;
  }

  StateSpaceModel state_space(const Eigen::VectorXd& theta) const override {
    const HouseholdParams p = unpack(theta);
    const Steady s = steady_state(p);
    Eigen::VectorXd gamma(8), phi(8);
    for (int k = 0; k < 8; ++k) {
      phi[k] = settings_.persistence[k] * p.beta;
      gamma[k] = (k % 4 == 0) ? settings_.response[k] : settings_.response[k] * s.zbar[1 + k];
    }
    // Response of log Y to (zeta, psi) deviations in the same period.
    Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(9);
    c[0] = 1.0;
    c.tail(8) = p.alpha * s.dlogK.segment(1, 8).transpose();

    StateSpaceModel m;
    m.zbar = s.zbar;
    Eigen::MatrixXd top = Eigen::MatrixXd::Zero(9, kStates);
    top(0, 0) = p.rho_zeta;
    top.block(1, 0, 8, 1) = gamma * p.rho_zeta;
    top.block(1, 1, 8, 8) = phi.asDiagonal();
    Eigen::MatrixXd btop(9, 1);
    btop(0, 0) = p.sigma_zeta;
    btop.block(1, 0, 8, 1) = gamma * p.sigma_zeta;
    m.A = Eigen::MatrixXd::Zero(kStates, kStates);
    m.A.topRows(9) = top;
    m.A.row(kLogY) = c * top;
    m.B.resize(kStates, 1);
    m.B.topRows(9) = btop;
    m.B.row(kLogY) = c * btop;
    m.S = Eigen::MatrixXd::Zero(1, kStates);
    m.S(0, kLogY) = 1.0;
    m.sigma_e = Eigen::VectorXd::Constant(1, p.sigma_e);
    return m;
  }

  /// Prices and distribution at state z (a row of a state path).
  HouseholdMicroParams micro_params(const HouseholdParams& p, const Steady& s, const Eigen::VectorXd& z) const {
    const double dlogk = s.dlogK.dot(z - s.zbar);
    const double dzeta = z[0] - s.zbar[0];
    HouseholdMicroParams mp;
    mp.w = s.w * (1.0 + dzeta + p.alpha * dlogk);
    mp.r = s.r + (s.r + p.delta) * (dzeta + (p.alpha - 1.0) * dlogk);
    mp.tau = p.tax();
    mp.b = p.b;
    mp.mu_lambda = p.mu_lambda;
    mp.L = s.L;
    for (int e = 0; e < 2; ++e) {
      const Eigen::Index o = 1 + 4 * e;
      auto& mix = mp.asset_dist[e];
      mix.pi0 = 1.0 / (1.0 + std::exp(-z[o]));
      std::vector<double> cm = {z[o + 2], z[o + 3]};
      cm.resize(static_cast<std::size_t>(std::max(settings_.q - 1, 0)));
      mix.cont = fit_coefficients(settings_.q, Interval{0.0, s.hi}, z[o + 1], cm, ExpFamQuadrature{settings_.expfam_nodes});
    }
    mp.validate();
    return mp;
  }

  std::shared_ptr<const MicroDensityFamily> micro_family(const Eigen::VectorXd& theta) const override {
    const HouseholdParams p = unpack(theta);
    return std::make_shared<Family>(std::make_shared<const StylizedHousehold>(*this), p, steady_state(p));
  }

  /// Population mean and central moments 2..3 of iota within each employment
  /// group, linearized in z by central differences at the steady state.
  std::optional<AffineMomentMap> moment_map(const Eigen::VectorXd& theta) const override {
    const HouseholdParams p = unpack(theta);
    const Steady s = steady_state(p);
    AffineMomentMap map;
    for (int e = 0; e < 2; ++e)
      for (int k = 1; k <= 3; ++k) map.labels.push_back({e, k});
    const Eigen::VectorXd at_bar = population_moments(p, s, s.zbar);
    map.loading = Eigen::MatrixXd::Zero(6, kStates);
    for (Eigen::Index j = 0; j < kStates; ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(s.zbar[j]));
      Eigen::VectorXd up = s.zbar, dn = s.zbar;
      up[j] += h;
      dn[j] -= h;
      map.loading.col(j) = (population_moments(p, s, up) - population_moments(p, s, dn)) / (2.0 * h);
    }
    map.intercept = at_bar - map.loading * s.zbar;
    return map;
  }

  /// Exact (nonlinear) mean and central moments 2..3 of iota by group at z,
  /// using the psi entries as the continuous-part moments.
  Eigen::VectorXd population_moments(const HouseholdParams& p, const Steady& s, const Eigen::VectorXd& z) const {
    const double dlogk = s.dlogK.dot(z - s.zbar);
    const double dzeta = z[0] - s.zbar[0];
    const double w = s.w * (1.0 + dzeta + p.alpha * dlogk);
    const double gross = 1.0 + s.r + (s.r + p.delta) * (dzeta + (p.alpha - 1.0) * dlogk);
    Eigen::VectorXd out(6);
    for (int e = 0; e < 2; ++e) {
      const Eigen::Index o = 1 + 4 * e;
      const double pi = 1.0 / (1.0 + std::exp(-z[o]));
      const double m1 = z[o + 1], m2 = z[o + 2], m3 = z[o + 3];
      // Raw moments of assets including the point mass.
      const std::array<double, 4> ea = {1.0, (1.0 - pi) * m1, (1.0 - pi) * (m2 + m1 * m1),
                                        (1.0 - pi) * (m3 + 3.0 * m1 * m2 + m1 * m1 * m1)};
      const double xi = w * ((1.0 - p.tax()) * e + p.b * (1.0 - e));
      // Raw moments of Y = xi + gross a, then of iota = lambda Y with
      // E[lambda^k] = exp(mu k (1 - k)).
      std::array<double, 4> ey{};
      const double binom[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
      for (int k = 0; k <= 3; ++k)
        for (int j = 0; j <= k; ++j) ey[k] += binom[k][j] * std::pow(xi, k - j) * std::pow(gross, j) * ea[j];
      std::array<double, 4> ei{};
      for (int k = 0; k <= 3; ++k) ei[k] = std::exp(p.mu_lambda * k * (1.0 - k)) * ey[k];
      const double mu = ei[1];
      out[3 * e] = mu;
      out[3 * e + 1] = ei[2] - mu * mu;
      out[3 * e + 2] = ei[3] - 3.0 * mu * ei[2] + 2.0 * mu * mu * mu;
    }
    return out;
  }

  std::vector<std::string> micro_observables() const override { return {"eps", "iota"}; }

  CrossSection simulate_micro(const Eigen::VectorXd& theta, const Eigen::MatrixXd& z_path, int t, std::size_t N,
                              std::uint64_t seed) const override {
    const HouseholdParams p = unpack(theta);
    const Steady s = steady_state(p);
    const HouseholdMicroParams mp = micro_params(p, s, z_path.row(t - 1).transpose());
    return simulate_cross_section(mp, N, derive_seed(seed, static_cast<std::uint64_t>(t), stream_domain::cross_section))
        .to_cross_section(t);
  }

 private:
  void check_settings() const {
    const auto& st = settings_;
    for (int e = 0; e < 2; ++e) {
      if (!(st.pi0[e] > 0.0 && st.pi0[e] < 1.0)) throw InvalidInput("household: steady point mass must lie in (0, 1)");
      if (!(st.rel_mean[e] > 0.0) || !(st.cv[e] > 0.0)) throw InvalidInput("household: relative means and cv must be positive");
    }
    if (!(st.asset_max > 1.0)) throw InvalidInput("household: asset_max must exceed 1");
    if (st.q < 1 || st.q > 3) throw InvalidInput("household: expfam order q must be 1, 2 or 3");
  }

  struct Period final : PeriodDensity {
    std::array<std::unique_ptr<IncomeDensityTable>, 2> table;
    std::array<double, 2> log_share{};
    double log_density(const CrossSection& block, std::size_t i) const override {
      const auto row = block.row(i);
      const double e = row[0];
      if (e != 0.0 && e != 1.0) throw InvalidInput("household: employment column must be 0 or 1");
      const int k = static_cast<int>(e);
      return log_share[k] + table[k]->log_density(row[1]);
    }
  };

  struct Family final : MicroDensityFamily {
    std::shared_ptr<const StylizedHousehold> owner;
    HouseholdParams p;
    Steady s;
    Family(std::shared_ptr<const StylizedHousehold> o, HouseholdParams p_, Steady s_)
        : owner(std::move(o)), p(p_), s(std::move(s_)) {}
    std::unique_ptr<const PeriodDensity> at(const Eigen::MatrixXd& z_path, int t) const override {
      const HouseholdMicroParams mp = owner->micro_params(p, s, z_path.row(t - 1).transpose());
      auto out = std::make_unique<Period>();
      for (int e = 0; e < 2; ++e) out->table[e] = std::make_unique<IncomeDensityTable>(mp, e, owner->settings_.integration);
      out->log_share = {std::log(1.0 - mp.L), std::log(mp.L)};
      return out;
    }
  };

  HouseholdSettings settings_;
  ParameterSpace space_;
};

}  // namespace hafi
