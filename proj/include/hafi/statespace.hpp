#pragma once

// Linear-Gaussian state space:
//   z_t - zbar = A (z_{t-1} - zbar) + B eps_t,   eps_t ~ N(0, I)
//   x_t        = S z_t + e_t,                     e_t ~ N(0, diag(sigma_e^2))
// initialized at the unconditional distribution N(zbar, Sigma), Sigma = A Sigma A' + B B'.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hafi/errors.hpp"
#include "hafi/parallel.hpp"
#include "hafi/random.hpp"
#include "hafi/stats.hpp"

namespace hafi {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct StateSpaceModel {
  VectorXd zbar;     // steady state, n_z
  MatrixXd A;        // n_z x n_z
  MatrixXd B;        // n_z x n_eps
  MatrixXd S;        // n_x x n_z
  VectorXd sigma_e;  // n_x measurement-error std devs, zeros allowed

  Index state_dim() const { return zbar.size(); }
  Index shock_dim() const { return B.cols(); }
  Index obs_dim() const { return S.rows(); }

  MatrixXd measurement_covariance() const { return sigma_e.array().square().matrix().asDiagonal(); }

  /// Checks dimensions, finiteness and sigma_e >= 0. Stationarity is checked
  /// where the unconditional covariance is needed.
  void validate() const {
    const Index n = zbar.size();
    if (n == 0) throw InvalidInput("StateSpaceModel: empty state vector");
    if (A.rows() != n || A.cols() != n) throw InvalidInput("StateSpaceModel: A must be n_z x n_z");
    if (B.rows() != n) throw InvalidInput("StateSpaceModel: B must have n_z rows");
    if (S.cols() != n) throw InvalidInput("StateSpaceModel: S must have n_z columns");
    if (sigma_e.size() != S.rows()) throw InvalidInput("StateSpaceModel: sigma_e length must equal rows of S");
    if ((sigma_e.array() < 0.0).any()) throw InvalidInput("StateSpaceModel: sigma_e entries must be >= 0");
    if (!zbar.allFinite() || !A.allFinite() || !B.allFinite() || !S.allFinite() || !sigma_e.allFinite())
      throw InvalidInput("StateSpaceModel: non-finite entries");
  }
};

inline double spectral_radius(const MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::EigenSolver<MatrixXd> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Solves Sigma = A Sigma A' + B B' for stable A.
inline MatrixXd stationary_covariance(const MatrixXd& A, const MatrixXd& B) {
  const Index n = A.rows();
  if (A.cols() != n || B.rows() != n) throw InvalidInput("stationary_covariance: dimension mismatch");
  const double rho = spectral_radius(A);
  if (!(rho < 1.0))
    throw NonStationary("stationary_covariance: spectral radius " + std::to_string(rho) + " is not < 1");
  const MatrixXd Q = B * B.transpose();
  MatrixXd sigma(n, n);
  if (n <= 24) {
    // vec(Sigma) = (I - A kron A)^{-1} vec(Q)
    MatrixXd K(n * n, n * n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) K.block(i * n, j * n, n, n) = A(i, j) * A;
    K = MatrixXd::Identity(n * n, n * n) - K;
    const VectorXd q = Eigen::Map<const VectorXd>(Q.data(), n * n);
    const VectorXd s = K.partialPivLu().solve(q);
    sigma = Eigen::Map<const MatrixXd>(s.data(), n, n);
  } else {
    // Doubling: Sigma_{k+1} = Sigma_k + A_k Sigma_k A_k', A_{k+1} = A_k^2.
    sigma = Q;
    MatrixXd Ak = A;
    for (int iter = 0; iter < 200; ++iter) {
      const MatrixXd inc = Ak * sigma * Ak.transpose();
      sigma += inc;
      Ak = Ak * Ak;
      if (inc.cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + sigma.cwiseAbs().maxCoeff())) break;
    }
  }
  return 0.5 * (sigma + sigma.transpose());
}

/// Observed rows at one period: value = loading * z_t + noise, noise ~ N(0, noise_cov).
/// A period with no rows is allowed.
struct Observation {
  VectorXd value;
  MatrixXd loading;
  MatrixXd noise_cov;
  Index size() const { return value.size(); }
};

using ObservationSequence = std::vector<Observation>;

/// Per-period observation blocks for a fully observed macro series x (T x n_x).
inline ObservationSequence macro_observations(const StateSpaceModel& model, const MatrixXd& x) {
  if (x.cols() != model.obs_dim())
    throw InvalidInput("macro data has " + std::to_string(x.cols()) + " columns, model expects " +
                       std::to_string(model.obs_dim()));
  if (!x.allFinite()) throw InvalidInput("macro data contains missing or non-finite values");
  const MatrixXd H = model.measurement_covariance();
  ObservationSequence obs(static_cast<std::size_t>(x.rows()));
  for (Index t = 0; t < x.rows(); ++t) obs[t] = Observation{x.row(t).transpose(), model.S, H};
  return obs;
}

struct FilterResult {
  double loglik = 0.0;
  std::vector<VectorXd> predicted_means;  // E[z_t | x_{1:t-1}]
  std::vector<MatrixXd> predicted_covs;
  std::vector<VectorXd> filtered_means;   // E[z_t | x_{1:t}]
  std::vector<MatrixXd> filtered_covs;
  // Smoother inputs: innovations v_t, F_t^{-1}, and L_t = A (I - P_t S_t' F_t^{-1} S_t).
  std::vector<VectorXd> innovations;
  std::vector<MatrixXd> forecast_precisions;
  std::vector<MatrixXd> transition_gains;

  std::size_t periods() const { return predicted_means.size(); }
};

namespace detail {

inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Left factor L with L L' = C for symmetric PSD C.
inline MatrixXd psd_factor(const MatrixXd& C) {
  if (C.size() == 0) return C;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(C));
  const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

inline constexpr double kSingularTolerance = 1e-12;

}  // namespace detail

/// Kalman filter over arbitrary per-period observation blocks. Covariances are
/// updated in Joseph form and symmetrized every step.
inline FilterResult kalman_filter(const StateSpaceModel& model, const ObservationSequence& obs) {
  model.validate();
  const Index n = model.state_dim();
  const MatrixXd Q = model.B * model.B.transpose();
  FilterResult out;
  const std::size_t T = obs.size();
  out.predicted_means.reserve(T);
  out.predicted_covs.reserve(T);
  out.filtered_means.reserve(T);
  out.filtered_covs.reserve(T);
  out.innovations.reserve(T);
  out.forecast_precisions.reserve(T);
  out.transition_gains.reserve(T);

  VectorXd a = model.zbar;
  MatrixXd P = stationary_covariance(model.A, model.B);
  const MatrixXd I = MatrixXd::Identity(n, n);
  for (std::size_t t = 0; t < T; ++t) {
    const Observation& o = obs[t];
    if (o.loading.cols() != n || o.loading.rows() != o.size() || o.noise_cov.rows() != o.size() ||
        o.noise_cov.cols() != o.size())
      throw InvalidInput("kalman_filter: observation block " + std::to_string(t) + " has inconsistent dimensions");
    out.predicted_means.push_back(a);
    out.predicted_covs.push_back(P);

    VectorXd a_f = a;
    MatrixXd P_f = P;
    VectorXd v(o.size());
    MatrixXd Finv(o.size(), o.size());
    MatrixXd L = model.A;
    if (o.size() > 0) {
      v = o.value - o.loading * a;
      const MatrixXd F = detail::symmetrize(o.loading * P * o.loading.transpose() + o.noise_cov);
      // Factor the correlation form so rows on very different scales (e.g.
      // diffuse moment rows next to macro rows) are judged on equal terms.
      const VectorXd fdiag = F.diagonal();
      const auto singular = [&] {
        return SingularForecast("kalman_filter: singular one-step-ahead forecast covariance at period " +
                                std::to_string(t + 1));
      };
      if (!(fdiag.minCoeff() > 0.0) || !fdiag.allFinite()) throw singular();
      const VectorXd inv_sd = fdiag.cwiseSqrt().cwiseInverse();
      const MatrixXd C = detail::symmetrize(inv_sd.asDiagonal() * F * inv_sd.asDiagonal());
      Eigen::LDLT<MatrixXd> ldlt(C);
      if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > detail::kSingularTolerance)) throw singular();
      const double log_det_f = ldlt.vectorD().array().log().sum() + fdiag.array().log().sum();
      Finv = inv_sd.asDiagonal() * ldlt.solve(MatrixXd::Identity(o.size(), o.size())) * inv_sd.asDiagonal();
      Finv = detail::symmetrize(Finv);
      const MatrixXd G = P * o.loading.transpose() * Finv;
      a_f = a + G * v;
      const MatrixXd IGS = I - G * o.loading;
      P_f = detail::symmetrize(IGS * P * IGS.transpose() + G * o.noise_cov * G.transpose());
      L = model.A * IGS;
      out.loglik += -0.5 * (static_cast<double>(o.size()) * stats::kLogTwoPi + log_det_f + v.dot(Finv * v));
    }
    out.filtered_means.push_back(a_f);
    out.filtered_covs.push_back(P_f);
    out.innovations.push_back(std::move(v));
    out.forecast_precisions.push_back(std::move(Finv));
    out.transition_gains.push_back(std::move(L));

    a = model.zbar + model.A * (a_f - model.zbar);
    P = detail::symmetrize(model.A * P_f * model.A.transpose() + Q);
  }
  return out;
}

/// Filter for a fully observed macro series x (T x n_x).
inline FilterResult kalman_filter(const StateSpaceModel& model, const MatrixXd& x) {
  return kalman_filter(model, macro_observations(model, x));
}

struct SmootherOutput {
  std::vector<VectorXd> means;        // E[z_t | x_{1:T}]
  std::vector<MatrixXd> covariances;  // Var[z_t | x_{1:T}]
};

namespace detail {

// Backward pass of the Durbin–Koopman state smoother. Means only when covs == nullptr.
inline void smoothing_backward_pass(const FilterResult& f, const ObservationSequence& obs,
                                    const std::vector<VectorXd>& innovations,
                                    const std::vector<VectorXd>& predicted_means, std::vector<VectorXd>& means,
                                    std::vector<MatrixXd>* covs) {
  const std::size_t T = f.periods();
  const Index n = f.predicted_means.empty() ? 0 : f.predicted_means[0].size();
  means.assign(T, VectorXd());
  if (covs) covs->assign(T, MatrixXd());
  VectorXd r = VectorXd::Zero(n);
  MatrixXd N = MatrixXd::Zero(n, n);
  for (std::size_t k = T; k-- > 0;) {
    const MatrixXd& L = f.transition_gains[k];
    VectorXd r_prev = L.transpose() * r;
    if (obs[k].size() > 0) r_prev += obs[k].loading.transpose() * (f.forecast_precisions[k] * innovations[k]);
    const MatrixXd& P = f.predicted_covs[k];
    means[k] = predicted_means[k] + P * r_prev;
    if (covs) {
      MatrixXd N_prev = L.transpose() * N * L;
      if (obs[k].size() > 0)
        N_prev += obs[k].loading.transpose() * f.forecast_precisions[k] * obs[k].loading;
      N_prev = symmetrize(N_prev);
      (*covs)[k] = symmetrize(P - P * N_prev * P);
      N = std::move(N_prev);
    }
    r = std::move(r_prev);
  }
}

// Smoothed means for alternative observation values sharing the filter's gains.
inline std::vector<VectorXd> smoothed_means_for(const StateSpaceModel& model, const FilterResult& f,
                                                const ObservationSequence& obs,
                                                const std::vector<VectorXd>& values) {
  const std::size_t T = f.periods();
  std::vector<VectorXd> pred(T), innov(T);
  VectorXd a = model.zbar;
  for (std::size_t t = 0; t < T; ++t) {
    pred[t] = a;
    VectorXd a_f = a;
    if (obs[t].size() > 0) {
      innov[t] = values[t] - obs[t].loading * a;
      a_f = a + f.predicted_covs[t] * obs[t].loading.transpose() * (f.forecast_precisions[t] * innov[t]);
    }
    a = model.zbar + model.A * (a_f - model.zbar);
  }
  std::vector<VectorXd> means;
  smoothing_backward_pass(f, obs, innov, pred, means, nullptr);
  return means;
}

}  // namespace detail

inline SmootherOutput kalman_smoother(const StateSpaceModel& model, const ObservationSequence& obs) {
  const FilterResult f = kalman_filter(model, obs);
  SmootherOutput out;
  detail::smoothing_backward_pass(f, obs, f.innovations, f.predicted_means, out.means, &out.covariances);
  return out;
}

inline SmootherOutput kalman_smoother(const StateSpaceModel& model, const MatrixXd& x) {
  return kalman_smoother(model, macro_observations(model, x));
}

/// J joint draws of the state path from p(z | x).
struct StatePathDraws {
  std::vector<MatrixXd> draws;  // each T x n_z
  std::uint64_t seed = 0;
  int J = 0;
};

/// Durbin–Koopman simulation smoother. Draw j uses its own RNG substream of
/// `seed`, so the result is identical for any worker count.
inline StatePathDraws simulation_smoother_draws(const StateSpaceModel& model, const ObservationSequence& obs, int J,
                                                std::uint64_t seed, unsigned workers = 1) {
  if (J < 1) throw InvalidInput("simulation_smoother_draws: J must be >= 1");
  const FilterResult f = kalman_filter(model, obs);
  std::vector<VectorXd> smoothed;
  detail::smoothing_backward_pass(f, obs, f.innovations, f.predicted_means, smoothed, nullptr);

  const std::size_t T = obs.size();
  const Index n = model.state_dim();
  const MatrixXd init_factor = detail::psd_factor(f.predicted_covs.empty() ? MatrixXd() : f.predicted_covs[0]);
  std::vector<MatrixXd> noise_factor(T);
  for (std::size_t t = 0; t < T; ++t) noise_factor[t] = detail::psd_factor(obs[t].noise_cov);

  StatePathDraws out;
  out.seed = seed;
  out.J = J;
  out.draws.assign(static_cast<std::size_t>(J), MatrixXd());
  parallel_for(static_cast<std::size_t>(J), workers, [&](std::size_t j) {
    Rng rng = make_stream(seed, j, stream_domain::smoother);
    std::normal_distribution<double> normal;
    auto standard = [&](Index k) {
      VectorXd u(k);
      for (Index i = 0; i < k; ++i) u[i] = normal(rng);
      return u;
    };
    std::vector<VectorXd> z_plus(T), x_plus(T);
    VectorXd z = model.zbar + init_factor * standard(n);
    for (std::size_t t = 0; t < T; ++t) {
      if (t > 0) z = model.zbar + model.A * (z - model.zbar) + model.B * standard(model.shock_dim());
      z_plus[t] = z;
      x_plus[t] = obs[t].loading * z + noise_factor[t] * standard(obs[t].size());
    }
    const std::vector<VectorXd> smoothed_plus = detail::smoothed_means_for(model, f, obs, x_plus);
    MatrixXd path(static_cast<Index>(T), n);
    for (std::size_t t = 0; t < T; ++t) path.row(t) = (smoothed[t] + z_plus[t] - smoothed_plus[t]).transpose();
    out.draws[j] = std::move(path);
  });
  return out;
}

inline StatePathDraws simulation_smoother_draws(const StateSpaceModel& model, const MatrixXd& x, int J,
                                                std::uint64_t seed, unsigned workers = 1) {
  return simulation_smoother_draws(model, macro_observations(model, x), J, seed, workers);
}

struct SimulatedPaths {
  MatrixXd z;  // T x n_z
  MatrixXd x;  // T x n_x
};

inline SimulatedPaths simulate(const StateSpaceModel& model, int T, std::uint64_t seed) {
  if (T < 1) throw InvalidInput("simulate: T must be >= 1");
  model.validate();
  const MatrixXd init_factor = detail::psd_factor(stationary_covariance(model.A, model.B));
  Rng rng = make_stream(seed, 0, stream_domain::simulate);
  std::normal_distribution<double> normal;
  auto standard = [&](Index k) {
    VectorXd u(k);
    for (Index i = 0; i < k; ++i) u[i] = normal(rng);
    return u;
  };
  SimulatedPaths out{MatrixXd(T, model.state_dim()), MatrixXd(T, model.obs_dim())};
  VectorXd z = model.zbar + init_factor * standard(model.state_dim());
  for (int t = 0; t < T; ++t) {
    if (t > 0) z = model.zbar + model.A * (z - model.zbar) + model.B * standard(model.shock_dim());
    out.z.row(t) = z.transpose();
    const VectorXd e = model.sigma_e.cwiseProduct(standard(model.obs_dim()));
    out.x.row(t) = (model.S * z + e).transpose();
  }
  return out;
}

/// Responses A^h B e_shock * scale for h = 0..horizon (deviations from zbar).
inline std::vector<VectorXd> impulse_response(const StateSpaceModel& model, Index shock, double scale, int horizon) {
  model.validate();
  if (shock < 0 || shock >= model.shock_dim()) throw InvalidInput("impulse_response: shock index out of range");
  if (horizon < 0) throw InvalidInput("impulse_response: horizon must be >= 0");
  std::vector<VectorXd> out;
  out.reserve(static_cast<std::size_t>(horizon) + 1);
  VectorXd r = model.B.col(shock) * scale;
  for (int h = 0; h <= horizon; ++h) {
    out.push_back(r);
    r = model.A * r;
  }
  return out;
}

}  // namespace hafi
