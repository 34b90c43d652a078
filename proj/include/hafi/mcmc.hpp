#pragma once

// Pseudo-marginal adaptive random-walk Metropolis-Hastings.
//
// Random numbers for iteration k come from make_stream(seed, k, mcmc), drawn
// in this order: mixture uniform, d standard normals, acceptance uniform,
// 64-bit likelihood seed. The initial evaluation uses
// derive_seed(seed, 0, mcmc) as its likelihood seed.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "hafi/errors.hpp"
#include "hafi/random.hpp"

namespace hafi {

/// Log-likelihood estimate at theta using the given randomness. Must return
/// a finite value or -inf.
using LogLikEstimator = std::function<double(const Eigen::VectorXd& theta, std::uint64_t seed)>;

struct MhSettings {
  int n_draws = 10000;  // total iterations, burn-in included
  int burn_in = 1000;
  double target_accept = 0.234;
  double adapted_weight = 0.95;  // probability of the adapted proposal
  double diffuse_scale = 0.1;    // diffuse proposal sd as a fraction of the prior box width
  double decay = 0.6;            // step-size gain k^-decay
  int adapt_after = 100;         // iterations before the chain covariance replaces initial_cov
  bool adapt = true;
  Eigen::VectorXd initial;
  std::optional<Eigen::MatrixXd> initial_cov;  // default: diffuse covariance
  std::optional<double> initial_step;          // default: 2.38^2 / d
  Eigen::VectorXd lower, upper;                // flat prior box
  std::function<double(const Eigen::VectorXd&)> log_prior;  // optional density inside the box
  int snapshot_every = 1000;

  void validate() const {
    const Eigen::Index d = initial.size();
    if (d < 1) throw InvalidInput("MhSettings: initial value is empty");
    if (lower.size() != d || upper.size() != d) throw InvalidInput("MhSettings: prior box has the wrong dimension");
    if (!(n_draws > burn_in) || burn_in < 0) throw InvalidInput("MhSettings: need n_draws > burn_in >= 0");
    if (!(adapted_weight >= 0.0 && adapted_weight <= 1.0)) throw InvalidInput("MhSettings: mixture weight outside [0, 1]");
    if (!(target_accept > 0.0 && target_accept < 1.0)) throw InvalidInput("MhSettings: target acceptance outside (0, 1)");
    if (!(diffuse_scale > 0.0)) throw InvalidInput("MhSettings: diffuse scale must be positive");
    for (Eigen::Index k = 0; k < d; ++k)
      if (!(upper[k] > lower[k]) || !std::isfinite(upper[k] - lower[k]))
        throw InvalidInput("MhSettings: prior box must be finite with lower < upper");
    if (initial_cov && (initial_cov->rows() != d || initial_cov->cols() != d))
      throw InvalidInput("MhSettings: initial covariance has the wrong dimension");
  }

  bool in_support(const Eigen::VectorXd& theta) const {
    for (Eigen::Index k = 0; k < theta.size(); ++k)
      if (!(theta[k] >= lower[k] && theta[k] <= upper[k])) return false;
    return true;
  }
  double prior(const Eigen::VectorXd& theta) const {
    if (!in_support(theta)) return -std::numeric_limits<double>::infinity();
    return log_prior ? log_prior(theta) : 0.0;
  }
  Eigen::MatrixXd diffuse_cov() const {
    return (diffuse_scale * (upper - lower)).cwiseAbs2().asDiagonal();
  }
};

struct CovSnapshot {
  int iteration = 0;
  Eigen::MatrixXd cov;
};

struct PosteriorChain {
  Eigen::MatrixXd draws;           // n_draws x d
  std::vector<double> log_post;    // stored (noisy) log posterior of the current state
  std::vector<char> accepted;
  std::vector<double> step_size;   // scale c of the adapted proposal c * Sigma
  std::vector<CovSnapshot> snapshots;
  int burn_in = 0;
  std::uint64_t seed = 0;
  std::size_t evaluations = 0;     // likelihood calls, initial one included

  Eigen::Index size() const { return draws.rows(); }
  Eigen::MatrixXd kept() const { return draws.bottomRows(draws.rows() - burn_in); }
};

namespace detail {

// Running mean and covariance (Welford).
struct RunningCov {
  Eigen::VectorXd mean;
  Eigen::MatrixXd m2;
  long n = 0;

  explicit RunningCov(Eigen::Index d) : mean(Eigen::VectorXd::Zero(d)), m2(Eigen::MatrixXd::Zero(d, d)) {}
  void add(const Eigen::VectorXd& x) {
    ++n;
    const Eigen::VectorXd delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean).transpose();
  }
  Eigen::MatrixXd cov() const { return n > 1 ? Eigen::MatrixXd(m2 / static_cast<double>(n - 1)) : Eigen::MatrixXd(m2); }
};

inline Eigen::MatrixXd chol_factor(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace detail

/// Runs the chain. The stored log posterior of the current state is reused
/// in every later acceptance ratio and never recomputed; each proposal gets
/// fresh estimator randomness.
inline PosteriorChain adaptive_rwmh(const LogLikEstimator& loglik, const MhSettings& s, std::uint64_t seed) {
  s.validate();
  const Eigen::Index d = s.initial.size();
  if (!s.in_support(s.initial)) throw InvalidInput("adaptive_rwmh: initial value outside the prior support");

  PosteriorChain chain;
  chain.seed = seed;
  chain.burn_in = s.burn_in;
  chain.draws.resize(s.n_draws, d);
  chain.log_post.resize(static_cast<std::size_t>(s.n_draws));
  chain.accepted.resize(static_cast<std::size_t>(s.n_draws));
  chain.step_size.resize(static_cast<std::size_t>(s.n_draws));

  Eigen::VectorXd theta = s.initial;
  double current = loglik(theta, derive_seed(seed, 0, stream_domain::mcmc)) + s.prior(theta);
  chain.evaluations = 1;
  if (!std::isfinite(current)) throw InvalidInput("adaptive_rwmh: log posterior is not finite at the initial value");

  const Eigen::MatrixXd diffuse_chol = detail::chol_factor(s.diffuse_cov());
  const Eigen::MatrixXd init_cov = s.initial_cov.value_or(s.diffuse_cov());
  Eigen::MatrixXd adapted_chol = detail::chol_factor(init_cov);
  double log_c = std::log(s.initial_step.value_or(2.38 * 2.38 / static_cast<double>(d)));
  detail::RunningCov running(d);
  running.add(theta);

  for (int k = 1; k <= s.n_draws; ++k) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(k), stream_domain::mcmc);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double u_mix = unif(rng);
    Eigen::VectorXd z(d);
    for (Eigen::Index i = 0; i < d; ++i) z[i] = normal(rng);
    const double u_accept = unif(rng);
    const std::uint64_t noise_seed = rng();

    const bool use_adapted = u_mix < s.adapted_weight;
    const Eigen::VectorXd proposal =
        use_adapted ? Eigen::VectorXd(theta + std::sqrt(std::exp(log_c)) * (adapted_chol * z)) : Eigen::VectorXd(theta + diffuse_chol * z);

    double alpha = 0.0;
    bool accept = false;
    if (s.in_support(proposal)) {
      const double prior = s.prior(proposal);
      double cand = -std::numeric_limits<double>::infinity();
      if (std::isfinite(prior)) {
        cand = loglik(proposal, noise_seed) + prior;
        ++chain.evaluations;
      }
      if (std::isnan(cand)) cand = -std::numeric_limits<double>::infinity();
      const double diff = cand - current;
      alpha = diff >= 0.0 ? 1.0 : std::exp(diff);
      accept = std::log(u_accept) < diff;
      if (accept) {
        theta = proposal;
        current = cand;
      }
    }

    if (s.adapt) {
      if (use_adapted) {
        const double gain = std::pow(static_cast<double>(k), -s.decay);
        log_c = std::clamp(log_c + gain * (alpha - s.target_accept), -10.0, 10.0);
      }
      running.add(theta);
      if (k >= s.adapt_after) {
        Eigen::MatrixXd cov = running.cov();
        cov += 1e-10 * (s.upper - s.lower).cwiseAbs2().asDiagonal().toDenseMatrix();
        adapted_chol = detail::chol_factor(cov);
      }
    }

    const auto idx = static_cast<std::size_t>(k - 1);
    chain.draws.row(k - 1) = theta.transpose();
    chain.log_post[idx] = current;
    chain.accepted[idx] = accept ? 1 : 0;
    chain.step_size[idx] = std::exp(log_c);
    if (s.snapshot_every > 0 && k % s.snapshot_every == 0)
      chain.snapshots.push_back({k, adapted_chol * adapted_chol.transpose()});
  }
  return chain;
}

/// Best point of a coarse scan over the prior box: a full grid when
/// points^d <= max_points, otherwise max_points uniform draws.
inline Eigen::VectorXd grid_search_init(const LogLikEstimator& loglik, const Eigen::VectorXd& lower,
                                        const Eigen::VectorXd& upper, int points_per_dim, std::uint64_t seed,
                                        std::size_t max_points = 4096) {
  const Eigen::Index d = lower.size();
  if (d < 1 || upper.size() != d || points_per_dim < 2) throw InvalidInput("grid_search_init: bad box or resolution");
  std::vector<Eigen::VectorXd> candidates;
  const double total = std::pow(static_cast<double>(points_per_dim), static_cast<double>(d));
  if (total <= static_cast<double>(max_points)) {
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    for (std::size_t c = 0; c < static_cast<std::size_t>(total); ++c) {
      Eigen::VectorXd th(d);
      for (Eigen::Index k = 0; k < d; ++k) {
        const double frac = (idx[k] + 0.5) / points_per_dim;
        th[k] = lower[k] + frac * (upper[k] - lower[k]);
      }
      candidates.push_back(th);
      for (Eigen::Index k = 0; k < d; ++k) {
        if (++idx[k] < points_per_dim) break;
        idx[k] = 0;
      }
    }
  } else {
    Rng rng = make_stream(seed, 1, stream_domain::mcmc);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t c = 0; c < max_points; ++c) {
      Eigen::VectorXd th(d);
      for (Eigen::Index k = 0; k < d; ++k) th[k] = lower[k] + unif(rng) * (upper[k] - lower[k]);
      candidates.push_back(th);
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd arg = candidates.front();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const double v = loglik(candidates[c], derive_seed(seed, c + 2, stream_domain::mcmc));
    if (v > best) {
      best = v;
      arg = candidates[c];
    }
  }
  if (!std::isfinite(best)) throw InvalidInput("grid_search_init: log-likelihood is -inf everywhere on the grid");
  return arg;
}

// ---------------------------------------------------------------------------
// Diagnostics

/// Autocorrelations of x at lags 0..n-1 via FFT.
inline std::vector<double> autocorrelation(std::span<const double> x) {
  const std::size_t n = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  std::size_t m = 1;
  while (m < 2 * n) m <<= 1;
  std::vector<double> padded(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i] = x[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, padded);
  for (auto& c : freq) c = std::norm(c);
  std::vector<double> acov;
  fft.inv(acov, freq);
  std::vector<double> rho(n, 0.0);
  if (!(acov[0] > 0.0)) return rho;
  for (std::size_t k = 0; k < n; ++k) rho[k] = acov[k] / acov[0];
  return rho;
}

/// Effective sample size with Geyer's initial positive sequence. A constant
/// series has ESS 1.
inline double effective_sample_size(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) return static_cast<double>(n);
  const auto rho = autocorrelation(x);
  if (rho[0] == 0.0) return 1.0;
  double tau = -1.0;
  for (std::size_t k = 0; k + 1 < n; k += 2) {
    const double pair = rho[k] + rho[k + 1];
    if (!(pair > 0.0)) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / static_cast<double>(n));
  return std::min(static_cast<double>(n) / tau, static_cast<double>(n) * std::log10(static_cast<double>(n)));
}

/// Split-R-hat over one or more chains of equal length for a scalar.
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::span<const double>> halves;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    if (h < 2) throw InvalidInput("split_rhat: chains too short");
    halves.emplace_back(c.data(), h);
    halves.emplace_back(c.data() + (c.size() - h), h);
  }
  const std::size_t n = halves.front().size();
  const double m = static_cast<double>(halves.size());
  std::vector<double> means, vars;
  for (auto h : halves) {
    double mu = 0.0;
    for (double v : h) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : h) var += (v - mu) * (v - mu);
    means.push_back(mu);
    vars.push_back(var / static_cast<double>(n - 1));
  }
  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= m;
  double B = 0.0, W = 0.0;
  for (std::size_t j = 0; j < means.size(); ++j) {
    B += (means[j] - grand) * (means[j] - grand);
    W += vars[j];
  }
  B *= static_cast<double>(n) / (m - 1.0);
  W /= m;
  if (!(W > 0.0)) return B > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * W + B / static_cast<double>(n);
  return std::sqrt(var_plus / W);
}

struct ChainDiagnostics {
  double acceptance_rate = 0.0;
  std::vector<double> ess;
  std::vector<double> rhat;
  std::vector<double> mean, sd;
  std::size_t draws = 0;
};

/// Diagnostics of the post-burn-in draws of one or more chains (same length
/// and dimension).
inline ChainDiagnostics diagnostics(const std::vector<Eigen::MatrixXd>& kept, const std::vector<std::vector<char>>& accepted) {
  if (kept.empty()) throw InvalidInput("diagnostics: no chains");
  const Eigen::Index n = kept.front().rows(), d = kept.front().cols();
  if (n < 100) throw InvalidInput("diagnostics: need at least 100 draws");
  for (const auto& c : kept)
    if (c.rows() != n || c.cols() != d) throw InvalidInput("diagnostics: chains differ in shape");
  ChainDiagnostics out;
  out.draws = static_cast<std::size_t>(n) * kept.size();
  std::size_t acc = 0, total = 0;
  for (const auto& a : accepted) {
    for (char c : a) acc += c ? 1 : 0;
    total += a.size();
  }
  out.acceptance_rate = total ? static_cast<double>(acc) / static_cast<double>(total) : 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    std::vector<std::vector<double>> cols;
    double ess = 0.0, mu = 0.0, ss = 0.0;
    for (const auto& c : kept) {
      std::vector<double> v(c.col(k).data(), c.col(k).data() + n);
      ess += effective_sample_size(v);
      for (double x : v) mu += x;
      cols.push_back(std::move(v));
    }
    const double cnt = static_cast<double>(out.draws);
    mu /= cnt;
    for (const auto& v : cols)
      for (double x : v) ss += (x - mu) * (x - mu);
    out.ess.push_back(ess);
    out.rhat.push_back(split_rhat(cols));
    out.mean.push_back(mu);
    out.sd.push_back(std::sqrt(ss / (cnt - 1.0)));
  }
  return out;
}

inline ChainDiagnostics diagnostics(const PosteriorChain& chain) {
  std::vector<char> acc(chain.accepted.begin() + chain.burn_in, chain.accepted.end());
  return diagnostics(std::vector<Eigen::MatrixXd>{chain.kept()}, {acc});
}

}  // namespace hafi
