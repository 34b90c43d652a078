#pragma once

// Joint likelihood p(x, y | theta) = p(x | theta) * E[ p(y | z, theta) | x ],
// with the expectation estimated without bias by averaging the micro
// likelihood (in levels) over simulation-smoother draws of z.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hafi/errors.hpp"
#include "hafi/microdata.hpp"
#include "hafi/parallel.hpp"
#include "hafi/provider.hpp"
#include "hafi/statespace.hpp"

namespace hafi {

/// log( (1/J) sum_j exp(v_j) ), stable for large magnitudes and -inf entries.
inline double logmeanexp(std::span<const double> v) {
  if (v.empty()) throw InvalidInput("logmeanexp: empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  if (mx == -std::numeric_limits<double>::infinity()) return mx;
  if (std::isnan(mx) || mx == std::numeric_limits<double>::infinity()) return mx;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - mx);
  return mx + std::log(sum / static_cast<double>(v.size()));
}

inline constexpr std::size_t kMicroChunk = 4096;

/// sum over t and i of log p(y_it | z_t, theta), accumulated per fixed-size
/// chunk and then in (t, i) order, so the result does not depend on workers.
inline double micro_loglik_given_states(const MicroDensityFamily& family, const Eigen::MatrixXd& z_path,
                                        const MicroDataset& micro, unsigned workers = 1) {
  const auto& blocks = micro.blocks;
  for (const auto& b : blocks)
    if (b.t < 1 || b.t > z_path.rows())
      throw InvalidInput("micro data at t=" + std::to_string(b.t) + " lies outside the macro sample 1.." +
                         std::to_string(z_path.rows()));

  std::vector<std::unique_ptr<const PeriodDensity>> dens(blocks.size());
  parallel_for(blocks.size(), workers, [&](std::size_t k) { dens[k] = family.at(z_path, blocks[k].t); });

  struct Chunk {
    std::size_t block, begin, end;
  };
  std::vector<Chunk> chunks;
  for (std::size_t k = 0; k < blocks.size(); ++k)
    for (std::size_t s = 0; s < blocks[k].size(); s += kMicroChunk)
      chunks.push_back({k, s, std::min(blocks[k].size(), s + kMicroChunk)});

  std::vector<double> partial(chunks.size(), 0.0);
  parallel_for(chunks.size(), workers, [&](std::size_t c) {
    const auto& ch = chunks[c];
    double sum = 0.0;
    for (std::size_t i = ch.begin; i < ch.end; ++i) sum += dens[ch.block]->log_density(blocks[ch.block], i);
    partial[c] = sum;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

struct LogLikEstimate {
  double macro_loglik = 0.0;
  double micro_loglik_estimate = 0.0;  // logmeanexp(per_draw_logliks)
  int J = 0;
  std::uint64_t seed = 0;
  std::vector<double> per_draw_logliks;

  double total() const { return macro_loglik + micro_loglik_estimate; }
  bool degenerate() const { return !std::isfinite(micro_loglik_estimate); }
};

inline double macro_loglik(const ModelProvider& provider, const Eigen::VectorXd& theta, const Eigen::MatrixXd& x) {
  const double ll = kalman_filter(provider.state_space(theta), x).loglik;
  if (!std::isfinite(ll)) throw InvalidInput("macro log-likelihood is not finite");
  return ll;
}

/// Unbiased (in levels) estimate of p(x, y | theta) from J smoothing draws.
/// Randomness comes only from `seed`; callers running a sampler must pass a
/// fresh seed per proposal.
inline LogLikEstimate full_info_loglik(const ModelProvider& provider, const Eigen::VectorXd& theta,
                                       const Eigen::MatrixXd& x, const MicroDataset& micro, int J, std::uint64_t seed,
                                       unsigned workers = 1) {
  if (J < 1) throw InvalidInput("full_info_loglik: J must be >= 1");
  const StateSpaceModel model = provider.state_space(theta);
  const ObservationSequence obs = macro_observations(model, x);
  LogLikEstimate out;
  out.J = J;
  out.seed = seed;
  out.macro_loglik = kalman_filter(model, obs).loglik;
  if (!std::isfinite(out.macro_loglik)) throw InvalidInput("macro log-likelihood is not finite");
  if (micro.blocks.empty()) {
    out.per_draw_logliks.assign(static_cast<std::size_t>(J), 0.0);
    out.micro_loglik_estimate = 0.0;
    return out;
  }
  const auto family = provider.micro_family(theta);
  const StatePathDraws paths = simulation_smoother_draws(model, obs, J, seed, workers);
  out.per_draw_logliks.resize(static_cast<std::size_t>(J));
  for (std::size_t j = 0; j < paths.draws.size(); ++j)
    out.per_draw_logliks[j] = micro_loglik_given_states(*family, paths.draws[j], micro, workers);
  out.micro_loglik_estimate = logmeanexp(out.per_draw_logliks);
  return out;
}

}  // namespace hafi
