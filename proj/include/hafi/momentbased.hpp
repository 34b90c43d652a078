#pragma once

// Moment-based likelihoods: cross-sectional sample moments enter the Kalman
// filter as extra observables with Gaussian measurement error.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hafi/errors.hpp"
#include "hafi/microdata.hpp"
#include "hafi/provider.hpp"
#include "hafi/random.hpp"
#include "hafi/stats.hpp"
#include "hafi/statespace.hpp"

namespace hafi {

/// Mean and central moments (no degree-of-freedom correction).
struct SampleMoments {
  std::size_t count = 0;
  std::vector<double> m;  // m[1] = mean, m[j] = (1/N) sum (v - mean)^j for j >= 2; m[0] unused

  double operator[](int j) const { return m.at(static_cast<std::size_t>(j)); }
};

inline SampleMoments central_moments(std::span<const double> v, int max_order) {
  if (v.empty()) throw InvalidInput("central_moments: empty sample");
  if (max_order < 1) throw InvalidInput("central_moments: max_order must be >= 1");
  SampleMoments out;
  out.count = v.size();
  out.m.assign(static_cast<std::size_t>(max_order) + 1, 0.0);
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  out.m[1] = mean;
  for (double x : v) {
    const double d = x - mean;
    double p = d;
    for (int j = 2; j <= max_order; ++j) {
      p *= d;
      out.m[j] += p;
    }
  }
  for (int j = 2; j <= max_order; ++j) out.m[j] /= n;
  return out;
}

/// Which micro columns define the moments: an optional group column (e.g.
/// employment status, values 0..groups-1) and the value column.
struct MomentSpec {
  std::optional<int> group_column;
  int value_column = 0;
  int groups = 1;
};

/// Per-group sample moments of one cross section.
inline std::vector<SampleMoments> group_central_moments(const CrossSection& block, const MomentSpec& spec,
                                                        int max_order) {
  std::vector<std::vector<double>> values(static_cast<std::size_t>(spec.groups));
  for (std::size_t i = 0; i < block.size(); ++i) {
    const auto row = block.row(i);
    int g = 0;
    if (spec.group_column) {
      const double gv = row[static_cast<std::size_t>(*spec.group_column)];
      g = static_cast<int>(std::lround(gv));
      if (g < 0 || g >= spec.groups || gv != g) throw InvalidInput("group column holds an unexpected value");
    }
    values[static_cast<std::size_t>(g)].push_back(row[static_cast<std::size_t>(spec.value_column)]);
  }
  std::vector<SampleMoments> out;
  for (int g = 0; g < spec.groups; ++g) {
    if (values[g].empty())
      throw InvalidInput("group " + std::to_string(g) + " is empty at t=" + std::to_string(block.t));
    out.push_back(central_moments(values[g], max_order));
  }
  return out;
}

/// Sample moments (orders 1..3 per group) at each observed time.
struct MomentSeries {
  std::vector<int> times;
  std::vector<MomentLabel> labels;    // (group, order), group-major
  std::vector<Eigen::VectorXd> values;  // per time, aligned with labels
  std::vector<std::vector<std::size_t>> counts;  // per time, per group
};

inline MomentSeries build_moment_series(const MicroDataset& micro, const MomentSpec& spec, int max_order = 3) {
  MomentSeries s;
  for (int g = 0; g < spec.groups; ++g)
    for (int j = 1; j <= max_order; ++j) s.labels.push_back({g, j});
  for (const auto& b : micro.blocks) {
    const auto gm = group_central_moments(b, spec, max_order);
    Eigen::VectorXd v(static_cast<Eigen::Index>(s.labels.size()));
    std::vector<std::size_t> counts;
    Eigen::Index k = 0;
    for (const auto& m : gm) {
      for (int j = 1; j <= max_order; ++j) v[k++] = m[j];
      counts.push_back(m.count);
    }
    s.times.push_back(b.t);
    s.values.push_back(v);
    s.counts.push_back(counts);
  }
  return s;
}

/// Time-averaged moments m_1..m_6 and mean group size, one entry per group.
struct PooledMoments {
  std::array<double, 7> m{};  // m[1..6]
  double count = 0.0;
};

inline std::vector<PooledMoments> pooled_moments(const MicroDataset& micro, const MomentSpec& spec) {
  if (micro.blocks.empty()) throw InvalidInput("pooled_moments: no micro data");
  std::vector<PooledMoments> out(static_cast<std::size_t>(spec.groups));
  for (const auto& b : micro.blocks) {
    const auto gm = group_central_moments(b, spec, 6);
    for (int g = 0; g < spec.groups; ++g) {
      for (int j = 1; j <= 6; ++j) out[g].m[j] += gm[g][j];
      out[g].count += static_cast<double>(gm[g].count);
    }
  }
  const double T = static_cast<double>(micro.blocks.size());
  for (auto& p : out) {
    for (int j = 1; j <= 6; ++j) p.m[j] /= T;
    p.count /= T;
  }
  return out;
}

/// Block-diagonal sampling covariance of (m1, m2, m3) per group.
struct MomentVcv {
  std::vector<MomentLabel> labels;
  Eigen::MatrixXd matrix;
  double clipped = 0.0;  // largest eigenvalue adjustment made by the PSD repair
};

/// Asymptotic covariance of the sample mean, variance and third central
/// moment, per group, with groups independent. Slightly indefinite results
/// (plug-in sixth moments) are repaired by clipping eigenvalues at
/// 1e-12 * trace; larger violations throw.
inline MomentVcv moment_vcv(const std::vector<PooledMoments>& groups) {
  const Eigen::Index G = static_cast<Eigen::Index>(groups.size());
  MomentVcv out;
  out.matrix = Eigen::MatrixXd::Zero(3 * G, 3 * G);
  for (Eigen::Index g = 0; g < G; ++g) {
    const auto& p = groups[static_cast<std::size_t>(g)];
    if (!(p.count > 0.0)) throw InvalidInput("moment_vcv: group sizes must be positive");
    const double m2 = p.m[2], m3 = p.m[3], m4 = p.m[4], m5 = p.m[5], m6 = p.m[6], N = p.count;
    Eigen::Matrix3d V;
    V(0, 0) = m2 / N;
    V(1, 1) = (m4 - m2 * m2) / N;
    V(2, 2) = (m6 - 6.0 * m4 * m2 - m3 * m3 + 9.0 * m2 * m2 * m2) / N;
    V(0, 1) = V(1, 0) = m3 / N;
    V(0, 2) = V(2, 0) = (m4 - 3.0 * m2 * m2) / N;
    V(1, 2) = V(2, 1) = (m5 - 4.0 * m3 * m2) / N;
    out.matrix.block(3 * g, 3 * g, 3, 3) = V;
    for (int j = 1; j <= 3; ++j) out.labels.push_back({static_cast<int>(g), j});
  }
  const double trace = out.matrix.trace();
  if (!(trace > 0.0) || !out.matrix.allFinite()) throw InvalidInput("moment_vcv: degenerate moment inputs");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.matrix);
  const double floor = 1e-12 * trace;
  if (es.eigenvalues().minCoeff() < -1e-6 * trace)
    throw InvalidInput("moment_vcv: covariance is indefinite beyond the repair tolerance");
  if (es.eigenvalues().minCoeff() < floor) {
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
      out.clipped = std::max(out.clipped, floor - ev[k]);
      ev[k] = std::max(ev[k], floor);
    }
    out.matrix = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    out.matrix = 0.5 * (out.matrix + out.matrix.transpose());
  }
  return out;
}

namespace detail {

inline std::optional<std::size_t> find_label(const std::vector<MomentLabel>& labels, MomentLabel l) {
  for (std::size_t k = 0; k < labels.size(); ++k)
    if (labels[k] == l) return k;
  return std::nullopt;
}

}  // namespace detail

/// Observation blocks [x_t; selected moments at t] for the Kalman filter.
/// Moment rows appear only at the times in the series.
inline ObservationSequence moment_observations(const StateSpaceModel& model, const Eigen::MatrixXd& x,
                                               const MomentSeries& series, const MomentVcv& vcv,
                                               const AffineMomentMap& map, int order) {
  if (order < 1 || order > 3) throw InvalidInput("moment order must be 1, 2 or 3");
  std::vector<std::size_t> in_series, in_map, in_vcv;
  for (std::size_t k = 0; k < series.labels.size(); ++k) {
    const auto& l = series.labels[k];
    if (l.order > order) continue;
    const auto m = detail::find_label(map.labels, l);
    const auto v = detail::find_label(vcv.labels, l);
    if (!m) throw InvalidInput("model has no population counterpart for a selected moment");
    if (!v) throw InvalidInput("moment covariance lacks a selected moment");
    in_series.push_back(k);
    in_map.push_back(*m);
    in_vcv.push_back(*v);
  }
  const Eigen::Index r = static_cast<Eigen::Index>(in_series.size());
  Eigen::MatrixXd V(r, r), D(r, model.state_dim());
  Eigen::VectorXd c(r);
  for (Eigen::Index a = 0; a < r; ++a) {
    c[a] = map.intercept[static_cast<Eigen::Index>(in_map[a])];
    D.row(a) = map.loading.row(static_cast<Eigen::Index>(in_map[a]));
    for (Eigen::Index b = 0; b < r; ++b)
      V(a, b) = vcv.matrix(static_cast<Eigen::Index>(in_vcv[a]), static_cast<Eigen::Index>(in_vcv[b]));
  }

  ObservationSequence obs = macro_observations(model, x);
  for (std::size_t k = 0; k < series.times.size(); ++k) {
    const int t = series.times[k];
    if (t < 1 || t > x.rows()) throw InvalidInput("moment series time outside the macro sample");
    auto& o = obs[static_cast<std::size_t>(t - 1)];
    const Eigen::Index nx = o.size();
    Eigen::VectorXd value(nx + r);
    Eigen::MatrixXd loading(nx + r, model.state_dim());
    Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(nx + r, nx + r);
    value.head(nx) = o.value;
    loading.topRows(nx) = o.loading;
    noise.topLeftCorner(nx, nx) = o.noise_cov;
    for (Eigen::Index a = 0; a < r; ++a) value[nx + a] = series.values[k][static_cast<Eigen::Index>(in_series[a])] - c[a];
    loading.bottomRows(r) = D;
    noise.bottomRightCorner(r, r) = V;
    o = Observation{value, loading, noise};
  }
  return obs;
}

/// Kalman log-likelihood of macro data augmented with the first `order`
/// cross-sectional moments per group.
inline double moment_loglik(const ModelProvider& provider, const Eigen::VectorXd& theta, const Eigen::MatrixXd& x,
                            const MomentSeries& series, const MomentVcv& vcv, int order) {
  const auto map = provider.moment_map(theta);
  if (!map) throw InvalidInput("model '" + provider.name() + "' does not provide a moment map");
  const StateSpaceModel model = provider.state_space(theta);
  return kalman_filter(model, moment_observations(model, x, series, vcv, *map, order)).loglik;
}

struct Chi2MomentTest {
  double ks_chi2 = 0.0;
  double p_chi2 = 0.0;
  double ks_normal = 0.0;
  double p_normal = 0.0;
  std::vector<double> statistics;  // N * m2_hat / m2 per replication
};

/// Simulates N m2_hat / m2 from Gaussian cross sections and compares its
/// law with chi^2(N-1) and with the normal approximation N(N-1, 2(N-1)).
inline Chi2MomentTest chi2_moment_distribution_test(std::size_t N, double m2, std::size_t reps, std::uint64_t seed) {
  if (N < 2) throw InvalidInput("chi2 test: N must be >= 2");
  if (!(m2 > 0.0)) throw InvalidInput("chi2 test: m2 must be positive");
  Rng rng = make_stream(seed, 0, stream_domain::sampler);
  std::normal_distribution<double> normal(0.0, std::sqrt(m2));
  Chi2MomentTest out;
  out.statistics.resize(reps);
  std::vector<double> draw(N);
  for (std::size_t r = 0; r < reps; ++r) {
    for (auto& v : draw) v = normal(rng);
    out.statistics[r] = static_cast<double>(N) * central_moments(draw, 2)[2] / m2;
  }
  const double dof = static_cast<double>(N) - 1.0;
  out.ks_chi2 = stats::ks_statistic(out.statistics, [&](double s) { return stats::chi_squared_cdf(s, dof); });
  out.ks_normal =
      stats::ks_statistic(out.statistics, [&](double s) { return stats::normal_cdf((s - dof) / std::sqrt(2.0 * dof)); });
  out.p_chi2 = stats::ks_pvalue(out.ks_chi2, reps);
  out.p_normal = stats::ks_pvalue(out.ks_normal, reps);
  return out;
}

}  // namespace hafi
