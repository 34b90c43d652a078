#pragma once

// Exponential-polynomial densities on a finite interval, parametrized by
// their mean and central moments:
//   g(a) = exp{ phi_0 + phi_1 (a - m1) + sum_{l=2..q} phi_l [ (a - m1)^l - m_l ] },  a in [lo, hi]

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

// Boost 1.74's pchip calls isnan unqualified.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>

#include "hafi/errors.hpp"
#include "hafi/quadrature.hpp"
#include "hafi/random.hpp"

namespace hafi {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
  bool contains(double a) const { return a >= lo && a <= hi; }
};

struct ExpFamQuadrature {
  int nodes = 64;
};

struct ExpFamFitOptions {
  double tol = 1e-10;
  int max_iter = 200;
};

struct ExpFamDensity {
  int q = 1;
  Interval support;
  double m1 = 0.0;
  std::vector<double> central_moments;  // m_2..m_q
  std::vector<double> coeffs;           // phi_0..phi_q
  ExpFamQuadrature quad;
  int iterations = 0;
  double residual = 0.0;

  double central_moment(int l) const { return central_moments.at(static_cast<std::size_t>(l - 2)); }

  // Exponent at a, without the support check.
  double log_density_unchecked(double a) const {
    const double d = a - m1;
    double e = coeffs[0] + coeffs[1] * d;
    double p = d;
    for (int l = 2; l <= q; ++l) {
      p *= d;
      e += coeffs[l] * (p - central_moments[l - 2]);
    }
    return e;
  }
};

namespace detail {

inline void check_moment_feasibility(int q, const Interval& support, double m1, const std::vector<double>& cm) {
  if (q < 1) throw InvalidInput("expfam: order q must be >= 1");
  if (!(support.lo < support.hi) || !std::isfinite(support.lo) || !std::isfinite(support.hi))
    throw InvalidInput("expfam: support must be a finite interval with lo < hi");
  if (static_cast<int>(cm.size()) != q - 1)
    throw InvalidInput("expfam: expected " + std::to_string(q - 1) + " central moments, got " +
                       std::to_string(cm.size()));
  if (!std::isfinite(m1) || !(m1 > support.lo && m1 < support.hi))
    throw InfeasibleMoments("expfam: mean " + std::to_string(m1) + " not inside the support");
  for (double m : cm)
    if (!std::isfinite(m)) throw InfeasibleMoments("expfam: non-finite moment");
  if (q >= 2) {
    const double m2 = cm[0];
    const double max_var = (m1 - support.lo) * (support.hi - m1);
    if (!(m2 > 0.0)) throw InfeasibleMoments("expfam: variance must be positive");
    if (!(m2 < max_var))
      throw InfeasibleMoments("expfam: variance " + std::to_string(m2) + " exceeds the maximum " +
                              std::to_string(max_var) + " attainable on the support");
  }
  for (int l = 4; l <= q; l += 2)
    if (!(cm[l - 2] > 0.0)) throw InfeasibleMoments("expfam: even central moments must be positive");
  if (q >= 4) {
    const double m2 = cm[0], m3 = cm[1], m4 = cm[2];
    if (!(m4 * m2 - m3 * m3 - m2 * m2 * m2 > 0.0))
      throw InfeasibleMoments("expfam: moments violate the Hankel positivity condition");
  }
}

}  // namespace detail

/// Solves for phi_0..phi_q matching mean m1 and central moments m_2..m_q by
/// damped Newton from the uniform density. Throws InfeasibleMoments for
/// moment sets that no density on the support can have and NonConvergence
/// when the residual does not reach tol.
inline ExpFamDensity fit_coefficients(int q, Interval support, double m1, std::vector<double> central_moments,
                                      ExpFamQuadrature quad = {}, ExpFamFitOptions opts = {}) {
  detail::check_moment_feasibility(q, support, m1, central_moments);
  const MappedRule rule = map_rule(gauss_legendre(quad.nodes), support.lo, support.hi);
  const std::size_t n = rule.x.size();

  // Work in u = (a - m1)/s so the polynomial features are O(1).
  const double s = 0.5 * support.width();
  Eigen::MatrixXd H(n, q);  // features h_l(u), l = 1..q
  Eigen::VectorXd log_w(n);
  std::vector<double> scaled_target(q + 1, 0.0);
  for (int l = 2; l <= q; ++l) scaled_target[l] = central_moments[l - 2] / std::pow(s, l);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (rule.x[i] - m1) / s;
    double p = 1.0;
    for (int l = 1; l <= q; ++l) {
      p *= u;
      H(i, l - 1) = p - scaled_target[l];
    }
    log_w[i] = std::log(rule.w[i]);
  }

  struct State {
    Eigen::VectorXd phi, prob, resid;
    double log_z = 0.0, norm = 0.0;
  };
  auto evaluate = [&](const Eigen::VectorXd& phi) {
    State st;
    st.phi = phi;
    const Eigen::VectorXd e = log_w + H * phi;
    const double mx = e.maxCoeff();
    st.prob = (e.array() - mx).exp().matrix();
    const double total = st.prob.sum();
    st.prob /= total;
    st.log_z = mx + std::log(total);
    st.resid = H.transpose() * st.prob;
    double worst = 0.0;
    for (int l = 1; l <= q; ++l) worst = std::max(worst, std::abs(st.resid[l - 1]) * std::pow(s, l));
    st.norm = worst;
    return st;
  };

  State cur = evaluate(Eigen::VectorXd::Zero(q));
  int iter = 0;
  for (; iter < opts.max_iter && !(cur.norm <= opts.tol); ++iter) {
    const Eigen::MatrixXd Hc = H.rowwise() - cur.resid.transpose();
    const Eigen::MatrixXd J = Hc.transpose() * cur.prob.asDiagonal() * Hc;
    const Eigen::VectorXd step = -J.ldlt().solve(cur.resid);
    if (!step.allFinite()) break;
    double alpha = 1.0;
    bool improved = false;
    for (int halving = 0; halving < 60; ++halving, alpha *= 0.5) {
      State trial = evaluate(cur.phi + alpha * step);
      if (std::isfinite(trial.norm) && trial.norm < cur.norm) {
        cur = std::move(trial);
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  if (!(cur.norm <= opts.tol))
    throw NonConvergence("expfam: moment matching did not converge after " + std::to_string(iter) + " iterations",
                         cur.norm);

  ExpFamDensity d;
  d.q = q;
  d.support = support;
  d.m1 = m1;
  d.central_moments = std::move(central_moments);
  d.quad = quad;
  d.iterations = iter;
  d.residual = cur.norm;
  d.coeffs.assign(q + 1, 0.0);
  // log g(a) = sum_l phi~_l h_l(u) - log_z with h_l(u) = ((a-m1)^l - m_l)/s^l; the
  // quadrature weights are on the a-scale, so log_z normalizes g in a.
  d.coeffs[0] = -cur.log_z;
  for (int l = 1; l <= q; ++l) d.coeffs[l] = cur.phi[l - 1] / std::pow(s, l);
  return d;
}

/// g(a); zero outside the support.
inline double density_at(const ExpFamDensity& d, double a) {
  if (!d.support.contains(a)) return 0.0;
  return std::exp(d.log_density_unchecked(a));
}

struct MomentSummary {
  double mass = 0.0;
  double mean = 0.0;
  std::vector<double> central;  // central[k] = E[(a - mean)^k]; central[0] = 1, central[1] = 0

  double operator[](int k) const { return central.at(static_cast<std::size_t>(k)); }
};

/// Quadrature mass, mean and central moments up to max_order.
inline MomentSummary moments_of(const ExpFamDensity& d, int max_order) {
  const MappedRule rule = map_rule(gauss_legendre(d.quad.nodes), d.support.lo, d.support.hi);
  MomentSummary out;
  std::vector<double> g(rule.x.size());
  for (std::size_t i = 0; i < rule.x.size(); ++i) {
    g[i] = rule.w[i] * std::exp(d.log_density_unchecked(rule.x[i]));
    out.mass += g[i];
    out.mean += g[i] * rule.x[i];
  }
  out.mean /= out.mass;
  out.central.assign(static_cast<std::size_t>(std::max(max_order, 1)) + 1, 0.0);
  out.central[0] = 1.0;
  for (std::size_t i = 0; i < rule.x.size(); ++i) {
    const double dev = rule.x[i] - out.mean;
    double p = dev;
    for (int k = 2; k <= max_order; ++k) {
      p *= dev;
      out.central[k] += g[i] * p;
    }
  }
  for (int k = 2; k <= max_order; ++k) out.central[k] /= out.mass;
  return out;
}

/// P(A <= a).
inline double cdf_at(const ExpFamDensity& d, double a) {
  if (a <= d.support.lo) return 0.0;
  if (a >= d.support.hi) return 1.0;
  const MappedRule rule = map_rule(gauss_legendre(d.quad.nodes), d.support.lo, a);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.x.size(); ++i) sum += rule.w[i] * std::exp(d.log_density_unchecked(rule.x[i]));
  return std::clamp(sum, 0.0, 1.0);
}

/// Inverse CDF on a precomputed monotone grid (piecewise cubic Hermite,
/// monotonicity preserving).
class InverseCdf {
 public:
  explicit InverseCdf(const ExpFamDensity& d, int cells = 1024) : lo_(d.support.lo), hi_(d.support.hi) {
    const auto& rule = gauss_legendre(8);
    const double h = d.support.width() / cells;
    std::vector<double> F{0.0}, a{lo_};
    double acc = 0.0;
    for (int c = 0; c < cells; ++c) {
      const auto part = map_rule(rule, lo_ + c * h, lo_ + (c + 1) * h);
      for (std::size_t i = 0; i < part.x.size(); ++i) acc += part.w[i] * std::exp(d.log_density_unchecked(part.x[i]));
      // Skip flat stretches (underflowed tails) so the abscissae stay strictly increasing.
      if (acc > F.back()) {
        F.push_back(acc);
        a.push_back(lo_ + (c + 1) * h);
      }
    }
    if (F.size() < 4) throw InvalidInput("InverseCdf: density has too few cells with positive mass");
    for (double& f : F) f /= acc;
    F.back() = 1.0;
    spline_ = std::make_shared<Spline>(std::move(F), std::move(a));
  }

  double operator()(double u) const {
    if (u <= 0.0) return lo_;
    if (u >= 1.0) return hi_;
    return std::clamp((*spline_)(u), lo_, hi_);
  }

 private:
  using Spline = boost::math::interpolators::pchip<std::vector<double>>;
  double lo_, hi_;
  std::shared_ptr<const Spline> spline_;
};

/// n draws by inverse-CDF transform; deterministic given seed.
inline std::vector<double> sample(const ExpFamDensity& d, std::size_t n, std::uint64_t seed) {
  const InverseCdf inv(d);
  Rng rng = make_stream(seed, 0, stream_domain::sampler);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = inv(unif(rng));
  return out;
}

}  // namespace hafi
