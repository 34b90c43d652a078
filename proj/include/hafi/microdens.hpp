#pragma once

// Micro sampling densities p(y_it | z_t, theta).

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "hafi/errors.hpp"
#include "hafi/expfam.hpp"
#include "hafi/microdata.hpp"
#include "hafi/quadrature.hpp"
#include "hafi/random.hpp"
#include "hafi/stats.hpp"

namespace hafi {

/// Asset distribution: mass pi0 at zero, the rest spread by an
/// exponential-polynomial density.
struct MixtureAtZero {
  double pi0 = 0.0;
  ExpFamDensity cont;

  void validate() const {
    if (!(pi0 >= 0.0 && pi0 <= 1.0)) throw InvalidInput("MixtureAtZero: pi0 must lie in [0, 1]");
  }
};

struct HouseholdMicroParams {
  double w = 1.0;
  double r = 0.0;
  double tau = 0.0;
  double b = 0.15;
  double mu_lambda = -0.25;
  std::array<MixtureAtZero, 2> asset_dist;  // indexed by employment state
  double L = 0.9;

  double sigma2_lambda() const { return -2.0 * mu_lambda; }
  /// After-tax labor or benefit income before scaling by lambda.
  double xi(int eps) const { return w * ((1.0 - tau) * eps + b * (1.0 - eps)); }

  void validate() const {
    if (!(mu_lambda < 0.0) || !std::isfinite(mu_lambda))
      throw InvalidInput("HouseholdMicroParams: mu_lambda must be negative (sigma_lambda^2 = -2 mu_lambda > 0)");
    if (!(L > 0.0 && L < 1.0)) throw InvalidInput("HouseholdMicroParams: employment rate must lie in (0, 1)");
    if (!(1.0 + r > 0.0)) throw InvalidInput("HouseholdMicroParams: gross return must be positive");
    for (int e = 0; e < 2; ++e) {
      asset_dist[e].validate();
      if (!(xi(e) > 0.0)) throw InvalidInput("HouseholdMicroParams: non-positive income base for eps=" + std::to_string(e));
      if (asset_dist[e].pi0 < 1.0 && asset_dist[e].cont.support.lo < 0.0)
        throw InvalidInput("HouseholdMicroParams: asset support must be nonnegative");
    }
  }
};

/// Quadrature and interpolation settings for the income density.
struct IntegrationSpec {
  int panels = 8;          // composite Gauss-Legendre panels over the asset support
  int nodes = 32;          // nodes per panel
  int grid_nodes = 200;    // log-income grid for the cached interpolant
  double tail_sd = 8.0;    // grid covers this many sd of log lambda beyond the income-base range
  double tol = 1e-9;       // absolute tolerance on the coarse/fine quadrature difference
};

namespace detail {

// Continuous-asset part: int f(iota/Y)/Y g(a) da with Y = xi + (1+r) a.
inline double income_continuous_part(const HouseholdMicroParams& p, int eps, double iota, const IntegrationSpec& spec,
                                     int panels) {
  const auto& g = p.asset_dist[eps].cont;
  const double xi = p.xi(eps), gross = 1.0 + p.r, s2 = p.sigma2_lambda();
  // Outside this window log lambda = log(iota/Y) is beyond tail_sd sd of its
  // mean and the integrand is negligible; a small sd makes it a narrow spike.
  const double sd = std::sqrt(s2);
  const double a_lo = (iota * std::exp(-p.mu_lambda - spec.tail_sd * sd) - xi) / gross;
  const double a_hi = (iota * std::exp(-p.mu_lambda + spec.tail_sd * sd) - xi) / gross;
  const double lo = std::max(g.support.lo, a_lo), hi = std::min(g.support.hi, a_hi);
  if (!(lo < hi)) return 0.0;
  const MappedRule rule = composite_rule(lo, hi, panels, spec.nodes);
  double sum = 0.0;
  for (std::size_t k = 0; k < rule.x.size(); ++k) {
    const double y = xi + gross * rule.x[k];
    sum += rule.w[k] * stats::lognormal_pdf(iota / y, p.mu_lambda, s2) / y *
           std::exp(g.log_density_unchecked(rule.x[k]));
  }
  return sum;
}

inline double checked_continuous_part(const HouseholdMicroParams& p, int eps, double iota, const IntegrationSpec& spec) {
  const double coarse = income_continuous_part(p, eps, iota, spec, spec.panels);
  const double fine = income_continuous_part(p, eps, iota, spec, 2 * spec.panels);
  const double resid = std::abs(fine - coarse);
  if (!std::isfinite(fine) || resid > spec.tol)
    throw NonConvergence("income_density: quadrature did not settle at iota=" + std::to_string(iota), resid);
  return fine;
}

inline void check_eps(int eps) {
  if (eps != 0 && eps != 1) throw InvalidInput("employment state must be 0 or 1");
}

}  // namespace detail

/// Density of household income iota given employment eps, by direct quadrature.
inline double income_density(const HouseholdMicroParams& p, int eps, double iota, const IntegrationSpec& spec = {}) {
  detail::check_eps(eps);
  if (!(iota > 0.0) || !std::isfinite(iota)) throw InvalidInput("income_density: iota must be positive and finite");
  const auto& mix = p.asset_dist[eps];
  const double xi = p.xi(eps);
  double dens = mix.pi0 * stats::lognormal_pdf(iota / xi, p.mu_lambda, p.sigma2_lambda()) / xi;
  if (mix.pi0 < 1.0) dens += (1.0 - mix.pi0) * detail::checked_continuous_part(p, eps, iota, spec);
  return dens;
}

/// Income density for one (parameters, eps) pair with the continuous part
/// tabulated on an equal-spaced log-income grid and cubic-spline
/// interpolated. Read-only after construction.
class IncomeDensityTable {
 public:
  IncomeDensityTable(const HouseholdMicroParams& p, int eps, IntegrationSpec spec = {})
      : p_(p), eps_(eps), spec_(spec), pi0_(p.asset_dist[eps].pi0), xi_(p.xi(eps)) {
    detail::check_eps(eps);
    p.validate();
    if (spec.grid_nodes < 4) throw InvalidInput("IncomeDensityTable: need at least 4 grid nodes");
    if (pi0_ >= 1.0) return;
    const auto& sup = p.asset_dist[eps].cont.support;
    const double sd = std::sqrt(p.sigma2_lambda());
    u_lo_ = std::log(xi_ + (1.0 + p.r) * sup.lo) + p.mu_lambda - spec.tail_sd * sd;
    u_hi_ = std::log(xi_ + (1.0 + p.r) * sup.hi) + p.mu_lambda + spec.tail_sd * sd;
    const double step = (u_hi_ - u_lo_) / (spec.grid_nodes - 1);
    std::vector<double> h(static_cast<std::size_t>(spec.grid_nodes));
    // Tabulate the density of log iota, which is smooth and bounded.
    for (int k = 0; k < spec.grid_nodes; ++k) {
      const double iota = std::exp(u_lo_ + k * step);
      h[k] = iota * detail::checked_continuous_part(p, eps, iota, spec);
    }
    spline_ = std::make_shared<Spline>(h.begin(), h.end(), u_lo_, step);
  }

  double operator()(double iota) const {
    if (!(iota > 0.0) || !std::isfinite(iota)) throw InvalidInput("income_density: iota must be positive and finite");
    double dens = pi0_ * stats::lognormal_pdf(iota / xi_, p_.mu_lambda, p_.sigma2_lambda()) / xi_;
    if (pi0_ < 1.0) {
      const double u = std::log(iota);
      const double cont = (u >= u_lo_ && u <= u_hi_) ? std::max((*spline_)(u), 0.0) / iota
                                                     : detail::income_continuous_part(p_, eps_, iota, spec_, spec_.panels);
      dens += (1.0 - pi0_) * cont;
    }
    return dens;
  }

  double log_density(double iota) const { return std::log((*this)(iota)); }

 private:
  using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;
  HouseholdMicroParams p_;
  int eps_;
  IntegrationSpec spec_;
  double pi0_, xi_;
  double u_lo_ = 0.0, u_hi_ = 0.0;
  std::shared_ptr<const Spline> spline_;
};

// ---------------------------------------------------------------------------
// Selection-truncated densities

struct GaussianDensity {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  double log_pdf(const Eigen::VectorXd& y) const {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw InvalidInput("GaussianDensity: covariance not positive definite");
    const Eigen::VectorXd dev = llt.matrixL().solve(y - mean);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return -0.5 * (static_cast<double>(mean.size()) * stats::kLogTwoPi + logdet + dev.squaredNorm());
  }
  double operator()(const Eigen::VectorXd& y) const { return std::exp(log_pdf(y)); }
};

/// Selected iff c'y >= threshold.
struct LinearSelection {
  Eigen::VectorXd c;
  double threshold = -std::numeric_limits<double>::infinity();

  bool operator()(const Eigen::VectorXd& y) const { return c.dot(y) >= threshold; }
};

/// P(c'Y >= threshold) for Y Gaussian; c'Y is univariate normal.
inline double selection_probability(const GaussianDensity& base, const LinearSelection& sel) {
  if (sel.threshold == -std::numeric_limits<double>::infinity()) return 1.0;
  const double m = sel.c.dot(base.mean);
  const double v = sel.c.dot(base.cov * sel.c);
  if (!(v > 0.0)) return m >= sel.threshold ? 1.0 : 0.0;
  return stats::normal_sf((sel.threshold - m) / std::sqrt(v));
}

/// Selection mass of a bivariate base density over a box by tensor Gauss-Legendre.
template <class Base, class Pred>
double selection_probability_quadrature(const Base& base, const Pred& selected, std::array<Interval, 2> box,
                                        int panels = 32, int nodes = 16) {
  const MappedRule r0 = composite_rule(box[0].lo, box[0].hi, panels, nodes);
  const MappedRule r1 = composite_rule(box[1].lo, box[1].hi, panels, nodes);
  Eigen::VectorXd y(2);
  double mass = 0.0;
  for (std::size_t i = 0; i < r0.x.size(); ++i)
    for (std::size_t j = 0; j < r1.x.size(); ++j) {
      y << r0.x[i], r1.x[j];
      if (selected(y)) mass += r0.w[i] * r1.w[j] * base(y);
    }
  return mass;
}

/// base(y) 1{selected(y)} / P(selected).
template <class Base, class Pred>
class TruncatedDensity {
 public:
  TruncatedDensity(Base base, Pred selected, double mass)
      : base_(std::move(base)), selected_(std::move(selected)), mass_(mass) {
    if (!(mass > 0.0) || !std::isfinite(mass)) throw InvalidInput("truncated_density: selection probability must be positive");
  }

  double operator()(const Eigen::VectorXd& y) const { return selected_(y) ? base_(y) / mass_ : 0.0; }
  double mass() const { return mass_; }

 private:
  Base base_;
  Pred selected_;
  double mass_;
};

inline TruncatedDensity<GaussianDensity, LinearSelection> truncated_density(GaussianDensity base, LinearSelection sel) {
  const double mass = selection_probability(base, sel);
  return {std::move(base), std::move(sel), mass};
}

template <class Base, class Pred>
TruncatedDensity<Base, Pred> truncated_density(Base base, Pred selected, double mass) {
  return {std::move(base), std::move(selected), mass};
}

/// Firm-style selection: a firm with idiosyncratic productivity eps and
/// capital k has log employment
///   n = (log nu + zeta - log w + eps + alpha k) / (1 - nu)
/// and is observed only when n >= n_bar. (eps, k) is jointly Gaussian.
struct FirmSelectionParams {
  double nu = 0.64;
  double alpha = 0.0;
  double zeta = 0.0;
  double log_w = 0.0;
  double n_bar = -std::numeric_limits<double>::infinity();
  GaussianDensity eps_k;  // joint law of (eps, k)
};

class FirmSelectionDensity {
 public:
  explicit FirmSelectionDensity(FirmSelectionParams p) : p_(std::move(p)) {
    if (!(p_.nu > 0.0 && p_.nu < 1.0)) throw InvalidInput("FirmSelectionDensity: nu must lie in (0, 1)");
    if (p_.eps_k.mean.size() != 2) throw InvalidInput("FirmSelectionDensity: (eps, k) law must be bivariate");
    shift_ = std::log(p_.nu) + p_.zeta - p_.log_w;
    LinearSelection sel{Eigen::Vector2d(1.0, p_.alpha), (1.0 - p_.nu) * p_.n_bar - shift_};
    mass_ = hafi::selection_probability(p_.eps_k, sel);
    if (!(mass_ > 0.0)) throw InvalidInput("FirmSelectionDensity: zero selection probability");
  }

  /// Implied eps for an observed (n, k).
  double eps_of(double n, double k) const { return (1.0 - p_.nu) * n - p_.alpha * k - shift_; }
  double n_of(double eps, double k) const { return (shift_ + eps + p_.alpha * k) / (1.0 - p_.nu); }

  double log_density(double n, double k) const {
    if (n < p_.n_bar) return -std::numeric_limits<double>::infinity();
    return std::log1p(-p_.nu) + p_.eps_k.log_pdf(Eigen::Vector2d(eps_of(n, k), k)) - std::log(mass_);
  }
  double operator()(double n, double k) const { return std::exp(log_density(n, k)); }
  double selection_probability() const { return mass_; }
  const FirmSelectionParams& params() const { return p_; }

 private:
  FirmSelectionParams p_;
  double shift_ = 0.0;
  double mass_ = 1.0;
};

// ---------------------------------------------------------------------------
// Two-period panels

/// Next-period asset rule a'(a, eps) tabulated on a grid, interpolated by a
/// monotone cubic and extended linearly past the grid ends.
class SavingsPolicy {
 public:
  SavingsPolicy(std::vector<double> grid, std::array<std::vector<double>, 2> next) : grid_(std::move(grid)) {
    if (grid_.size() < 2) throw InvalidInput("SavingsPolicy: need at least two grid points");
    for (std::size_t k = 1; k < grid_.size(); ++k)
      if (!(grid_[k] > grid_[k - 1])) throw InvalidInput("SavingsPolicy: grid must be strictly increasing");
    for (int e = 0; e < 2; ++e) {
      const auto& v = next[e];
      if (v.size() != grid_.size()) throw InvalidInput("SavingsPolicy: policy values do not match the grid");
      for (std::size_t k = 1; k < v.size(); ++k)
        if (!(v[k] > v[k - 1])) throw InvalidInput("SavingsPolicy: policy must be strictly increasing in assets");
      const std::size_t n = v.size();
      lo_slope_[e] = (v[1] - v[0]) / (grid_[1] - grid_[0]);
      hi_slope_[e] = (v[n - 1] - v[n - 2]) / (grid_[n - 1] - grid_[n - 2]);
      lo_val_[e] = v.front();
      hi_val_[e] = v.back();
      if (n >= 4) {
        spline_[e] = std::make_shared<Pchip>(std::vector<double>(grid_), std::vector<double>(v));
      }
      values_[e] = v;
    }
  }

  /// a' = kappa a + c for both employment states.
  static SavingsPolicy linear(double kappa, double c, double lo, double hi) {
    std::vector<double> g{lo, lo + (hi - lo) / 3.0, lo + 2.0 * (hi - lo) / 3.0, hi};
    std::vector<double> v(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) v[k] = kappa * g[k] + c;
    return SavingsPolicy(g, {v, v});
  }

  double operator()(double a, int eps) const {
    if (a <= grid_.front()) return lo_val_[eps] + lo_slope_[eps] * (a - grid_.front());
    if (a >= grid_.back()) return hi_val_[eps] + hi_slope_[eps] * (a - grid_.back());
    if (spline_[eps]) return (*spline_[eps])(a);
    // Two or three points: piecewise linear.
    const auto it = std::upper_bound(grid_.begin(), grid_.end(), a);
    const std::size_t k = static_cast<std::size_t>(it - grid_.begin());
    const double t = (a - grid_[k - 1]) / (grid_[k] - grid_[k - 1]);
    return (1.0 - t) * values_[eps][k - 1] + t * values_[eps][k];
  }

  /// Central difference with h = max(1e-5, 1e-5 |a|); one-sided at the lower
  /// end of the asset support.
  double derivative(double a, int eps, double support_lo = -std::numeric_limits<double>::infinity()) const {
    const double h = std::max(1e-5, 1e-5 * std::abs(a));
    if (a - h < support_lo) return ((*this)(a + h, eps) - (*this)(a, eps)) / h;
    return ((*this)(a + h, eps) - (*this)(a - h, eps)) / (2.0 * h);
  }

 private:
  using Pchip = boost::math::interpolators::pchip<std::vector<double>>;
  std::vector<double> grid_;
  std::array<std::vector<double>, 2> values_;
  std::array<std::shared_ptr<const Pchip>, 2> spline_;
  std::array<double, 2> lo_slope_{}, hi_slope_{}, lo_val_{}, hi_val_{};
};

struct PanelParams {
  HouseholdMicroParams prev;  // period t-1 (its asset_dist is the law of a_{t-2})
  HouseholdMicroParams curr;  // period t
  double p01 = 0.5;           // P(eps_t = 1 | eps_{t-1} = 0)
  double p10 = 0.038;         // P(eps_t = 0 | eps_{t-1} = 1)

  double employment_probability(int eps_prev, int eps_curr) const {
    const double marginal = eps_prev == 1 ? prev.L : 1.0 - prev.L;
    const double stay_or_move = eps_prev == 1 ? (eps_curr == 1 ? 1.0 - p10 : p10) : (eps_curr == 1 ? p01 : 1.0 - p01);
    return marginal * stay_or_move;
  }
};

struct PanelOptions {
  int scan_cells = 512;  // grid cells for bracketing roots of the income-ratio equation
};

/// Density of (iota_{t-1}, iota_t) given (eps_{t-1}, eps_t) from the change
/// of variables (lambda, a_{t-2}) -> (iota_{t-1}, iota_t). Only the part
/// absolutely continuous in the income pair is returned: households with
/// a_{t-2} = 0 place their mass on a curve. Returns 0 when no state maps to
/// the observed pair.
inline double panel_income_density(const PanelParams& pp, const SavingsPolicy& policy, int eps_prev, int eps_curr,
                                   double iota_prev, double iota_curr, PanelOptions opts = {}) {
  detail::check_eps(eps_prev);
  detail::check_eps(eps_curr);
  if (!(iota_prev > 0.0) || !(iota_curr > 0.0)) throw InvalidInput("panel density: incomes must be positive");
  const auto& mix = pp.prev.asset_dist[eps_prev];
  if (mix.pi0 >= 1.0) return 0.0;
  const auto& g = mix.cont;
  const double xi1 = pp.prev.xi(eps_prev), R1 = 1.0 + pp.prev.r;
  const double xi2 = pp.curr.xi(eps_curr), R2 = 1.0 + pp.curr.r;
  const double target = iota_curr / iota_prev;

  auto resid = [&](double a) { return (xi2 + R2 * policy(a, eps_prev)) / (xi1 + R1 * a) - target; };

  const double lo = g.support.lo, hi = g.support.hi;
  const double step = (hi - lo) / opts.scan_cells;
  std::vector<double> roots;
  double a0 = lo, f0 = resid(a0);
  double spread = std::abs(f0);
  if (f0 == 0.0) roots.push_back(a0);
  for (int c = 1; c <= opts.scan_cells; ++c) {
    const double a1 = (c == opts.scan_cells) ? hi : lo + c * step;
    const double f1 = resid(a1);
    spread = std::max(spread, std::abs(f1));
    if (f1 == 0.0) {
      roots.push_back(a1);
    } else if (f0 != 0.0 && (f0 < 0.0) != (f1 < 0.0)) {
      double l = a0, r = a1, fl = f0;
      for (int it = 0; it < 200 && r - l > 1e-14 * std::max(1.0, std::abs(r)); ++it) {
        const double m = 0.5 * (l + r);
        const double fm = resid(m);
        if ((fm < 0.0) == (fl < 0.0)) {
          l = m;
          fl = fm;
        } else {
          r = m;
        }
      }
      roots.push_back(0.5 * (l + r));
    }
    a0 = a1;
    f0 = f1;
  }
  if (spread <= 1e-12 * std::max(1.0, target))
    throw InvalidInput("panel density: change of variables is degenerate (income ratio constant in assets)");

  const double s2 = pp.prev.sigma2_lambda();
  double dens = 0.0;
  for (double a : roots) {
    const double D = xi1 + R1 * a;
    const double N = xi2 + R2 * policy(a, eps_prev);
    const double dN = R2 * policy.derivative(a, eps_prev, lo);
    const double lambda = iota_prev / D;
    const double det = lambda * (D * dN - R1 * N);
    if (det == 0.0) throw InvalidInput("panel density: singular Jacobian at the inverted point");
    dens += stats::lognormal_pdf(lambda, pp.prev.mu_lambda, s2) * density_at(g, a) / std::abs(det);
  }
  return (1.0 - mix.pi0) * dens;
}

/// p(eps_{t-1}, eps_t) p(iota_{t-1}, iota_t | eps's).
inline double panel_two_period_density(const PanelParams& pp, const SavingsPolicy& policy, int eps_prev, int eps_curr,
                                       double iota_prev, double iota_curr, PanelOptions opts = {}) {
  return pp.employment_probability(eps_prev, eps_curr) *
         panel_income_density(pp, policy, eps_prev, eps_curr, iota_prev, iota_curr, opts);
}

// ---------------------------------------------------------------------------
// Sufficient statistics and simulation

using MicroStatistic = std::function<double(std::span<const double>)>;

/// (1/N) sum_i m_l(y_i) for each statistic.
inline std::vector<double> sufficient_statistics(const CrossSection& block, const std::vector<MicroStatistic>& stats) {
  if (block.size() == 0) throw InvalidInput("sufficient_statistics: empty cross section");
  std::vector<double> out(stats.size(), 0.0);
  for (std::size_t i = 0; i < block.size(); ++i) {
    const auto y = block.row(i);
    for (std::size_t l = 0; l < stats.size(); ++l) out[l] += stats[l](y);
  }
  for (double& v : out) v /= static_cast<double>(block.size());
  return out;
}

struct SimulatedHouseholds {
  std::vector<int> eps;
  std::vector<double> assets;  // a_{t-1}
  std::vector<double> lambda;
  std::vector<double> iota;

  /// Block with observables (eps, iota) and ids 1..N.
  CrossSection to_cross_section(int t) const {
    CrossSection cs;
    cs.t = t;
    cs.y.resize(static_cast<Eigen::Index>(iota.size()), 2);
    for (std::size_t i = 0; i < iota.size(); ++i) {
      cs.ids.push_back(static_cast<std::int64_t>(i + 1));
      cs.y(static_cast<Eigen::Index>(i), 0) = eps[i];
      cs.y(static_cast<Eigen::Index>(i), 1) = iota[i];
    }
    return cs;
  }
};

/// Draws N households: eps ~ Bernoulli(L), assets from the mixture
/// (exactly 0 with probability pi0), lambda lognormal with E[lambda] = 1.
inline SimulatedHouseholds simulate_cross_section(const HouseholdMicroParams& p, std::size_t N, std::uint64_t seed) {
  if (N == 0) throw InvalidInput("simulate_cross_section: N must be >= 1");
  p.validate();
  std::array<std::optional<InverseCdf>, 2> inv;
  for (int e = 0; e < 2; ++e)
    if (p.asset_dist[e].pi0 < 1.0) inv[e].emplace(p.asset_dist[e].cont);
  Rng rng = make_stream(seed, 0, stream_domain::cross_section);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(p.sigma2_lambda());
  SimulatedHouseholds out;
  out.eps.resize(N);
  out.assets.resize(N);
  out.lambda.resize(N);
  out.iota.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    const int e = unif(rng) < p.L ? 1 : 0;
    const double u_mix = unif(rng);
    const double u_a = unif(rng);
    const double a = u_mix < p.asset_dist[e].pi0 ? 0.0 : (*inv[e])(u_a);
    const double lambda = std::exp(p.mu_lambda + sd * normal(rng));
    out.eps[i] = e;
    out.assets[i] = a;
    out.lambda[i] = lambda;
    out.iota[i] = lambda * (p.xi(e) + (1.0 + p.r) * a);
  }
  return out;
}

struct SimulatedPanelPairs {
  std::vector<int> eps_prev, eps_curr;
  std::vector<double> iota_prev, iota_curr;
};

/// Draws N two-period household records consistent with panel_two_period_density.
inline SimulatedPanelPairs simulate_panel_pairs(const PanelParams& pp, const SavingsPolicy& policy, std::size_t N,
                                                std::uint64_t seed) {
  if (N == 0) throw InvalidInput("simulate_panel_pairs: N must be >= 1");
  pp.prev.validate();
  pp.curr.validate();
  std::array<std::optional<InverseCdf>, 2> inv;
  for (int e = 0; e < 2; ++e)
    if (pp.prev.asset_dist[e].pi0 < 1.0) inv[e].emplace(pp.prev.asset_dist[e].cont);
  Rng rng = make_stream(seed, 1, stream_domain::cross_section);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(pp.prev.sigma2_lambda());
  SimulatedPanelPairs out;
  for (std::size_t i = 0; i < N; ++i) {
    const int e1 = unif(rng) < pp.prev.L ? 1 : 0;
    const double stay = unif(rng);
    const int e2 = e1 == 1 ? (stay < pp.p10 ? 0 : 1) : (stay < pp.p01 ? 1 : 0);
    const double u_mix = unif(rng);
    const double u_a = unif(rng);
    const double a = u_mix < pp.prev.asset_dist[e1].pi0 ? 0.0 : (*inv[e1])(u_a);
    const double lambda = std::exp(pp.prev.mu_lambda + sd * normal(rng));
    out.eps_prev.push_back(e1);
    out.eps_curr.push_back(e2);
    out.iota_prev.push_back(lambda * (pp.prev.xi(e1) + (1.0 + pp.prev.r) * a));
    out.iota_curr.push_back(lambda * (pp.curr.xi(e2) + (1.0 + pp.curr.r) * policy(a, e1)));
  }
  return out;
}

}  // namespace hafi
