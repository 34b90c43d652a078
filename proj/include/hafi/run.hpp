#pragma once

// Estimators per method and log-likelihood curves over a parameter grid.

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hafi/config.hpp"
#include "hafi/errors.hpp"
#include "hafi/likelihood.hpp"
#include "hafi/mcmc.hpp"
#include "hafi/momentbased.hpp"
#include "hafi/provider.hpp"
#include "hafi/random.hpp"

namespace hafi {

/// Log-likelihood pieces at one full parameter vector.
struct LogLikPieces {
  double macro = 0.0;
  double micro = 0.0;  // full-info: micro estimate; moments: moment loglik minus macro
  double total() const { return macro + micro; }
};

/// Data-dependent pieces shared by all evaluations of one method.
class MethodEvaluator {
 public:
  MethodEvaluator(std::shared_ptr<const ModelProvider> provider, Method method, Eigen::MatrixXd x, MicroDataset micro,
                  MomentSpec spec, int J, unsigned workers = 1)
      : provider_(std::move(provider)), method_(method), x_(std::move(x)), micro_(std::move(micro)), J_(J),
        workers_(workers) {
    if (x_.cols() != provider_->state_space(provider_->parameters().full_values()).obs_dim())
      throw InvalidInput("macro data has " + std::to_string(x_.cols()) + " series, model expects " +
                         std::to_string(provider_->state_space(provider_->parameters().full_values()).obs_dim()));
    if (method_.kind == MethodKind::full_info && J_ < 1) throw InvalidInput("full-info needs J >= 1 smoothing draws");
    if (method_.kind == MethodKind::moments) {
      if (micro_.blocks.empty()) throw InvalidInput("moment-based methods need micro data");
      series_ = build_moment_series(micro_, spec, 3);
      vcv_ = moment_vcv(pooled_moments(micro_, spec));
    }
  }

  const Method& method() const { return method_; }
  int J() const { return method_.kind == MethodKind::full_info ? J_ : 0; }

  /// Throws on parameters the model rejects.
  LogLikPieces evaluate(const Eigen::VectorXd& theta, std::uint64_t seed) const {
    LogLikPieces out;
    switch (method_.kind) {
      case MethodKind::macro_only:
        out.macro = macro_loglik(*provider_, theta, x_);
        break;
      case MethodKind::full_info: {
        const auto est = full_info_loglik(*provider_, theta, x_, micro_, J_, seed, workers_);
        out.macro = est.macro_loglik;
        out.micro = est.micro_loglik_estimate;
        break;
      }
      case MethodKind::moments:
        out.macro = macro_loglik(*provider_, theta, x_);
        out.micro = moment_loglik(*provider_, theta, x_, series_, *vcv_, method_.order) - out.macro;
        break;
    }
    return out;
  }

  /// Estimator over the free parameters for the sampler. Parameter values the
  /// model cannot represent (non-stationary, infeasible distributions,
  /// singular forecasts) get log-likelihood -inf.
  LogLikEstimator estimator() const {
    return [this](const Eigen::VectorXd& free, std::uint64_t seed) {
      try {
        const double v = evaluate(provider_->parameters().expand(free), seed).total();
        return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
      } catch (const NonStationary&) {
      } catch (const InfeasibleMoments&) {
      } catch (const SingularForecast&) {
      } catch (const NonConvergence&) {
      } catch (const InvalidInput&) {
      }
      return -std::numeric_limits<double>::infinity();
    };
  }

 private:
  std::shared_ptr<const ModelProvider> provider_;
  Method method_;
  Eigen::MatrixXd x_;
  MicroDataset micro_;
  int J_;
  unsigned workers_;
  MomentSeries series_;
  std::optional<MomentVcv> vcv_;
};

struct CurvePoint {
  double value = 0.0;
  LogLikPieces ll;
  std::uint64_t seed = 0;
  double normalized = 0.0;  // total minus the curve maximum
};

/// Log-likelihood over a grid of one parameter with the others at their
/// configured values. With fix_seed every grid point reuses `seed`, so
/// simulation noise does not vary along the curve.
inline std::vector<CurvePoint> loglik_curve(const MethodEvaluator& ev, const ModelProvider& provider,
                                            const std::string& parameter, const std::vector<double>& grid,
                                            std::uint64_t seed, bool fix_seed) {
  const auto idx = static_cast<Eigen::Index>(provider.parameters().index(parameter));
  std::vector<CurvePoint> out;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Eigen::VectorXd theta = provider.parameters().full_values();
    theta[idx] = grid[k];
    CurvePoint p;
    p.value = grid[k];
    p.seed = fix_seed ? seed : derive_seed(seed, k, stream_domain::likelihood);
    p.ll = ev.evaluate(theta, p.seed);
    best = std::max(best, p.ll.total());
    out.push_back(p);
  }
  for (auto& p : out) p.normalized = p.ll.total() - best;
  return out;
}

inline std::vector<double> linear_grid(double lo, double hi, int points) {
  if (!(lo < hi) || points < 2) throw InvalidInput("grid needs lo < hi and at least 2 points");
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) g[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / (points - 1);
  return g;
}

}  // namespace hafi
