#pragma once

// Interfaces shared by the likelihood, moment and sampling layers.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hafi/errors.hpp"
#include "hafi/microdata.hpp"
#include "hafi/statespace.hpp"

namespace hafi {

/// Micro density for one period with the macro states held fixed.
class PeriodDensity {
 public:
  virtual ~PeriodDensity() = default;
  /// log p(y_i | z, theta) for record i of the block (panel records may read
  /// the lagged row).
  virtual double log_density(const CrossSection& block, std::size_t i) const = 0;
};

/// theta-specific family of period densities.
class MicroDensityFamily {
 public:
  virtual ~MicroDensityFamily() = default;
  /// Density for period t (1-based); row t-1 of z_path holds z_t.
  virtual std::unique_ptr<const PeriodDensity> at(const Eigen::MatrixXd& z_path, int t) const = 0;
};

struct MomentLabel {
  int group = 0;  // e.g. employment state
  int order = 1;  // 1 = mean, 2 = variance, 3 = third central moment
  bool operator==(const MomentLabel&) const = default;
};

/// Population cross-sectional moments as an affine function of z_t:
/// moments = intercept + loading * z_t.
struct AffineMomentMap {
  std::vector<MomentLabel> labels;
  Eigen::VectorXd intercept;
  Eigen::MatrixXd loading;
};

struct Parameter {
  std::string name;
  double value = 0.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool free = false;
};

/// Named parameters, of which a subset is estimated. Builders take the full
/// vector; samplers work on the free subvector.
class ParameterSpace {
 public:
  ParameterSpace() = default;
  explicit ParameterSpace(std::vector<Parameter> params) : params_(std::move(params)) {}

  const std::vector<Parameter>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }

  std::size_t index(const std::string& name) const {
    for (std::size_t k = 0; k < params_.size(); ++k)
      if (params_[k].name == name) return k;
    throw InvalidInput("unknown parameter '" + name + "'");
  }
  Parameter& operator[](const std::string& name) { return params_[index(name)]; }
  const Parameter& operator[](const std::string& name) const { return params_[index(name)]; }

  void set_free(const std::vector<std::string>& names) {
    for (auto& p : params_) p.free = false;
    for (const auto& n : names) (*this)[n].free = true;
  }

  std::vector<std::size_t> free_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < params_.size(); ++k)
      if (params_[k].free) out.push_back(k);
    return out;
  }
  std::vector<std::string> free_names() const {
    std::vector<std::string> out;
    for (auto k : free_indices()) out.push_back(params_[k].name);
    return out;
  }

  Eigen::VectorXd full_values() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(params_.size()));
    for (std::size_t k = 0; k < params_.size(); ++k) v[static_cast<Eigen::Index>(k)] = params_[k].value;
    return v;
  }
  Eigen::VectorXd free_values() const { return gather(full_values()); }

  /// Full vector with the free entries replaced.
  Eigen::VectorXd expand(const Eigen::VectorXd& free) const {
    const auto idx = free_indices();
    if (static_cast<std::size_t>(free.size()) != idx.size())
      throw InvalidInput("expected " + std::to_string(idx.size()) + " free parameters, got " +
                         std::to_string(free.size()));
    Eigen::VectorXd v = full_values();
    for (std::size_t k = 0; k < idx.size(); ++k) v[static_cast<Eigen::Index>(idx[k])] = free[static_cast<Eigen::Index>(k)];
    return v;
  }
  Eigen::VectorXd gather(const Eigen::VectorXd& full) const {
    const auto idx = free_indices();
    Eigen::VectorXd v(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) v[static_cast<Eigen::Index>(k)] = full[static_cast<Eigen::Index>(idx[k])];
    return v;
  }

  Eigen::VectorXd free_lower() const { return bound(true); }
  Eigen::VectorXd free_upper() const { return bound(false); }

  bool in_box(const Eigen::VectorXd& free) const {
    const auto lo = free_lower(), hi = free_upper();
    for (Eigen::Index k = 0; k < free.size(); ++k)
      if (!(free[k] >= lo[k] && free[k] <= hi[k])) return false;
    return true;
  }

 private:
  Eigen::VectorXd bound(bool lower) const {
    const auto idx = free_indices();
    Eigen::VectorXd v(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k)
      v[static_cast<Eigen::Index>(k)] = lower ? params_[idx[k]].lo : params_[idx[k]].hi;
    return v;
  }

  std::vector<Parameter> params_;
};

/// Maps a full parameter vector to the model's state space, micro density
/// family and, optionally, the affine moment map. Implementations are
/// immutable and their builders deterministic in theta.
class ModelProvider {
 public:
  virtual ~ModelProvider() = default;
  virtual std::string name() const = 0;
  virtual const ParameterSpace& parameters() const = 0;
  virtual StateSpaceModel state_space(const Eigen::VectorXd& theta) const = 0;
  virtual std::shared_ptr<const MicroDensityFamily> micro_family(const Eigen::VectorXd& theta) const = 0;
  virtual std::optional<AffineMomentMap> moment_map(const Eigen::VectorXd& /*theta*/) const { return std::nullopt; }
  /// Names of the micro observable columns.
  virtual std::vector<std::string> micro_observables() const = 0;
  /// Simulates the micro block at time t given the realized state z_t.
  virtual CrossSection simulate_micro(const Eigen::VectorXd& theta, const Eigen::MatrixXd& z_path, int t,
                                      std::size_t N, std::uint64_t seed) const = 0;
};

}  // namespace hafi
