#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hafi/errors.hpp"

namespace hafi {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Micro observations at one time t. In panel mode every record also carries
/// its value at t_prev = t - 1.
struct CrossSection {
  int t = 0;
  std::vector<std::int64_t> ids;
  RowMatrix y;  // N_t x d
  std::optional<RowMatrix> y_prev;

  std::size_t size() const { return ids.size(); }
  std::span<const double> row(std::size_t i) const {
    return {y.data() + static_cast<Eigen::Index>(i) * y.cols(), static_cast<std::size_t>(y.cols())};
  }
  std::span<const double> prev_row(std::size_t i) const {
    return {y_prev->data() + static_cast<Eigen::Index>(i) * y_prev->cols(), static_cast<std::size_t>(y_prev->cols())};
  }
};

/// Repeated cross sections (optionally two-period panels) indexed by time.
struct MicroDataset {
  std::vector<std::string> observables;  // column names of y, e.g. {"eps", "iota"}
  std::vector<CrossSection> blocks;      // strictly increasing t

  bool panel() const { return !blocks.empty() && blocks.front().y_prev.has_value(); }

  std::vector<int> times() const {
    std::vector<int> out;
    out.reserve(blocks.size());
    for (const auto& b : blocks) out.push_back(b.t);
    return out;
  }

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.size();
    return n;
  }

  void validate() const {
    const auto d = static_cast<Eigen::Index>(observables.size());
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      const auto& b = blocks[k];
      if (k > 0 && b.t <= blocks[k - 1].t) throw InvalidInput("MicroDataset: time blocks must be strictly increasing");
      if (b.y.rows() != static_cast<Eigen::Index>(b.ids.size()) || b.y.cols() != d)
        throw InvalidInput("MicroDataset: block at t=" + std::to_string(b.t) + " has inconsistent dimensions");
      std::set<std::int64_t> seen(b.ids.begin(), b.ids.end());
      if (seen.size() != b.ids.size())
        throw InvalidInput("MicroDataset: duplicate unit ids at t=" + std::to_string(b.t));
      if (b.y_prev.has_value() != panel()) throw InvalidInput("MicroDataset: mixed panel and cross-section blocks");
      if (b.y_prev && (b.y_prev->rows() != b.y.rows() || b.y_prev->cols() != d))
        throw InvalidInput("MicroDataset: lagged records at t=" + std::to_string(b.t) + " have inconsistent dimensions");
    }
  }

  const CrossSection* find(int t) const {
    auto it = std::lower_bound(blocks.begin(), blocks.end(), t, [](const CrossSection& b, int v) { return b.t < v; });
    return (it != blocks.end() && it->t == t) ? &*it : nullptr;
  }
};

}  // namespace hafi
