#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "hafi/errors.hpp"

namespace hafi {

/// Gauss–Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int size() const { return static_cast<int>(nodes.size()); }
};

namespace detail {

inline GaussLegendreRule compute_gauss_legendre(int n) {
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (x * p0 - p1) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

}  // namespace detail

/// Cached rule with n nodes; safe to call concurrently.
inline const GaussLegendreRule& gauss_legendre(int n) {
  if (n < 1) throw InvalidInput("gauss_legendre: node count must be >= 1");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<const GaussLegendreRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<const GaussLegendreRule>(detail::compute_gauss_legendre(n));
  return *slot;
}

/// Nodes/weights of an n-point rule mapped to [lo, hi].
struct MappedRule {
  std::vector<double> x;
  std::vector<double> w;
};

inline MappedRule map_rule(const GaussLegendreRule& rule, double lo, double hi) {
  MappedRule out;
  const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  out.x.resize(rule.nodes.size());
  out.w.resize(rule.nodes.size());
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    out.x[i] = mid + half * rule.nodes[i];
    out.w[i] = half * rule.weights[i];
  }
  return out;
}

/// Composite rule: `panels` equal sub-intervals, each with an n-point rule.
inline MappedRule composite_rule(double lo, double hi, int panels, int nodes_per_panel) {
  const auto& rule = gauss_legendre(nodes_per_panel);
  MappedRule out;
  out.x.reserve(static_cast<std::size_t>(panels) * nodes_per_panel);
  out.w.reserve(out.x.capacity());
  const double width = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const auto part = map_rule(rule, lo + p * width, lo + (p + 1) * width);
    out.x.insert(out.x.end(), part.x.begin(), part.x.end());
    out.w.insert(out.w.end(), part.w.begin(), part.w.end());
  }
  return out;
}

template <class F>
double integrate(F&& f, double lo, double hi, int panels = 1, int nodes_per_panel = 32) {
  const auto rule = composite_rule(lo, hi, panels, nodes_per_panel);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.x.size(); ++i) sum += rule.w[i] * f(rule.x[i]);
  return sum;
}

}  // namespace hafi
