#pragma once

// TOML run configuration: provider choice and parameters, simulation design,
// estimation settings and log-likelihood grids.
//
//   schema = 1
//   model = "toy" | "household"
//   [parameters.<name>]  value, lo, hi, free
//   [household]          structural settings (household only)
//   [simulate]           T, times | every, N, seed
//   [estimate]           method, J, draws, burn_in, seed, chains, grid_points, adaptation
//   [moments]            group_column, value_column, groups
//   [loglik]             parameter, lo, hi, points, methods
//   [data]               macro, micro (relative to the config file)

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <toml.hpp>

#include "hafi/errors.hpp"
#include "hafi/mcmc.hpp"
#include "hafi/models/household.hpp"
#include "hafi/models/toy.hpp"
#include "hafi/momentbased.hpp"
#include "hafi/provider.hpp"

namespace hafi {

enum class MethodKind { full_info, macro_only, moments };

struct Method {
  MethodKind kind = MethodKind::full_info;
  int order = 0;  // moments only

  std::string name() const {
    switch (kind) {
      case MethodKind::full_info: return "full-info";
      case MethodKind::macro_only: return "macro-only";
      default: return "moments-" + std::to_string(order);
    }
  }
};

/// Accepts full-info, macro-only, moments-1..3, or "moments" with an explicit order.
inline Method parse_method(const std::string& s, std::optional<int> order = std::nullopt) {
  if (s == "full-info") return {MethodKind::full_info, 0};
  if (s == "macro-only") return {MethodKind::macro_only, 0};
  int k = 0;
  if (s == "moments") {
    if (!order) throw InvalidInput("method 'moments' needs an order (1, 2 or 3)");
    k = *order;
  } else if (s.rfind("moments-", 0) == 0 && s.size() == 9) {
    k = s[8] - '0';
  } else {
    throw InvalidInput("unknown method '" + s + "' (expected full-info, macro-only, moments-1, moments-2, moments-3)");
  }
  if (k < 1 || k > 3) throw InvalidInput("moment order must be 1, 2 or 3");
  return {MethodKind::moments, k};
}

struct SimulateSettings {
  int T = 100;
  std::vector<int> times;
  std::size_t N = 1000;
  std::uint64_t seed = 1;
};

struct EstimateSettings {
  Method method;
  int J = 10;
  int draws = 10000;
  int burn_in = 1000;
  std::uint64_t seed = 1;
  int chains = 1;
  int grid_points = 0;  // per free parameter; 0 starts at the configured values
  int grid_J = 1;
  double target_accept = 0.234;
  double adapted_weight = 0.95;
  double diffuse_scale = 0.1;
  double decay = 0.6;
  int adapt_after = 100;
};

struct MomentSettings {
  std::optional<std::string> group_column;
  std::string value_column;
  int groups = 1;
};

struct LoglikSettings {
  std::string parameter;
  double lo = 0.0, hi = 0.0;
  int points = 21;
  std::vector<Method> methods;
};

struct RunConfig {
  std::filesystem::path path;
  std::string text;  // raw file contents, hashed into manifests
  std::string model;
  std::shared_ptr<ModelProvider> provider;
  SimulateSettings simulate;
  EstimateSettings estimate;
  MomentSettings moments;
  std::optional<LoglikSettings> loglik;
  std::optional<std::filesystem::path> macro_path, micro_path;

  MomentSpec moment_spec() const {
    const auto obs = provider->micro_observables();
    const auto col = [&](const std::string& name) {
      for (std::size_t k = 0; k < obs.size(); ++k)
        if (obs[k] == name) return static_cast<int>(k);
      throw InvalidInput("config: unknown micro observable '" + name + "'");
    };
    MomentSpec spec;
    spec.value_column = col(moments.value_column);
    if (moments.group_column) spec.group_column = col(*moments.group_column);
    spec.groups = moments.groups;
    return spec;
  }

  MhSettings mh_settings() const {
    MhSettings s;
    const auto& space = provider->parameters();
    s.n_draws = estimate.draws;
    s.burn_in = estimate.burn_in;
    s.target_accept = estimate.target_accept;
    s.adapted_weight = estimate.adapted_weight;
    s.diffuse_scale = estimate.diffuse_scale;
    s.decay = estimate.decay;
    s.adapt_after = estimate.adapt_after;
    s.initial = space.free_values();
    s.lower = space.free_lower();
    s.upper = space.free_upper();
    return s;
  }
};

namespace detail {

template <class T>
T get_or(const toml::table& t, std::string_view key, T fallback) {
  if (!t.contains(key)) return fallback;
  if constexpr (std::is_same_v<T, std::string>) {
    auto v = t[key].value<std::string>();
    if (!v) throw InvalidInput("config: '" + std::string(key) + "' must be a string");
    return *v;
  } else if constexpr (std::is_integral_v<T>) {
    auto v = t[key].value<std::int64_t>();
    if (!v) throw InvalidInput("config: '" + std::string(key) + "' must be an integer");
    return static_cast<T>(*v);
  } else {
    auto v = t[key].value<double>();
    if (!v) throw InvalidInput("config: '" + std::string(key) + "' must be a number");
    return static_cast<T>(*v);
  }
}

template <std::size_t N>
void get_array(const toml::table& t, std::string_view key, std::array<double, N>& out) {
  if (!t.contains(key)) return;
  const auto* arr = t[key].as_array();
  if (!arr || arr->size() != N)
    throw InvalidInput("config: '" + std::string(key) + "' must be an array of " + std::to_string(N) + " numbers");
  for (std::size_t k = 0; k < N; ++k) {
    auto v = (*arr)[k].template value<double>();
    if (!v) throw InvalidInput("config: '" + std::string(key) + "' must contain numbers");
    out[k] = *v;
  }
}

inline const toml::table* section(const toml::table& root, std::string_view key) {
  if (!root.contains(key)) return nullptr;
  const auto* t = root[key].as_table();
  if (!t) throw InvalidInput("config: [" + std::string(key) + "] must be a table");
  return t;
}

inline void check_keys(const toml::table& t, const std::string& where, std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, v] : t) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k.str() == a;
    if (!ok) throw InvalidInput("config: unknown key '" + std::string(k.str()) + "' in " + where);
  }
}

inline void apply_parameters(const toml::table* params, ParameterSpace& space) {
  if (!params) return;
  std::vector<std::string> free;
  for (const auto& p : space.all())
    if (p.free) free.push_back(p.name);
  for (const auto& [name, node] : *params) {
    const auto* t = node.as_table();
    if (!t) throw InvalidInput("config: [parameters." + std::string(name.str()) + "] must be a table");
    check_keys(*t, "[parameters." + std::string(name.str()) + "]", {"value", "lo", "hi", "free"});
    Parameter& p = space[std::string(name.str())];
    p.value = get_or(*t, "value", p.value);
    p.lo = get_or(*t, "lo", p.lo);
    p.hi = get_or(*t, "hi", p.hi);
    if (t->contains("free")) {
      auto f = (*t)["free"].value<bool>();
      if (!f) throw InvalidInput("config: 'free' must be a boolean");
      std::erase(free, p.name);
      if (*f) free.push_back(p.name);
    }
    if (!(p.lo <= p.value && p.value <= p.hi))
      throw InvalidInput("config: parameter '" + p.name + "' value outside [lo, hi]");
  }
  // Keep the provider's declaration order for free parameters.
  std::vector<std::string> ordered;
  for (const auto& p : space.all())
    if (std::find(free.begin(), free.end(), p.name) != free.end()) ordered.push_back(p.name);
  space.set_free(ordered);
  for (auto k : space.free_indices()) {
    const auto& p = space.all()[k];
    if (!std::isfinite(p.lo) || !std::isfinite(p.hi) || !(p.lo < p.hi))
      throw InvalidInput("config: free parameter '" + p.name + "' needs a finite box with lo < hi");
  }
}

inline HouseholdSettings household_settings(const toml::table* t) {
  HouseholdSettings s;
  if (!t) return s;
  check_keys(*t, "[household]",
             {"pi0", "rel_mean", "cv", "skew", "asset_max", "persistence", "response", "q", "expfam_nodes", "integration"});
  get_array(*t, "pi0", s.pi0);
  get_array(*t, "rel_mean", s.rel_mean);
  get_array(*t, "cv", s.cv);
  get_array(*t, "skew", s.skew);
  get_array(*t, "persistence", s.persistence);
  get_array(*t, "response", s.response);
  s.asset_max = get_or(*t, "asset_max", s.asset_max);
  s.q = get_or(*t, "q", s.q);
  s.expfam_nodes = get_or(*t, "expfam_nodes", s.expfam_nodes);
  if (const auto* in = section(*t, "integration")) {
    check_keys(*in, "[household.integration]", {"panels", "nodes", "grid_nodes", "tail_sd", "tol"});
    auto& g = s.integration;
    g.panels = get_or(*in, "panels", g.panels);
    g.nodes = get_or(*in, "nodes", g.nodes);
    g.grid_nodes = get_or(*in, "grid_nodes", g.grid_nodes);
    g.tail_sd = get_or(*in, "tail_sd", g.tail_sd);
    g.tol = get_or(*in, "tol", g.tol);
  }
  return s;
}

}  // namespace detail

/// Parses a configuration; relative data paths resolve against `base`.
inline RunConfig parse_config(const std::string& text, const std::filesystem::path& base = ".") {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " at line " << e.source().begin.line;
    throw InvalidInput(msg.str());
  }
  detail::check_keys(root, "the top level",
                     {"schema", "model", "parameters", "household", "simulate", "estimate", "moments", "loglik", "data"});
  if (detail::get_or<int>(root, "schema", 0) != 1) throw InvalidInput("config: 'schema = 1' is required");

  RunConfig cfg;
  cfg.text = text;
  cfg.model = detail::get_or<std::string>(root, "model", "");
  if (cfg.model == "toy") {
    if (root.contains("household")) throw InvalidInput("config: [household] given for the toy model");
    auto toy = std::make_shared<LinearGaussianToy>();
    detail::apply_parameters(detail::section(root, "parameters"), toy->parameters());
    cfg.provider = toy;
    cfg.moments = {std::nullopt, "y", 1};
  } else if (cfg.model == "household") {
    auto hh = std::make_shared<StylizedHousehold>(detail::household_settings(detail::section(root, "household")));
    detail::apply_parameters(detail::section(root, "parameters"), hh->parameters());
    cfg.provider = hh;
    cfg.moments = {std::string("eps"), "iota", 2};
  } else {
    throw InvalidInput("config: model must be \"toy\" or \"household\"");
  }

  if (const auto* t = detail::section(root, "simulate")) {
    detail::check_keys(*t, "[simulate]", {"T", "times", "every", "N", "seed"});
    auto& s = cfg.simulate;
    s.T = detail::get_or(*t, "T", s.T);
    s.N = detail::get_or<std::size_t>(*t, "N", s.N);
    s.seed = detail::get_or<std::uint64_t>(*t, "seed", s.seed);
    if (t->contains("times") && t->contains("every")) throw InvalidInput("config: give either times or every");
    if (const auto* arr = (*t)["times"].as_array()) {
      for (const auto& v : *arr) {
        auto i = v.value<std::int64_t>();
        if (!i) throw InvalidInput("config: times must be integers");
        s.times.push_back(static_cast<int>(*i));
      }
    } else if (t->contains("every")) {
      const int every = detail::get_or<int>(*t, "every", 0);
      if (every < 1) throw InvalidInput("config: every must be >= 1");
      for (int k = every; k <= s.T; k += every) s.times.push_back(k);
    }
  }
  const auto* sim = detail::section(root, "simulate");
  if (!sim || !(sim->contains("times") || sim->contains("every")))
    for (int k = 10; k <= cfg.simulate.T; k += 10) cfg.simulate.times.push_back(k);

  if (const auto* t = detail::section(root, "estimate")) {
    detail::check_keys(*t, "[estimate]",
                       {"method", "order", "J", "draws", "burn_in", "seed", "chains", "grid_points", "grid_J",
                        "target_accept", "adapted_weight", "diffuse_scale", "decay", "adapt_after"});
    auto& e = cfg.estimate;
    std::optional<int> order;
    if (t->contains("order")) order = detail::get_or<int>(*t, "order", 0);
    e.method = parse_method(detail::get_or<std::string>(*t, "method", "full-info"), order);
    e.J = detail::get_or(*t, "J", e.J);
    e.draws = detail::get_or(*t, "draws", e.draws);
    e.burn_in = detail::get_or(*t, "burn_in", e.burn_in);
    e.seed = detail::get_or<std::uint64_t>(*t, "seed", e.seed);
    e.chains = detail::get_or(*t, "chains", e.chains);
    e.grid_points = detail::get_or(*t, "grid_points", e.grid_points);
    e.grid_J = detail::get_or(*t, "grid_J", e.grid_J);
    e.target_accept = detail::get_or(*t, "target_accept", e.target_accept);
    e.adapted_weight = detail::get_or(*t, "adapted_weight", e.adapted_weight);
    e.diffuse_scale = detail::get_or(*t, "diffuse_scale", e.diffuse_scale);
    e.decay = detail::get_or(*t, "decay", e.decay);
    e.adapt_after = detail::get_or(*t, "adapt_after", e.adapt_after);
  }

  if (const auto* t = detail::section(root, "moments")) {
    detail::check_keys(*t, "[moments]", {"group_column", "value_column", "groups"});
    if (t->contains("group_column")) cfg.moments.group_column = detail::get_or<std::string>(*t, "group_column", "");
    cfg.moments.value_column = detail::get_or(*t, "value_column", cfg.moments.value_column);
    cfg.moments.groups = detail::get_or(*t, "groups", cfg.moments.groups);
  }

  if (const auto* t = detail::section(root, "loglik")) {
    detail::check_keys(*t, "[loglik]", {"parameter", "lo", "hi", "points", "methods"});
    LoglikSettings l;
    l.parameter = detail::get_or<std::string>(*t, "parameter", "");
    (void)cfg.provider->parameters().index(l.parameter);
    l.lo = detail::get_or(*t, "lo", 0.0);
    l.hi = detail::get_or(*t, "hi", 0.0);
    l.points = detail::get_or(*t, "points", l.points);
    if (!(l.lo < l.hi) || l.points < 2) throw InvalidInput("config: [loglik] needs lo < hi and points >= 2");
    if (const auto* arr = (*t)["methods"].as_array())
      for (const auto& v : *arr) {
        auto s = v.value<std::string>();
        if (!s) throw InvalidInput("config: loglik methods must be strings");
        l.methods.push_back(parse_method(*s));
      }
    cfg.loglik = l;
  }

  if (const auto* t = detail::section(root, "data")) {
    detail::check_keys(*t, "[data]", {"macro", "micro"});
    if (t->contains("macro")) cfg.macro_path = base / detail::get_or<std::string>(*t, "macro", "");
    if (t->contains("micro")) cfg.micro_path = base / detail::get_or<std::string>(*t, "micro", "");
  }
  (void)cfg.moment_spec();
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str(), path.parent_path());
  cfg.path = path;
  return cfg;
}

}  // namespace hafi
