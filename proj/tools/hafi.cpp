// Command-line front end: simulate, estimate, loglik, diagnose.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "hafi/config.hpp"
#include "hafi/io.hpp"
#include "hafi/mcmc.hpp"
#include "hafi/models/simulate.hpp"
#include "hafi/parallel.hpp"
#include "hafi/run.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace hafi;

namespace {

std::string sha256_bytes(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream out;
  for (unsigned i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_file(const fs::path& p) { return sha256_bytes(slurp(p)); }

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out;
  io::open_out(out, p.string());
  out << text;
}

json base_manifest(const std::string& command, const RunConfig& cfg) {
  json m;
  m["command"] = command;
  m["version"] = HAFI_VERSION;
  m["config"] = cfg.path.filename().string();
  m["config_sha256"] = sha256_bytes(cfg.text);
  m["model"] = cfg.model;
  json params = json::array();
  for (const auto& p : cfg.provider->parameters().all())
    params.push_back({{"name", p.name}, {"value", p.value}, {"lo", p.lo}, {"hi", p.hi}, {"free", p.free}});
  m["parameters"] = params;
  return m;
}

struct Data {
  Eigen::MatrixXd x;
  MicroDataset micro;
  fs::path macro_path, micro_path;
};

Data load_data(const RunConfig& cfg, const std::string& data_dir) {
  Data d;
  if (!data_dir.empty()) {
    d.macro_path = fs::path(data_dir) / "macro.csv";
    d.micro_path = fs::path(data_dir) / "micro.csv";
  } else {
    if (!cfg.macro_path) throw InvalidInput("no data: pass --data DIR or set [data] macro in the config");
    d.macro_path = *cfg.macro_path;
    if (cfg.micro_path) d.micro_path = *cfg.micro_path;
  }
  d.x = io::read_macro(d.macro_path.string());
  if (!d.micro_path.empty() && fs::exists(d.micro_path)) {
    d.micro = io::read_micro(d.micro_path.string(), cfg.provider->micro_observables());
  } else if (!data_dir.empty() || cfg.micro_path) {
    throw InvalidInput("micro data file " + d.micro_path.string() + " does not exist");
  }
  for (const auto& b : d.micro.blocks)
    if (b.t < 1 || b.t > d.x.rows()) throw InvalidInput("micro data at t=" + std::to_string(b.t) + " outside the macro sample");
  return d;
}

json data_manifest(const Data& d) {
  json m;
  m["macro"] = {{"file", d.macro_path.filename().string()}, {"sha256", sha256_file(d.macro_path)}, {"T", d.x.rows()}};
  if (!d.micro_path.empty() && fs::exists(d.micro_path))
    m["micro"] = {{"file", d.micro_path.filename().string()},
                  {"sha256", sha256_file(d.micro_path)},
                  {"periods", d.micro.blocks.size()},
                  {"records", d.micro.total()}};
  return m;
}

// ---------------------------------------------------------------------------

struct Options {
  std::string config, out = ".", data, method, param, grid;
  std::vector<std::string> methods;
  std::optional<int> order, draws, burn_in, J, chains;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  bool fix_seed = false;
  std::vector<std::string> chain_files;
  int diag_burn_in = 0;
};

void cmd_simulate(const Options& o) {
  RunConfig cfg = load_config(o.config);
  auto& s = cfg.simulate;
  if (o.seed) s.seed = *o.seed;
  fs::create_directories(o.out);
  const auto theta = cfg.provider->parameters().full_values();
  const JointSample sample = simulate_joint(*cfg.provider, theta, s.T, s.times, s.N, s.seed);
  const fs::path dir(o.out);
  {
    std::ofstream f;
    io::open_out(f, (dir / "macro.csv").string());
    io::write_macro(f, sample.x);
  }
  {
    std::ofstream f;
    io::open_out(f, (dir / "micro.csv").string());
    io::write_micro(f, sample.micro);
  }
  {
    std::ofstream f;
    io::open_out(f, (dir / "states.csv").string());
    f << "t";
    for (Eigen::Index k = 0; k < sample.z.cols(); ++k) f << ",z" << k + 1;
    f << "\n";
    for (Eigen::Index t = 0; t < sample.z.rows(); ++t) {
      f << t + 1;
      for (Eigen::Index k = 0; k < sample.z.cols(); ++k) f << "," << io::fmt(sample.z(t, k));
      f << "\n";
    }
  }
  json m = base_manifest("simulate", cfg);
  m["seed"] = s.seed;
  m["T"] = s.T;
  m["times"] = s.times;
  m["N"] = s.N;
  m["outputs"] = {{"macro.csv", sha256_file(dir / "macro.csv")},
                  {"micro.csv", sha256_file(dir / "micro.csv")},
                  {"states.csv", sha256_file(dir / "states.csv")}};
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  std::cout << "wrote " << s.T << " macro rows and " << sample.micro.total() << " micro records to " << dir.string() << "\n";
}

void cmd_estimate(const Options& o) {
  RunConfig cfg = load_config(o.config);
  auto& e = cfg.estimate;
  if (!o.method.empty()) e.method = parse_method(o.method, o.order);
  if (o.draws) e.draws = *o.draws;
  if (o.burn_in) e.burn_in = *o.burn_in;
  if (o.J) e.J = *o.J;
  if (o.seed) e.seed = *o.seed;
  if (o.chains) e.chains = *o.chains;
  if (e.chains < 1) throw InvalidInput("--chains must be >= 1");
  const auto& space = cfg.provider->parameters();
  if (space.free_indices().empty()) throw InvalidInput("no free parameters: mark at least one with free = true");

  const Data data = load_data(cfg, o.data);
  const unsigned inner = e.chains > 1 ? 1u : o.workers;
  MethodEvaluator ev(cfg.provider, e.method, data.x, data.micro, cfg.moment_spec(), e.J, inner);
  MhSettings mh = cfg.mh_settings();
  if (e.grid_points > 0) {
    MethodEvaluator coarse(cfg.provider, e.method, data.x, data.micro, cfg.moment_spec(), e.grid_J, o.workers);
    mh.initial = grid_search_init(coarse.estimator(), mh.lower, mh.upper, e.grid_points,
                                  derive_seed(e.seed, 0, stream_domain::sampler));
  }
  const auto estimator = ev.estimator();
  std::vector<PosteriorChain> chains(static_cast<std::size_t>(e.chains));
  std::vector<std::uint64_t> seeds(chains.size());
  for (std::size_t c = 0; c < chains.size(); ++c) seeds[c] = derive_seed(e.seed, c + 1, stream_domain::sampler);
  parallel_for(chains.size(), e.chains > 1 ? o.workers : 1u,
               [&](std::size_t c) { chains[c] = adaptive_rwmh(estimator, mh, seeds[c]); });

  const fs::path dir(o.out);
  fs::create_directories(dir);
  json m = base_manifest("estimate", cfg);
  m["method"] = e.method.name();
  m["J"] = ev.J();
  m["seed"] = e.seed;
  m["data"] = data_manifest(data);
  m["settings"] = {{"draws", e.draws},
                   {"burn_in", e.burn_in},
                   {"target_accept", mh.target_accept},
                   {"adapted_weight", mh.adapted_weight},
                   {"diffuse_scale", mh.diffuse_scale},
                   {"decay", mh.decay},
                   {"adapt_after", mh.adapt_after},
                   {"grid_points", e.grid_points},
                   {"grid_J", e.grid_J}};
  m["initial"] = std::vector<double>(mh.initial.data(), mh.initial.data() + mh.initial.size());
  json out = json::array();
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const std::string name = chains.size() == 1 ? "chain.csv" : "chain_" + std::to_string(c + 1) + ".csv";
    {
      std::ofstream f;
      io::open_out(f, (dir / name).string());
      io::write_chain(f, chains[c], space.free_names());
    }
    std::size_t acc = 0;
    for (char a : chains[c].accepted) acc += a ? 1 : 0;
    out.push_back({{"file", name},
                   {"seed", seeds[c]},
                   {"sha256", sha256_file(dir / name)},
                   {"acceptance_rate", static_cast<double>(acc) / static_cast<double>(chains[c].size())},
                   {"likelihood_evaluations", chains[c].evaluations}});
  }
  m["chains"] = out;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  std::cout << "wrote " << chains.size() << " chain(s) of " << e.draws << " draws to " << dir.string() << "\n";
}

void cmd_loglik(const Options& o) {
  RunConfig cfg = load_config(o.config);
  LoglikSettings ls = cfg.loglik.value_or(LoglikSettings{});
  if (!o.param.empty()) ls.parameter = o.param;
  if (!o.grid.empty()) {
    const auto parts = io::split(o.grid, ':');
    if (parts.size() != 3) throw InvalidInput("--grid must be LO:HI:POINTS");
    ls.lo = io::parse_double(parts[0], "--grid");
    ls.hi = io::parse_double(parts[1], "--grid");
    ls.points = static_cast<int>(io::parse_int(parts[2], "--grid"));
  }
  if (ls.parameter.empty()) throw InvalidInput("no parameter: pass --param or set [loglik] parameter");
  std::vector<Method> methods = ls.methods;
  if (!o.methods.empty()) {
    methods.clear();
    for (const auto& s : o.methods) methods.push_back(parse_method(s, o.order));
  }
  if (methods.empty()) methods.push_back(cfg.estimate.method);
  const int J = o.J.value_or(cfg.estimate.J);
  const std::uint64_t seed = o.seed.value_or(cfg.estimate.seed);
  const auto grid = linear_grid(ls.lo, ls.hi, ls.points);
  const Data data = load_data(cfg, o.data);

  const fs::path dir(o.out);
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << ls.parameter << ",macro_ll,micro_ll,J,seed,method,total_ll,normalized\n";
  for (const auto& method : methods) {
    MethodEvaluator ev(cfg.provider, method, data.x, data.micro, cfg.moment_spec(), J, o.workers);
    const auto curve = loglik_curve(ev, *cfg.provider, ls.parameter, grid, seed, o.fix_seed);
    for (const auto& p : curve)
      csv << io::fmt(p.value) << "," << io::fmt(p.ll.macro) << "," << io::fmt(p.ll.micro) << "," << ev.J() << ","
          << (method.kind == MethodKind::full_info ? p.seed : 0) << "," << method.name() << "," << io::fmt(p.ll.total())
          << "," << io::fmt(p.normalized) << "\n";
  }
  write_text(dir / "loglik.csv", csv.str());
  json m = base_manifest("loglik", cfg);
  json names = json::array();
  for (const auto& mt : methods) names.push_back(mt.name());
  m["methods"] = names;
  m["parameter"] = ls.parameter;
  m["grid"] = {{"lo", ls.lo}, {"hi", ls.hi}, {"points", ls.points}};
  m["J"] = J;
  m["seed"] = seed;
  m["fix_smoother_seed"] = o.fix_seed;
  m["data"] = data_manifest(data);
  m["outputs"] = {{"loglik.csv", sha256_file(dir / "loglik.csv")}};
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  std::cout << "wrote " << grid.size() * methods.size() << " rows to " << (dir / "loglik.csv").string() << "\n";
}

void cmd_diagnose(const Options& o) {
  if (o.chain_files.empty()) throw InvalidInput("diagnose needs at least one chain CSV");
  std::vector<Eigen::MatrixXd> kept;
  std::vector<std::vector<char>> accepted;
  std::vector<std::string> names;
  for (const auto& path : o.chain_files) {
    const io::ChainFile c = io::read_chain(path);
    if (names.empty()) names = c.names;
    if (c.names != names) throw InvalidInput(path + ": parameter columns differ from the first chain");
    if (o.diag_burn_in < 0 || o.diag_burn_in >= c.draws.rows()) throw InvalidInput("--burn-in must be below the chain length");
    kept.push_back(c.draws.bottomRows(c.draws.rows() - o.diag_burn_in));
    accepted.emplace_back(c.accepted.begin() + o.diag_burn_in, c.accepted.end());
  }
  const ChainDiagnostics d = diagnostics(kept, accepted);
  json r;
  r["chains"] = o.chain_files.size();
  r["draws_per_chain"] = kept.front().rows();
  r["burn_in"] = o.diag_burn_in;
  r["acceptance_rate"] = d.acceptance_rate;
  json params = json::array();
  for (std::size_t k = 0; k < names.size(); ++k)
    params.push_back({{"name", names[k]}, {"mean", d.mean[k]}, {"sd", d.sd[k]}, {"ess", d.ess[k]}, {"rhat", d.rhat[k]}});
  r["parameters"] = params;
  const std::string text = r.dump(2) + "\n";
  if (o.out.empty() || o.out == "-") {
    std::cout << text;
  } else {
    fs::create_directories(fs::path(o.out).parent_path().empty() ? fs::path(".") : fs::path(o.out).parent_path());
    write_text(o.out, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Full-information estimation from macro time series and micro cross sections"};
  app.set_version_flag("--version", std::string(HAFI_VERSION));
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "TOML run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "root seed");
    sub->add_option("--workers", o.workers, "worker threads (outputs do not depend on it)")->check(CLI::PositiveNumber);
  };

  auto* sim = app.add_subcommand("simulate", "simulate macro and micro data");
  common(sim);

  auto* est = app.add_subcommand("estimate", "run pseudo-marginal MCMC");
  common(est);
  est->add_option("--data", o.data, "directory with macro.csv and micro.csv");
  est->add_option("--method", o.method, "full-info, macro-only, moments-1, moments-2, moments-3 or moments");
  est->add_option("--order", o.order, "moment order with --method moments");
  est->add_option("--draws", o.draws, "total draws including burn-in");
  est->add_option("--burn-in", o.burn_in, "burn-in draws");
  est->add_option("--smoothing-draws", o.J, "smoothing draws J per likelihood estimate");
  est->add_option("--chains", o.chains, "independent chains");

  auto* ll = app.add_subcommand("loglik", "evaluate log-likelihood curves over a parameter grid");
  common(ll);
  ll->add_option("--data", o.data, "directory with macro.csv and micro.csv");
  ll->add_option("--method", o.methods, "one or more methods")->delimiter(',');
  ll->add_option("--order", o.order, "moment order with --method moments");
  ll->add_option("--param", o.param, "parameter to vary");
  ll->add_option("--grid", o.grid, "LO:HI:POINTS");
  ll->add_option("--smoothing-draws", o.J, "smoothing draws J");
  ll->add_flag("--fix-smoother-seed", o.fix_seed, "reuse one smoother seed at every grid point");

  auto* diag = app.add_subcommand("diagnose", "convergence diagnostics for chain CSVs");
  diag->add_option("chains", o.chain_files, "chain CSV files")->required()->check(CLI::ExistingFile);
  diag->add_option("--burn-in", o.diag_burn_in, "draws to drop from the start of each chain");
  diag->add_option("--out", o.out, "report path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (diag->parsed() && diag->count("--out") == 0) o.out.clear();

  try {
    if (sim->parsed()) cmd_simulate(o);
    if (est->parsed()) cmd_estimate(o);
    if (ll->parsed()) cmd_loglik(o);
    if (diag->parsed()) cmd_diagnose(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
