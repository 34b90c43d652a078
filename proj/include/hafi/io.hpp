#pragma once

// CSV readers and writers for macro series, micro blocks and chains.
// Numbers are written with 17 significant digits so files round-trip exactly.

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hafi/errors.hpp"
#include "hafi/mcmc.hpp"
#include "hafi/microdata.hpp"

namespace hafi::io {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw InvalidInput(where + ": cannot parse '" + s + "' as a number");
  }
  if (pos != s.size()) throw InvalidInput(where + ": trailing characters in '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s, const std::string& where) {
  const double v = parse_double(s, where);
  if (v != static_cast<double>(static_cast<long long>(v))) throw InvalidInput(where + ": '" + s + "' is not an integer");
  return static_cast<long long>(v);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    throw InvalidInput("CSV: missing column '" + name + "'");
  }
};

inline Table read_table(std::istream& in, const std::string& what) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(what + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size())
      throw InvalidInput(what + ": line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                         " fields, expected " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return read_table(in, path);
}

inline void open_out(std::ofstream& out, const std::string& path) {
  out.open(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
}

// ---------------------------------------------------------------------------
// Macro: t,x1,...,xn with t = 1..T

inline void write_macro(std::ostream& out, const Eigen::MatrixXd& x) {
  out << "t";
  for (Eigen::Index k = 0; k < x.cols(); ++k) out << ",x" << k + 1;
  out << "\n";
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    out << t + 1;
    for (Eigen::Index k = 0; k < x.cols(); ++k) out << "," << fmt(x(t, k));
    out << "\n";
  }
}

inline Eigen::MatrixXd parse_macro(const Table& tab, const std::string& what) {
  if (tab.header.empty() || tab.header[0] != "t" || tab.header.size() < 2)
    throw InvalidInput(what + ": header must be t,x1,...");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(tab.rows.size()), static_cast<Eigen::Index>(tab.header.size() - 1));
  for (std::size_t r = 0; r < tab.rows.size(); ++r) {
    if (parse_int(tab.rows[r][0], what) != static_cast<long long>(r + 1))
      throw InvalidInput(what + ": t must run 1, 2, ... without gaps");
    for (std::size_t k = 1; k < tab.header.size(); ++k)
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k - 1)) = parse_double(tab.rows[r][k], what);
  }
  if (x.rows() == 0) throw InvalidInput(what + ": no rows");
  return x;
}

inline Eigen::MatrixXd read_macro(const std::string& path) { return parse_macro(read_table(path), path); }

// ---------------------------------------------------------------------------
// Micro: t,i,<observables> and for panels t_prev,<observables>_prev

inline void write_micro(std::ostream& out, const MicroDataset& micro) {
  const bool panel = micro.panel();
  out << "t,i";
  for (const auto& o : micro.observables) out << "," << o;
  if (panel) {
    out << ",t_prev";
    for (const auto& o : micro.observables) out << "," << o << "_prev";
  }
  out << "\n";
  for (const auto& b : micro.blocks)
    for (std::size_t i = 0; i < b.size(); ++i) {
      out << b.t << "," << b.ids[i];
      for (double v : b.row(i)) out << "," << fmt(v);
      if (panel) {
        out << "," << b.t - 1;
        for (double v : b.prev_row(i)) out << "," << fmt(v);
      }
      out << "\n";
    }
}

inline MicroDataset parse_micro(const Table& tab, const std::vector<std::string>& observables, const std::string& what) {
  if (tab.header.size() < 2 || tab.header[0] != "t" || tab.header[1] != "i")
    throw InvalidInput(what + ": header must start with t,i");
  std::vector<std::size_t> cols, prev_cols;
  for (const auto& o : observables) cols.push_back(tab.column(o));
  bool panel = false;
  for (const auto& h : tab.header)
    if (h == "t_prev") panel = true;
  if (panel)
    for (const auto& o : observables) prev_cols.push_back(tab.column(o + "_prev"));
  const std::size_t d = observables.size();
  if (2 + d * (panel ? 2 : 1) + (panel ? 1 : 0) != tab.header.size())
    throw InvalidInput(what + ": unexpected columns for observables");

  MicroDataset out;
  out.observables = observables;
  std::map<long long, std::vector<std::size_t>> by_t;
  for (std::size_t r = 0; r < tab.rows.size(); ++r) by_t[parse_int(tab.rows[r][0], what)].push_back(r);
  for (const auto& [t, rows] : by_t) {
    CrossSection cs;
    cs.t = static_cast<int>(t);
    cs.y.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    if (panel) cs.y_prev = RowMatrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto& row = tab.rows[rows[k]];
      cs.ids.push_back(parse_int(row[1], what));
      for (std::size_t j = 0; j < d; ++j) {
        cs.y(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = parse_double(row[cols[j]], what);
        if (panel) (*cs.y_prev)(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = parse_double(row[prev_cols[j]], what);
      }
      if (panel && parse_int(row[tab.column("t_prev")], what) != t - 1)
        throw InvalidInput(what + ": panel records must cover two consecutive periods");
    }
    out.blocks.push_back(std::move(cs));
  }
  out.validate();
  return out;
}

inline MicroDataset read_micro(const std::string& path, const std::vector<std::string>& observables) {
  return parse_micro(read_table(path), observables, path);
}

// ---------------------------------------------------------------------------
// Chain: iter,<names>,logpost,accepted,stepsize

inline void write_chain(std::ostream& out, const PosteriorChain& chain, const std::vector<std::string>& names) {
  out << "iter";
  for (const auto& n : names) out << "," << n;
  out << ",logpost,accepted,stepsize\n";
  for (Eigen::Index k = 0; k < chain.size(); ++k) {
    const auto i = static_cast<std::size_t>(k);
    out << k + 1;
    for (Eigen::Index j = 0; j < chain.draws.cols(); ++j) out << "," << fmt(chain.draws(k, j));
    out << "," << fmt(chain.log_post[i]) << "," << int(chain.accepted[i]) << "," << fmt(chain.step_size[i]) << "\n";
  }
}

struct ChainFile {
  std::vector<std::string> names;
  Eigen::MatrixXd draws;
  std::vector<double> log_post;
  std::vector<char> accepted;
  std::vector<double> step_size;
};

inline ChainFile parse_chain(const Table& tab, const std::string& what) {
  const auto& h = tab.header;
  if (h.size() < 5 || h[0] != "iter" || h[h.size() - 3] != "logpost" || h[h.size() - 2] != "accepted" ||
      h.back() != "stepsize")
    throw InvalidInput(what + ": header must be iter,<parameters>,logpost,accepted,stepsize");
  ChainFile c;
  c.names.assign(h.begin() + 1, h.end() - 3);
  const auto d = static_cast<Eigen::Index>(c.names.size());
  c.draws.resize(static_cast<Eigen::Index>(tab.rows.size()), d);
  for (std::size_t r = 0; r < tab.rows.size(); ++r) {
    const auto& row = tab.rows[r];
    if (parse_int(row[0], what) != static_cast<long long>(r + 1)) throw InvalidInput(what + ": iter must run 1, 2, ...");
    for (Eigen::Index j = 0; j < d; ++j)
      c.draws(static_cast<Eigen::Index>(r), j) = parse_double(row[static_cast<std::size_t>(j) + 1], what);
    c.log_post.push_back(parse_double(row[h.size() - 3], what));
    const auto acc = parse_int(row[h.size() - 2], what);
    if (acc != 0 && acc != 1) throw InvalidInput(what + ": accepted must be 0 or 1");
    c.accepted.push_back(static_cast<char>(acc));
    c.step_size.push_back(parse_double(row.back(), what));
  }
  if (!c.draws.allFinite()) throw InvalidInput(what + ": non-finite draws");
  return c;
}

inline ChainFile read_chain(const std::string& path) { return parse_chain(read_table(path), path); }

}  // namespace hafi::io
