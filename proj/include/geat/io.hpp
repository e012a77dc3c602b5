#pragma once

// JSON encoding of operators, channels and reports. Needs the single-header nlohmann json.hpp on the include path.

#include "geat/channels.hpp"
#include "geat/sdp.hpp"
#include "geat/verification.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace geat {

using json = nlohmann::json;

// Malformed or unexpected input; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values become the strings "+inf", "-inf" and "nan".
inline json number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "+inf" : "-inf";
  return x;
}

inline double read_number(const json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "+inf" || s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ConfigError(what + ": expected a number");
}

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

inline const json& require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return j.at(key);
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------------------------------------------
// layouts and matrices

inline json to_json(const Layout& l) {
  json out = json::array();
  for (const auto& f : l.factors()) out.push_back(json::array({f.label, f.dim}));
  return out;
}

inline Layout layout_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("layout: expected an array of [label, dim] pairs");
  std::vector<Factor> fs;
  for (const auto& f : j) {
    if (!f.is_array() || f.size() != 2 || !f[0].is_string() || !f[1].is_number_integer())
      throw ConfigError("layout: each factor must be [label, dim]");
    fs.push_back(Factor{f[0].get<std::string>(), f[1].get<int>()});
  }
  try {
    return Layout(fs);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("layout: ") + e.what());
  }
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (long i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (long k = 0; k < m.cols(); ++k) row.push_back(json::array({m(i, k).real(), m(i, k).imag()}));
    rows.push_back(row);
  }
  return rows;
}

// Entries may be [re, im] pairs or plain reals.
inline Matrix matrix_from_json(const json& j, long rows, long cols, const std::string& what) {
  if (!j.is_array() || static_cast<long>(j.size()) != rows) throw ConfigError(what + ": wrong number of rows");
  Matrix m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    const auto& row = j[i];
    if (!row.is_array() || static_cast<long>(row.size()) != cols) throw ConfigError(what + ": wrong number of columns");
    for (long k = 0; k < cols; ++k) {
      const auto& e = row[k];
      if (e.is_number()) m(i, k) = e.get<double>();
      else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number())
        m(i, k) = cplx(e[0].get<double>(), e[1].get<double>());
      else throw ConfigError(what + ": entries must be numbers or [re, im] pairs");
    }
  }
  return m;
}

inline json to_json(const Operator& op) { return {{"layout", to_json(op.layout())}, {"entries", matrix_to_json(op.matrix())}}; }

inline Operator operator_from_json(const json& j) {
  check_keys(j, {"layout", "entries"}, "operator");
  Layout l = layout_from_json(require(j, "layout", "operator"));
  long d = l.total_dim();
  return Operator(l, matrix_from_json(require(j, "entries", "operator"), d, d, "operator entries"));
}

inline DensityMatrix density_from_json(const json& j) {
  auto op = operator_from_json(j);
  try {
    return DensityMatrix(op);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("state: ") + e.what());
  }
}

inline json to_json(const KrausChannel& ch) {
  json ks = json::array();
  for (const auto& k : ch.kraus()) ks.push_back(matrix_to_json(k));
  return {{"in_layout", to_json(ch.in_layout())}, {"out_layout", to_json(ch.out_layout())}, {"kraus", ks}};
}

inline KrausChannel channel_from_json(const json& j) {
  check_keys(j, {"in_layout", "out_layout", "kraus"}, "channel");
  Layout in = layout_from_json(require(j, "in_layout", "channel"));
  Layout out = layout_from_json(require(j, "out_layout", "channel"));
  const auto& ks = require(j, "kraus", "channel");
  if (!ks.is_array() || ks.empty()) throw ConfigError("channel: kraus must be a nonempty array");
  std::vector<Matrix> kraus;
  for (const auto& k : ks) kraus.push_back(matrix_from_json(k, out.total_dim(), in.total_dim(), "kraus operator"));
  try {
    return KrausChannel(in, out, kraus);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("channel: ") + e.what());
  }
}

// ---------------------------------------------------------------------------------------------------------------
// reports

inline json to_json(const SolveReport& r) {
  return {{"primal", number(r.primal_value)},
          {"dual", number(r.dual_value)},
          {"gap", number(r.gap)},
          {"iterations", r.iterations},
          {"status", to_string(r.status)}};
}

inline json to_json(const VerificationReport& r) {
  json values = json::object();
  for (const auto& [k, v] : r.values) values[k] = number(v);
  json out = {{"name", r.name},
              {"instances", r.instances},
              {"worst_margin", number(r.worst_margin)},
              {"violations", r.violations},
              {"caveat", to_string(r.caveat)},
              {"tolerance", number(r.tolerance)},
              {"passed", r.passed()},
              {"values", values}};
  if (!r.note.empty()) out["note"] = r.note;
  if (!r.best_omega.empty()) out["best_omega"] = r.best_omega;
  return out;
}

inline json to_json(const std::vector<VerificationReport>& rs) {
  json out = json::array();
  for (const auto& r : rs) out.push_back(to_json(r));
  return out;
}

}  // namespace geat
