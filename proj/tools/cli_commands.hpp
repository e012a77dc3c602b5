#pragma once

// Command implementations behind the geat executable. Each takes a parsed config and returns what gets written.

#include "geat/entropy.hpp"
#include "geat/io.hpp"
#include "geat/protocol.hpp"
#include "geat/verification.hpp"

#include <optional>
#include <string>

namespace geat::cli {

struct Options {
  std::optional<uint64_t> seed;
  int workers = 1;
  std::optional<double> tol;
};

inline Alpha read_alpha(const json& j) {
  double v = read_number(j, "alpha");
  try {
    return Alpha::of(v);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline json alpha_json(const Alpha& a) { return a.is_infinity() ? json("+inf") : json(a.value()); }

inline std::vector<std::string> read_labels(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected an array of labels");
  std::vector<std::string> out;
  for (const auto& x : j) {
    if (!x.is_string()) throw ConfigError(what + ": labels must be strings");
    out.push_back(x.get<std::string>());
  }
  return out;
}

inline int read_int(const json& j, const std::string& what) {
  if (!j.is_number_integer()) throw ConfigError(what + ": expected an integer");
  return j.get<int>();
}

inline json certificate(const CertifiedValue& v) {
  json out = {{"certified", v.certified},
              {"residual", number(v.residual)},
              {"spread", number(v.spread)},
              {"restarts", v.restarts},
              {"sigma", to_json(v.sigma)}};
  if (std::isfinite(v.upper)) out["sdp_upper"] = v.upper;
  return out;
}

// ---------------------------------------------------------------------------------------------------------------
// entropy

inline json cmd_entropy(const json& cfg, const Options& opt) {
  check_keys(cfg, {"quantity", "alpha", "rho", "sigma", "a", "b", "e", "f", "n", "restarts"}, "entropy config");
  auto q = require(cfg, "quantity", "entropy config");
  if (!q.is_string()) throw ConfigError("quantity must be a string");
  std::string quantity = q.get<std::string>();
  OptConfig oc;
  if (opt.seed) oc.seed = *opt.seed;
  if (opt.tol) oc.agree_tol = *opt.tol;
  if (cfg.contains("restarts")) oc.restarts = read_int(cfg["restarts"], "restarts");
  json out = {{"quantity", quantity}};
  auto labels = [&](const char* k) { return read_labels(require(cfg, k, "entropy config"), k); };

  if (quantity == "renyi_divergence") {
    Alpha a = read_alpha(require(cfg, "alpha", "entropy config"));
    auto rho = density_from_json(require(cfg, "rho", "entropy config"));
    auto sigma = operator_from_json(require(cfg, "sigma", "entropy config"));
    out["alpha"] = alpha_json(a);
    try {
      out["value"] = number(renyi_divergence(rho, sigma, a));
    } catch (const LayoutError& e) {
      throw ConfigError(e.what());
    }
  } else if (quantity == "cond_renyi_down") {
    Alpha a = read_alpha(require(cfg, "alpha", "entropy config"));
    auto rho = density_from_json(require(cfg, "rho", "entropy config"));
    out["alpha"] = alpha_json(a);
    out["value"] = number(cond_renyi_down(rho, labels("a"), labels("b"), a));
  } else if (quantity == "cond_renyi_up") {
    Alpha a = read_alpha(require(cfg, "alpha", "entropy config"));
    auto rho = density_from_json(require(cfg, "rho", "entropy config"));
    auto v = cond_renyi_up(rho, labels("a"), labels("b"), a, oc);
    out["alpha"] = alpha_json(a);
    out["value"] = number(v.value);
    out["certificate"] = certificate(v);
  } else if (quantity == "min_entropy") {
    auto rho = density_from_json(require(cfg, "rho", "entropy config"));
    auto v = min_entropy(rho, labels("a"), labels("b"));
    out["alpha"] = "+inf";
    out["value"] = number(v.value);
    out["certificate"] = {{"solver", to_json(v.report)}, {"sigma", to_json(v.sigma)}};
  } else if (quantity == "max_entropy") {
    auto rho = density_from_json(require(cfg, "rho", "entropy config"));
    auto v = max_entropy(rho, labels("a"), labels("b"), oc);
    out["alpha"] = 0.5;
    out["value"] = number(v.value);
    out["certificate"] = certificate(v);
  } else if (quantity == "channel_divergence") {
    Alpha a = read_alpha(require(cfg, "alpha", "entropy config"));
    auto e = channel_from_json(require(cfg, "e", "entropy config"));
    auto f = channel_from_json(require(cfg, "f", "entropy config"));
    int n = cfg.contains("n") ? read_int(cfg["n"], "n") : 1;
    auto v = channel_divergence_finite(e, f, a, n, oc);
    out["alpha"] = alpha_json(a);
    out["n"] = n;
    out["value"] = number(v.value);
    out["certificate"] = {{"kind", "lower bound from sampled inputs"}, {"restarts", v.restarts}};
  } else {
    throw ConfigError("unknown quantity '" + quantity + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------------------------------------------
// rate curve

inline TradeoffFunction read_tradeoff(const json& j) {
  check_keys(j, {"values"}, "g");
  const auto& v = require(j, "values", "g");
  if (!v.is_object() || v.empty()) throw ConfigError("g.values must map symbols to numbers");
  std::vector<std::string> al;
  std::vector<double> vals;
  for (const auto& [k, x] : v.items()) {
    al.push_back(k);
    vals.push_back(read_number(x, "g." + k));
  }
  try {
    return TradeoffFunction(al, vals);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("g: ") + e.what());
  }
}

inline std::vector<double> read_n_grid(const json& j) {
  std::vector<double> ns;
  if (j.is_array()) {
    for (const auto& x : j) ns.push_back(read_number(x, "n_grid"));
  } else if (j.is_object()) {
    check_keys(j, {"log10_from", "log10_to", "points"}, "n_grid");
    double lo = read_number(require(j, "log10_from", "n_grid"), "log10_from");
    double hi = read_number(require(j, "log10_to", "n_grid"), "log10_to");
    int pts = read_int(require(j, "points", "n_grid"), "points");
    if (pts < 1 || !(hi >= lo)) throw ConfigError("n_grid: need points >= 1 and log10_to >= log10_from");
    for (int i = 0; i < pts; ++i) ns.push_back(std::round(std::pow(10.0, pts == 1 ? lo : lo + (hi - lo) * i / (pts - 1))));
  } else {
    throw ConfigError("n_grid must be an array or a {log10_from, log10_to, points} object");
  }
  if (ns.empty()) throw ConfigError("n_grid is empty");
  for (double n : ns)
    if (!(n >= 1) || !std::isfinite(n)) throw ConfigError("n_grid values must be at least 1");
  return ns;
}

struct RateCurve {
  std::string csv;
  int infeasible = 0;
};

// The accepted set is {p : p(fail) <= 1 - omega_exp + delta} on the test alphabet; h may be given directly.
inline RateCurve cmd_rate_curve(const json& cfg, const Options&) {
  check_keys(cfg, {"g", "gamma", "omega_exp", "delta", "eps_s", "eps_a", "d_a", "n_grid", "h", "fail_symbol"},
             "rate-curve config");
  auto g = read_tradeoff(require(cfg, "g", "rate-curve config"));
  double gamma = read_number(require(cfg, "gamma", "rate-curve config"), "gamma");
  double eps_s = read_number(require(cfg, "eps_s", "rate-curve config"), "eps_s");
  double eps_a = read_number(require(cfg, "eps_a", "rate-curve config"), "eps_a");
  double d_a = cfg.contains("d_a") ? read_number(cfg["d_a"], "d_a") : 2.0;
  auto ns = read_n_grid(require(cfg, "n_grid", "rate-curve config"));
  std::optional<double> h_fixed;
  double bound = 0;
  std::string fail = cfg.contains("fail_symbol") ? cfg["fail_symbol"].get<std::string>() : "0";
  if (cfg.contains("h")) {
    h_fixed = read_number(cfg["h"], "h");
  } else {
    double omega = read_number(require(cfg, "omega_exp", "rate-curve config"), "omega_exp");
    double delta = read_number(require(cfg, "delta", "rate-curve config"), "delta");
    bound = 1 - omega + delta;
  }
  std::vector<double> w(g.alphabet().size(), 0.0);
  bool found = false;
  for (size_t i = 0; i < w.size(); ++i)
    if (g.alphabet()[i] == fail) w[i] = 1, found = true;
  if (!h_fixed && !found) throw ConfigError("fail_symbol '" + fail + "' is not in the alphabet of g");
  TestTradeoff t;
  try {
    t = tradeoff_from_test(g, gamma);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  RateCurve out;
  std::vector<RateRow> rows;
  std::ostringstream os;
  os.precision(17);
  os << kRateCsvHeader << "\n";
  for (double n : ns) {
    std::optional<double> h = h_fixed ? h_fixed : h_from_event(g, {FrequencyConstraint{w, bound}}, n);
    if (!h) {
      ++out.infeasible;
      os << n << ",nan,nan,nan,nan,nan,nan,nan,nan,nan\n";
      continue;
    }
    EatTestingInput in;
    in.epsilon = eps_s;
    in.p_omega = eps_a;
    in.d_a = d_a;
    in.stats = t.stats;
    in.h = *h;
    try {
      std::string line = rate_csv(rate_curve(in, {n}));
      os << line.substr(line.find('\n') + 1);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  out.csv = os.str();
  return out;
}

// ---------------------------------------------------------------------------------------------------------------
// simulate

struct Simulation {
  std::string csv;
  json summary;
};

inline DeviceStrategy read_strategy(const json& j) {
  check_keys(j, {"name", "noise_p"}, "strategy");
  auto name = require(j, "name", "strategy");
  if (!name.is_string()) throw ConfigError("strategy.name must be a string");
  std::string s = name.get<std::string>();
  try {
    if (s == "honest_chsh") return honest_chsh_strategy(j.contains("noise_p") ? read_number(j["noise_p"], "noise_p") : 0.0);
    if (s == "deterministic_chsh") return deterministic_strategy(chsh_game(), [](int) { return 0; }, [](int) { return 0; });
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("strategy: ") + e.what());
  }
  throw ConfigError("unknown strategy '" + s + "'");
}

inline Simulation cmd_simulate(const json& cfg, const Options& opt) {
  check_keys(cfg, {"n", "gamma", "omega_exp", "delta", "x_star", "y_star", "seed", "strategy", "g", "eps_s", "eps_a"},
             "simulate config");
  ProtocolConfig pc;
  const std::string w = "simulate config";
  auto n = require(cfg, "n", w);
  if (!n.is_number_integer()) throw ConfigError("n: expected an integer");
  pc.n = n.get<long>();
  pc.gamma = read_number(require(cfg, "gamma", w), "gamma");
  pc.omega_exp = read_number(require(cfg, "omega_exp", w), "omega_exp");
  pc.delta = read_number(require(cfg, "delta", w), "delta");
  if (cfg.contains("x_star")) pc.x_star = read_int(cfg["x_star"], "x_star");
  if (cfg.contains("y_star")) pc.y_star = read_int(cfg["y_star"], "y_star");
  if (cfg.contains("seed")) {
    const auto& sd = cfg["seed"];
    if (!sd.is_number_integer() || (!sd.is_number_unsigned() && sd.get<int64_t>() < 0))
      throw ConfigError("seed: expected a nonnegative integer");
    pc.seed = cfg["seed"].get<uint64_t>();
  }
  if (opt.seed) pc.seed = *opt.seed;
  auto strategy = read_strategy(require(cfg, "strategy", w));
  RunRecord rec;
  try {
    pc.validate(strategy.game);
    rec = run_protocol(strategy, pc);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  Simulation out;
  out.csv = run_csv(rec);
  json s = {{"n", pc.n},
            {"seed", pc.seed},
            {"strategy", strategy.name},
            {"aborted", rec.aborted},
            {"freq", {{"0", rec.freq[0]}, {"1", rec.freq[1]}, {kBot, rec.freq[kCBot]}}},
            {"tests", rec.tests},
            {"wins", rec.wins},
            {"fails", rec.fails},
            {"abort_threshold", pc.abort_threshold()},
            {"chernoff_bound", number(chernoff_abort_bound(pc))},
            {"win_probability", win_probability(strategy)}};
  s["win_rate"] = rec.tests > 0 ? json(double(rec.wins) / double(rec.tests)) : json(nullptr);
  if (cfg.contains("g")) {
    auto g = read_tradeoff(cfg["g"]);
    double eps_s = cfg.contains("eps_s") ? read_number(cfg["eps_s"], "eps_s") : 1e-6;
    double eps_a = cfg.contains("eps_a") ? read_number(cfg["eps_a"], "eps_a") : 1e-6;
    try {
      auto r = certified_rate(g, pc, eps_s, eps_a);
      s["certified"] = {{"h", r.h},
                        {"rate", number(r.rate)},
                        {"bound", number(r.bound)},
                        {"alpha", r.detail.alpha},
                        {"c1", r.detail.constants.c1},
                        {"c0", r.detail.constants.c0},
                        {"trivial", r.detail.trivial}};
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("certified rate: ") + e.what());
    }
  }
  out.summary = s;
  return out;
}

// ---------------------------------------------------------------------------------------------------------------
// verify

inline std::vector<VerificationReport> cmd_verify(const std::string& suite, int instances, const Options& opt) {
  const auto& names = suite_names();
  if (std::find(names.begin(), names.end(), suite) == names.end()) throw ConfigError("unknown suite '" + suite + "'");
  if (opt.workers < 1) throw ConfigError("workers must be at least 1");
  return run_suite(suite, opt.seed.value_or(1), instances, opt.workers, opt.tol.value_or(0));
}

}  // namespace geat::cli
