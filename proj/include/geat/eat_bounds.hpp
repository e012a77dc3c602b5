#pragma once

#include "geat/channels.hpp"
#include "geat/entropy.hpp"
#include "geat/optimize.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace geat {

// Affine function on distributions over an alphabet, stored by its values at the point masses.
class TradeoffFunction {
 public:
  TradeoffFunction() = default;
  TradeoffFunction(std::vector<std::string> alphabet, std::vector<double> values)
      : alphabet_(std::move(alphabet)), values_(std::move(values)) {
    if (alphabet_.empty()) throw std::invalid_argument("tradeoff function needs a nonempty alphabet");
    if (alphabet_.size() != values_.size()) throw std::invalid_argument("tradeoff function: one value per symbol");
    for (size_t i = 0; i < alphabet_.size(); ++i)
      for (size_t j = i + 1; j < alphabet_.size(); ++j)
        if (alphabet_[i] == alphabet_[j]) throw std::invalid_argument("repeated symbol '" + alphabet_[i] + "'");
    for (double v : values_)
      if (!std::isfinite(v)) throw std::invalid_argument("tradeoff values must be finite");
  }

  const std::vector<std::string>& alphabet() const { return alphabet_; }
  const std::vector<double>& values() const { return values_; }
  size_t size() const { return alphabet_.size(); }

  long index_of(const std::string& x) const {
    for (size_t i = 0; i < alphabet_.size(); ++i)
      if (alphabet_[i] == x) return static_cast<long>(i);
    throw std::invalid_argument("symbol '" + x + "' is not in the alphabet");
  }
  double at(const std::string& x) const { return values_[index_of(x)]; }

  double operator()(const std::vector<double>& q) const {
    if (q.size() != values_.size()) throw std::invalid_argument("distribution has the wrong length");
    double s = 0;
    for (size_t i = 0; i < q.size(); ++i) s += q[i] * values_[i];
    return s;
  }

  double max() const { return *std::max_element(values_.begin(), values_.end()); }
  double min() const { return *std::min_element(values_.begin(), values_.end()); }

 private:
  std::vector<std::string> alphabet_;
  std::vector<double> values_;
};

struct TradeoffStats {
  double max_f = 0;
  double min_f = 0;
  double min_sigma_f = 0;  // lower bound on the minimum over distributions compatible with some state
  double var_f = 0;        // upper bound on the maximal variance
};

// Stats valid without knowledge of the compatible set: Min_Sigma >= Min and Var <= (Max - Min)^2 / 4.
inline TradeoffStats generic_stats(const TradeoffFunction& f) {
  TradeoffStats s;
  s.max_f = f.max();
  s.min_f = f.min();
  s.min_sigma_f = s.min_f;
  s.var_f = (s.max_f - s.min_f) * (s.max_f - s.min_f) / 4;
  return s;
}

inline const std::string kBot = "bot";

struct TestTradeoff {
  TradeoffFunction f;
  TradeoffStats stats;
};

// f(x) = Max g + (g(x) - Max g)/gamma on the test alphabet, f(bot) = Max g.
inline TestTradeoff tradeoff_from_test(const TradeoffFunction& g, double gamma) {
  if (!(gamma > 0 && gamma <= 1)) throw std::invalid_argument("testing probability must lie in (0, 1]");
  for (const auto& x : g.alphabet())
    if (x == kBot) throw std::invalid_argument("test alphabet must not contain 'bot'");
  double mg = g.max(), ng = g.min();
  std::vector<std::string> al = g.alphabet();
  std::vector<double> v;
  for (double x : g.values()) v.push_back(mg + (x - mg) / gamma);
  al.push_back(kBot);
  v.push_back(mg);
  TestTradeoff out{TradeoffFunction(al, v), {}};
  out.stats.max_f = mg;
  out.stats.min_f = (1 - 1 / gamma) * mg + ng / gamma;
  out.stats.min_sigma_f = ng;
  out.stats.var_f = (mg - ng) * (mg - ng) / gamma;
  return out;
}

// sum_x w[x] q(x) <= bound
struct FrequencyConstraint {
  std::vector<double> weights;
  double bound = 0;
};

// Minimum of the affine f over {q in the simplex : all constraints hold}, by vertex enumeration.
// The continuous minimum lower-bounds the minimum over frequencies with denominator n.
inline std::optional<double> h_from_event(const TradeoffFunction& f, const std::vector<FrequencyConstraint>& accept,
                                          long n = 1) {
  if (n < 1) throw std::invalid_argument("n must be positive");
  const long k = static_cast<long>(f.size());
  for (const auto& c : accept)
    if (static_cast<long>(c.weights.size()) != k) throw std::invalid_argument("constraint has the wrong length");
  // rows: -q_x <= 0 then the user constraints
  const long m = k + static_cast<long>(accept.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, k);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  for (long x = 0; x < k; ++x) a(x, x) = -1;
  for (size_t j = 0; j < accept.size(); ++j) {
    for (long x = 0; x < k; ++x) a(k + static_cast<long>(j), x) = accept[j].weights[x];
    b(k + static_cast<long>(j)) = accept[j].bound;
  }
  const double tol = 1e-10;
  std::optional<double> best;
  std::vector<int> pick(k - 1);
  std::function<void(long, long)> rec = [&](long start, long depth) {
    if (depth == k - 1) {
      Eigen::MatrixXd sys(k, k);
      Eigen::VectorXd rhs(k);
      for (long r = 0; r < k - 1; ++r) {
        sys.row(r) = a.row(pick[r]);
        rhs(r) = b(pick[r]);
      }
      sys.row(k - 1).setOnes();
      rhs(k - 1) = 1;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
      if (lu.rank() < k) return;
      Eigen::VectorXd q = lu.solve(rhs);
      if (((a * q - b).array() > tol).any()) return;
      std::vector<double> qv(q.data(), q.data() + k);
      double v = f(qv);
      if (!best || v < *best) best = v;
      return;
    }
    for (long r = start; r < m; ++r) {
      pick[depth] = static_cast<int>(r);
      rec(r + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

struct EatConstants {
  double g_eps = 0;
  double v = 0;
  double k_prime = 0;
  double eta = 0;
  double c1 = 0;
  double c0 = 0;
};

inline double eat_eta() { return 2 * std::log(2.0) / (1 + 2 * std::log(2.0)); }

// g(eps) = -log(1 - sqrt(1 - eps^2)) >= 0
inline double g_eps(double eps) {
  if (!(eps > 0 && eps < 1)) throw std::invalid_argument("epsilon must lie in (0, 1)");
  // 1 - sqrt(1 - e^2) = e^2 / (1 + sqrt(1 - e^2)) without cancellation
  return -std::log2(eps * eps / (1 + std::sqrt(1 - eps * eps)));
}

inline void check_alpha_open(double alpha, double hi, const char* what) {
  if (!(alpha > 1 && alpha < hi)) throw std::invalid_argument(what);
}

inline void check_dim(double d_a) {
  if (!(d_a >= 1) || !std::isfinite(d_a)) throw std::invalid_argument("d_A must be at least 1");
}

// sum h_i - n (a-1)/(2-a) log^2(1 + 2 d_A) - g(eps)/(a-1)
inline double eat_bound_simple(const std::vector<double>& h, double alpha, double eps, double d_a) {
  check_alpha_open(alpha, 2, "alpha must lie in (1, 2)");
  check_dim(d_a);
  double g = g_eps(eps);
  double n = static_cast<double>(h.size());
  double s = 0;
  for (double x : h) s += x;
  double l = std::log2(1 + 2 * d_a);
  return s - n * (alpha - 1) / (2 - alpha) * l * l - g / (alpha - 1);
}

struct EatTestingInput {
  double n = 1;
  double alpha = 1.1;
  double epsilon = 1e-6;
  double p_omega = 1;
  double d_a = 2;
  TradeoffStats stats;
  double h = 0;

  void validate(bool need_alpha) const {
    if (!(n >= 1) || !std::isfinite(n)) throw std::invalid_argument("n must be at least 1");
    if (need_alpha) check_alpha_open(alpha, 1.5, "alpha must lie in (1, 3/2)");
    if (!(epsilon > 0 && epsilon < 1)) throw std::invalid_argument("epsilon must lie in (0, 1)");
    if (!(p_omega > 0 && p_omega <= 1)) throw std::invalid_argument("Pr[Omega] must lie in (0, 1]");
    check_dim(d_a);
    if (!(stats.var_f >= 0)) throw std::invalid_argument("Var[f] must be nonnegative");
    if (!(stats.min_f <= stats.min_sigma_f + 1e-12 && stats.min_sigma_f <= stats.max_f + 1e-12))
      throw std::invalid_argument("tradeoff stats must satisfy Min <= Min_Sigma <= Max");
    if (!std::isfinite(h)) throw std::invalid_argument("h must be finite");
  }
};

inline double eat_v(double d_a, double var_f) { return std::log2(2 * d_a * d_a + 1) + std::sqrt(2 + var_f); }

// exponent 2 log d_A + Max f - Min_Sigma f shared by K' and c0
inline double eat_spread(const EatTestingInput& in) {
  return 2 * std::log2(in.d_a) + in.stats.max_f - in.stats.min_sigma_f;
}

inline double k_prime(double alpha, const EatTestingInput& in) {
  double s = eat_spread(in);
  double ln2 = std::log(2.0);
  return std::pow(2 - alpha, 3) / (6 * std::pow(3 - 2 * alpha, 3) * ln2) * std::exp2((alpha - 1) / (2 - alpha) * s) *
         std::pow(std::log(std::exp2(s) + std::exp(2.0)), 3);
}

struct EatBound {
  double bound = 0;
  EatConstants constants;
};

inline EatBound eat_bound_testing(const EatTestingInput& in) {
  in.validate(true);
  const double a = in.alpha, n = in.n, ln2 = std::log(2.0);
  EatBound r;
  r.constants.g_eps = g_eps(in.epsilon);
  r.constants.v = eat_v(in.d_a, in.stats.var_f);
  r.constants.k_prime = k_prime(a, in);
  r.constants.eta = eat_eta();
  double q = (a - 1) / (2 - a);
  double lp = -std::log2(in.p_omega);
  r.bound = n * in.h - n * q * (ln2 / 2) * r.constants.v * r.constants.v - (r.constants.g_eps + a * lp) / (a - 1) -
            n * q * q * r.constants.k_prime;
  return r;
}

// Alpha-independent constants of the corollary.
inline EatConstants corollary_constants(const EatTestingInput& in) {
  EatConstants c;
  const double ln2 = std::log(2.0);
  c.eta = eat_eta();
  c.g_eps = g_eps(in.epsilon);
  c.v = eat_v(in.d_a, in.stats.var_f);
  double lp = -std::log2(in.p_omega);
  double v2 = c.v * c.v, e = c.eta;
  c.c1 = std::sqrt(2 * ln2 * v2 / e * (c.g_eps + (2 - e) * lp));
  double s = eat_spread(in);
  c.c0 = ((2 - e) * e * e * lp + e * e * c.g_eps) / (3 * ln2 * ln2 * v2 * std::pow(2 * e - 1, 3)) *
         std::exp2((1 - e) / e * s) * std::pow(std::log(std::exp2(s) + std::exp(2.0)), 3);
  return c;
}

// Theorem bound with the alpha-uniform relaxation used by the corollary (valid for alpha in (1, 2 - eta]):
// n h - n (a-1) ln2 V^2/(2 eta) - (g + (2 - eta) log(1/P))/(a-1) - n (a-1)^2 K/eta^2
inline double eat_bound_relaxed(const EatTestingInput& in, double alpha) {
  in.validate(false);
  const double e = eat_eta(), ln2 = std::log(2.0);
  if (!(alpha > 1 && alpha <= 2 - e)) throw std::invalid_argument("relaxed bound needs alpha in (1, 2 - eta]");
  auto c = corollary_constants(in);
  double s = eat_spread(in);
  double k = std::pow(e, 3) / (6 * std::pow(2 * e - 1, 3) * ln2) * std::exp2((1 - e) / e * s) *
             std::pow(std::log(std::exp2(s) + std::exp(2.0)), 3);
  double lp = -std::log2(in.p_omega);
  double a1 = alpha - 1;
  return in.n * in.h - in.n * a1 * ln2 / (2 * e) * c.v * c.v - (c.g_eps + (2 - e) * lp) / a1 - in.n * a1 * a1 * k / (e * e);
}

struct AutoAlphaBound {
  double bound = 0;
  EatConstants constants;
  double alpha = 0;
  double k_prime = 0;  // K'(alpha) at the chosen alpha (0 when alpha >= 3/2)
  bool trivial = false;  // n <= (c1 / (2 log d_A))^2: the statement holds but carries no information
};

inline AutoAlphaBound eat_bound_auto_alpha(const EatTestingInput& in) {
  in.validate(false);
  if (!(in.d_a >= 2)) throw std::invalid_argument("the alpha choice needs d_A >= 2");
  AutoAlphaBound r;
  r.constants = corollary_constants(in);
  const double ln2 = std::log(2.0), e = r.constants.eta;
  r.bound = in.n * in.h - r.constants.c1 * std::sqrt(in.n) - r.constants.c0;
  r.alpha = 1 + e / (ln2 * r.constants.v * r.constants.v) * r.constants.c1 / std::sqrt(in.n);
  double thr = r.constants.c1 / (2 * std::log2(in.d_a));
  r.trivial = in.n <= thr * thr;
  if (!r.trivial && r.alpha > 2 - e + 1e-12)
    throw std::logic_error("chosen alpha exceeds 2 - eta above the threshold");
  if (r.alpha < 1.5) {
    r.k_prime = k_prime(r.alpha, in);
    r.constants.k_prime = r.k_prime;
  }
  return r;
}

struct RateRow {
  double n = 0, alpha = 0, h = 0, g_eps = 0, v = 0, k_prime = 0, c1 = 0, c0 = 0, bound = 0, rate = 0;
};

inline const char* kRateCsvHeader = "n,alpha,h,g_eps,V,K_prime,c1,c0,bound,rate";

// One row per n; alpha from the corollary choice.
inline std::vector<RateRow> rate_curve(EatTestingInput in, const std::vector<double>& ns) {
  std::vector<RateRow> rows;
  for (double n : ns) {
    in.n = n;
    auto b = eat_bound_auto_alpha(in);
    RateRow r;
    r.n = n;
    r.alpha = b.alpha;
    r.h = in.h;
    r.g_eps = b.constants.g_eps;
    r.v = b.constants.v;
    r.k_prime = b.k_prime;
    r.c1 = b.constants.c1;
    r.c0 = b.constants.c0;
    r.bound = b.bound;
    r.rate = b.bound / n;
    rows.push_back(r);
  }
  return rows;
}

inline std::string rate_csv(const std::vector<RateRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << kRateCsvHeader << "\n";
  for (const auto& r : rows)
    os << r.n << "," << r.alpha << "," << r.h << "," << r.g_eps << "," << r.v << "," << r.k_prime << "," << r.c1 << ","
       << r.c0 << "," << r.bound << "," << r.rate << "\n";
  return os.str();
}

// Round i of the max-entropy statement: M_i from (R_{i-1}, E_{i-1}) to (A_i, R_i, E_i).
struct HmaxRound {
  KrausChannel channel;
  std::vector<std::string> a;      // output A_i
  std::vector<std::string> r_out;  // output R_i
  std::vector<std::string> e_out;  // output E_i
  std::vector<std::string> r_in;   // input R_{i-1}
  std::vector<std::string> e_in;   // input E_{i-1}
};

struct HmaxBound {
  double bound = 0;
  std::vector<double> per_round;  // max over pure inputs of H(A_i | R_i F_i)
};

inline constexpr long kHmaxDimCap = 64;

// max over pure omega on input (x) purifier of H(A | R F) evaluated on V|omega>, F the Stinespring environment.
inline double hmax_round_max(const HmaxRound& round, const OptConfig& cfg) {
  const auto& ch = round.channel;
  long din = ch.in_layout().total_dim();
  auto iso = stinespring(ch, "F#env");
  long dfull = iso.out_layout.total_dim() * din;
  if (dfull > kHmaxDimCap * kHmaxDimCap) throw std::invalid_argument("max-entropy round exceeds the dimension guard");
  Layout full = iso.out_layout.concat(Layout{{"P#pur", static_cast<int>(din)}});
  std::vector<std::string> cond = round.r_out;
  cond.push_back("F#env");
  auto cond_ent = [&](const Vector& w) {
    // w indexes input * din + purifier
    Matrix g = Eigen::Map<const Matrix>(w.data(), din, din);  // g(p, i)
    Matrix outm = iso.matrix * g.transpose();                // (out, p)
    Vector x(outm.size());
    for (long o = 0; o < outm.rows(); ++o)
      for (long p = 0; p < din; ++p) x(o * din + p) = outm(o, p);
    Operator st(full, x * x.adjoint());
    std::vector<std::string> ab = round.a;
    ab.insert(ab.end(), cond.begin(), cond.end());
    Operator m = marginal(st, ab);
    Operator mb = marginal(st, cond);
    return von_neumann_entropy(m.matrix()) - von_neumann_entropy(mb.matrix());
  };
  Vector phi = Vector::Zero(din * din);
  for (long i = 0; i < din; ++i) phi(i * din + i) = 1 / std::sqrt(double(din));
  auto res = minimize_over_pure_states([&](const Vector& v) { return -cond_ent(v); }, din * din, cfg.restarts, cfg.seed,
                                       150, {phi});
  return -res.value;
}

// sum_i max H(A_i|R_i F_i) + n (a-1)/(2-a) log^2(1 + 2 d_A) + g(eps)/(a-1)
inline HmaxBound hmax_dual_bound(const std::vector<HmaxRound>& rounds, double alpha, double eps, const OptConfig& cfg = {}) {
  check_alpha_open(alpha, 2, "alpha must lie in (1, 2)");
  if (rounds.empty()) throw std::invalid_argument("max-entropy bound needs at least one round");
  HmaxBound out;
  double d_a = 1;
  for (const auto& rd : rounds) {
    std::vector<std::string> traced = rd.a;
    traced.insert(traced.end(), rd.r_out.begin(), rd.r_out.end());
    auto ns = check_nonsignalling(rd.channel, rd.r_in, rd.e_in, rd.e_out, traced);
    if (!ns.passed) throw std::invalid_argument("round fails the non-signalling condition (residual " +
                                                std::to_string(ns.residual) + ")");
    d_a = std::max(d_a, static_cast<double>(rd.channel.out_layout().dim_of(rd.a)));
    out.per_round.push_back(hmax_round_max(rd, cfg));
  }
  double s = 0;
  for (double x : out.per_round) s += x;
  double n = static_cast<double>(rounds.size());
  double l = std::log2(1 + 2 * d_a);
  out.bound = s + n * (alpha - 1) / (2 - alpha) * l * l + g_eps(eps) / (alpha - 1);
  return out;
}

}  // namespace geat
