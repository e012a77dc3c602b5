#pragma once

#include "geat/channels.hpp"
#include "geat/eat_bounds.hpp"
#include "geat/entropy.hpp"
#include "geat/random.hpp"

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace geat {

// Two-player game: questions (x, y) drawn from q, answers a, b, predicate win(x, y, a, b).
struct GameSpec {
  int nx = 2, ny = 2, na = 2, nb = 2;
  std::vector<double> q;  // q[x * ny + y]
  std::function<int(int, int, int, int)> win;

  void validate() const {
    if (nx < 1 || ny < 1 || na < 1 || nb < 1) throw std::invalid_argument("game alphabets must be nonempty");
    if (static_cast<int>(q.size()) != nx * ny) throw std::invalid_argument("question distribution has the wrong size");
    double s = 0;
    for (double v : q) {
      if (!(v >= 0)) throw std::invalid_argument("question probabilities must be nonnegative");
      s += v;
    }
    if (std::abs(s - 1) > 1e-12) throw std::invalid_argument("question distribution must sum to 1");
    if (!win) throw std::invalid_argument("game needs a winning predicate");
  }
};

inline GameSpec chsh_game() {
  GameSpec g;
  g.q = {0.25, 0.25, 0.25, 0.25};
  g.win = [](int x, int y, int a, int b) { return ((a ^ b) == (x & y)) ? 1 : 0; };
  return g;
}

struct ProtocolConfig {
  long n = 1000;
  double gamma = 0.1;
  double omega_exp = 0.85;
  double delta = 0.05;
  int x_star = 0, y_star = 0;
  uint64_t seed = 0;

  void validate(const GameSpec& g) const {
    if (n < 1) throw std::invalid_argument("n must be positive");
    if (!(gamma >= 0 && gamma <= 1)) throw std::invalid_argument("gamma must lie in [0, 1]");
    if (!(omega_exp >= 0 && omega_exp <= 1)) throw std::invalid_argument("omega_exp must lie in [0, 1]");
    if (!(delta >= 0 && delta <= 1)) throw std::invalid_argument("delta must lie in [0, 1]");
    if (x_star < 0 || x_star >= g.nx || y_star < 0 || y_star >= g.ny)
      throw std::invalid_argument("generation inputs outside the question sets");
  }

  double abort_threshold() const { return (1 - omega_exp + delta) * gamma * static_cast<double>(n); }
};

// Device on R and adversary on Ep. device[x][a] and adversary[y][b] are Kraus sets of the instruments.
struct DeviceStrategy {
  std::string name;
  GameSpec game;
  DensityMatrix initial;  // layout {R, Ep}
  bool refresh = false;   // re-prepare `initial` at the start of every round
  std::vector<std::vector<std::vector<Matrix>>> device;
  std::vector<std::vector<std::vector<Matrix>>> adversary;

  long dim_r() const { return initial.layout().dim_of("R"); }
  long dim_e() const { return initial.layout().dim_of("Ep"); }

  void validate() const {
    game.validate();
    if (!(initial.layout().labels() == std::vector<std::string>{"R", "Ep"}))
      throw std::invalid_argument("strategy state must have layout {R, Ep}");
    auto check = [](const auto& inst, int nin, int nout, long d, const char* who) {
      if (static_cast<int>(inst.size()) != nin) throw std::invalid_argument(std::string(who) + ": one instrument per input");
      for (const auto& per_in : inst) {
        if (static_cast<int>(per_in.size()) != nout)
          throw std::invalid_argument(std::string(who) + ": one Kraus set per outcome");
        Matrix s = Matrix::Zero(d, d);
        for (const auto& ks : per_in)
          for (const auto& k : ks) {
            if (k.rows() != d || k.cols() != d) throw std::invalid_argument(std::string(who) + ": Kraus shape mismatch");
            s += k.adjoint() * k;
          }
        if (detail::max_abs(s - Matrix::Identity(d, d)) > 1e-10)
          throw std::invalid_argument(std::string(who) + ": instrument is not trace preserving");
      }
    };
    check(device, game.nx, game.na, dim_r(), "device");
    check(adversary, game.ny, game.nb, dim_e(), "adversary");
  }
};

namespace detail {

inline Matrix pauli_combo(double cz, double cx) {
  Matrix m(2, 2);
  m << cz, cx, cx, -cz;
  return m;
}

// Projective instrument {(1 + (-1)^a O)/2}.
inline std::vector<std::vector<Matrix>> observable_instrument(const Matrix& o) {
  Matrix id = Matrix::Identity(2, 2);
  return {{Matrix((id + o) / 2.0)}, {Matrix((id - o) / 2.0)}};
}

}  // namespace detail

// Singlet shared between device and adversary, refreshed every round and depolarized with weight noise_p.
// A0 = Z, A1 = X, B0 = -(Z + X)/sqrt2, B1 = -(Z - X)/sqrt2.
inline DeviceStrategy honest_chsh_strategy(double noise_p) {
  if (!(noise_p >= 0 && noise_p <= 1)) throw std::invalid_argument("noise_p must lie in [0, 1]");
  DeviceStrategy s;
  s.name = "honest_chsh";
  s.game = chsh_game();
  Vector psi = Vector::Zero(4);
  psi(1) = 1 / std::sqrt(2.0);
  psi(2) = -1 / std::sqrt(2.0);
  Matrix rho = (1 - noise_p) * psi * psi.adjoint() + noise_p * Matrix::Identity(4, 4) / 4.0;
  s.initial = DensityMatrix(Layout{{"R", 2}, {"Ep", 2}}, rho);
  s.refresh = true;
  const double r = 1 / std::sqrt(2.0);
  s.device = {detail::observable_instrument(detail::pauli_combo(1, 0)),
              detail::observable_instrument(detail::pauli_combo(0, 1))};
  s.adversary = {detail::observable_instrument(detail::pauli_combo(-r, -r)),
                 detail::observable_instrument(detail::pauli_combo(-r, r))};
  return s;
}

// Memoryless deterministic answers a = fa(x), b = fb(y) with one-dimensional memories.
inline DeviceStrategy deterministic_strategy(const GameSpec& game, const std::function<int(int)>& fa,
                                             const std::function<int(int)>& fb) {
  DeviceStrategy s;
  s.name = "deterministic";
  s.game = game;
  s.initial = DensityMatrix(Layout{{"R", 1}, {"Ep", 1}}, Matrix::Ones(1, 1));
  auto inst = [](int nin, int nout, const std::function<int(int)>& f) {
    std::vector<std::vector<std::vector<Matrix>>> out(nin, std::vector<std::vector<Matrix>>(nout));
    for (int x = 0; x < nin; ++x)
      for (int a = 0; a < nout; ++a) out[x][a] = {a == f(x) ? Matrix::Ones(1, 1) : Matrix::Zero(1, 1)};
    return out;
  };
  s.device = inst(game.nx, game.na, fa);
  s.adversary = inst(game.ny, game.nb, fb);
  return s;
}

// A single question pair whose answers always win: the predicate is a == b.
inline GameSpec agreement_game() {
  GameSpec g;
  g.nx = g.ny = 1;
  g.q = {1.0};
  g.win = [](int, int, int a, int b) { return a == b ? 1 : 0; };
  return g;
}

// C alphabet: 0, 1 and bot (index 2).
inline constexpr int kCBot = 2;
inline std::string c_symbol(int c) { return c == kCBot ? kBot : std::to_string(c); }

inline constexpr long kRoundChannelDimCap = 4096;

namespace detail {

inline std::vector<Matrix> kron_all(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  std::vector<Matrix> out;
  for (const auto& x : a)
    for (const auto& y : b) out.push_back(kron(x, y));
  return out;
}

// Kraus operators of the re-preparation map rho -> tr(rho) initial.
inline std::vector<Matrix> reprepare_kraus(const DensityMatrix& init) {
  auto e = herm_eig(init.matrix());
  long d = init.dim();
  double cut = support_cutoff(e.values);
  std::vector<Matrix> out;
  for (long j = 0; j < e.values.size(); ++j) {
    if (e.values(j) <= cut) continue;
    for (long i = 0; i < d; ++i) {
      Matrix k = Matrix::Zero(d, d);
      k.col(i) = std::sqrt(e.values(j)) * e.vectors.col(j);
      out.push_back(k);
    }
  }
  return out;
}

inline double question_prob(const DeviceStrategy& s, const ProtocolConfig& cfg, int t, int x, int y) {
  if (t == 1) return cfg.gamma * s.game.q[x * s.game.ny + y];
  return (x == cfg.x_star && y == cfg.y_star) ? 1 - cfg.gamma : 0.0;
}

}  // namespace detail

// One protocol round as a channel (R, Ep) -> (C, A, R, T, X, Y, B, Ep); the classical registers are diagonal.
// swap_inputs exchanges R and Ep before the round: the device's memory then leaks into the adversary's.
inline KrausChannel round_channel(const DeviceStrategy& s, const ProtocolConfig& cfg, bool swap_inputs = false) {
  s.validate();
  cfg.validate(s.game);
  const auto& g = s.game;
  const long dr = s.dim_r(), de = s.dim_e();
  Layout out{{"C", 3}, {"A", g.na}, {"R", static_cast<int>(dr)}, {"T", 2}, {"X", g.nx},
             {"Y", g.ny}, {"B", g.nb}, {"Ep", static_cast<int>(de)}};
  if (out.total_dim() > kRoundChannelDimCap) throw std::invalid_argument("round channel exceeds the dimension guard");
  std::vector<Matrix> pre{Matrix::Identity(dr * de, dr * de)};
  if (s.refresh) pre = detail::reprepare_kraus(s.initial);
  if (swap_inputs) {
    if (dr != de) throw std::invalid_argument("swapping memories needs equal dimensions");
    Matrix sw = Matrix::Zero(dr * de, dr * de);
    for (long i = 0; i < dr; ++i)
      for (long j = 0; j < de; ++j) sw(j * de + i, i * de + j) = 1;
    for (auto& k : pre) k = k * sw;
  }
  const long dq = dr * de;
  std::vector<Matrix> kraus;
  for (int t = 0; t < 2; ++t)
    for (int x = 0; x < g.nx; ++x)
      for (int y = 0; y < g.ny; ++y) {
        double pq = detail::question_prob(s, cfg, t, x, y);
        if (pq <= 0) continue;
        for (int a = 0; a < g.na; ++a)
          for (int b = 0; b < g.nb; ++b) {
            int c = t == 1 ? g.win(x, y, a, b) : kCBot;
            auto local = detail::kron_all(s.device[x][a], s.adversary[y][b]);
            // classical index of (c, a, t, x, y, b) with R and Ep interleaved at their layout positions
            for (const auto& m : local)
              for (const auto& p : pre) {
                Matrix q = std::sqrt(pq) * m * p;  // on R (x) Ep
                Matrix k = Matrix::Zero(out.total_dim(), dq);
                for (long r = 0; r < dr; ++r)
                  for (long e = 0; e < de; ++e) {
                    long row = ((((((c * g.na + a) * dr + r) * 2 + t) * g.nx + x) * g.ny + y) * g.nb + b) * de + e;
                    k.row(row) = q.row(r * de + e);
                  }
                kraus.push_back(k);
              }
          }
      }
  return KrausChannel(Layout{{"R", static_cast<int>(dr)}, {"Ep", static_cast<int>(de)}}, out, kraus);
}

inline NonSignallingResult round_nonsignalling(const KrausChannel& ch, double tol = 1e-10) {
  return check_nonsignalling(ch, {"R"}, {"Ep"}, {"T", "X", "Y", "B", "Ep"}, {"C", "A", "R"}, tol);
}

struct RoundOutcome {
  int t = 0, x = 0, y = 0, a = 0, b = 0, c = kCBot;
};

struct RunRecord {
  std::vector<RoundOutcome> rounds;
  bool aborted = false;
  std::vector<double> freq;  // over C = {0, 1, bot}
  long fails = 0;            // rounds with c = 0
  long tests = 0;
  long wins = 0;
};

inline std::string run_csv(const RunRecord& r) {
  std::ostringstream os;
  os << "round,t,x,y,a,b,c\n";
  for (size_t i = 0; i < r.rounds.size(); ++i) {
    const auto& o = r.rounds[i];
    os << i + 1 << "," << o.t << "," << o.x << "," << o.y << "," << o.a << "," << o.b << "," << c_symbol(o.c) << "\n";
  }
  return os.str();
}

namespace detail {

inline int sample_index(const std::vector<double>& p, double u) {
  double acc = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  for (size_t i = p.size(); i-- > 0;)
    if (p[i] > 0) return static_cast<int>(i);
  return 0;
}

// Unnormalized post-measurement states of the joint memory for inputs (x, y), indexed a * nb + b.
inline std::vector<Matrix> outcome_states(const DeviceStrategy& s, const Matrix& rho, int x, int y) {
  std::vector<Matrix> out;
  for (int a = 0; a < s.game.na; ++a)
    for (int b = 0; b < s.game.nb; ++b) {
      Matrix m = Matrix::Zero(rho.rows(), rho.cols());
      for (const auto& k : kron_all(s.device[x][a], s.adversary[y][b])) m += k * rho * k.adjoint();
      out.push_back(m);
    }
  return out;
}

}  // namespace detail

// Sequential simulation; round i draws from the Philox substream (cfg.seed, i).
inline RunRecord run_protocol(const DeviceStrategy& s, const ProtocolConfig& cfg) {
  s.validate();
  cfg.validate(s.game);
  const auto& g = s.game;
  RunRecord rec;
  rec.rounds.reserve(static_cast<size_t>(cfg.n));
  // with refresh the memory is reset each round, so the answer distribution per question is fixed
  std::vector<std::vector<double>> table;
  if (s.refresh)
    for (int x = 0; x < g.nx; ++x)
      for (int y = 0; y < g.ny; ++y) {
        std::vector<double> p;
        for (const auto& m : detail::outcome_states(s, s.initial.matrix(), x, y)) p.push_back(m.trace().real());
        table.push_back(p);
      }
  Matrix state = s.initial.matrix();
  long counts[3] = {0, 0, 0};
  for (long i = 0; i < cfg.n; ++i) {
    PhiloxStream rng(cfg.seed, static_cast<uint64_t>(i));
    RoundOutcome o;
    o.t = rng.uniform() < cfg.gamma ? 1 : 0;
    if (o.t == 1) {
      int k = detail::sample_index(g.q, rng.uniform());
      o.x = k / g.ny;
      o.y = k % g.ny;
    } else {
      o.x = cfg.x_star;
      o.y = cfg.y_star;
    }
    int ab;
    if (s.refresh) {
      ab = detail::sample_index(table[o.x * g.ny + o.y], rng.uniform());
    } else {
      auto posts = detail::outcome_states(s, state, o.x, o.y);
      std::vector<double> p;
      for (const auto& m : posts) p.push_back(m.trace().real());
      ab = detail::sample_index(p, rng.uniform());
      state = detail::hermitize(posts[ab] / p[ab]);
    }
    o.a = ab / g.nb;
    o.b = ab % g.nb;
    o.c = o.t == 1 ? g.win(o.x, o.y, o.a, o.b) : kCBot;
    if (o.t == 1) {
      ++rec.tests;
      rec.wins += o.c;
    }
    ++counts[o.c];
    rec.rounds.push_back(o);
  }
  rec.fails = counts[0];
  for (long c : counts) rec.freq.push_back(static_cast<double>(c) / static_cast<double>(cfg.n));
  rec.aborted = static_cast<double>(rec.fails) > cfg.abort_threshold();
  return rec;
}

// exp(-delta^2 gamma n / (1 - omega_exp + delta)): abort probability bound for a device winning with omega_exp.
inline double chernoff_abort_bound(const ProtocolConfig& cfg) {
  double den = 1 - cfg.omega_exp + cfg.delta;
  if (!(den > 0)) throw std::invalid_argument("1 - omega_exp + delta must be positive");
  return std::exp(-cfg.delta * cfg.delta / den * cfg.gamma * static_cast<double>(cfg.n));
}

// Win probability of the strategy on a fresh round, by exhaustive enumeration of questions and answers.
inline double win_probability(const DeviceStrategy& s) {
  s.validate();
  const auto& g = s.game;
  double w = 0;
  for (int x = 0; x < g.nx; ++x)
    for (int y = 0; y < g.ny; ++y) {
      auto posts = detail::outcome_states(s, s.initial.matrix(), x, y);
      for (int a = 0; a < g.na; ++a)
        for (int b = 0; b < g.nb; ++b) w += g.q[x * g.ny + y] * g.win(x, y, a, b) * posts[a * g.nb + b].trace().real();
    }
  return w;
}

// H_alpha(A | B X Y T Ep Et) of one round on the strategy's initial state, Et purifying (R, Ep).
// Classical registers are handled block by block.
inline double single_round_entropy(const DeviceStrategy& s, const ProtocolConfig& cfg, const Alpha& alpha) {
  s.validate();
  cfg.validate(s.game);
  const auto& g = s.game;
  PureState pur = purify(s.initial, "Et");
  Matrix psi = pur.density().matrix();
  const long dr = s.dim_r(), de = s.dim_e(), dp = pur.layout().dim_of("Et");
  Layout full{{"R", static_cast<int>(dr)}, {"Ep", static_cast<int>(de)}, {"Et", static_cast<int>(dp)}};
  std::vector<std::pair<double, Operator>> blocks;
  for (int t = 0; t < 2; ++t)
    for (int x = 0; x < g.nx; ++x)
      for (int y = 0; y < g.ny; ++y) {
        double pq = detail::question_prob(s, cfg, t, x, y);
        if (pq <= 0) continue;
        for (int b = 0; b < g.nb; ++b) {
          // operator on A (x) Ep (x) Et for this (t, x, y, b)
          long dcond = de * dp;
          Matrix blk = Matrix::Zero(g.na * dcond, g.na * dcond);
          double pb = 0;
          for (int a = 0; a < g.na; ++a) {
            Matrix m = Matrix::Zero(dr * dcond, dr * dcond);
            for (const auto& k : detail::kron_all(s.device[x][a], s.adversary[y][b])) {
              Matrix kk = kron(k, Matrix::Identity(dp, dp));
              m += kk * psi * kk.adjoint();
            }
            Matrix cond = partial_trace(Operator(full, m), {"Ep", "Et"}).matrix();
            pb += cond.trace().real();
            blk.block(a * dcond, a * dcond, dcond, dcond) = cond;
          }
          if (pb <= 1e-15) continue;
          Operator op(Layout{{"A", g.na}, {"Ep", static_cast<int>(de)}, {"Et", static_cast<int>(dp)}}, blk / pb);
          blocks.emplace_back(pq * pb, op);
        }
      }
  return cond_renyi_down_cq(blocks, {"A"}, {"Ep", "Et"}, alpha);
}

struct CertifiedRate {
  double h = 0;
  double rate = 0;
  double bound = 0;
  AutoAlphaBound detail;
  TestTradeoff tradeoff;
};

// h from p'(0) <= 1 - omega_exp + delta, the testing construction, and the corollary with Pr[Omega] >= eps_a.
inline CertifiedRate certified_rate(const TradeoffFunction& g, const ProtocolConfig& cfg, double eps_s, double eps_a,
                                    double d_a = 2) {
  if (!(cfg.gamma > 0)) throw std::invalid_argument("certified rate needs gamma > 0");
  if (!(g.alphabet() == std::vector<std::string>{"0", "1"}))
    throw std::invalid_argument("tradeoff g must be given on the alphabet {0, 1}");
  if (g.at("1") < g.max()) throw std::invalid_argument("tradeoff g must satisfy Max[g] = g(1)");
  auto h = h_from_event(g, {{{1.0, 0.0}, 1 - cfg.omega_exp + cfg.delta}}, cfg.n);
  if (!h) throw std::invalid_argument("the accepted set of frequencies is empty");
  CertifiedRate r;
  r.h = *h;
  r.tradeoff = tradeoff_from_test(g, cfg.gamma);
  EatTestingInput in;
  in.n = static_cast<double>(cfg.n);
  in.epsilon = eps_s;
  in.p_omega = eps_a;
  in.d_a = d_a;
  in.stats = r.tradeoff.stats;
  in.h = r.h;
  r.detail = eat_bound_auto_alpha(in);
  r.bound = r.detail.bound;
  r.rate = r.bound / in.n;
  return r;
}

// Seed of trial k derived from a root seed (splitmix64 finaliser).
inline uint64_t trial_seed(uint64_t root, uint64_t k) {
  uint64_t z = root + 0x9e3779b97f4a7c15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace geat
