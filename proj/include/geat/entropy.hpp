#pragma once

#include "geat/channels.hpp"
#include "geat/convex.hpp"
#include "geat/optimize.hpp"

#include <string>

namespace geat {

// Renyi order: a number in [1/2, 1) u (1, inf), or one of the tags for alpha -> 1 and alpha -> inf.
class Alpha {
 public:
  enum class Kind { finite, one, infinity };

  static Alpha of(double v) {
    if (std::isinf(v) && v > 0) return infinity();
    if (v == 1.0) return one();
    if (!(v >= 0.5) || !std::isfinite(v)) throw std::invalid_argument("alpha must lie in [1/2, 1) u (1, inf]");
    return Alpha(Kind::finite, v);
  }
  static Alpha one() { return Alpha(Kind::one, 1.0); }
  static Alpha infinity() { return Alpha(Kind::infinity, std::numeric_limits<double>::infinity()); }

  Kind kind() const { return kind_; }
  double value() const { return v_; }
  bool is_one() const { return kind_ == Kind::one; }
  bool is_infinity() const { return kind_ == Kind::infinity; }

  std::string str() const {
    if (is_infinity()) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v_);
    return buf;
  }

 private:
  Alpha(Kind k, double v) : kind_(k), v_(v) {}
  Kind kind_;
  double v_;
};

// beta = 1/(2 - alpha), defined for alpha in [1/2, 2).
inline Alpha beta_of(const Alpha& a) {
  if (a.is_one()) return Alpha::one();
  if (a.is_infinity() || a.value() >= 2) throw std::invalid_argument("1/(2-alpha) needs alpha < 2");
  return Alpha::of(1.0 / (2.0 - a.value()));
}

namespace detail {

inline void require_psd(const Matrix& s, const char* what) {
  if (min_eigenvalue(s) < -kStateTol * std::max(1.0, max_abs(s)))
    throw StateError(std::string(what) + " must be positive semidefinite");
}

// Sandwiched Renyi divergence in bits on raw matrices; rho is taken as given (no renormalisation).
inline double renyi_divergence(const Matrix& rho, const Matrix& sigma, const Alpha& alpha) {
  if (rho.rows() != sigma.rows()) throw LayoutError("divergence needs operators of equal dimension");
  require_psd(sigma, "sigma");
  if (alpha.is_infinity()) return dmax(rho, sigma).value;
  Matrix u = support_basis(sigma);
  if (u.cols() == 0 || outside_support(rho, u) > kSupportResidualTol) return kInf;
  if (alpha.is_one()) {
    double s = von_neumann_entropy(rho);
    return -s - inner(rho, log2_on_support(sigma));
  }
  double a = alpha.value();
  double gamma = (1 - a) / (2 * a);
  Matrix g = power_on_support(sigma, gamma);
  Matrix m = hermitize(g * rho * g);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  double cut = support_cutoff(es.eigenvalues());
  double q = 0;
  for (long i = 0; i < es.eigenvalues().size(); ++i) {
    double x = es.eigenvalues()(i);
    if (x > cut) q += std::pow(x, a);
  }
  if (!(q > 0)) return a < 1 ? kInf : -kInf;
  return std::log2(q) / (a - 1);
}

inline Matrix ordered_marginal(const Operator& rho, const std::vector<std::string>& a,
                               const std::vector<std::string>& b, long& da, long& db) {
  for (const auto& l : a)
    if (std::find(b.begin(), b.end(), l) != b.end()) throw LayoutError("system '" + l + "' is in both A and B");
  if (a.empty()) throw LayoutError("conditional entropy needs a nonempty A");
  std::vector<std::string> keep = a;
  keep.insert(keep.end(), b.begin(), b.end());
  Operator m = marginal(rho, keep);
  da = rho.layout().dim_of(a);
  db = rho.layout().dim_of(b);
  return m.matrix();
}

// Tr_A of an operator on A (x) B with A first.
inline Matrix trace_first(const Matrix& m, long da, long db) {
  Matrix out = Matrix::Zero(db, db);
  for (long a = 0; a < da; ++a) out += m.block(a * db, a * db, db, db);
  return out;
}

inline Matrix identity_with(long da, const Matrix& s) { return kron(Matrix::Identity(da, da), s); }

}  // namespace detail

inline double renyi_divergence(const DensityMatrix& rho, const Operator& sigma, const Alpha& alpha) {
  if (!(rho.layout().dims() == sigma.layout().dims())) throw LayoutError("divergence needs matching layouts");
  return detail::renyi_divergence(rho.matrix(), sigma.matrix(), alpha);
}

// H_alpha(A|B) = -D_alpha(rho_AB || 1_A (x) rho_B).
inline double cond_renyi_down(const Operator& rho, const std::vector<std::string>& a, const std::vector<std::string>& b,
                              const Alpha& alpha) {
  long da, db;
  Matrix ab = detail::ordered_marginal(rho, a, b, da, db);
  Matrix rb = detail::trace_first(ab, da, db);
  if (alpha.is_one()) return von_neumann_entropy(ab) - von_neumann_entropy(rb);
  return -detail::renyi_divergence(ab, detail::identity_with(da, rb), alpha);
}

// H_alpha(A|B K) for a classical K: the state is sum_k p_k |k><k| (x) rho_k with normalized rho_k on A B.
inline double cond_renyi_down_cq(const std::vector<std::pair<double, Operator>>& blocks, const std::vector<std::string>& a,
                                 const std::vector<std::string>& b, const Alpha& alpha) {
  double total = 0;
  std::vector<std::pair<double, double>> ph;
  for (const auto& [p, r] : blocks) {
    if (p <= 0) continue;
    total += p;
    ph.emplace_back(p, cond_renyi_down(r, a, b, alpha));
  }
  if (ph.empty()) throw StateError("classical mixture has no weight");
  if (alpha.is_one()) {
    double s = 0;
    for (auto [p, h] : ph) s += p * h;
    return s / total;
  }
  if (alpha.is_infinity()) {
    double m = kInf;
    for (auto [p, h] : ph) m = std::min(m, h);
    return m;
  }
  double a1 = alpha.value() - 1;
  // log-sum-exp of log2 p - a1 h
  double mx = -kInf;
  for (auto [p, h] : ph) mx = std::max(mx, std::log2(p / total) - a1 * h);
  double s = 0;
  for (auto [p, h] : ph) s += std::exp2(std::log2(p / total) - a1 * h - mx);
  return -(mx + std::log2(s)) / a1;
}

struct CertifiedValue {
  double value = 0;
  Operator sigma;  // optimizer on B
  bool certified = false;
  double residual = 0;  // first-order residual at the optimizer
  double spread = 0;    // max - min over restarts
  int restarts = 0;
  double upper = kInf;  // SDP dual bound, when one was computed
};

namespace detail {

// sigma_B -> -D_alpha(rho_AB || 1 (x) sigma_B) with its gradient.
inline StateObjective up_objective(const Matrix& ab, long da, long db, double a) {
  double gamma = (1 - a) / (2 * a);
  Matrix sr = sqrtm_psd(ab);
  double ln2 = std::log(2.0);
  StateObjective obj;
  // sigma powers use the full spectrum: for alpha > 1 a vanishing eigenvalue must send the value to -inf
  auto spow = [=](double x, double p) { return x > 0 ? std::pow(x, p) : (p < 0 ? kInf : 0.0); };
  obj.value = [=](const Matrix& s) {
    auto eb = herm_eig(identity_with(da, s));
    if (gamma < 0 && !(eb.values.minCoeff() > 0)) return -kInf;
    Matrix m = hermitize(sr * from_spectrum(eb, eb.values.unaryExpr([&](double x) { return spow(x, 2 * gamma); })) * sr);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    double cut = support_cutoff(es.eigenvalues());
    double q = 0;
    for (long i = 0; i < es.eigenvalues().size(); ++i)
      if (es.eigenvalues()(i) > cut) q += std::pow(es.eigenvalues()(i), a);
    if (!(q > 0)) return -kInf;
    return -std::log2(q) / (a - 1);
  };
  obj.gradient = [=](const Matrix& s) {
    Matrix big = identity_with(da, s);
    auto eb = herm_eig(big);
    RealVector pw = eb.values.unaryExpr([&](double x) { return spow(x, 2 * gamma); });
    Matrix m = hermitize(sr * from_spectrum(eb, pw) * sr);
    auto em = herm_eig(m);
    double cut = support_cutoff(em.values);
    double q = 0;
    RealVector pm(em.values.size());
    for (long i = 0; i < em.values.size(); ++i) {
      double x = em.values(i);
      q += x > cut ? std::pow(x, a) : 0.0;
      pm(i) = x > cut ? std::pow(x, a - 1) : 0.0;
    }
    Matrix z = sr * from_spectrum(em, pm) * sr;
    auto dd = divided_differences(
        eb.values, [&](double x) { return spow(x, 2 * gamma); },
        [&](double x) { return 2 * gamma * spow(x, 2 * gamma - 1); });
    Matrix dq = a * trace_first(frechet(eb, dd, z), da, db);
    return Matrix(-dq / ((a - 1) * ln2 * q));
  };
  return obj;
}

// Fixed-point candidate sigma <- Tr_A[(S^g rho S^g)^a] / tr, kept only while the objective improves.
inline Matrix up_fixed_point(const StateObjective& obj, const Matrix& ab, long da, long db, double a, Matrix s,
                             int iters = 200) {
  double gamma = (1 - a) / (2 * a);
  double f = obj.value(s);
  for (int k = 0; k < iters; ++k) {
    Matrix g = power_on_support(identity_with(da, s), gamma);
    Matrix m = hermitize(g * ab * g);
    Matrix n = trace_first(power_on_support(m, a), da, db);
    double t = n.trace().real();
    if (!(t > 0)) break;
    n = hermitize(n / t);
    double fn = obj.value(n);
    if (!(fn > f)) break;
    s = n;
    f = fn;
  }
  return s;
}

}  // namespace detail

// H_min(A|B) = -log min{tr sigma_B : 1_A (x) sigma_B >= rho_AB}.
struct MinEntropyResult {
  double value = 0;
  SolveReport report;
  Operator sigma;       // optimal sigma_B (unnormalised)
  Matrix certificate;   // dual X_AB >= 0 with Tr_A X = 1_B
};

inline MinEntropyResult min_entropy(const Operator& rho, const std::vector<std::string>& a,
                                    const std::vector<std::string>& b, const SdpOptions& opt = {}) {
  long da, db;
  Matrix ab = detail::ordered_marginal(rho, a, b, da, db);
  auto basis = hermitian_basis(db);
  SdpProblem p;
  p.block_sizes = {da * db};
  p.c = {-ab};
  p.b = RealVector(static_cast<long>(basis.size()));
  for (size_t i = 0; i < basis.size(); ++i) {
    p.a.push_back({-detail::identity_with(da, basis[i])});
    p.b(static_cast<long>(i)) = -basis[i].trace().real();
  }
  auto sol = sdp_solve(p, opt);
  MinEntropyResult r;
  r.report = sol.report;
  r.report.primal_value = -sol.report.dual_value;  // tr sigma_B
  r.report.dual_value = -sol.report.primal_value;  // tr(rho X)
  r.value = -std::log2(r.report.primal_value);
  Matrix s = Matrix::Zero(db, db);
  for (size_t i = 0; i < basis.size(); ++i) s += sol.y(static_cast<long>(i)) * basis[i];
  r.sigma = Operator(rho.layout().select(b), detail::hermitize(s));
  r.certificate = sol.x[0];
  return r;
}

inline CertifiedValue cond_renyi_up(const Operator& rho, const std::vector<std::string>& a,
                                    const std::vector<std::string>& b, const Alpha& alpha, const OptConfig& cfg = {}) {
  long da, db;
  Matrix ab = detail::ordered_marginal(rho, a, b, da, db);
  Matrix rb = detail::trace_first(ab, da, db);
  Layout lb = rho.layout().select(b);
  CertifiedValue out;
  if (alpha.is_one()) {
    out.value = von_neumann_entropy(ab) - von_neumann_entropy(rb);
    out.sigma = Operator(lb, rb);
    out.certified = true;
    return out;
  }
  if (alpha.is_infinity()) {
    auto h = min_entropy(rho, a, b);
    out.value = h.value;
    out.sigma = Operator(lb, h.sigma.matrix() / h.sigma.trace().real());
    out.residual = h.report.gap;
    out.certified = h.report.status == SolveStatus::optimal;
    return out;
  }
  auto obj = detail::up_objective(ab, da, db, alpha.value());
  if (db == 1) {
    Matrix one = Matrix::Identity(1, 1);
    out.value = obj.value(one);
    out.sigma = Operator(lb, one);
    out.certified = true;
    return out;
  }
  Matrix start = detail::hermitize(rb + 1e-9 * Matrix::Identity(db, db));
  start = detail::up_fixed_point(obj, ab, da, db, alpha.value(), start / start.trace().real());
  auto ms = maximize_state_multistart(obj, db, cfg, start);
  out.value = ms.best.value;
  out.sigma = Operator(lb, ms.best.sigma);
  out.residual = ms.best.residual;
  out.spread = ms.spread;
  out.restarts = ms.restarts;
  out.certified = ms.certified;
  return out;
}

namespace detail {

// Upper bound on sup_sigma F(rho_AB, 1 (x) sigma)^{1/2} from the dual of
//   max Re Tr X  s.t.  [[rho_s, X], [X^dag, 1 (x) sigma]] >= 0,  Tr sigma = 1,
// with rho restricted to its support. The dual slack is recomputed and its negative part charged against Tr Z = 1 + da.
inline double fidelity_dual_bound(const Matrix& ab, long da, long db, const SdpOptions& opt = {}) {
  Matrix v = support_basis(ab);
  long r = v.cols(), d = da * db, n = r + d;
  Matrix rs = detail::hermitize(v.adjoint() * ab * v);
  SdpProblem p;
  p.block_sizes = {n, db};
  Matrix c0 = Matrix::Zero(n, n);
  c0.block(0, r, r, d) = -0.5 * v.adjoint();
  c0.block(r, 0, d, r) = -0.5 * v;
  p.c = {c0, Matrix::Zero(db, db)};
  std::vector<double> b;
  for (const auto& h : hermitian_basis(r)) {
    Matrix a0 = Matrix::Zero(n, n);
    a0.block(0, 0, r, r) = h;
    p.a.push_back({a0, Matrix::Zero(db, db)});
    b.push_back((h * rs).trace().real());
  }
  for (const auto& h : hermitian_basis(d)) {
    Matrix a0 = Matrix::Zero(n, n);
    a0.block(r, r, d, d) = h;
    p.a.push_back({a0, Matrix(-trace_first(h, da, db))});
    b.push_back(0);
  }
  p.a.push_back({Matrix::Zero(n, n), Matrix::Identity(db, db)});
  b.push_back(1);
  p.b = Eigen::Map<RealVector>(b.data(), static_cast<long>(b.size()));
  auto sol = sdp_solve(p, opt);
  if (sol.y.size() != static_cast<long>(b.size())) return kInf;
  double lower = 0;
  std::vector<Matrix> s = p.c;
  for (size_t i = 0; i < b.size(); ++i) {
    lower += sol.y(static_cast<long>(i)) * b[i];
    for (size_t k = 0; k < 2; ++k) s[k] -= sol.y(static_cast<long>(i)) * p.a[i][k];
  }
  lower += std::min(herm_eig(hermitize(s[0])).values.minCoeff(), 0.0) * static_cast<double>(1 + da);
  lower += std::min(herm_eig(hermitize(s[1])).values.minCoeff(), 0.0);
  return std::isfinite(lower) ? -lower : kInf;
}

}  // namespace detail

// H_max(A|B) = log sup_sigma || rho^{1/2} (1 (x) sigma)^{1/2} ||_1^2.
inline CertifiedValue max_entropy(const Operator& rho, const std::vector<std::string>& a,
                                  const std::vector<std::string>& b, const OptConfig& cfg = {}) {
  long da, db;
  Matrix ab = detail::ordered_marginal(rho, a, b, da, db);
  Matrix sr = sqrtm_psd(ab);
  Layout lb = rho.layout().select(b);
  StateObjective obj;
  obj.value = [&](const Matrix& s) {
    Matrix m = detail::hermitize(sr * detail::identity_with(da, s) * sr);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    double t = 0;
    for (long i = 0; i < es.eigenvalues().size(); ++i) t += std::sqrt(std::max(es.eigenvalues()(i), 0.0));
    return t;
  };
  obj.gradient = [&](const Matrix& s) {
    Matrix m = detail::hermitize(sr * detail::identity_with(da, s) * sr);
    Matrix mi = power_on_support(m, -0.5);
    return Matrix(0.5 * detail::trace_first(sr * mi * sr, da, db));
  };
  CertifiedValue out;
  if (db == 1) {
    Matrix one = Matrix::Identity(1, 1);
    out.value = 2 * std::log2(obj.value(one));
    out.sigma = Operator(lb, one);
    out.certified = true;
    return out;
  }
  Matrix rb = detail::trace_first(ab, da, db);
  Matrix start = detail::hermitize(rb + 1e-6 * Matrix::Identity(db, db));
  auto ms = maximize_state_multistart(obj, db, cfg, start / start.trace().real());
  out.value = 2 * std::log2(ms.best.value);
  out.sigma = Operator(lb, ms.best.sigma);
  out.residual = ms.best.residual;
  out.spread = 2 * std::log2(ms.best.value) - 2 * std::log2(std::max(ms.best.value - ms.spread, 1e-300));
  out.restarts = ms.restarts;
  out.certified = ms.certified;
  if (!out.certified) {
    // the ascent is slow near rank-deficient optima; a duality gap certifies the value instead
    out.upper = 2 * std::log2(detail::fidelity_dual_bound(ab, da, db));
    out.certified = out.upper - out.value <= cfg.agree_tol;
  }
  return out;
}

struct ChannelDivergenceResult {
  double value = 0;  // (1/n) D_alpha at the best input found; a lower bound on the regularised divergence
  Vector best_input;  // pure state on in^n (x) purifier, input index first
  int restarts = 0;
};

namespace detail {

inline std::vector<Matrix> kraus_power(const std::vector<Matrix>& k, int n) {
  std::vector<Matrix> out = k;
  for (int i = 1; i < n; ++i) {
    std::vector<Matrix> next;
    for (const auto& x : out)
      for (const auto& y : k) next.push_back(kron(x, y));
    out.swap(next);
  }
  return out;
}

inline Matrix apply_with_purifier(const std::vector<Matrix>& kraus, const Vector& psi, long din, long dp) {
  long dout = kraus.front().rows();
  Matrix out = Matrix::Zero(dout * dp, dout * dp);
  Eigen::Map<const Matrix> g(psi.data(), dp, din);  // psi(i*dp + p) -> g(p, i)
  for (const auto& k : kraus) {
    Matrix v = k * g.transpose();  // v(o, p), stored column-major; reorder to index o*dp + p
    Vector x(dout * dp);
    for (long o = 0; o < dout; ++o)
      for (long p = 0; p < dp; ++p) x(o * dp + p) = v(o, p);
    out.noalias() += x * x.adjoint();
  }
  return out;
}

}  // namespace detail

inline constexpr long kChannelDivergenceDimCap = 64;

// sup over pure inputs on (in (x) purifier)^n of (1/n) D_alpha(E^n(omega) || F^n(omega)), by multi-restart search.
inline ChannelDivergenceResult channel_divergence_finite(const KrausChannel& e, const KrausChannel& f, const Alpha& alpha,
                                                         int n, const OptConfig& cfg = {}) {
  if (!(e.in_layout().dims() == f.in_layout().dims()) || !(e.out_layout().dims() == f.out_layout().dims()))
    throw LayoutError("channel divergence needs channels with matching layouts");
  if (n < 1) throw std::invalid_argument("n must be positive");
  long din = 1, dout = 1;
  for (int i = 0; i < n; ++i) {
    din *= e.in_layout().total_dim();
    dout *= e.out_layout().total_dim();
  }
  if (dout * din > kChannelDivergenceDimCap)
    throw std::invalid_argument("channel divergence: dimension " + std::to_string(dout * din) + " exceeds the cap of 64");
  auto ke = detail::kraus_power(e.kraus(), n);
  auto kf = detail::kraus_power(f.kraus(), n);
  auto div = [&](const Vector& psi) {
    Matrix re = detail::apply_with_purifier(ke, psi, din, din);
    Matrix rf = detail::apply_with_purifier(kf, psi, din, din);
    return detail::renyi_divergence(re, rf, alpha) / n;
  };
  Vector phi = Vector::Zero(din * din);
  for (long i = 0; i < din; ++i) phi(i * din + i) = 1.0 / std::sqrt(double(din));
  ChannelDivergenceResult out;
  double at_phi = div(phi);
  if (std::isinf(at_phi) && at_phi > 0) {
    out.value = kInf;
    out.best_input = phi;
    out.restarts = 1;
    return out;
  }
  std::vector<Vector> seeds{phi};
  if (n > 1) {
    // the n-fold copy of the single-use optimum, reordered to in^n (x) purifier^n
    OptConfig one = cfg;
    one.restarts = std::max(1, cfg.restarts / 5);
    one.search_iter = std::max(cfg.search_iter, OptConfig{}.search_iter);
    auto r1 = channel_divergence_finite(e, f, alpha, 1, one);
    long d1 = e.in_layout().total_dim();
    Vector cur = r1.best_input;
    long dc = d1;
    for (int k = 1; k < n; ++k) {
      Vector next(dc * d1 * dc * d1);
      for (long i = 0; i < dc; ++i)
        for (long j = 0; j < d1; ++j)
          for (long p = 0; p < dc; ++p)
            for (long q = 0; q < d1; ++q)
              next(((i * d1 + j) * dc + p) * d1 + q) = cur(i * dc + p) * r1.best_input(j * d1 + q);
      cur = next;
      dc *= d1;
    }
    seeds.push_back(cur);
  }
  auto res = minimize_over_pure_states([&](const Vector& v) { return -div(v); }, din * din, cfg.restarts, cfg.seed, cfg.search_iter,
                                       seeds);
  out.value = -res.value;
  out.best_input = res.best;
  out.restarts = res.restarts;
  return out;
}

}  // namespace geat
