#pragma once

#include "geat/linalg.hpp"
#include "geat/sdp.hpp"

#include <limits>

namespace geat {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kSupportResidualTol = 1e-9;

namespace detail {

// Tr_R of an operator on A (x) R with R last.
inline Matrix trace_second(const Matrix& m, long da, long dr) {
  Matrix out = Matrix::Zero(da, da);
  for (long a = 0; a < da; ++a)
    for (long b = 0; b < da; ++b) {
      cplx s = 0;
      for (long r = 0; r < dr; ++r) s += m(a * dr + r, b * dr + r);
      out(a, b) = s;
    }
  return out;
}

inline Matrix with_identity(const Matrix& y, long dr) { return kron(y, Matrix::Identity(dr, dr)); }

// max |rho - P rho P| for the projector P onto the column span of u.
inline double outside_support(const Matrix& rho, const Matrix& u) {
  Matrix p = u * u.adjoint();
  return max_abs(rho - p * rho * p);
}

// rho_AR reordered so that the systems of sigma_A come first, in sigma_A's order.
inline Matrix a_first(const Operator& rho_ar, const Layout& a_layout, Layout& ordered) {
  std::vector<std::string> order = a_layout.labels();
  for (const auto& f : rho_ar.layout().factors())
    if (!a_layout.contains(f.label)) order.push_back(f.label);
  for (const auto& f : a_layout.factors())
    if (rho_ar.layout().dim_of(f.label) != f.dim) throw LayoutError("marginal dimension mismatch on " + f.label);
  ordered = rho_ar.layout().select(order);
  return permute_matrix(rho_ar.matrix(), rho_ar.layout(), order);
}

}  // namespace detail

struct DmaxResult {
  double value = 0;  // bits, +inf on support violation
  SolveReport report;
  Matrix witness;  // dual variable X (on the support of sigma)
};

// D_max(rho||sigma) = log inf{lambda : rho <= lambda sigma}. Primal min lambda, dual max tr(X rho) s.t. tr(X sigma) = 1.
inline DmaxResult dmax(const Matrix& rho, const Matrix& sigma, const SdpOptions& opt = {}) {
  if (rho.rows() != sigma.rows()) throw LayoutError("dmax needs operators of equal dimension");
  if (min_eigenvalue(sigma) < -kStateTol * std::max(1.0, detail::max_abs(sigma)))
    throw StateError("dmax needs a positive semidefinite sigma");
  DmaxResult res;
  Matrix u = support_basis(sigma);
  if (u.cols() == 0 || detail::outside_support(rho, u) > kSupportResidualTol) {
    res.value = kInf;
    res.report.primal_value = kInf;
    res.report.dual_value = kInf;
    res.report.gap = 0;
    res.report.status = SolveStatus::infeasible;
    return res;
  }
  // whiten by sigma^{-1/2} on its support so that the constraint reads rho' <= lambda 1
  Matrix w = u * power_on_support(detail::hermitize(u.adjoint() * sigma * u), -0.5);
  Matrix rs = detail::hermitize(w.adjoint() * rho * w);
  long r = rs.rows();
  SdpProblem p;
  p.block_sizes = {r};
  p.c = {-rs};
  p.a = {{-Matrix::Identity(r, r)}};
  p.b = RealVector::Constant(1, -1.0);
  auto sol = sdp_solve(p, opt);
  res.report = sol.report;
  res.report.primal_value = -sol.report.dual_value;  // lambda
  res.report.dual_value = -sol.report.primal_value;  // tr(X rho)
  res.value = std::log2(res.report.primal_value);
  res.witness = w * sol.x[0] * w.adjoint();
  return res;
}

inline DmaxResult dmax(const Operator& rho, const Operator& sigma, const SdpOptions& opt = {}) {
  if (!(rho.layout().dims() == sigma.layout().dims())) throw LayoutError("dmax needs matching layouts");
  return dmax(rho.matrix(), sigma.matrix(), opt);
}

struct DmaxExtensionResult {
  double value = 0;
  Operator optimizer;  // sigma_hat on rho_AR's layout with marginal sigma_A
  SolveReport report;
};

// inf over sigma_hat_AR with sigma_hat_A = sigma_A of D_max(rho_AR || sigma_hat_AR).
// Primal variables tau_AR = rho_AR + Z (Z >= 0) and lambda >= 0 with Tr_R tau = lambda sigma_A.
inline DmaxExtensionResult dmax_extension(const Operator& rho_ar, const Operator& sigma_a, const SdpOptions& opt = {}) {
  Layout ordered;
  Matrix rho = detail::a_first(rho_ar, sigma_a.layout(), ordered);
  long da = sigma_a.dim(), dr = rho.rows() / da;
  DmaxExtensionResult res;
  Matrix rho_a = detail::trace_second(rho, da, dr);
  Matrix u = support_basis(sigma_a.matrix());
  if (u.cols() == 0 || detail::outside_support(rho_a, u) > kSupportResidualTol) {
    res.value = kInf;
    res.report.primal_value = res.report.dual_value = kInf;
    res.report.status = SolveStatus::infeasible;
    return res;
  }
  long ra = u.cols();
  // whitened coordinates: sigma_A -> 1 on its support
  Matrix ssu = detail::hermitize(u.adjoint() * sigma_a.matrix() * u);
  Matrix ub = kron(u * power_on_support(ssu, -0.5), Matrix::Identity(dr, dr));
  Matrix back = kron(u * power_on_support(ssu, 0.5), Matrix::Identity(dr, dr));
  Matrix rs = detail::hermitize(ub.adjoint() * rho * ub);
  Matrix ss = Matrix::Identity(ra, ra);
  Matrix rsa = detail::trace_second(rs, ra, dr);

  auto basis = hermitian_basis(ra);
  SdpProblem p;
  p.block_sizes = {ra * dr, 1};
  p.c = {Matrix::Identity(ra * dr, ra * dr), Matrix::Zero(1, 1)};
  p.b = RealVector(static_cast<long>(basis.size()));
  for (size_t i = 0; i < basis.size(); ++i) {
    Matrix lam(1, 1);
    lam(0, 0) = -inner(basis[i], ss);
    p.a.push_back({detail::with_identity(basis[i], dr), lam});
    p.b(static_cast<long>(i)) = -inner(basis[i], rsa);
  }
  auto sol = sdp_solve(p, opt);
  double tr_rho = rs.trace().real(), tr_sigma = ss.trace().real();
  res.report = sol.report;
  res.report.primal_value = (tr_rho + sol.report.primal_value) / tr_sigma;
  res.report.dual_value = (tr_rho + sol.report.dual_value) / tr_sigma;
  res.report.gap = std::abs(res.report.primal_value - res.report.dual_value);
  res.value = std::log2(res.report.primal_value);
  double lambda = sol.x[1](0, 0).real();
  Matrix tau = rs + sol.x[0];
  Matrix shat = back * (tau / std::max(lambda, 1e-300)) * back.adjoint();
  Operator in_order{ordered, detail::hermitize(shat)};
  res.optimizer = permute(in_order, rho_ar.layout().labels());
  return res;
}

struct RelentOptions {
  int max_iter = 400;
  double gap_tol = 1e-7;   // stop once value - lower_bound is below this
  int certify_every = 10;
  double max_step = 1e3;
};

struct RelentResult {
  double value = kInf;        // D(rho||sigma_hat) at the returned sigma_hat, bits
  Operator sigma_hat;         // feasible: marginal equals sigma_A
  double lower_bound = -kInf;  // rigorous: lower_bound <= inf
  double gap = kInf;          // value - lower_bound
  int iterations = 0;
  SolveStatus status = SolveStatus::max_iter;
  double marginal_residual = 0;
};

namespace detail {

struct RelentState {
  Matrix sigma;  // feasible point
  HermEig eig;
  double f = 0;  // bits
  Matrix grad;   // bits
};

inline double relent_bits(const Matrix& rho, double rho_entropy_term, const HermEig& se) {
  double cut = 0;
  RealVector lg = se.values.unaryExpr([&](double x) { return x > cut ? std::log2(x) : -kInf; });
  Matrix t = se.vectors.adjoint() * rho * se.vectors;
  double s = 0;
  for (long i = 0; i < t.rows(); ++i) {
    double w = t(i, i).real();
    if (w <= 0) continue;
    if (!std::isfinite(lg(i))) return kInf;
    s += w * lg(i);
  }
  return rho_entropy_term - s;
}

// Gradient of sigma -> D(rho||sigma) in bits: -Dlog(sigma)[rho] / ln 2.
inline Matrix relent_grad(const Matrix& rho, const HermEig& se) {
  auto dd = divided_differences(se.values, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
  return -frechet(se, dd, rho) / std::log(2.0);
}

// Y solving Tr_R exp(K + Y (x) 1) = sigma_a by damped Newton on the concave dual
// phi(Y) = <Y, sigma_a> - tr exp(K + Y (x) 1). Returns false on failure.
inline bool marginal_projection(const Matrix& k, const Matrix& sigma_a, long da, long dr, Matrix& y, Matrix& out,
                                const std::vector<Matrix>& basis) {
  auto phi = [&](const Matrix& yy, Matrix* expm, HermEig* eig) -> double {
    HermEig e = herm_eig(k + with_identity(yy, dr));
    if (e.values.maxCoeff() > 700) return -kInf;
    RealVector ex = e.values.unaryExpr([](double x) { return std::exp(x); });
    if (expm) *expm = from_spectrum(e, ex);
    if (eig) *eig = e;
    return inner(yy, sigma_a) - ex.sum();
  };
  const int nb = static_cast<int>(basis.size());
  double scale = std::max(1.0, sigma_a.trace().real());
  Matrix em;
  HermEig e;
  double val = phi(y, &em, &e);
  if (!std::isfinite(val)) return false;
  for (int it = 0; it < 100; ++it) {
    Matrix g = sigma_a - trace_second(em, da, dr);
    if (max_abs(g) <= 1e-14 * scale) {
      out = em;
      return true;
    }
    auto dd = divided_differences(e.values, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
    Eigen::MatrixXd h(nb, nb);
    std::vector<Matrix> tb(nb);
    for (int j = 0; j < nb; ++j) tb[j] = trace_second(frechet(e, dd, with_identity(basis[j], dr)), da, dr);
    Eigen::VectorXd gv(nb);
    for (int i = 0; i < nb; ++i) {
      gv(i) = inner(basis[i], g);
      for (int j = 0; j < nb; ++j) h(i, j) = inner(basis[i], tb[j]);
    }
    Eigen::VectorXd step = h.ldlt().solve(gv);
    if (!step.allFinite()) return false;
    Matrix dy = Matrix::Zero(da, da);
    for (int i = 0; i < nb; ++i) dy += step(i) * basis[i];
    double slope = gv.dot(step);
    double s = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      Matrix yn = y + s * dy;
      Matrix emn;
      HermEig en;
      double vn = phi(yn, &emn, &en);
      if (std::isfinite(vn) && vn >= val + 1e-4 * s * slope - 1e-15 * std::abs(val)) {
        y = yn;
        em = emn;
        e = en;
        val = vn;
        moved = true;
        break;
      }
      s *= 0.5;
    }
    if (!moved) {
      Matrix g2 = sigma_a - trace_second(em, da, dr);
      if (max_abs(g2) <= 1e-11 * scale) {
        out = em;
        return true;
      }
      return false;
    }
  }
  Matrix g = sigma_a - trace_second(em, da, dr);
  out = em;
  return max_abs(g) <= 1e-11 * scale;
}

// Lower bound on inf over the slice {s >= 0, Tr_R s = sigma_a} of the convex f, from the point x:
// f(x) - <G, x> + max_Y { <Y, sigma_a> : G - Y (x) 1 >= 0 }.
inline double slice_lower_bound(double fx, const Matrix& g, const Matrix& x, const Matrix& sigma_a, long da, long dr,
                                const std::vector<Matrix>& basis) {
  SdpProblem p;
  long n = da * dr;
  p.block_sizes = {n};
  Matrix gh = hermitize(g);
  p.c = {gh};
  p.b = RealVector(static_cast<long>(basis.size()));
  for (size_t i = 0; i < basis.size(); ++i) {
    p.a.push_back({with_identity(basis[i], dr)});
    p.b(static_cast<long>(i)) = inner(basis[i], sigma_a);
  }
  SdpOptions so;
  so.gap_tol = 1e-10 * std::max(1.0, max_abs(gh));
  so.max_iter = 200;
  auto sol = sdp_solve(p, so);
  Matrix y = Matrix::Zero(da, da);
  for (size_t i = 0; i < basis.size(); ++i) y += sol.y(static_cast<long>(i)) * basis[i];
  if (!y.allFinite()) return -kInf;
  double lmin = min_eigenvalue(gh - with_identity(y, dr));
  double lmo = inner(y, sigma_a) + std::min(lmin, 0.0) * sigma_a.trace().real();
  return fx - inner(gh, x) + lmo;
}

}  // namespace detail

// inf over sigma_hat_AR >= 0 with Tr_R sigma_hat = sigma_A of D(rho_AR || sigma_hat), by entropic mirror descent
// on the marginal slice; the lower bound comes from the Frank-Wolfe gap of smoothed feasible points.
inline RelentResult relent_min_marginal(const Operator& rho_ar, const Operator& sigma_a, const RelentOptions& opt = {}) {
  Layout ordered;
  Matrix rho_full = detail::a_first(rho_ar, sigma_a.layout(), ordered);
  long da_full = sigma_a.dim(), dr = rho_full.rows() / da_full;
  RelentResult res;
  Matrix u = support_basis(sigma_a.matrix());
  Matrix rho_a = detail::trace_second(rho_full, da_full, dr);
  if (u.cols() == 0 || detail::outside_support(rho_a, u) > kSupportResidualTol) {
    res.status = SolveStatus::infeasible;
    return res;
  }
  long da = u.cols();
  Matrix ub = kron(u, Matrix::Identity(dr, dr));
  Matrix rho = detail::hermitize(ub.adjoint() * rho_full * ub);
  Matrix sa = detail::hermitize(u.adjoint() * sigma_a.matrix() * u);
  auto basis = hermitian_basis(da);
  double neg_entropy = -von_neumann_entropy(rho);
  const double ln2 = std::log(2.0);

  auto evaluate = [&](const Matrix& s, detail::RelentState& st) {
    st.sigma = s;
    st.eig = herm_eig(s);
    if (st.eig.values.minCoeff() <= 0) return false;
    st.f = detail::relent_bits(rho, neg_entropy, st.eig);
    if (!std::isfinite(st.f)) return false;
    st.grad = detail::relent_grad(rho, st.eig);
    return true;
  };

  Matrix center = detail::with_identity(sa, dr) / static_cast<double>(dr);
  detail::RelentState cur;
  if (!evaluate(center, cur)) throw NumericalError("relative entropy minimisation: degenerate starting point");
  Matrix best_sigma = cur.sigma;
  double best_f = cur.f;
  double lb = -kInf;
  double t = 1.0;

  auto certify = [&](const detail::RelentState& st) {
    for (double eps : {0.0, 1e-9, 1e-7, 1e-5, 1e-3}) {
      detail::RelentState sm;
      Matrix s = (1 - eps) * st.sigma + eps * center;
      if (!evaluate(s, sm)) continue;
      double v = detail::slice_lower_bound(sm.f, sm.grad, sm.sigma, sa, da, dr, basis);
      if (std::isfinite(v)) lb = std::max(lb, v);
    }
  };

  int iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    if (iter % opt.certify_every == 0) {
      certify(cur);
      if (best_f - lb <= opt.gap_tol) break;
    }
    Matrix logm = from_spectrum(cur.eig, cur.eig.values.unaryExpr([](double x) { return std::log(x); }));
    bool accepted = false;
    for (int ls = 0; ls < 60 && !accepted; ++ls) {
      Matrix k = logm - t * ln2 * cur.grad;
      Matrix yk = Matrix::Zero(da, da);
      Matrix next;
      if (detail::marginal_projection(k, sa, da, dr, yk, next, basis)) {
        detail::RelentState cand;
        if (evaluate(detail::hermitize(next), cand) && cand.f <= cur.f + 0.3 * inner(cur.grad, cand.sigma - cur.sigma)) {
          cur = cand;
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!accepted) break;
    if (cur.f < best_f) {
      best_f = cur.f;
      best_sigma = cur.sigma;
    }
    t = std::min(t * 1.5, opt.max_step);
  }
  certify(cur);

  res.value = best_f;
  res.lower_bound = std::min(lb, best_f);
  res.gap = res.value - res.lower_bound;
  res.iterations = iter;
  res.status = res.gap <= opt.gap_tol ? SolveStatus::optimal : SolveStatus::max_iter;
  res.marginal_residual = detail::max_abs(detail::trace_second(best_sigma, da, dr) - sa);
  Matrix full = ub * best_sigma * ub.adjoint();
  res.sigma_hat = permute(Operator{ordered, detail::hermitize(full)}, rho_ar.layout().labels());
  return res;
}

}  // namespace geat
