#pragma once

#include "geat/linalg.hpp"

#include <string>

namespace geat {

// Block-diagonal SDP over complex Hermitian blocks:
//   primal  min sum_k <C_k, X_k>  s.t.  sum_k <A_ik, X_k> = b_i,  X_k >= 0
//   dual    max b.y               s.t.  S_k = C_k - sum_i y_i A_ik >= 0
// A 1x1 block is a nonnegative scalar variable.
struct SdpProblem {
  std::vector<long> block_sizes;
  std::vector<Matrix> c;               // c[k]
  std::vector<std::vector<Matrix>> a;  // a[i][k]; an empty matrix means zero
  RealVector b;

  int num_constraints() const { return static_cast<int>(a.size()); }
  int num_blocks() const { return static_cast<int>(block_sizes.size()); }

  void validate() const {
    if (c.size() != block_sizes.size()) throw std::invalid_argument("SDP objective has the wrong number of blocks");
    if (static_cast<long>(a.size()) != b.size()) throw std::invalid_argument("SDP has mismatched constraint count");
    for (size_t k = 0; k < block_sizes.size(); ++k) {
      if (block_sizes[k] < 1 || block_sizes[k] > 64) throw std::invalid_argument("SDP block side must be in [1, 64]");
      if (c[k].rows() != block_sizes[k] || c[k].cols() != block_sizes[k])
        throw std::invalid_argument("SDP objective block has the wrong shape");
      if (detail::max_abs(c[k] - c[k].adjoint()) > 1e-12 * std::max(1.0, detail::max_abs(c[k])))
        throw std::invalid_argument("SDP objective block is not Hermitian");
    }
    for (const auto& row : a) {
      if (row.size() != block_sizes.size()) throw std::invalid_argument("SDP constraint has the wrong number of blocks");
      for (size_t k = 0; k < row.size(); ++k) {
        if (row[k].size() == 0) continue;
        if (row[k].rows() != block_sizes[k] || row[k].cols() != block_sizes[k])
          throw std::invalid_argument("SDP constraint block has the wrong shape");
        if (detail::max_abs(row[k] - row[k].adjoint()) > 1e-12 * std::max(1.0, detail::max_abs(row[k])))
          throw std::invalid_argument("SDP constraint block is not Hermitian");
      }
    }
  }
};

enum class SolveStatus { optimal, max_iter, infeasible };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

struct SolveReport {
  double primal_value = 0;
  double dual_value = 0;
  double gap = 0;  // |primal - dual|
  int iterations = 0;
  SolveStatus status = SolveStatus::max_iter;
};

struct SdpOptions {
  double gap_tol = 1e-9;
  double feas_tol = 1e-10;
  int max_iter = 150;
  double divergence_bound = 1e10;
};

struct SdpSolution {
  SolveReport report;
  std::vector<Matrix> x, s;
  RealVector y;
  double primal_infeasibility = 0;
  double dual_infeasibility = 0;
};

namespace detail {

struct SdpIterate {
  std::vector<Matrix> x, s;
  RealVector y;
};

inline double block_inner(const std::vector<Matrix>& u, const std::vector<Matrix>& v) {
  double r = 0;
  for (size_t k = 0; k < u.size(); ++k) r += inner(u[k], v[k]);
  return r;
}

inline RealVector apply_a(const SdpProblem& p, const std::vector<Matrix>& x) {
  RealVector r(p.num_constraints());
  for (int i = 0; i < p.num_constraints(); ++i) {
    double s = 0;
    for (int k = 0; k < p.num_blocks(); ++k)
      if (p.a[i][k].size()) s += inner(p.a[i][k], x[k]);
    r(i) = s;
  }
  return r;
}

inline std::vector<Matrix> apply_at(const SdpProblem& p, const RealVector& y) {
  std::vector<Matrix> out;
  for (int k = 0; k < p.num_blocks(); ++k) {
    Matrix m = Matrix::Zero(p.block_sizes[k], p.block_sizes[k]);
    for (int i = 0; i < p.num_constraints(); ++i)
      if (p.a[i][k].size()) m += y(i) * p.a[i][k];
    out.push_back(m);
  }
  return out;
}

// Largest t with X + t dX >= 0 (infinity if the direction never leaves the cone).
inline double max_step(const Matrix& x, const Matrix& dx) {
  Eigen::LLT<Matrix> llt(hermitize(x));
  if (llt.info() != Eigen::Success) return 0;
  Matrix li = llt.matrixL().solve(Matrix::Identity(x.rows(), x.cols()));
  double lmin = min_eigenvalue(li * dx * li.adjoint());
  return lmin >= 0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

inline double frob(const std::vector<Matrix>& v) {
  double s = 0;
  for (const auto& m : v) s += m.squaredNorm();
  return std::sqrt(s);
}

}  // namespace detail

namespace detail {

// Infeasible primal-dual path following with Nesterov-Todd scaling.
inline SdpSolution sdp_core(const SdpProblem& p, const SdpOptions& opt) {
  const int m = p.num_constraints();
  const int nb = p.num_blocks();
  double ntot = 0;
  for (long n : p.block_sizes) ntot += static_cast<double>(n);

  double bnorm = p.b.norm();
  double cnorm = detail::frob(p.c);

  detail::SdpIterate it;
  for (int k = 0; k < nb; ++k) {
    long n = p.block_sizes[k];
    double amax = 0, ratio = 0;
    for (int i = 0; i < m; ++i)
      if (p.a[i][k].size()) {
        double an = p.a[i][k].norm();
        amax = std::max(amax, an);
        ratio = std::max(ratio, (1 + std::abs(p.b(i))) / (1 + an));
      }
    double xi = std::max({10.0, std::sqrt(double(n)), double(n) * ratio});
    double eta = std::max({10.0, std::sqrt(double(n)), amax, p.c[k].norm()});
    it.x.push_back(Matrix::Identity(n, n) * xi);
    it.s.push_back(Matrix::Identity(n, n) * eta);
  }
  it.y = RealVector::Zero(m);

  SdpSolution sol;
  auto finish = [&](SolveStatus st, int iters) {
    sol.report.primal_value = detail::block_inner(p.c, it.x);
    sol.report.dual_value = p.b.dot(it.y);
    sol.report.gap = std::abs(sol.report.primal_value - sol.report.dual_value);
    sol.report.iterations = iters;
    sol.report.status = st;
    sol.x = it.x;
    sol.s = it.s;
    sol.y = it.y;
    return sol;
  };

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    RealVector rp = p.b - detail::apply_a(p, it.x);
    auto aty = detail::apply_at(p, it.y);
    std::vector<Matrix> rd(nb);
    for (int k = 0; k < nb; ++k) rd[k] = p.c[k] - aty[k] - it.s[k];
    double pobj = detail::block_inner(p.c, it.x);
    double dobj = p.b.dot(it.y);
    sol.primal_infeasibility = rp.norm() / (1 + bnorm);
    sol.dual_infeasibility = detail::frob(rd) / (1 + cnorm);

    if (std::abs(pobj - dobj) <= opt.gap_tol && sol.primal_infeasibility <= opt.feas_tol &&
        sol.dual_infeasibility <= opt.feas_tol)
      return finish(SolveStatus::optimal, iter);

    double xnorm = detail::frob(it.x);
    if (xnorm > opt.divergence_bound || it.y.norm() > opt.divergence_bound || !std::isfinite(pobj) ||
        !std::isfinite(dobj))
      return finish(SolveStatus::infeasible, iter);

    double mu = detail::block_inner(it.x, it.s) / ntot;

    // NT scaling W with W S W = X.
    std::vector<Matrix> w(nb), sinv(nb);
    for (int k = 0; k < nb; ++k) {
      auto ex = herm_eig(it.x[k]);
      RealVector sq = ex.values.unaryExpr([](double v) { return std::sqrt(std::max(v, 0.0)); });
      Matrix xh = from_spectrum(ex, sq);
      Matrix g = xh * it.s[k] * xh;
      auto eg = herm_eig(g);
      RealVector gi = eg.values.unaryExpr([](double v) { return 1.0 / std::sqrt(std::max(v, 1e-300)); });
      w[k] = detail::hermitize(xh * from_spectrum(eg, gi) * xh);
      auto es = herm_eig(it.s[k]);
      RealVector si = es.values.unaryExpr([](double v) { return 1.0 / std::max(v, 1e-300); });
      sinv[k] = from_spectrum(es, si);
    }

    // Schur complement M_ij = sum_k <A_ik, W A_jk W>.
    std::vector<std::vector<Matrix>> waw(m, std::vector<Matrix>(nb));
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < nb; ++k)
        if (p.a[j][k].size()) waw[j][k] = w[k] * p.a[j][k] * w[k];
    Eigen::MatrixXd schur = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) {
        double s = 0;
        for (int k = 0; k < nb; ++k)
          if (p.a[i][k].size() && p.a[j][k].size()) s += inner(p.a[i][k], waw[j][k]);
        schur(i, j) = schur(j, i) = s;
      }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(schur);
    if (ldlt.info() != Eigen::Success) return finish(SolveStatus::max_iter, iter);

    std::vector<Matrix> wrdw(nb);
    for (int k = 0; k < nb; ++k) wrdw[k] = w[k] * rd[k] * w[k];

    auto direction = [&](double target, std::vector<Matrix>& dx, std::vector<Matrix>& ds, RealVector& dy) {
      std::vector<Matrix> rc(nb), tmp(nb);
      for (int k = 0; k < nb; ++k) {
        rc[k] = target * sinv[k] - it.x[k];
        tmp[k] = rc[k] - wrdw[k];
      }
      RealVector rhs = rp - detail::apply_a(p, tmp);
      dy = ldlt.solve(rhs);
      auto atdy = detail::apply_at(p, dy);
      dx.assign(nb, Matrix());
      ds.assign(nb, Matrix());
      for (int k = 0; k < nb; ++k) {
        ds[k] = detail::hermitize(rd[k] - atdy[k]);
        dx[k] = detail::hermitize(rc[k] - w[k] * ds[k] * w[k]);
      }
    };

    auto steps = [&](const std::vector<Matrix>& dx, const std::vector<Matrix>& ds) {
      double ap = std::numeric_limits<double>::infinity(), ad = ap;
      for (int k = 0; k < nb; ++k) {
        ap = std::min(ap, detail::max_step(it.x[k], dx[k]));
        ad = std::min(ad, detail::max_step(it.s[k], ds[k]));
      }
      return std::pair<double, double>(ap, ad);
    };

    std::vector<Matrix> dx, ds;
    RealVector dy;
    direction(0.0, dx, ds, dy);
    auto [ap0, ad0] = steps(dx, ds);
    double ap_aff = std::min(1.0, ap0), ad_aff = std::min(1.0, ad0);
    double mu_aff = 0;
    for (int k = 0; k < nb; ++k) mu_aff += inner(it.x[k] + ap_aff * dx[k], it.s[k] + ad_aff * ds[k]);
    mu_aff /= ntot;
    double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);
    sigma = std::max(sigma, 1e-4);

    direction(sigma * mu, dx, ds, dy);
    auto [ap1, ad1] = steps(dx, ds);
    const double tau = 0.98;
    double ap = std::min(1.0, tau * ap1), ad = std::min(1.0, tau * ad1);
    if (!(ap > 0) || !(ad > 0)) return finish(SolveStatus::max_iter, iter);

    for (int k = 0; k < nb; ++k) {
      it.x[k] = detail::hermitize(it.x[k] + ap * dx[k]);
      it.s[k] = detail::hermitize(it.s[k] + ad * ds[k]);
    }
    it.y += ad * dy;
  }
  return finish(SolveStatus::max_iter, opt.max_iter);
}

}  // namespace detail

// Solves the problem; when the path-following run stalls with a primal residual, a phase-one problem
// min sum(u + v) s.t. A(X) + u - v = b decides feasibility.
inline SdpSolution sdp_solve(const SdpProblem& p, const SdpOptions& opt = {}) {
  p.validate();
  auto sol = detail::sdp_core(p, opt);
  if (sol.report.status != SolveStatus::max_iter || sol.primal_infeasibility <= opt.feas_tol) return sol;
  const int m = p.num_constraints();
  SdpProblem ph;
  ph.block_sizes = p.block_sizes;
  for (int i = 0; i < 2 * m; ++i) ph.block_sizes.push_back(1);
  for (long n : p.block_sizes) ph.c.push_back(Matrix::Zero(n, n));
  for (int i = 0; i < 2 * m; ++i) ph.c.push_back(Matrix::Ones(1, 1));
  ph.b = p.b;
  for (int i = 0; i < m; ++i) {
    std::vector<Matrix> row = p.a[i];
    for (int j = 0; j < 2 * m; ++j) row.push_back(Matrix());
    row[p.num_blocks() + 2 * i] = Matrix::Ones(1, 1);
    row[p.num_blocks() + 2 * i + 1] = -Matrix::Ones(1, 1);
    ph.a.push_back(row);
  }
  auto aux = detail::sdp_core(ph, opt);
  // the dual value of the phase-one problem is a lower bound on the least constraint violation
  if (aux.report.status == SolveStatus::optimal && aux.report.dual_value > 1e-7 * (1 + p.b.norm())) sol.report.status = SolveStatus::infeasible;
  return sol;
}

}  // namespace geat
