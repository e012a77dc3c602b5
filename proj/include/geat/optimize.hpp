#pragma once

#include "geat/linalg.hpp"
#include "geat/random.hpp"

#include <limits>

namespace geat {

struct OptConfig {
  int restarts = 25;
  int max_iter = 3000;
  double residual_tol = 1e-8;  // first-order residual required for certification
  double agree_tol = 1e-7;     // restart agreement required for certification
  uint64_t seed = 0x5eed;
  int search_iter = 150;       // BFGS iterations per start in pure-state searches
};

struct StateOptResult {
  double value = -std::numeric_limits<double>::infinity();
  Matrix sigma;
  double residual = std::numeric_limits<double>::infinity();  // Frank-Wolfe gap at sigma
  int iterations = 0;
};

// Objective and Euclidean gradient on density matrices.
struct StateObjective {
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> gradient;
};

// Entropic mirror ascent over the density matrices of side d, Armijo step control.
// Residual = lambda_max(G) - <G, sigma>, which bounds the suboptimality of a concave objective.
inline StateOptResult maximize_state(const StateObjective& obj, const Matrix& start, int max_iter, double tol) {
  StateOptResult r;
  Matrix s = detail::hermitize(start / start.trace().real());
  double f = obj.value(s);
  if (!std::isfinite(f)) return r;
  double t = 1.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    Matrix g = detail::hermitize(obj.gradient(s));
    double res = max_eigenvalue(g) - inner(g, s);
    r.residual = res;
    if (res <= tol) break;
    auto e = herm_eig(s);
    double cut = 1e-300;
    Matrix logm = from_spectrum(e, e.values.unaryExpr([&](double x) { return std::log(std::max(x, cut)); }));
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      Matrix k = logm + t * g;
      auto ek = herm_eig(k);
      double shift = ek.values.maxCoeff();
      Matrix n = from_spectrum(ek, ek.values.unaryExpr([&](double x) { return std::exp(x - shift); }));
      n = detail::hermitize(n / n.trace().real());
      double fn = obj.value(n);
      bool ok = std::isfinite(fn) && fn >= f + 0.3 * inner(g, n - s);
      if (!ok && std::isfinite(fn) && fn >= f - 1e-14 * std::max(1.0, std::abs(f))) {
        // at the rounding floor of the objective, accept steps that shrink the residual
        Matrix gn = detail::hermitize(obj.gradient(n));
        ok = max_eigenvalue(gn) - inner(gn, n) < res;
      }
      if (ok) {
        s = n;
        f = fn;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    t = std::min(t * 2.0, 1e6);
  }
  r.value = f;
  r.sigma = s;
  r.iterations = it;
  if (it == max_iter || r.residual > tol) {
    Matrix g = detail::hermitize(obj.gradient(s));
    r.residual = max_eigenvalue(g) - inner(g, s);
  }
  return r;
}

struct MultiStartResult {
  StateOptResult best;
  double spread = 0;  // max - min of restart values
  bool certified = false;
  int restarts = 0;
};

// Runs maximize_state from `first` (if nonempty) and from cfg.restarts seeded random states.
inline MultiStartResult maximize_state_multistart(const StateObjective& obj, long d, const OptConfig& cfg,
                                                  const Matrix& first = Matrix()) {
  MultiStartResult out;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  auto consider = [&](const StateOptResult& r) {
    if (!std::isfinite(r.value)) return;
    lo = std::min(lo, r.value);
    hi = std::max(hi, r.value);
    ++out.restarts;
    if (r.value > out.best.value) out.best = r;
  };
  if (first.size()) consider(maximize_state(obj, first, cfg.max_iter, cfg.residual_tol * 0.1));
  for (int k = 0; k < cfg.restarts; ++k) {
    PhiloxStream rng(cfg.seed, static_cast<uint64_t>(k));
    Matrix g = ginibre(d, d, rng);
    Matrix s0 = g * g.adjoint() + 1e-3 * Matrix::Identity(d, d);
    consider(maximize_state(obj, s0, cfg.max_iter, cfg.residual_tol * 0.1));
  }
  out.spread = out.restarts ? hi - lo : std::numeric_limits<double>::infinity();
  out.certified = out.restarts >= cfg.restarts && out.spread <= cfg.agree_tol && out.best.residual <= cfg.residual_tol;
  return out;
}

struct BfgsResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

inline Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                        double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd y = x;
  for (long i = 0; i < x.size(); ++i) {
    double hi = h * std::max(1.0, std::abs(x(i)));
    y(i) = x(i) + hi;
    double fp = f(y);
    y(i) = x(i) - hi;
    double fm = f(y);
    y(i) = x(i);
    g(i) = (fp - fm) / (2 * hi);
  }
  return g;
}

// Quasi-Newton minimisation with central-difference gradients and backtracking line search.
inline BfgsResult minimize_bfgs(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                int max_iter = 200, double grad_tol = 1e-7) {
  const long n = x.size();
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  double fx = f(x);
  Eigen::VectorXd g = numeric_gradient(f, x);
  BfgsResult r;
  int it = 0;
  for (; it < max_iter; ++it) {
    if (g.norm() <= grad_tol || !std::isfinite(fx)) break;
    Eigen::VectorXd p = -hinv * g;
    if (g.dot(p) >= 0) {
      hinv.setIdentity();
      p = -g;
    }
    double s = 1.0, fn = fx;
    Eigen::VectorXd xn = x;
    bool ok = false;
    for (int ls = 0; ls < 40; ++ls) {
      xn = x + s * p;
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * s * g.dot(p)) {
        ok = true;
        break;
      }
      s *= 0.5;
    }
    if (!ok) break;
    Eigen::VectorXd gn = numeric_gradient(f, xn);
    Eigen::VectorXd sk = xn - x, yk = gn - g;
    double sy = sk.dot(yk);
    if (sy > 1e-12) {
      double rho = 1.0 / sy;
      Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
      hinv = (id - rho * sk * yk.transpose()) * hinv * (id - rho * yk * sk.transpose()) + rho * sk * sk.transpose();
    }
    bool small = std::abs(fx - fn) <= 1e-14 * std::max(1.0, std::abs(fx));
    x = xn;
    fx = fn;
    g = gn;
    if (small) break;
  }
  r.x = x;
  r.value = fx;
  r.iterations = it;
  return r;
}

// Unit vector from 2N real parameters.
inline Vector complex_unit_vector(const Eigen::VectorXd& p) {
  long n = p.size() / 2;
  Vector v(n);
  for (long i = 0; i < n; ++i) v(i) = cplx(p(2 * i), p(2 * i + 1));
  double nv = v.norm();
  return nv > 0 ? Vector(v / nv) : Vector(Vector::Zero(n));
}

// Best of `restarts` BFGS runs minimising f over unit vectors in C^n.
struct PureSearchResult {
  Vector best;
  double value = std::numeric_limits<double>::infinity();
  int restarts = 0;
};

inline PureSearchResult minimize_over_pure_states(const std::function<double(const Vector&)>& f, long n, int restarts,
                                                  uint64_t seed, int max_iter = 200,
                                                  const std::vector<Vector>& seeds = {}) {
  PureSearchResult out;
  auto fp = [&](const Eigen::VectorXd& p) {
    Vector v = complex_unit_vector(p);
    if (v.norm() == 0) return std::numeric_limits<double>::infinity();
    return f(v);
  };
  auto run = [&](const Eigen::VectorXd& p0) {
    // max_iter <= 0 only evaluates the start point
    auto r = max_iter > 0 ? minimize_bfgs(fp, p0, max_iter) : BfgsResult{p0, fp(p0)};
    ++out.restarts;
    if (r.value < out.value) {
      out.value = r.value;
      out.best = complex_unit_vector(r.x);
    }
  };
  for (const auto& s : seeds) {
    Eigen::VectorXd p(2 * n);
    for (long i = 0; i < n; ++i) {
      p(2 * i) = s(i).real();
      p(2 * i + 1) = s(i).imag();
    }
    run(p);
  }
  for (int k = 0; k < restarts; ++k) {
    PhiloxStream rng(seed, static_cast<uint64_t>(k));
    Eigen::VectorXd p(2 * n);
    for (long i = 0; i < 2 * n; ++i) p(i) = rng.normal();
    run(p);
  }
  return out;
}

}  // namespace geat
