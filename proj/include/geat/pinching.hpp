#pragma once

#include "geat/linalg.hpp"

namespace geat {

inline constexpr double kDefaultClusterTol = 1e-9;

struct PinchingMap {
  std::vector<Matrix> projectors;
  std::vector<double> eigenvalues;  // descending, one per projector
  std::string source;

  long dim() const { return projectors.empty() ? 0 : projectors.front().rows(); }
  int count() const { return static_cast<int>(projectors.size()); }
};

namespace detail {

// Groups sorted (descending) eigenvalues whose consecutive gaps are within tol * ||sigma||.
inline std::vector<std::pair<int, int>> spectral_clusters(const RealVector& values, double cluster_tol) {
  std::vector<std::pair<int, int>> out;
  long n = values.size();
  if (n == 0) return out;
  double scale = std::max(values.cwiseAbs().maxCoeff(), 1e-300);
  int start = 0;
  for (int i = 1; i <= n; ++i)
    if (i == n || values(i - 1) - values(i) > cluster_tol * scale) {
      out.emplace_back(start, i);
      start = i;
    }
  return out;
}

}  // namespace detail

inline PinchingMap pinching_map(const Matrix& sigma, double cluster_tol = kDefaultClusterTol,
                                std::string source = "") {
  auto e = herm_eig(sigma);
  PinchingMap p;
  p.source = std::move(source);
  for (auto [a, b] : detail::spectral_clusters(e.values, cluster_tol)) {
    Matrix v = e.vectors.middleCols(a, b - a);
    p.projectors.push_back(v * v.adjoint());
    p.eigenvalues.push_back(e.values.segment(a, b - a).mean());
  }
  return p;
}

inline PinchingMap pinching_map(const Operator& sigma, double cluster_tol = kDefaultClusterTol) {
  return pinching_map(sigma.matrix(), cluster_tol, "operator on " + sigma.layout().str());
}

inline Matrix pinch(const PinchingMap& p, const Matrix& omega) {
  if (omega.rows() != p.dim() || omega.cols() != p.dim()) throw LayoutError("pinching dimension mismatch");
  Matrix out = Matrix::Zero(omega.rows(), omega.cols());
  for (const auto& pr : p.projectors) out.noalias() += pr * omega * pr;
  return out;
}

inline Operator pinch(const PinchingMap& p, const Operator& omega) { return {omega.layout(), pinch(p, omega.matrix())}; }

inline int distinct_spectrum_count(const Matrix& a, double cluster_tol = kDefaultClusterTol) {
  auto e = herm_eig(a);
  return static_cast<int>(detail::spectral_clusters(e.values, cluster_tol).size());
}

inline int distinct_spectrum_count(const Operator& a, double cluster_tol = kDefaultClusterTol) {
  return distinct_spectrum_count(a.matrix(), cluster_tol);
}

// Residuals of the projector invariants: orthogonality, idempotence, completeness.
inline double pinching_projector_residual(const PinchingMap& p) {
  double r = 0;
  long d = p.dim();
  Matrix sum = Matrix::Zero(d, d);
  for (size_t i = 0; i < p.projectors.size(); ++i) {
    const auto& a = p.projectors[i];
    sum += a;
    r = std::max(r, detail::max_abs(a * a - a));
    for (size_t j = i + 1; j < p.projectors.size(); ++j) r = std::max(r, detail::max_abs(a * p.projectors[j]));
  }
  return std::max(r, detail::max_abs(sum - Matrix::Identity(d, d)));
}

// Smallest eigenvalue of P_sigma(rho) - rho / |Spec(sigma)|; nonnegative by the pinching inequality.
inline double pinching_inequality_margin(const Matrix& sigma, const Matrix& rho, double cluster_tol = kDefaultClusterTol) {
  auto p = pinching_map(sigma, cluster_tol);
  return min_eigenvalue(pinch(p, rho) - rho / static_cast<double>(p.count()));
}

}  // namespace geat
