#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace geat {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

struct LayoutError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct StateError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultSupportTol = 1e-12;
inline constexpr double kStateTol = 1e-10;

struct Factor {
  std::string label;
  int dim = 1;
  bool operator==(const Factor&) const = default;
};

// Ordered tensor factors. Basis index is row-major in factor order.
class Layout {
 public:
  Layout() = default;
  Layout(std::vector<Factor> factors) : factors_(std::move(factors)) { validate(); }
  Layout(std::initializer_list<Factor> factors) : factors_(factors) { validate(); }

  int size() const { return static_cast<int>(factors_.size()); }
  const Factor& operator[](int i) const { return factors_.at(i); }
  const std::vector<Factor>& factors() const { return factors_; }
  bool operator==(const Layout&) const = default;

  long total_dim() const {
    long d = 1;
    for (const auto& f : factors_) d *= f.dim;
    return d;
  }

  bool contains(const std::string& label) const {
    return std::any_of(factors_.begin(), factors_.end(),
                       [&](const Factor& f) { return f.label == label; });
  }

  int index_of(const std::string& label) const {
    for (int i = 0; i < size(); ++i)
      if (factors_[i].label == label) return i;
    throw LayoutError("unknown system label '" + label + "'");
  }

  int dim_of(const std::string& label) const { return factors_[index_of(label)].dim; }

  long dim_of(const std::vector<std::string>& labels) const {
    long d = 1;
    for (const auto& l : labels) d *= dim_of(l);
    return d;
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& f : factors_) out.push_back(f.label);
    return out;
  }

  std::vector<int> dims() const {
    std::vector<int> out;
    for (const auto& f : factors_) out.push_back(f.dim);
    return out;
  }

  // Factors named in `labels`, in the order given there.
  Layout select(const std::vector<std::string>& labels) const {
    std::vector<Factor> out;
    for (const auto& l : labels) out.push_back(factors_[index_of(l)]);
    return Layout(out);
  }

  // Factors not named in `labels`, in layout order.
  Layout without(const std::vector<std::string>& labels) const {
    for (const auto& l : labels) index_of(l);
    std::vector<Factor> out;
    for (const auto& f : factors_)
      if (std::find(labels.begin(), labels.end(), f.label) == labels.end()) out.push_back(f);
    return Layout(out);
  }

  Layout concat(const Layout& other) const {
    std::vector<Factor> out = factors_;
    out.insert(out.end(), other.factors_.begin(), other.factors_.end());
    return Layout(out);
  }

  Layout relabel(const std::function<std::string(const std::string&)>& fn) const {
    std::vector<Factor> out = factors_;
    for (auto& f : out) f.label = fn(f.label);
    return Layout(out);
  }

  std::string str() const {
    std::string s;
    for (const auto& f : factors_) {
      if (!s.empty()) s += " ";
      s += f.label + "(" + std::to_string(f.dim) + ")";
    }
    return s.empty() ? "<trivial>" : s;
  }

 private:
  void validate() const {
    for (size_t i = 0; i < factors_.size(); ++i) {
      if (factors_[i].label.empty()) throw LayoutError("empty system label");
      if (factors_[i].dim < 1) throw LayoutError("system '" + factors_[i].label + "' has dimension < 1");
      for (size_t j = 0; j < i; ++j)
        if (factors_[j].label == factors_[i].label)
          throw LayoutError("duplicate system label '" + factors_[i].label + "'");
    }
  }

  std::vector<Factor> factors_;
};

namespace detail {

inline std::vector<long> strides(const std::vector<int>& dims) {
  std::vector<long> s(dims.size(), 1);
  for (int i = static_cast<int>(dims.size()) - 2; i >= 0; --i) s[i] = s[i + 1] * dims[i + 1];
  return s;
}

// Offsets of every multi-index over `positions` (row-major in the given order).
inline std::vector<long> offsets(const std::vector<int>& dims, const std::vector<int>& positions) {
  auto st = strides(dims);
  std::vector<long> out{0};
  for (int p : positions) {
    std::vector<long> next;
    next.reserve(out.size() * dims[p]);
    for (long base : out)
      for (int k = 0; k < dims[p]; ++k) next.push_back(base + k * st[p]);
    out.swap(next);
  }
  return out;
}

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline Matrix hermitize(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

}  // namespace detail

class Operator {
 public:
  Operator() = default;
  Operator(Layout layout, Matrix m) : layout_(std::move(layout)), m_(std::move(m)) {
    long d = layout_.total_dim();
    if (m_.rows() != d || m_.cols() != d)
      throw LayoutError("matrix is " + std::to_string(m_.rows()) + "x" + std::to_string(m_.cols()) +
                        " but layout " + layout_.str() + " has dimension " + std::to_string(d));
  }

  const Layout& layout() const { return layout_; }
  const Matrix& matrix() const { return m_; }
  long dim() const { return layout_.total_dim(); }
  cplx trace() const { return m_.trace(); }

  bool is_hermitian(double tol = kStateTol) const {
    return detail::max_abs(m_ - m_.adjoint()) <= tol;
  }

  Operator operator+(const Operator& o) const { return {layout_, m_ + checked(o).m_}; }
  Operator operator-(const Operator& o) const { return {layout_, m_ - checked(o).m_}; }
  Operator operator*(double s) const { return {layout_, m_ * s}; }

 private:
  const Operator& checked(const Operator& o) const {
    if (!(o.layout_ == layout_)) throw LayoutError("layout mismatch: " + layout_.str() + " vs " + o.layout_.str());
    return o;
  }

  Layout layout_;
  Matrix m_;
};

// Hermitian, PSD and unit trace within kStateTol.
class DensityMatrix : public Operator {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(const Operator& op, double tol = kStateTol) : Operator(op) { check(tol); }
  DensityMatrix(Layout layout, Matrix m, double tol = kStateTol)
      : Operator(std::move(layout), std::move(m)) {
    check(tol);
  }

  // Positive operator with trace <= 1, e.g. a state conditioned on an event.
  static DensityMatrix subnormalized(const Operator& op, double tol = kStateTol) {
    DensityMatrix d;
    static_cast<Operator&>(d) = op;
    d.check(tol, true);
    return d;
  }

 private:
  void check(double tol, bool sub = false) const {
    if (!is_hermitian(tol)) throw StateError("density matrix is not Hermitian");
    double t = trace().real();
    if (sub ? (t > 1 + tol) : (std::abs(trace() - cplx(1.0)) > tol))
      throw StateError("density matrix trace is not 1");
    Eigen::SelfAdjointEigenSolver<Matrix> es(detail::hermitize(matrix()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol) throw StateError("density matrix has a negative eigenvalue");
  }
};

class PureState {
 public:
  PureState(Layout layout, Vector amps) : layout_(std::move(layout)), v_(std::move(amps)) {
    if (v_.size() != layout_.total_dim()) throw LayoutError("amplitude vector does not match layout");
    if (std::abs(v_.norm() - 1.0) > 1e-12) throw StateError("pure state is not normalized");
  }
  const Layout& layout() const { return layout_; }
  const Vector& amplitudes() const { return v_; }
  DensityMatrix density() const { return DensityMatrix(layout_, v_ * v_.adjoint()); }

 private:
  Layout layout_;
  Vector v_;
};

inline Matrix kron(const Matrix& a, const Matrix& b) { return Eigen::kroneckerProduct(a, b).eval(); }

inline Operator tensor(const Operator& a, const Operator& b) {
  return {a.layout().concat(b.layout()), kron(a.matrix(), b.matrix())};
}

inline Operator tensor(const std::vector<Operator>& ops) {
  if (ops.empty()) throw LayoutError("empty tensor product");
  Operator out = ops.front();
  for (size_t i = 1; i < ops.size(); ++i) out = tensor(out, ops[i]);
  return out;
}

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  return DensityMatrix(tensor(static_cast<const Operator&>(a), static_cast<const Operator&>(b)));
}

inline Operator identity(const Layout& layout) {
  return {layout, Matrix::Identity(layout.total_dim(), layout.total_dim())};
}

inline DensityMatrix maximally_mixed(const Layout& layout) {
  long d = layout.total_dim();
  return DensityMatrix(layout, Matrix::Identity(d, d) / static_cast<double>(d));
}

inline std::vector<int> positions_of(const Layout& layout, const std::vector<std::string>& labels) {
  std::vector<int> pos;
  for (const auto& l : labels) pos.push_back(layout.index_of(l));
  return pos;
}

// Reorder factors; `order` must name every factor exactly once.
inline Matrix permute_matrix(const Matrix& m, const Layout& layout, const std::vector<std::string>& order) {
  if (static_cast<int>(order.size()) != layout.size()) throw LayoutError("permutation must name every system");
  auto pos = positions_of(layout, order);
  auto p = detail::offsets(layout.dims(), pos);
  long d = layout.total_dim();
  Matrix out(d, d);
  for (long j = 0; j < d; ++j)
    for (long i = 0; i < d; ++i) out(i, j) = m(p[i], p[j]);
  return out;
}

inline Operator permute(const Operator& op, const std::vector<std::string>& order) {
  Layout target = op.layout().select(order);
  if (target.size() != op.layout().size()) throw LayoutError("permutation must name every system");
  return {target, permute_matrix(op.matrix(), op.layout(), order)};
}

inline Vector permute_vector(const Vector& v, const Layout& layout, const std::vector<std::string>& order) {
  if (static_cast<int>(order.size()) != layout.size()) throw LayoutError("permutation must name every system");
  auto p = detail::offsets(layout.dims(), positions_of(layout, order));
  Vector out(v.size());
  for (long i = 0; i < v.size(); ++i) out(i) = v(p[i]);
  return out;
}

// Keeps the named systems; layout order is preserved.
inline Operator partial_trace(const Operator& op, const std::vector<std::string>& keep) {
  const Layout& L = op.layout();
  auto kpos = positions_of(L, keep);
  std::sort(kpos.begin(), kpos.end());
  if (std::adjacent_find(kpos.begin(), kpos.end()) != kpos.end()) throw LayoutError("repeated label in partial trace");
  std::vector<std::string> kept;
  for (int p : kpos) kept.push_back(L[p].label);
  std::vector<int> tpos;
  for (int i = 0; i < L.size(); ++i)
    if (std::find(kpos.begin(), kpos.end(), i) == kpos.end()) tpos.push_back(i);
  auto ko = detail::offsets(L.dims(), kpos);
  auto to = detail::offsets(L.dims(), tpos);
  long dk = static_cast<long>(ko.size());
  Matrix out = Matrix::Zero(dk, dk);
  const Matrix& m = op.matrix();
  for (long c = 0; c < dk; ++c)
    for (long r = 0; r < dk; ++r) {
      cplx s = 0;
      for (long t : to) s += m(ko[r] + t, ko[c] + t);
      out(r, c) = s;
    }
  return {L.select(kept), out};
}

// Marginal on `keep`, factors in the order given.
inline Operator marginal(const Operator& op, const std::vector<std::string>& keep) {
  return permute(partial_trace(op, keep), keep);
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<std::string>& keep) {
  return DensityMatrix(partial_trace(static_cast<const Operator&>(rho), keep), 1e-9);
}

inline DensityMatrix marginal(const DensityMatrix& rho, const std::vector<std::string>& keep) {
  return DensityMatrix(marginal(static_cast<const Operator&>(rho), keep), 1e-9);
}

inline Operator trace_out(const Operator& op, const std::vector<std::string>& labels) {
  return partial_trace(op, op.layout().without(labels).labels());
}

struct HermEig {
  RealVector values;  // descending
  Matrix vectors;
};

inline constexpr double kHermTol = 1e-8;

// Rejects inputs whose anti-Hermitian part exceeds kHermTol relative to the largest entry.
inline HermEig herm_eig(const Matrix& m) {
  double scale = std::max(1.0, detail::max_abs(m));
  if (detail::max_abs(m - m.adjoint()) > kHermTol * scale) throw StateError("matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> es(detail::hermitize(m));
  if (es.info() != Eigen::Success) throw NumericalError("Hermitian eigendecomposition failed");
  return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

inline HermEig herm_eig(const Operator& a) { return herm_eig(a.matrix()); }

inline Matrix from_spectrum(const HermEig& e, const RealVector& f) {
  return e.vectors * f.cast<cplx>().asDiagonal() * e.vectors.adjoint();
}

inline Matrix apply_function(const Matrix& m, const std::function<double(double)>& f) {
  auto e = herm_eig(m);
  RealVector fv = e.values.unaryExpr(f);
  return from_spectrum(e, fv);
}

inline double support_cutoff(const RealVector& values, double support_tol = kDefaultSupportTol) {
  double scale = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
  return support_tol * std::max(scale, 1e-300);
}

// M^p on the support of the PSD matrix M; eigenvalues below the relative cutoff count as zero.
inline Matrix power_on_support(const Matrix& m, double p, double support_tol = kDefaultSupportTol,
                               double psd_tol = kStateTol) {
  auto e = herm_eig(m);
  if (e.values.size() && e.values.minCoeff() < -psd_tol * std::max(1.0, e.values.cwiseAbs().maxCoeff()))
    throw StateError("power_on_support needs a positive semidefinite input");
  double cut = support_cutoff(e.values, support_tol);
  RealVector f = e.values.unaryExpr([&](double x) { return x > cut ? std::pow(x, p) : 0.0; });
  return from_spectrum(e, f);
}

inline Operator power_on_support(const Operator& op, double p, double support_tol = kDefaultSupportTol) {
  return {op.layout(), power_on_support(op.matrix(), p, support_tol)};
}

inline Matrix support_projector(const Matrix& m, double support_tol = kDefaultSupportTol) {
  auto e = herm_eig(m);
  double cut = support_cutoff(e.values, support_tol);
  RealVector f = e.values.unaryExpr([&](double x) { return x > cut ? 1.0 : 0.0; });
  return from_spectrum(e, f);
}

// Orthonormal basis of the support (columns).
inline Matrix support_basis(const Matrix& m, double support_tol = kDefaultSupportTol) {
  auto e = herm_eig(m);
  double cut = support_cutoff(e.values, support_tol);
  std::vector<int> idx;
  for (int i = 0; i < e.values.size(); ++i)
    if (e.values(i) > cut) idx.push_back(i);
  Matrix out(m.rows(), static_cast<long>(idx.size()));
  for (size_t k = 0; k < idx.size(); ++k) out.col(k) = e.vectors.col(idx[k]);
  return out;
}

inline Matrix log2_on_support(const Matrix& m, double support_tol = kDefaultSupportTol) {
  auto e = herm_eig(m);
  double cut = support_cutoff(e.values, support_tol);
  RealVector f = e.values.unaryExpr([&](double x) { return x > cut ? std::log2(x) : 0.0; });
  return from_spectrum(e, f);
}

inline Matrix sqrtm_psd(const Matrix& m) {
  return apply_function(m, [](double x) { return x > 0 ? std::sqrt(x) : 0.0; });
}

inline Matrix expm_herm(const Matrix& m) {
  return apply_function(m, [](double x) { return std::exp(x); });
}

inline double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(detail::hermitize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(detail::hermitize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

// Real Hilbert-Schmidt inner product Re tr(A^dagger B).
inline double inner(const Matrix& a, const Matrix& b) { return (a.conjugate().cwiseProduct(b)).sum().real(); }

// Entropy in bits of a PSD matrix, 0 log 0 = 0.
inline double von_neumann_entropy(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(detail::hermitize(m), Eigen::EigenvaluesOnly);
  double h = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double x = es.eigenvalues()(i);
    if (x > 0) h -= x * std::log2(x);
  }
  return h;
}

// Orthonormal Hermitian basis: E_jj, (E_jk + E_kj)/sqrt2, i(E_jk - E_kj)/sqrt2.
inline std::vector<Matrix> hermitian_basis(long d) {
  std::vector<Matrix> out;
  const double s = 1.0 / std::sqrt(2.0);
  for (long j = 0; j < d; ++j) {
    Matrix e = Matrix::Zero(d, d);
    e(j, j) = 1;
    out.push_back(e);
  }
  for (long j = 0; j < d; ++j)
    for (long k = j + 1; k < d; ++k) {
      Matrix e = Matrix::Zero(d, d);
      e(j, k) = s;
      e(k, j) = s;
      out.push_back(e);
      Matrix f = Matrix::Zero(d, d);
      f(j, k) = cplx(0, s);
      f(k, j) = cplx(0, -s);
      out.push_back(f);
    }
  return out;
}

// First divided differences of f on the spectrum: G_ij = (f(x_i)-f(x_j))/(x_i-x_j), f'(x_i) on the diagonal.
inline Matrix divided_differences(const RealVector& x, const std::function<double(double)>& f,
                                  const std::function<double(double)>& df) {
  long n = x.size();
  Matrix g(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      double a = x(i), b = x(j);
      if (std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}))
        g(i, j) = df(0.5 * (a + b));
      else
        g(i, j) = (f(a) - f(b)) / (a - b);
    }
  return g;
}

// Frechet derivative of the matrix function at U diag(x) U^dagger in direction H.
inline Matrix frechet(const HermEig& e, const Matrix& dd, const Matrix& h) {
  Matrix t = e.vectors.adjoint() * h * e.vectors;
  return e.vectors * dd.cwiseProduct(t) * e.vectors.adjoint();
}

// Canonical purification: sum_k sqrt(l_k) |v_k> |k>, purifier appended as the last factor.
inline PureState purify(const DensityMatrix& rho, const std::string& purifier_label) {
  auto e = herm_eig(rho.matrix());
  long d = rho.dim();
  Vector v = Vector::Zero(d * d);
  double cut = support_cutoff(e.values);
  for (long k = 0; k < d; ++k) {
    double l = e.values(k);
    if (l <= cut) continue;
    for (long i = 0; i < d; ++i) v(i * d + k) += std::sqrt(l) * e.vectors(i, k);
  }
  v /= v.norm();
  Layout L = rho.layout().concat(Layout{{purifier_label, static_cast<int>(d)}});
  return PureState(L, v);
}

// Normalized state from a PSD operator with positive trace.
inline DensityMatrix normalized(const Operator& op) {
  double t = op.trace().real();
  if (!(t > 0)) throw StateError("cannot normalize an operator with non-positive trace");
  return DensityMatrix(op.layout(), detail::hermitize(op.matrix()) / t, 1e-8);
}

inline double fidelity(const Matrix& rho, const Matrix& sigma) {
  Matrix sr = sqrtm_psd(rho);
  Matrix m = sr * sigma * sr;
  Eigen::SelfAdjointEigenSolver<Matrix> es(detail::hermitize(m), Eigen::EigenvaluesOnly);
  double s = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) s += std::sqrt(std::max(es.eigenvalues()(i), 0.0));
  return s * s;
}

inline Vector basis_vector(long d, long i) {
  Vector v = Vector::Zero(d);
  v(i) = 1;
  return v;
}

inline Operator ket_bra_op(const Layout& L, long i, long j) {
  Matrix m = Matrix::Zero(L.total_dim(), L.total_dim());
  m(i, j) = 1;
  return {L, m};
}

}  // namespace geat
