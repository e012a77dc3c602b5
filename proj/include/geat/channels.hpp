#pragma once

#include "geat/linalg.hpp"
#include "geat/random.hpp"

#include <optional>

namespace geat {

inline constexpr double kTraceTol = 1e-10;

class KrausChannel {
 public:
  KrausChannel() = default;
  KrausChannel(Layout in, Layout out, std::vector<Matrix> kraus)
      : in_(std::move(in)), out_(std::move(out)), kraus_(std::move(kraus)) {
    if (kraus_.empty()) throw LayoutError("channel needs at least one Kraus operator");
    for (const auto& k : kraus_)
      if (k.rows() != out_.total_dim() || k.cols() != in_.total_dim())
        throw LayoutError("Kraus operator shape does not match layouts " + in_.str() + " -> " + out_.str());
    tp_ = detail::max_abs(kraus_sum() - Matrix::Identity(in_.total_dim(), in_.total_dim())) <= kTraceTol;
  }

  const Layout& in_layout() const { return in_; }
  const Layout& out_layout() const { return out_; }
  const std::vector<Matrix>& kraus() const { return kraus_; }
  bool is_trace_preserving() const { return tp_; }

  Matrix kraus_sum() const {
    Matrix s = Matrix::Zero(in_.total_dim(), in_.total_dim());
    for (const auto& k : kraus_) s += k.adjoint() * k;
    return s;
  }

  // Action on an operator whose layout is exactly in_layout.
  Matrix apply_matrix(const Matrix& rho) const {
    Matrix out = Matrix::Zero(out_.total_dim(), out_.total_dim());
    for (const auto& k : kraus_) out.noalias() += k * rho * k.adjoint();
    return out;
  }

 private:
  Layout in_, out_;
  std::vector<Matrix> kraus_;
  bool tp_ = false;
};

struct Isometry {
  Layout in_layout, out_layout;
  Matrix matrix;
};

// Applies `ch` to the systems `acting_on` of `op`, matched positionally to the channel's input factors.
// Output factors take the place of the first acted-on factor.
inline Operator apply(const KrausChannel& ch, const Operator& op, const std::vector<std::string>& acting_on) {
  const Layout& L = op.layout();
  const Layout& in = ch.in_layout();
  if (static_cast<int>(acting_on.size()) != in.size())
    throw LayoutError("channel acts on " + std::to_string(in.size()) + " systems, got " +
                      std::to_string(acting_on.size()));
  int first = L.size();
  for (int k = 0; k < in.size(); ++k) {
    if (L.dim_of(acting_on[k]) != in[k].dim)
      throw LayoutError("dimension mismatch on system '" + acting_on[k] + "'");
    first = std::min(first, L.index_of(acting_on[k]));
  }
  Layout spect = L.without(acting_on);
  for (const auto& f : ch.out_layout().factors())
    if (spect.contains(f.label)) throw LayoutError("output system '" + f.label + "' collides with a spectator");

  std::vector<std::string> order = spect.labels();
  order.insert(order.end(), acting_on.begin(), acting_on.end());
  Matrix rho = permute_matrix(op.matrix(), L, order);

  long ds = spect.total_dim();
  Matrix out = Matrix::Zero(ds * ch.out_layout().total_dim(), ds * ch.out_layout().total_dim());
  Matrix id = Matrix::Identity(ds, ds);
  for (const auto& k : ch.kraus()) {
    Matrix big = kron(id, k);
    out.noalias() += big * rho * big.adjoint();
  }

  Layout produced = spect.concat(ch.out_layout());
  std::vector<std::string> final_order;
  for (int i = 0; i < L.size(); ++i) {
    const auto& lab = L[i].label;
    if (i == first)
      for (const auto& f : ch.out_layout().factors()) final_order.push_back(f.label);
    if (std::find(acting_on.begin(), acting_on.end(), lab) == acting_on.end()) final_order.push_back(lab);
  }
  if (first == L.size())
    for (const auto& f : ch.out_layout().factors()) final_order.push_back(f.label);
  return {produced.select(final_order), permute_matrix(out, produced, final_order)};
}

inline Operator apply(const KrausChannel& ch, const Operator& op) {
  return apply(ch, op, ch.in_layout().labels());
}

inline std::string input_copy_label(const std::string& label) { return label + "_in"; }

// J = sum_ij ch(|i><j|) (x) |i><j|, input copy on the right with labels suffixed "_in".
inline Operator choi(const KrausChannel& ch) {
  long din = ch.in_layout().total_dim(), dout = ch.out_layout().total_dim();
  Matrix j = Matrix::Zero(din * dout, din * dout);
  for (const auto& k : ch.kraus()) {
    Vector v(din * dout);
    for (long o = 0; o < dout; ++o)
      for (long i = 0; i < din; ++i) v(o * din + i) = k(o, i);
    j.noalias() += v * v.adjoint();
  }
  return {ch.out_layout().concat(ch.in_layout().relabel(input_copy_label)), j};
}

inline KrausChannel kraus_from_choi(const Matrix& j, const Layout& in, const Layout& out, double rank_tol = 1e-12) {
  long din = in.total_dim(), dout = out.total_dim();
  if (j.rows() != din * dout) throw LayoutError("Choi matrix dimension does not match layouts");
  auto e = herm_eig(j);
  if (e.values.size() && e.values.minCoeff() < -1e-10 * std::max(1.0, e.values.cwiseAbs().maxCoeff()))
    throw StateError("Choi matrix is not positive semidefinite");
  double cut = support_cutoff(e.values, rank_tol);
  std::vector<Matrix> kraus;
  for (long c = 0; c < e.values.size(); ++c) {
    if (e.values(c) <= cut) continue;
    Matrix k(dout, din);
    double s = std::sqrt(e.values(c));
    for (long o = 0; o < dout; ++o)
      for (long i = 0; i < din; ++i) k(o, i) = s * e.vectors(o * din + i, c);
    kraus.push_back(k);
  }
  if (kraus.empty()) kraus.push_back(Matrix::Zero(dout, din));
  return KrausChannel(in, out, kraus);
}

inline KrausChannel kraus_from_choi(const Operator& j, const Layout& in, const Layout& out, double rank_tol = 1e-12) {
  return kraus_from_choi(j.matrix(), in, out, rank_tol);
}

// outer o inner: inner acts first.
inline KrausChannel compose(const KrausChannel& outer, const KrausChannel& inner) {
  if (!(inner.out_layout() == outer.in_layout()))
    throw LayoutError("cannot compose: " + inner.out_layout().str() + " does not feed " + outer.in_layout().str());
  std::vector<Matrix> kraus;
  for (const auto& a : outer.kraus())
    for (const auto& b : inner.kraus()) kraus.push_back(a * b);
  return KrausChannel(inner.in_layout(), outer.out_layout(), kraus);
}

inline KrausChannel tensor_channels(const KrausChannel& a, const KrausChannel& b) {
  std::vector<Matrix> kraus;
  for (const auto& x : a.kraus())
    for (const auto& y : b.kraus()) kraus.push_back(kron(x, y));
  return KrausChannel(a.in_layout().concat(b.in_layout()), a.out_layout().concat(b.out_layout()), kraus);
}

// V = sum_k K_k (x) |k>_env, environment appended last.
inline Isometry stinespring(const KrausChannel& ch, const std::string& env_label) {
  if (!ch.is_trace_preserving()) throw LayoutError("Stinespring dilation needs a trace-preserving channel");
  long din = ch.in_layout().total_dim(), dout = ch.out_layout().total_dim();
  long r = static_cast<long>(ch.kraus().size());
  Matrix v = Matrix::Zero(dout * r, din);
  for (long k = 0; k < r; ++k)
    for (long o = 0; o < dout; ++o) v.row(o * r + k) = ch.kraus()[k].row(o);
  return {ch.in_layout(), ch.out_layout().concat(Layout{{env_label, static_cast<int>(r)}}), v};
}

inline KrausChannel identity_channel(const Layout& layout) {
  return KrausChannel(layout, layout, {Matrix::Identity(layout.total_dim(), layout.total_dim())});
}

inline KrausChannel unitary_channel(const Layout& layout, const Matrix& u) { return KrausChannel(layout, layout, {u}); }

// Tr over everything in `in` except `keep` (output in the order of `keep`).
inline KrausChannel partial_trace_channel(const Layout& in, const std::vector<std::string>& keep) {
  auto kpos = positions_of(in, keep);
  std::vector<int> tpos;
  for (int i = 0; i < in.size(); ++i)
    if (std::find(kpos.begin(), kpos.end(), i) == kpos.end()) tpos.push_back(i);
  auto ko = detail::offsets(in.dims(), kpos);
  auto to = detail::offsets(in.dims(), tpos);
  std::vector<Matrix> kraus;
  for (long t : to) {
    Matrix k = Matrix::Zero(static_cast<long>(ko.size()), in.total_dim());
    for (size_t r = 0; r < ko.size(); ++r) k(static_cast<long>(r), ko[r] + t) = 1;
    kraus.push_back(k);
  }
  return KrausChannel(in, in.select(keep), kraus);
}

// omega -> tr(omega) * 1; not trace preserving (output trace scales by the dimension).
inline KrausChannel replacer_channel(const Layout& layout) {
  long d = layout.total_dim();
  std::vector<Matrix> kraus;
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j) {
      Matrix k = Matrix::Zero(d, d);
      k(i, j) = 1;
      kraus.push_back(k);
    }
  return KrausChannel(layout, layout, kraus);
}

inline KrausChannel replacer(const std::string& label, int dim) { return replacer_channel(Layout{{label, dim}}); }

// omega -> tr(omega) * state, as a channel from `in` to the state's layout.
inline KrausChannel preparation_channel(const Layout& in, const DensityMatrix& state) {
  auto e = herm_eig(state.matrix());
  long din = in.total_dim();
  std::vector<Matrix> kraus;
  for (long c = 0; c < e.values.size(); ++c) {
    if (e.values(c) <= 0) continue;
    for (long i = 0; i < din; ++i) {
      Matrix k = Matrix::Zero(state.dim(), din);
      k.col(i) = std::sqrt(e.values(c)) * e.vectors.col(c);
      kraus.push_back(k);
    }
  }
  return KrausChannel(in, state.layout(), kraus);
}

// Classical stochastic map P(j|i) in the computational basis.
inline KrausChannel classical_channel(const Layout& in, const Layout& out, const Eigen::MatrixXd& p_out_given_in) {
  long din = in.total_dim(), dout = out.total_dim();
  if (p_out_given_in.rows() != dout || p_out_given_in.cols() != din)
    throw LayoutError("stochastic matrix must be dout x din");
  std::vector<Matrix> kraus;
  for (long i = 0; i < din; ++i)
    for (long j = 0; j < dout; ++j) {
      if (p_out_given_in(j, i) <= 0) continue;
      Matrix k = Matrix::Zero(dout, din);
      k(j, i) = std::sqrt(p_out_given_in(j, i));
      kraus.push_back(k);
    }
  return KrausChannel(in, out, kraus);
}

struct NonSignallingResult {
  bool passed = false;
  double residual = 0;
  std::optional<KrausChannel> extracted;  // R: E_in -> E_out with Tr_{A R'} o m = R o Tr_R
};

// Tests Tr_{traced} o m = R o Tr_R through the Choi matrix of the reduced map.
inline NonSignallingResult check_nonsignalling(const KrausChannel& m, const std::vector<std::string>& r_labels,
                                               const std::vector<std::string>& e_in_labels,
                                               const std::vector<std::string>& e_out_labels,
                                               const std::vector<std::string>& traced_labels,
                                               double tol = 1e-8) {
  const Layout& in = m.in_layout();
  const Layout& out = m.out_layout();
  if (static_cast<int>(r_labels.size() + e_in_labels.size()) != in.size())
    throw LayoutError("R and E inputs must partition the channel input " + in.str());
  for (const auto& l : r_labels) in.index_of(l);
  for (const auto& l : e_in_labels) in.index_of(l);
  if (static_cast<int>(e_out_labels.size() + traced_labels.size()) != out.size())
    throw LayoutError("E outputs and traced systems must partition the channel output " + out.str());
  for (const auto& l : traced_labels) out.index_of(l);

  KrausChannel n = compose(partial_trace_channel(out, e_out_labels), m);
  Operator j = choi(n);
  std::vector<std::string> r_copy;
  for (const auto& l : r_labels) r_copy.push_back(input_copy_label(l));
  Operator jr = trace_out(j, r_copy);
  double dr = static_cast<double>(in.dim_of(r_labels));
  Operator rebuilt = tensor(jr * (1.0 / dr), identity(j.layout().select(r_copy)));
  rebuilt = permute(rebuilt, j.layout().labels());

  NonSignallingResult res;
  res.residual = detail::max_abs(j.matrix() - rebuilt.matrix());
  res.passed = res.residual <= tol;
  if (res.passed) {
    Layout e_in = in.without(r_labels);
    res.extracted = kraus_from_choi(jr.matrix() / dr, e_in, n.out_layout());
  }
  return res;
}

// Random channel from nk Kraus operators cut out of a Haar isometry.
inline KrausChannel random_channel(const Layout& in, const Layout& out, int nk, PhiloxStream& rng) {
  Matrix v = random_isometry(out.total_dim() * nk, in.total_dim(), rng);
  std::vector<Matrix> kraus;
  for (int k = 0; k < nk; ++k) {
    Matrix m(out.total_dim(), in.total_dim());
    for (long o = 0; o < out.total_dim(); ++o) m.row(o) = v.row(o * nk + k);
    kraus.push_back(m);
  }
  return KrausChannel(in, out, kraus);
}

}  // namespace geat
