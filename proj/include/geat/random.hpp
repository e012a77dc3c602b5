#pragma once

#include "geat/linalg.hpp"

#include <stdexcept>
#include <array>
#include <cstdint>
#include <limits>

namespace geat {

// Philox4x32-10 counter-based generator (Salmon et al. 2011).
inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
  constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    uint64_t p0 = uint64_t(M0) * ctr[0];
    uint64_t p1 = uint64_t(M1) * ctr[2];
    uint32_t hi0 = uint32_t(p0 >> 32), lo0 = uint32_t(p0);
    uint32_t hi1 = uint32_t(p1 >> 32), lo1 = uint32_t(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += W0;
    key[1] += W1;
  }
  return ctr;
}

// A stream of 32-bit words addressed by (seed, stream, block).
class PhiloxStream {
 public:
  using result_type = uint32_t;

  PhiloxStream(uint64_t seed, uint64_t stream = 0)
      : key_{uint32_t(seed), uint32_t(seed >> 32)}, stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<uint32_t>::max(); }

  result_type operator()() {
    if (pos_ == 4) {
      buf_ = philox4x32({uint32_t(block_), uint32_t(block_ >> 32), uint32_t(stream_), uint32_t(stream_ >> 32)},
                        key_);
      ++block_;
      pos_ = 0;
    }
    return buf_[pos_++];
  }

  uint64_t next_u64() {
    uint64_t hi = (*this)();
    uint64_t lo = (*this)();
    return (hi << 32) | lo;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0;
    while (u1 == 0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2 * M_PI * u2);
  }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return n ? uint64_t(uniform() * double(n)) % n : 0; }

 private:
  std::array<uint32_t, 2> key_;
  uint64_t stream_;
  uint64_t block_ = 0;
  std::array<uint32_t, 4> buf_{};
  int pos_ = 4;
  double spare_ = 0;
  bool has_spare_ = false;
};

inline Matrix ginibre(long rows, long cols, PhiloxStream& rng) {
  Matrix g(rows, cols);
  for (long j = 0; j < cols; ++j)
    for (long i = 0; i < rows; ++i) g(i, j) = cplx(rng.normal(), rng.normal()) / std::sqrt(2.0);
  return g;
}

inline Matrix random_unitary(long d, PhiloxStream& rng) {
  Eigen::HouseholderQR<Matrix> qr(ginibre(d, d, rng));
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (long i = 0; i < d; ++i) {
    cplx ph = r(i, i) == cplx(0) ? cplx(1) : r(i, i) / std::abs(r(i, i));
    q.col(i) *= ph;
  }
  return q;
}

inline Matrix random_isometry(long out, long in, PhiloxStream& rng) {
  if (in > out) throw std::invalid_argument("random_isometry: input dimension exceeds output dimension");
  return random_unitary(out, rng).leftCols(in);
}

inline PureState random_pure_state(const Layout& layout, PhiloxStream& rng) {
  Vector v = ginibre(layout.total_dim(), 1, rng).col(0);
  return PureState(layout, v / v.norm());
}

// Induced measure: trace out a Haar ancilla of dimension `rank`.
inline DensityMatrix random_density(const Layout& layout, PhiloxStream& rng, long rank = 0) {
  long d = layout.total_dim();
  if (rank <= 0) rank = d;
  Matrix g = ginibre(d, rank, rng);
  Matrix m = g * g.adjoint();
  m /= m.trace().real();
  return DensityMatrix(layout, detail::hermitize(m));
}

// Diagonal density matrix with Dirichlet(1) weights.
inline std::vector<double> random_probability(long k, PhiloxStream& rng) {
  std::vector<double> p(k);
  double s = 0;
  for (auto& x : p) {
    double u = 0;
    while (u == 0) u = rng.uniform();
    x = -std::log(u);
    s += x;
  }
  for (auto& x : p) x /= s;
  return p;
}

inline DensityMatrix random_classical_density(const Layout& layout, PhiloxStream& rng) {
  auto p = random_probability(layout.total_dim(), rng);
  RealVector v = Eigen::Map<RealVector>(p.data(), static_cast<long>(p.size()));
  return DensityMatrix(layout, v.cast<cplx>().asDiagonal().toDenseMatrix());
}

}  // namespace geat
