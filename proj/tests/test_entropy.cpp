#include "catch_amalgamated.hpp"

#include "geat/entropy.hpp"
#include "geat/random.hpp"

using namespace geat;

namespace {

Matrix diag(std::vector<double> v) {
  RealVector r = Eigen::Map<RealVector>(v.data(), static_cast<long>(v.size()));
  return r.cast<cplx>().asDiagonal();
}

Operator bell() {
  Vector v = Vector::Zero(4);
  v(0) = v(3) = 1 / std::sqrt(2.0);
  return Operator{Layout{{"A", 2}, {"B", 2}}, v * v.adjoint()};
}

// Direct sandwiched formula with a full-rank sigma, written against Eigen only.
double sandwiched(const Matrix& rho, const Matrix& sigma, double a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  RealVector p = es.eigenvalues().unaryExpr([&](double x) { return std::pow(x, (1 - a) / (2 * a)); });
  Matrix g = es.eigenvectors() * p.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
  Matrix m = g * rho * g;
  m = (m + m.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Matrix> em(m, Eigen::EigenvaluesOnly);
  double q = 0;
  for (long i = 0; i < em.eigenvalues().size(); ++i) q += std::pow(std::max(em.eigenvalues()(i), 0.0), a);
  return std::log2(q) / (a - 1);
}

Matrix bloch(double x, double y, double z) {
  Matrix r(2, 2);
  r << (1 + z) / 2, cplx(x, -y) / 2.0, cplx(x, y) / 2.0, (1 - z) / 2;
  return r;
}

// max over sigma_B in a cubic Bloch grid: coarse pass at step 0.05, then step 0.01 around the best cell
double up_grid(const Matrix& ab, double a) {
  auto value = [&](double x, double y, double z) {
    if (x * x + y * y + z * z > 0.9999) return -kInf;
    return -sandwiched(ab, kron(Matrix::Identity(2, 2), bloch(x, y, z)), a);
  };
  double best = -kInf, bx = 0, by = 0, bz = 0;
  for (int i = -20; i <= 20; ++i)
    for (int j = -20; j <= 20; ++j)
      for (int k = -20; k <= 20; ++k) {
        double v = value(0.05 * i, 0.05 * j, 0.05 * k);
        if (v > best) best = v, bx = 0.05 * i, by = 0.05 * j, bz = 0.05 * k;
      }
  double cx = bx, cy = by, cz = bz;
  for (int i = -6; i <= 6; ++i)
    for (int j = -6; j <= 6; ++j)
      for (int k = -6; k <= 6; ++k) best = std::max(best, value(cx + 0.01 * i, cy + 0.01 * j, cz + 0.01 * k));
  return best;
}

const std::vector<double> kAlphas{0.5, 0.75, 1.5, 2.0, 3.0};

}  // namespace

TEST_CASE("alpha order") {
  CHECK_THROWS(Alpha::of(0.4));
  CHECK_THROWS(Alpha::of(std::nan("")));
  CHECK(Alpha::of(1.0).is_one());
  CHECK(Alpha::of(kInf).is_infinity());
  CHECK(beta_of(Alpha::of(1.5)).value() == Catch::Approx(2.0));
  CHECK_THROWS(beta_of(Alpha::of(2.0)));
}

TEST_CASE("renyi divergence examples") {
  PhiloxStream rng(1);
  auto r = random_density(Layout{{"A", 3}}, rng);
  for (double a : kAlphas) CHECK(std::abs(renyi_divergence(r, r, Alpha::of(a))) <= 1e-9);
  CHECK(std::abs(renyi_divergence(r, r, Alpha::one())) <= 1e-9);
  CHECK(std::abs(renyi_divergence(r, r, Alpha::infinity())) <= 1e-7);

  DensityMatrix zero(Layout{{"A", 2}}, diag({1, 0}));
  Operator half(Layout{{"A", 2}}, diag({0.5, 0.5}));
  Operator one(Layout{{"A", 2}}, diag({0, 1}));
  for (double a : kAlphas) {
    // tr[(1/2)^{(1-a)/a} |0><0|]^a = 2^{a-1}, so D = 1
    CHECK(std::abs(renyi_divergence(zero, half, Alpha::of(a)) - 1.0) <= 1e-12);
    CHECK(std::isinf(renyi_divergence(zero, one, Alpha::of(a))));
  }
  CHECK(std::abs(renyi_divergence(zero, half, Alpha::one()) - 1.0) <= 1e-12);
  CHECK(std::abs(renyi_divergence(zero, half, Alpha::infinity()) - 1.0) <= 1e-7);
  CHECK(std::isinf(renyi_divergence(zero, one, Alpha::one())));

  CHECK_THROWS(renyi_divergence(zero, Operator(Layout{{"A", 2}}, diag({1, -0.5})), Alpha::of(2)));
  CHECK_THROWS_AS(renyi_divergence(zero, Operator(Layout{{"A", 3}}, Matrix::Identity(3, 3)), Alpha::of(2)),
                  LayoutError);
}

TEST_CASE("renyi divergence: classical and full-rank oracles") {
  PhiloxStream rng(2);
  for (int k = 0; k < 30; ++k) {
    auto p = random_probability(4, rng);
    auto q = random_probability(4, rng);
    DensityMatrix rp(Layout{{"A", 4}}, diag(p));
    Operator rq(Layout{{"A", 4}}, diag(q));
    for (double a : kAlphas) {
      double s = 0;
      for (int i = 0; i < 4; ++i) s += std::pow(p[i], a) * std::pow(q[i], 1 - a);
      CHECK(std::abs(renyi_divergence(rp, rq, Alpha::of(a)) - std::log2(s) / (a - 1)) <= 1e-10);
    }
    auto x = random_density(Layout{{"A", 3}}, rng);
    auto y = random_density(Layout{{"A", 3}}, rng);
    for (double a : kAlphas) CHECK(std::abs(renyi_divergence(x, y, Alpha::of(a)) - sandwiched(x.matrix(), y.matrix(), a)) <= 1e-9);
  }
}

TEST_CASE("renyi divergence properties") {
  PhiloxStream rng(3);
  const std::vector<Alpha> orders{Alpha::of(0.5), Alpha::of(0.75), Alpha::one(), Alpha::of(1.5),
                                  Alpha::of(2.0), Alpha::of(3.0), Alpha::infinity()};
  int dpi_violations = 0;
  for (int k = 0; k < 200; ++k) {
    auto r = random_density(Layout{{"A", 2}}, rng);
    auto s = random_density(Layout{{"A", 2}}, rng);
    auto ch = random_channel(Layout{{"A", 2}}, Layout{{"C", 2}}, 2, rng);
    DensityMatrix er(apply(ch, r));
    Operator es = apply(ch, s);
    for (const auto& a : orders)
      if (renyi_divergence(er, es, a) > renyi_divergence(r, s, a) + 1e-8) ++dpi_violations;
  }
  CHECK(dpi_violations == 0);

  for (int k = 0; k < 40; ++k) {
    auto r = random_density(Layout{{"A", 3}}, rng);
    auto s = random_density(Layout{{"A", 3}}, rng);
    double prev = -kInf;
    for (const auto& a : orders) {
      double d = renyi_divergence(r, s, a);
      CHECK(d >= prev - 1e-9);
      prev = d;
    }
    auto r2 = random_density(Layout{{"B", 2}}, rng);
    auto s2 = random_density(Layout{{"B", 2}}, rng);
    for (double a : kAlphas) {
      double sum = renyi_divergence(r, s, Alpha::of(a)) + renyi_divergence(r2, s2, Alpha::of(a));
      CHECK(std::abs(renyi_divergence(tensor(r, r2), tensor(s, s2), Alpha::of(a)) - sum) <= 1e-8);
    }
    double d1 = renyi_divergence(r, s, Alpha::one());
    double last = kInf;
    for (double a : {1.5, 1.25, 1.1, 1.01}) {
      double gap = std::abs(renyi_divergence(r, s, Alpha::of(a)) - d1);
      CHECK(gap <= last);
      last = gap;
    }
  }
}

TEST_CASE("conditional entropy examples") {
  PhiloxStream rng(4);
  auto sb = random_density(Layout{{"B", 3}}, rng);
  auto prod = tensor(maximally_mixed(Layout{{"A", 2}}), sb);
  auto b = bell();
  Operator corr(Layout{{"A", 2}, {"B", 2}}, diag({0.5, 0, 0, 0.5}));
  for (double a : kAlphas) {
    CHECK(std::abs(cond_renyi_down(prod, {"A"}, {"B"}, Alpha::of(a)) - 1.0) <= 1e-9);
    CHECK(std::abs(cond_renyi_down(b, {"A"}, {"B"}, Alpha::of(a)) + 1.0) <= 1e-9);
    CHECK(std::abs(cond_renyi_down(corr, {"A"}, {"B"}, Alpha::of(a))) <= 1e-9);
  }
  CHECK(std::abs(cond_renyi_down(b, {"A"}, {"B"}, Alpha::one()) + 1.0) <= 1e-9);
  CHECK(std::abs(cond_renyi_down(b, {"A"}, {"B"}, Alpha::infinity()) + 1.0) <= 1e-7);
  CHECK_THROWS_AS(cond_renyi_down(b, {"A"}, {"A"}, Alpha::of(2)), LayoutError);
}

TEST_CASE("classical-quantum block formula agrees with the joint state") {
  PhiloxStream rng(5);
  for (int k = 0; k < 5; ++k) {
    auto r0 = random_density(Layout{{"A", 2}, {"B", 2}}, rng);
    auto r1 = random_density(Layout{{"A", 2}, {"B", 2}}, rng);
    double p = 0.3;
    Matrix joint = Matrix::Zero(8, 8);
    // layout A B K
    for (long i = 0; i < 4; ++i)
      for (long j = 0; j < 4; ++j) {
        joint(2 * i, 2 * j) = p * r0.matrix()(i, j);
        joint(2 * i + 1, 2 * j + 1) = (1 - p) * r1.matrix()(i, j);
      }
    Operator jo(Layout{{"A", 2}, {"B", 2}, {"K", 2}}, joint);
    std::vector<std::pair<double, Operator>> blocks{{p, r0}, {1 - p, r1}};
    for (const auto& a : {Alpha::of(0.75), Alpha::one(), Alpha::of(1.5), Alpha::of(2.0), Alpha::infinity()})
      CHECK(std::abs(cond_renyi_down_cq(blocks, {"A"}, {"B"}, a) - cond_renyi_down(jo, {"A"}, {"B", "K"}, a)) <= 1e-7);
  }
}

TEST_CASE("min-entropy") {
  auto mm = maximally_mixed(Layout{{"A", 2}});
  CHECK(std::abs(min_entropy(mm, {"A"}, {}).value - 1.0) <= 1e-8);
  Operator cq(Layout{{"A", 2}}, diag({0.75, 0.25}));
  CHECK(std::abs(min_entropy(cq, {"A"}, {}).value + std::log2(0.75)) <= 1e-8);
  auto b = min_entropy(bell(), {"A"}, {"B"});
  CHECK(b.report.status == SolveStatus::optimal);
  CHECK(std::abs(b.report.primal_value - 2.0) <= 1e-8);
  CHECK(std::abs(b.value + 1.0) <= 1e-8);
  CHECK(b.report.primal_value >= b.report.dual_value - 1e-9);
  // feasibility of the returned sigma
  Matrix gap = kron(Matrix::Identity(2, 2), b.sigma.matrix()) - bell().matrix();
  CHECK(min_eigenvalue(gap) >= -1e-7);

  PhiloxStream rng(6);
  for (int k = 0; k < 10; ++k) {
    auto r = random_density(Layout{{"A", 2}, {"B", 2}}, rng);
    auto h = min_entropy(r, {"A"}, {"B"});
    CHECK(h.value <= cond_renyi_down(r, {"A"}, {"B"}, Alpha::of(3.0)) + 1e-7);
    CHECK(std::abs(h.value - cond_renyi_up(r, {"A"}, {"B"}, Alpha::infinity()).value) <= 1e-12);
  }
}

TEST_CASE("max-entropy") {
  Operator pure(Layout{{"A", 2}}, diag({1, 0}));
  CHECK(std::abs(max_entropy(pure, {"A"}, {}).value) <= 1e-12);
  auto mm = maximally_mixed(Layout{{"A", 2}});
  CHECK(std::abs(max_entropy(mm, {"A"}, {}).value - 1.0) <= 1e-12);
  auto b = max_entropy(bell(), {"A"}, {"B"});
  CHECK(std::abs(b.value + 1.0) <= 1e-6);
}

TEST_CASE("min/max-entropy duality on pure tripartite states") {
  PhiloxStream rng(7);
  for (int k = 0; k < 5; ++k) {
    auto psi = random_pure_state(Layout{{"A", 2}, {"B", 2}, {"C", 2}}, rng).density();
    double hmin = min_entropy(psi, {"A"}, {"B"}).value;
    auto hmax = max_entropy(psi, {"A"}, {"C"});
    CHECK(hmax.certified);
    CHECK(std::abs(hmin + hmax.value) <= 1e-6);
  }
}

TEST_CASE("fidelity SDP bound brackets the ascent") {
  PhiloxStream rng(12);
  for (int k = 0; k < 4; ++k) {
    int dc = 2 + k % 2;
    auto psi = random_pure_state(Layout{{"A", 2}, {"B", 3}, {"C", dc}}, rng).density();
    Matrix m = partial_trace(psi, {"A", "C"}).matrix();
    double ub = 2 * std::log2(detail::fidelity_dual_bound(m, 2, dc));
    auto h = max_entropy(psi, {"A"}, {"C"});
    CHECK(h.certified);
    CHECK(std::abs(ub - h.value) <= 1e-7);
    CHECK(std::abs(ub + min_entropy(psi, {"A"}, {"B"}).value) <= 1e-7);
  }
  // full rank: 1 (x) 1/2 on a maximally mixed pair gives log2 dA
  Matrix mm = Matrix::Identity(4, 4) / 4.0;
  CHECK(std::abs(2 * std::log2(detail::fidelity_dual_bound(mm, 2, 2)) - 1.0) <= 1e-7);
}

TEST_CASE("optimised conditional entropy") {
  PhiloxStream rng(8);
  auto ra = random_density(Layout{{"A", 2}}, rng);
  auto rb = random_density(Layout{{"B", 2}}, rng);
  auto prod = tensor(ra, rb);
  for (double a : {0.75, 1.5, 2.0}) {
    auto up = cond_renyi_up(prod, {"A"}, {"B"}, Alpha::of(a));
    CHECK(up.certified);
    CHECK(std::abs(up.value + renyi_divergence(ra, identity(Layout{{"A", 2}}), Alpha::of(a))) <= 1e-7);
    CHECK(detail::max_abs(up.sigma.matrix() - rb.matrix()) <= 1e-4);
  }

  for (int k = 0; k < 4; ++k) {
    auto r = random_density(Layout{{"A", 2}, {"B", 2}}, rng);
    for (double a : {0.75, 1.5, 2.0}) {
      auto up = cond_renyi_up(r, {"A"}, {"B"}, Alpha::of(a));
      CHECK(up.value >= cond_renyi_down(r, {"A"}, {"B"}, Alpha::of(a)) - 1e-12);
      CHECK(up.certified);
      double grid = up_grid(r.matrix(), a);
      CHECK(std::abs(up.value - grid) <= 2e-3);
      CHECK(up.value >= grid - 1e-9);
    }
  }
}

TEST_CASE("lower-arrow entropy dominates the upper-arrow one at 1/(2-alpha)") {
  PhiloxStream rng(9);
  for (int k = 0; k < 6; ++k) {
    auto r = random_density(Layout{{"A", 2}, {"B", 2}}, rng);
    for (double a : {1.2, 1.5, 1.8}) {
      double down = cond_renyi_down(r, {"A"}, {"B"}, Alpha::of(a));
      auto up = cond_renyi_up(r, {"A"}, {"B"}, beta_of(Alpha::of(a)));
      CHECK(down >= up.value - 1e-7);
    }
  }
}

TEST_CASE("channel divergence") {
  PhiloxStream rng(10);
  OptConfig cfg;
  cfg.restarts = 4;
  auto id = identity_channel(Layout{{"A", 2}});
  auto rep = replacer("A", 2);
  for (double a : {1.5, 2.0}) {
    auto same = channel_divergence_finite(id, id, Alpha::of(a), 1, cfg);
    CHECK(std::abs(same.value) <= 1e-8);
    auto r = channel_divergence_finite(id, rep, Alpha::of(a), 1, cfg);
    CHECK(std::abs(r.value - 1.0) <= 1e-6);
  }
  for (int k = 0; k < 2; ++k) {
    auto e = random_channel(Layout{{"A", 2}}, Layout{{"A", 2}}, 2, rng);
    auto f = random_channel(Layout{{"A", 2}}, Layout{{"A", 2}}, 4, rng);
    auto v1 = channel_divergence_finite(e, f, Alpha::of(1.5), 1, cfg);
    auto v2 = channel_divergence_finite(e, f, Alpha::of(1.5), 2, cfg);
    CHECK(std::isfinite(v1.value));
    CHECK(v2.value >= v1.value - 1e-9);
  }
  auto big = identity_channel(Layout{{"A", 3}});
  CHECK_THROWS(channel_divergence_finite(big, big, Alpha::of(2), 2, cfg));
}
