#include <catch_amalgamated.hpp>

#include "geat/verification.hpp"

using namespace geat;
using Catch::Approx;

namespace {

Vector bell() {
  Vector v = Vector::Zero(4);
  v(0) = v(3) = 1 / std::sqrt(2.0);
  return v;
}

}  // namespace

TEST_CASE("chain rule with a channel that only discards R") {
  // M = Tr_R: A' is trivial and E' = E, so both sides coincide
  std::vector<Matrix> kraus;
  for (int r = 0; r < 2; ++r) {
    Matrix k = Matrix::Zero(2, 4);
    k(0, r * 2 + 0) = 1;
    k(1, r * 2 + 1) = 1;
    kraus.push_back(k);
  }
  KrausChannel m(Layout{{"R", 2}, {"E", 2}}, Layout{{"A'", 1}, {"E'", 2}}, kraus);
  PhiloxStream rng(7);
  for (int k = 0; k < 3; ++k) {
    ChainRuleInstance in{m, random_density(Layout{{"A", 2}, {"R", 2}, {"E", 2}}, rng), {"A"}, {"R"}, {"E"},
                         {"A'"}, {}, {"E'"}};
    ChainRuleOptions opt;
    opt.restarts = 1;
    opt.max_iter = 50;
    auto v = entropy_chain_rule_values(in, Alpha::of(1.5), opt);
    REQUIRE(v.inf == Approx(0.0).margin(1e-12));
    REQUIRE(v.margin >= -1e-9);
    REQUIRE(v.margin <= 1e-9);
  }
}

TEST_CASE("chain rule on classical channels with a grid infimum") {
  auto reps = chain_rule_suite(30, 11, 1, 0).front();
  REQUIRE(reps.caveat == Caveat::exact);
  REQUIRE(reps.instances == 30);
  REQUIRE(reps.violations == 0);
  REQUIRE(reps.worst_margin >= -1e-6);
}

TEST_CASE("grid infimum agrees with a sampled search on classical inputs") {
  PhiloxStream rng(12);
  for (int k = 0; k < 3; ++k) {
    ChainRuleInstance in{random_classical_nonsignalling_channel(rng),
                         random_density(Layout{{"A", 2}, {"R", 2}, {"E", 2}}, rng),
                         {"A"}, {"R"}, {"E"}, {"A'"}, {"R'"}, {"E'"}};
    auto grid = entropy_chain_rule_values(in, Alpha::of(1.4));
    ChainRuleOptions opt;
    opt.force_sampled = true;
    opt.restarts = 2;
    opt.max_iter = 100;
    auto sampled = entropy_chain_rule_values(in, Alpha::of(1.4), opt);
    // the sampled minimum can only sit above the exact one
    REQUIRE(sampled.inf >= grid.inf - 1e-6);
    REQUIRE(sampled.inf <= grid.inf + 1e-3);
  }
}

TEST_CASE("chain rule on random qubit channels with a sampled infimum") {
  PhiloxStream rng(13);
  for (int k = 0; k < 3; ++k) {
    ChainRuleInstance in{random_nonsignalling_channel(rng), random_density(Layout{{"A", 2}, {"R", 2}, {"E", 2}}, rng),
                         {"A"}, {"R"}, {"E"}, {"A'"}, {"R'"}, {"E'"}};
    ChainRuleOptions opt;
    opt.restarts = 3;
    opt.max_iter = 100;
    opt.seed = static_cast<uint64_t>(k);
    auto rep = verify_entropy_chain_rule(in, Alpha::of(1.5), opt);
    REQUIRE(rep.caveat == Caveat::sampled_inf);
    REQUIRE(rep.violations == 0);
    REQUIRE(rep.best_omega.size() == 2 * 16);
  }
}

TEST_CASE("chain rule rejects signalling channels") {
  PhiloxStream rng(14);
  auto bad = random_channel(Layout{{"R", 2}, {"E", 2}}, Layout{{"A'", 2}, {"R'", 2}, {"E'", 2}}, 2, rng);
  ChainRuleInstance in{bad, random_density(Layout{{"A", 2}, {"R", 2}, {"E", 2}}, rng), {"A"}, {"R"}, {"E"},
                       {"A'"}, {"R'"}, {"E'"}};
  REQUIRE_THROWS_AS(verify_entropy_chain_rule(in, Alpha::of(1.5)), std::invalid_argument);
  REQUIRE_THROWS(entropy_chain_rule_values(in, Alpha::of(2.5)));
}

TEST_CASE("random non-signalling constructions pass the checker") {
  PhiloxStream rng(15);
  for (int k = 0; k < 5; ++k) {
    auto m = random_nonsignalling_channel(rng);
    REQUIRE(m.is_trace_preserving());
    REQUIRE(check_nonsignalling(m, {"R"}, {"E"}, {"E'"}, {"A'", "R'"}).residual <= 1e-12);
    auto c = random_classical_nonsignalling_channel(rng);
    REQUIRE(c.is_trace_preserving());
    REQUIRE(is_classical_input(c));
    REQUIRE_FALSE(is_classical_input(m));
    REQUIRE(check_nonsignalling(c, {"R"}, {"E"}, {"E'"}, {"A'", "R'"}).residual <= 1e-12);
  }
}

TEST_CASE("divergence chain rule with E = F reduces to data processing") {
  PhiloxStream rng(21);
  Layout lar{{"A", 2}, {"R", 2}};
  auto rmap = random_channel(Layout{{"A", 2}}, Layout{{"B", 2}}, 2, rng);
  auto f = compose(rmap, partial_trace_channel(lar, {"A"}));
  DivergenceChainInstance in{f, f, random_density(lar, rng), random_density(lar, rng), {"A"}, {"R"}};
  OptConfig cfg;
  cfg.restarts = 2;
  auto rep = verify_divergence_chain_rule(in, Alpha::of(1.5), 1, cfg);
  REQUIRE(rep.caveat == Caveat::one_sided);
  REQUIRE(rep.values.at("channel_divergence") == Approx(0.0).margin(1e-9));
  REQUIRE(rep.violations == 0);
  REQUIRE(rep.worst_margin >= -1e-9);
}

TEST_CASE("divergence chain rule is tight for the identity against a replacer") {
  // E = id_AR, F(w) = w_A (x) 1_R; on a Bell state both sides equal 1
  Layout lar{{"A", 2}, {"R", 2}};
  auto e = identity_channel(lar);
  auto f = tensor_channels(identity_channel(Layout{{"A", 2}}), replacer("R", 2));
  Vector b = bell();
  DivergenceChainInstance in{e, f, DensityMatrix(lar, b * b.adjoint()), maximally_mixed(lar), {"A"}, {"R"}};
  OptConfig cfg;
  cfg.restarts = 2;
  for (double a : {1.5, 2.0}) {
    auto rep = verify_divergence_chain_rule(in, Alpha::of(a), 1, cfg);
    REQUIRE(rep.values.at("lhs") == Approx(1.0).margin(1e-9));
    REQUIRE(rep.values.at("d_a") == Approx(0.0).margin(1e-12));
    REQUIRE(rep.values.at("channel_divergence") == Approx(1.0).margin(1e-7));
    REQUIRE(rep.violations == 0);
  }
  // F without the Tr_R structure is rejected
  DivergenceChainInstance bad = in;
  bad.f = identity_channel(lar);
  REQUIRE_THROWS(verify_divergence_chain_rule(bad, Alpha::of(1.5), 1, cfg));
}

TEST_CASE("divergence chain rule on random qubit instances") {
  auto reps = chain_rule_suite(1, 31, 1, 5);
  int v1 = -1, v2 = -1;
  for (const auto& r : reps) {
    if (r.name == "divergence_chain_rule_n1") v1 = r.violations;
    if (r.name == "divergence_chain_rule_n2") v2 = r.violations;
  }
  REQUIRE(v1 == 0);
  REQUIRE(v2 <= v1);
}

TEST_CASE("regularised Uhlmann sandwich") {
  SECTION("trivial R") {
    PhiloxStream rng(41);
    auto rho = random_density(Layout{{"A", 2}, {"R", 1}}, rng);
    auto sig = random_density(Layout{{"A", 2}}, rng);
    for (int n = 1; n <= 3; ++n) {
      auto v = regularized_uhlmann_values(rho, sig, Alpha::of(1.5), n);
      REQUIRE(v.middle == Approx(v.lower).margin(1e-9));
    }
  }
  SECTION("commuting instance attains the lower bound at n = 1") {
    Matrix rho = Matrix::Zero(4, 4);
    rho.diagonal() << 0.1, 0.3, 0.4, 0.2;
    Matrix sig = Matrix::Zero(2, 2);
    sig.diagonal() << 0.7, 0.3;
    auto v = regularized_uhlmann_values(Operator(Layout{{"A", 2}, {"R", 2}}, rho), Operator(Layout{{"A", 2}}, sig),
                                        Alpha::of(2.0), 1);
    REQUIRE(v.middle == Approx(v.lower).margin(1e-10));
    REQUIRE(v.marginal_residual <= 1e-12);
  }
  SECTION("random qubit instances") {
    PhiloxStream rng(42);
    for (int k = 0; k < 10; ++k) {
      auto rho = random_density(Layout{{"A", 2}, {"R", 2}}, rng);
      auto sig = random_density(Layout{{"A", 2}}, rng);
      std::vector<double> gaps;
      for (int n = 1; n <= 3; ++n) {
        auto rep = verify_regularized_uhlmann(rho, sig, Alpha::of(1.5), n);
        REQUIRE(rep.violations == 0);
        REQUIRE(rep.values.at("gap") <= rep.values.at("error_term"));
        gaps.push_back(rep.values.at("gap"));
      }
      // from n = 2 on the pinched extension improves; the n = 1 pinch can be finer than the n = 2 one
      REQUIRE(gaps[2] <= gaps[1] + 1e-9);
    }
  }
  SECTION("spectrum counts used by the error term") {
    PhiloxStream rng(43);
    auto rho = random_density(Layout{{"A", 2}, {"R", 2}}, rng);
    auto sig = random_density(Layout{{"A", 2}}, rng);
    for (int n = 1; n <= 3; ++n) {
      auto v = regularized_uhlmann_values(rho, sig, Alpha::of(1.5), n);
      REQUIRE(v.spec_sigma <= n + 1);
      REQUIRE(v.spec_rho_prime <= ipow(n + 2, 3));
      REQUIRE(v.error_term == Approx(3.0 * 6 * std::log2(n + 2.0) / n));
    }
  }
  REQUIRE_THROWS(regularized_uhlmann_values(Operator(Layout{{"A", 2}, {"R", 2}}, Matrix::Identity(4, 4) / 4.0),
                                            Operator(Layout{{"A", 2}}, Matrix::Identity(2, 2) / 2.0), Alpha::of(1.5),
                                            5));
}

TEST_CASE("duality on pure states") {
  SECTION("GHZ qutrits") {
    Vector g = Vector::Zero(27);
    for (int i = 0; i < 3; ++i) g(i * 9 + i * 3 + i) = 1 / std::sqrt(3.0);
    auto rep = verify_duality(PureState(Layout{{"A", 3}, {"B", 3}, {"C", 3}}, g), {"A"}, {"B"}, {"C"});
    REQUIRE(rep.violations == 0);
  }
  SECTION("Bell pair with a pure third party") {
    Vector v = kron(Matrix(bell()), Matrix(basis_vector(2, 0))).col(0);
    auto rep = verify_duality(PureState(Layout{{"A", 2}, {"B", 2}, {"C", 2}}, v), {"A"}, {"B"}, {"C"});
    REQUIRE(rep.values.at("h_min") == Approx(-1.0).margin(1e-7));
    REQUIRE(rep.values.at("h_max") == Approx(1.0).margin(1e-6));
    REQUIRE(rep.violations == 0);
  }
  SECTION("product state") {
    Vector v = Vector::Zero(8);
    v(0) = 1;
    auto rep = verify_duality(PureState(Layout{{"A", 2}, {"B", 2}, {"C", 2}}, v), {"A"}, {"B"}, {"C"});
    REQUIRE(rep.values.at("h_min") == Approx(0.0).margin(1e-7));
    REQUIRE(rep.violations == 0);
  }
}

TEST_CASE("appendix instance") {
  auto rep = verify_appendix_b();
  REQUIRE(rep.violations == 0);
  REQUIRE(rep.values.at("D2_A") < 0.476);
  REQUIRE(rep.values.at("inf_D_lower") > 0.48);
  REQUIRE(std::abs(rep.values.at("dmax") - rep.values.at("dmax_extension")) <= 1e-6);
}

TEST_CASE("D_max extension equality and commuting extensions") {
  auto d = verify_dmax_stable(8, 51);
  REQUIRE(d.violations == 0);
  auto c = verify_classical_stable(10, 52, {Alpha::of(0.5), Alpha::of(0.75), Alpha::of(2.0), Alpha::of(3.0),
                                            Alpha::infinity()});
  REQUIRE(c.violations == 0);
  REQUIRE(c.values.at("max_diff") <= 1e-9);
}

TEST_CASE("pinching suite") {
  auto rep = verify_pinching(40, 61);
  REQUIRE(rep.instances == 40);
  REQUIRE(rep.violations == 0);
  REQUIRE(rep.values.at("inequality") <= 1e-10);
}

TEST_CASE("divergence axiom suite") {
  auto rep = verify_divergence_axioms(40, 71);
  REQUIRE(rep.violations == 0);
  REQUIRE(rep.values.count("up_down") == 1);
}

TEST_CASE("EAT consistency suite") {
  auto rep = verify_eat_consistency(10, 81);
  REQUIRE(rep.violations == 0);
  REQUIRE(rep.values.at("max_relative_oracle_error") <= 1e-12);
}

TEST_CASE("worker pool keeps results in order") {
  auto seq = parallel_map<int>(50, 1, [](int i) { return i * i; });
  auto par = parallel_map<int>(50, 4, [](int i) { return i * i; });
  REQUIRE(seq == par);
  REQUIRE_THROWS(parallel_map<int>(10, 3, [](int i) -> int {
    if (i == 7) throw std::runtime_error("boom");
    return i;
  }));
  auto a = run_suite("pinching", 5, 12, 1);
  auto b = run_suite("pinching", 5, 12, 3);
  REQUIRE(a.front().worst_margin == b.front().worst_margin);
  REQUIRE(a.front().values == b.front().values);
  REQUIRE_THROWS(run_suite("nope", 1));
}
