#include <catch_amalgamated.hpp>

#include "grfev/ergm.hpp"
#include "grfev/model.hpp"
#include "grfev/potts.hpp"
#include "grfev/rng.hpp"
#include "test_support.hpp"

using namespace grfev;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ErgmModel edges_only(int n) {
  NetworkGraph g(n);
  return ErgmModel(std::move(g), parse_model_spec("edges"));
}

ErgmModel edges_only(NetworkGraph g) {
  return ErgmModel(std::move(g), parse_model_spec("edges"));
}

}  // namespace

TEST_CASE("log_unnorm is theta dot stats") {
  NetworkGraph g(4);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.add_edge(2, 3);
  ErgmModel m = edges_only(g);

  Vec zero = Vec::Zero(1);
  CHECK(log_unnorm(m, m.graph(), zero) == 0.0);

  Vec one = Vec::Constant(1, 1.0);
  CHECK_THAT(log_unnorm(m, m.graph(), one), WithinAbs(3.0, 1e-15));

  Vec bad(2);
  bad << 1.0, 2.0;
  CHECK_THROWS_AS(log_unnorm(m, m.graph(), bad), Error);
}

TEST_CASE("log_unnorm for a small Potts lattice") {
  Lattice l(3, 3, 2);  // all cells equal
  PottsModel m(l);
  Vec theta = Vec::Constant(1, 0.4);
  // 12 first-order neighbor pairs on a 3x3 grid
  CHECK_THAT(log_unnorm(m, l, theta), WithinAbs(4.8, 1e-12));
}

TEST_CASE("log_unnorm is linear in theta") {
  NetworkGraph g(5);
  Rng rng(17);
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j)
      if (rng.bernoulli(0.5)) g.add_edge(i, j);
  ModelSpec spec = parse_model_spec("edges + gwesp(0.3) + gwd(0.5)");
  ErgmModel m(std::move(g), spec);
  for (int trial = 0; trial < 20; ++trial) {
    Vec t1(3), t2(3);
    for (int k = 0; k < 3; ++k) {
      t1[k] = rng.normal();
      t2[k] = rng.normal();
    }
    double a = rng.normal(), b = rng.normal();
    double lhs = log_unnorm(m, m.graph(), Vec(a * t1 + b * t2));
    double rhs = a * log_unnorm(m, m.graph(), t1) +
                 b * log_unnorm(m, m.graph(), t2);
    CHECK_THAT(lhs, WithinAbs(rhs, 1e-11 * (1.0 + std::abs(rhs))));
  }
}

TEST_CASE("brute force partition: null parameter counts configurations") {
  // edges-only, n=5: z(0) = 2^10
  ErgmModel m = edges_only(5);
  CHECK_THAT(brute_force_log_partition(m, Vec::Zero(1)),
             WithinRel(10.0 * std::log(2.0), 1e-13));

  // 2-state Potts on 3x3: z(0) = 2^9
  PottsModel p(Lattice(3, 3, 2));
  CHECK_THAT(brute_force_log_partition(p, Vec::Zero(1)),
             WithinRel(9.0 * std::log(2.0), 1e-13));
}

TEST_CASE("brute force partition matches the independent-dyad closed form") {
  for (double t : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    for (int n : {4, 5, 6}) {
      ErgmModel m = edges_only(n);
      double dyads = n * (n - 1) / 2.0;
      double expected = dyads * log1p_exp(t);
      CHECK_THAT(brute_force_log_partition(m, Vec::Constant(1, t)),
                 WithinRel(expected, 1e-10));
    }
  }
}

TEST_CASE("brute force partition refuses above the cap") {
  ErgmModel m = edges_only(8);  // 2^28 graphs
  try {
    brute_force_log_partition(m, Vec::Zero(1));
    FAIL("expected a budget refusal");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::budget);
    CHECK(std::string(e.what()).find("268435456") != std::string::npos);
  }
}

TEST_CASE("brute force agrees with the test oracle on Potts lattices") {
  for (double theta : {0.0, 0.4, 0.8}) {
    PottsModel m(Lattice(2, 3, 3));
    Vec t = Vec::Constant(1, theta);
    CHECK_THAT(brute_force_log_partition(m, t),
               WithinRel(testsupport::oracle_potts_log_z(2, 3, 3, theta),
                         1e-12));
  }
}
