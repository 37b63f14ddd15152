#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "grfev/model.hpp"
#include "grfev/potts.hpp"
#include "grfev/quadrature.hpp"
#include "grfev/rng.hpp"
#include "test_support.hpp"

using namespace grfev;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("potts statistic counts equal neighbor pairs") {
  Lattice all_equal(3, 3, 2);
  CHECK(potts_stat(all_equal) == 12.0);

  Lattice checker(2, 2, 2);
  checker.at(0, 1) = 1;
  checker.at(1, 0) = 1;
  CHECK(potts_stat(checker) == 0.0);

  Lattice pair(1, 2, 2);
  CHECK(potts_stat(pair) == 1.0);
  pair.at(0, 1) = 1;
  CHECK(potts_stat(pair) == 0.0);
}

TEST_CASE("full conditionals") {
  SECTION("uniform at theta = 0") {
    Lattice l(3, 4, 3);
    Rng rng(5);
    for (auto& c : l.cells) c = std::uint8_t(rng.uniform_below(3));
    for (int site = 0; site < l.size(); ++site) {
      Vec p = full_conditional(l, site, Vec::Zero(1));
      for (int s = 0; s < 3; ++s) CHECK_THAT(p[s], WithinAbs(1.0 / 3, 1e-14));
    }
  }
  SECTION("interior site with aligned neighborhood") {
    Lattice l(3, 3, 2);  // all state 0
    Vec p = full_conditional(l, 4, Vec::Constant(1, 0.4));
    double e = std::exp(1.6);
    CHECK_THAT(p[0], WithinRel(e / (e + 1.0), 1e-12));
    CHECK_THAT(p[1], WithinRel(1.0 / (e + 1.0), 1e-12));
  }
  SECTION("corner with split neighborhood is symmetric for any theta") {
    Lattice l(2, 2, 2);
    l.at(0, 1) = 1;  // the corner (0,0) sees one 0 and one 1
    for (double t : {-1.0, 0.3, 2.5}) {
      Vec p = full_conditional(l, 0, Vec::Constant(1, t));
      CHECK_THAT(p[0], WithinAbs(0.5, 1e-13));
    }
  }
}

TEST_CASE("exact recursion matches enumeration") {
  SECTION("uniform case") {
    CHECK_THAT(exact_log_partition(5, 7, 3, Vec::Zero(1)),
               WithinRel(35.0 * std::log(3.0), 1e-13));
  }
  SECTION("independent oracle on small lattices") {
    for (double theta : {0.0, 0.4, 0.8}) {
      for (auto [h, w, s] : {std::tuple{2, 3, 2}, {3, 3, 2}, {1, 5, 3},
                             {2, 2, 3}, {4, 2, 2}}) {
        double got = exact_log_partition(h, w, s, Vec::Constant(1, theta));
        double want = testsupport::oracle_potts_log_z(h, w, s, theta);
        CHECK_THAT(got, WithinRel(want, 1e-11));
      }
    }
  }
  SECTION("4x4 against the library brute force") {
    PottsModel m(Lattice(4, 4, 2));
    Vec t = Vec::Constant(1, 0.4);
    CHECK_THAT(exact_log_partition(4, 4, 2, t),
               WithinRel(brute_force_log_partition(m, t), 1e-9));
  }
  SECTION("chain closed form") {
    for (double theta : {-0.5, 0.4, 1.1}) {
      for (int n : {2, 7, 12}) {
        double want = std::log(2.0) + (n - 1) * log1p_exp(theta);
        CHECK_THAT(exact_log_partition(1, n, 2, Vec::Constant(1, theta)),
                   WithinRel(want, 1e-12));
        // orientation must not matter
        CHECK_THAT(exact_log_partition(n, 1, 2, Vec::Constant(1, theta)),
                   WithinRel(want, 1e-12));
      }
    }
  }
  SECTION("budget refusal names the required count") {
    try {
      exact_log_partition(17, 20, 2, Vec::Zero(1));
      FAIL("expected refusal");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::budget);
      CHECK(std::string(e.what()).find("131072") != std::string::npos);
    }
  }
}

TEST_CASE("exact sampling") {
  SECTION("uniform over all configurations at theta = 0") {
    PottsTransfer t(3, 3, 2);
    auto sampler = t.make_sampler(0.0);
    Rng rng(42);
    const int draws = 10000;
    std::vector<double> counts(512, 0.0);
    for (int k = 0; k < draws; ++k) {
      Lattice l = sampler.draw(rng);
      int code = 0;
      for (int i = 0; i < 9; ++i)
        code |= int(l.cells[std::size_t(i)]) << i;
      counts[std::size_t(code)] += 1.0;
    }
    std::vector<double> expected(512, draws / 512.0);
    // df = 511; 620 sits past the 99.9th percentile
    CHECK(testsupport::chi_square(counts, expected) < 620.0);
  }
  SECTION("two-cell enumeration") {
    PottsTransfer t(1, 2, 2);
    auto sampler = t.make_sampler(1.0);
    Rng rng(7);
    const int draws = 100000;
    int equal = 0;
    for (int k = 0; k < draws; ++k) {
      Lattice l = sampler.draw(rng);
      equal += l.at(0, 0) == l.at(0, 1);
    }
    double p = std::exp(1.0) / (std::exp(1.0) + 1.0);
    double sd = std::sqrt(p * (1 - p) / draws);
    CHECK_THAT(double(equal) / draws, WithinAbs(p, 3 * sd));
  }
  SECTION("agrees with the Gibbs sampler on a 15x15 lattice") {
    const double theta = 0.4;
    PottsTransfer t(15, 15, 2);
    auto sampler = t.make_sampler(theta);
    Rng rng(99);
    RunningMoments exact;
    for (int k = 0; k < 1000; ++k)
      exact.add(potts_stat(sampler.draw(rng)));

    Lattice l(15, 15, 2);
    Vec tv = Vec::Constant(1, theta);
    Rng grng(123);
    for (int i = 0; i < 500; ++i) gibbs_sweep(l, tv, grng);
    RunningMoments gibbs;
    for (int k = 0; k < 2000; ++k) {
      for (int i = 0; i < 5; ++i) gibbs_sweep(l, tv, grng);
      gibbs.add(potts_stat(l));
    }
    // generous joint tolerance; the Gibbs side is autocorrelated
    double tol = 4.0 * std::sqrt(exact.variance() / exact.count() +
                                 8.0 * gibbs.variance() / gibbs.count());
    CHECK_THAT(gibbs.mean(), WithinAbs(exact.mean(), tol));
  }
  SECTION("statistic mean matches enumeration on 3x3") {
    const double theta = 0.4;
    // exact E[s] by enumeration
    PottsModel m(Lattice(3, 3, 2));
    double log_z = testsupport::oracle_potts_log_z(3, 3, 2, theta);
    double mean_s = 0.0;
    m.for_each_state([&](const Vec& s) {
      mean_s += s[0] * std::exp(theta * s[0] - log_z);
    });
    PottsTransfer t(3, 3, 2);
    auto sampler = t.make_sampler(theta);
    Rng rng(31);
    RunningMoments emp;
    for (int k = 0; k < 100000; ++k) emp.add(potts_stat(sampler.draw(rng)));
    double se = std::sqrt(emp.variance() / emp.count());
    CHECK_THAT(emp.mean(), WithinAbs(mean_s, 4 * se));
  }
}

TEST_CASE("gibbs sweep keeps the target invariant") {
  const double theta = 0.5;
  Vec tv = Vec::Constant(1, theta);
  PottsTransfer t(6, 6, 2);
  auto sampler = t.make_sampler(theta);
  Rng rng(11);
  RunningMoments start, after;
  for (int k = 0; k < 400; ++k) {
    Lattice l = sampler.draw(rng);
    start.add(potts_stat(l));
    for (int i = 0; i < 100; ++i) gibbs_sweep(l, tv, rng);
    after.add(potts_stat(l));
  }
  double tol = 4.0 * std::sqrt(start.variance() / start.count() +
                               after.variance() / after.count());
  CHECK_THAT(after.mean(), WithinAbs(start.mean(), tol));
}

TEST_CASE("two-state relabeling symmetry") {
  // distribution of the statistic is invariant under a global state flip
  const double theta = 0.6;
  PottsTransfer t(4, 4, 2);
  auto sampler = t.make_sampler(theta);
  Rng rng(3);
  RunningMoments plain, flipped;
  for (int k = 0; k < 4000; ++k) {
    Lattice l = sampler.draw(rng);
    plain.add(potts_stat(l));
    for (auto& c : l.cells) c = std::uint8_t(1 - c);
    flipped.add(potts_stat(l));
  }
  CHECK(plain.mean() == flipped.mean());  // the flip preserves the statistic
}

TEST_CASE("single-cell quadrature evidence is the prior mass over S") {
  // s(y) = 0, so the likelihood is exactly 1/S and the evidence integrates
  // the prior over the grid window
  QuadratureGrid grid = QuadratureGrid::uniform(0.0, 0.8, 5000);
  const double sd = 5.0;
  auto log_prior = [&](double x) {
    return -0.5 * std::log(2.0 * M_PI * sd * sd) - 0.5 * x * x / (sd * sd);
  };
  const int S = 3;
  double got = log_trapezoid(
      grid, [&](double x) { return -std::log(double(S)) + log_prior(x); });
  double mass = 0.5 * (std::erf(0.8 / (sd * std::sqrt(2.0))) - 0.0);
  CHECK_THAT(got, WithinAbs(std::log(mass / S), 1e-8));
}

TEST_CASE("grid refinement self-consistency on a sampled dataset") {
  Rng rng(2024);
  Lattice data = exact_sample(6, 6, 2, Vec::Constant(1, 0.4), rng);
  const double s_obs = potts_stat(data);
  PottsTransfer t(6, 6, 2);
  const double sd = 5.0;
  auto log_post = [&](double x) {
    return x * s_obs - t.log_partition(x) -
           0.5 * std::log(2.0 * M_PI * sd * sd) - 0.5 * x * x / (sd * sd);
  };
  double coarse = log_trapezoid(QuadratureGrid::uniform(0.0, 0.8, 2500), log_post);
  double fine = log_trapezoid(QuadratureGrid::uniform(0.0, 0.8, 5000), log_post);
  CHECK_THAT(coarse, WithinAbs(fine, 1e-6));
}

TEST_CASE("non-monotone grids are rejected") {
  QuadratureGrid g;
  g.points = {0.0, 0.5, 0.5, 1.0};
  CHECK_THROWS_AS(log_trapezoid(g, [](double) { return 0.0; }), Error);
}

TEST_CASE("lattice files round trip") {
  Lattice l(3, 5, 3);
  Rng rng(8);
  for (auto& c : l.cells) c = std::uint8_t(rng.uniform_below(3));
  auto path = std::filesystem::temp_directory_path() / "grfev_lat_test.csv";
  save_lattice(l, path.string());
  Lattice back = load_lattice(path.string(), 3);
  CHECK(back.height == l.height);
  CHECK(back.width == l.width);
  CHECK(back.states == 3);
  CHECK(back.cells == l.cells);
  std::filesystem::remove(path);
}
