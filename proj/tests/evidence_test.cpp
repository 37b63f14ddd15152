#include <catch_amalgamated.hpp>

#include "grfev/calibration.hpp"
#include "grfev/ergm.hpp"
#include "grfev/evidence.hpp"
#include "grfev/mcmc.hpp"
#include "grfev/pseudolikelihood.hpp"
#include "grfev/quadrature.hpp"
#include "grfev/rng.hpp"
#include "test_support.hpp"

using namespace grfev;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// constant log likelihood; chains just wander the prior
struct FlatTarget {
  double c;
  int d;
  int dim() const { return d; }
  double log_lik(const Vec&) const { return c; }
  Vec grad_log_lik(const Vec&) const { return Vec::Zero(d); }
};

// log f(y | theta) linear in theta
struct LinearTarget {
  Vec a;
  int dim() const { return int(a.size()); }
  double log_lik(const Vec& x) const { return a.dot(x); }
  Vec grad_log_lik(const Vec&) const { return a; }
};

// the edges-only network model: pseudolikelihood == likelihood
struct EdgesOnlyOracle {
  ErgmModel model;
  PlSurface surface;
  GaussianPrior prior;
  double quadrature_log_evidence;

  static EdgesOnlyOracle make(int n, double density, std::uint64_t seed,
                              double prior_var) {
    Rng rng(seed);
    NetworkGraph g(n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.bernoulli(density)) g.add_edge(i, j);
    ErgmModel m(g, parse_model_spec("edges"));
    PlSurface surf = PlSurface::from_ergm(m);
    GaussianPrior prior = GaussianPrior::isotropic(1, 0.0, prior_var);
    double e = m.obs_stats()[0];
    double dyads = g.n() * (g.n() - 1) / 2.0;
    QuadratureGrid grid = QuadratureGrid::uniform(-10.0, 10.0, 20001);
    double truth = log_trapezoid(grid, [&](double t) {
      return e * t - dyads * log1p_exp(t) +
             prior.log_pdf(Vec::Constant(1, t));
    });
    return {std::move(m), std::move(surf), std::move(prior), truth};
  }
};

PowerPosteriorSettings small_pp(int rungs, int draws) {
  PowerPosteriorSettings cfg;
  cfg.ladder = TemperatureLadder::powered(rungs, 5.0);
  cfg.draws_per_rung = draws;
  cfg.burn_in = draws / 5;
  return cfg;
}

}  // namespace

TEST_CASE("synthetic rung summaries pin the quadrature formulas") {
  SECTION("flat integrand collapses to the constant") {
    PowerPosteriorRun run;
    run.ladder = TemperatureLadder::uniform(4);
    run.dim = 1;
    run.rungs.resize(5);
    for (std::size_t i = 0; i < 5; ++i) {
      run.rungs[i].t = run.ladder.points[i];
      run.rungs[i].n = 10;
      run.rungs[i].mean_ll = -3.25;
      run.rungs[i].var_ll = 0.0;
    }
    CHECK_THAT(ti_improved_trapezoid(run).log_evidence,
               WithinAbs(-3.25, 1e-14));
  }
  SECTION("equal endpoint variances reduce to the plain trapezoid") {
    PowerPosteriorRun run;
    run.ladder.points = {0.0, 1.0};
    run.dim = 1;
    run.rungs.resize(2);
    run.rungs[0] = {};
    run.rungs[0].t = 0.0;
    run.rungs[0].n = 5;
    run.rungs[0].mean_ll = -8.0;
    run.rungs[0].var_ll = 2.5;
    run.rungs[1].t = 1.0;
    run.rungs[1].n = 5;
    run.rungs[1].mean_ll = -2.0;
    run.rungs[1].var_ll = 2.5;
    CHECK_THAT(ti_improved_trapezoid(run).log_evidence,
               WithinAbs(-5.0, 1e-14));
  }
  SECTION("the variance correction has the stated sign and size") {
    PowerPosteriorRun run;
    run.ladder.points = {0.0, 0.5, 1.0};
    run.dim = 1;
    run.rungs.resize(3);
    double e[3] = {-6.0, -4.0, -3.0};
    double v[3] = {4.0, 2.0, 1.0};
    for (std::size_t i = 0; i < 3; ++i) {
      run.rungs[i].t = run.ladder.points[i];
      run.rungs[i].n = 5;
      run.rungs[i].mean_ll = e[i];
      run.rungs[i].var_ll = v[i];
    }
    double plain = 0.25 * (e[0] + e[1]) + 0.25 * (e[1] + e[2]);
    double corr = 0.5 * 0.5 / 12.0 * ((v[1] - v[0]) + (v[2] - v[1]));
    CHECK_THAT(ti_improved_trapezoid(run).log_evidence,
               WithinAbs(plain - corr, 1e-14));
  }
  SECTION("a missing rung is rejected") {
    PowerPosteriorRun run;
    run.ladder = TemperatureLadder::uniform(3);
    run.dim = 1;
    run.rungs.resize(3);  // one short
    CHECK_THROWS_AS(ti_improved_trapezoid(run), Error);
  }
}

TEST_CASE("constant likelihood is recovered exactly end to end") {
  FlatTarget target{-7.5, 2};
  GaussianPrior prior = GaussianPrior::isotropic(2, 0.0, 9.0);
  ProposalSpec spec;
  spec.lambda = 1.7;
  spec.prior_precision = prior.precision;
  spec.curvature = 0.1 * Mat::Identity(2, 2);
  PowerPosteriorRun run = run_power_posterior_chains(
      target, prior, small_pp(8, 2000), spec, Vec::Zero(2), 88);
  CHECK_THAT(ti_improved_trapezoid(run).log_evidence, WithinAbs(-7.5, 1e-12));
  CHECK_THAT(stepping_stones(run).log_evidence, WithinAbs(-7.5, 1e-12));
  CHECK_THAT(cti(run, 2).log_evidence, WithinAbs(-7.5, 1e-9));
}

TEST_CASE("edges-only oracle: all four estimators hit the quadrature value") {
  EdgesOnlyOracle oracle = EdgesOnlyOracle::make(10, 0.45, 7, 100.0);
  UnadjustedTarget target{&oracle.surface};  // exact likelihood here
  Vec mode = mple(oracle.surface).theta;

  ProposalSpec spec;
  spec.lambda = 2.4;
  spec.prior_precision = oracle.prior.precision;
  spec.curvature = -oracle.surface.hess_log_pl(mode);

  PowerPosteriorRun run = run_power_posterior_chains(
      target, oracle.prior, small_pp(40, 12000), spec, mode, 4242);
  EvidenceEstimate ti = ti_improved_trapezoid(run);
  EvidenceEstimate ct = cti(run, 2);
  EvidenceEstimate ss = stepping_stones(run);

  ChibSettings cj_cfg;
  cj_cfg.draws = 100000;
  Rng rng = derive_rng(4242, seeds::kChib);
  EvidenceEstimate cj = chib_jeliazkov(target, oracle.prior,
                                       proposal_covariance(spec), mode,
                                       cj_cfg, rng);

  const double truth = oracle.quadrature_log_evidence;
  CHECK_THAT(cj.log_evidence, WithinAbs(truth, 0.05));
  CHECK_THAT(ti.log_evidence, WithinAbs(truth, 0.05));
  CHECK_THAT(ct.log_evidence, WithinAbs(truth, 0.05));
  CHECK_THAT(ss.log_evidence, WithinAbs(truth, 0.05));

  // internal consistency on shared rung samples
  CHECK_THAT(ti.log_evidence, WithinAbs(ss.log_evidence, 0.05));

  SECTION("bayes factor of identical estimates is one") {
    CHECK(bayes_factor(cj, cj) == 1.0);
  }
}

TEST_CASE("chib-jeliazkov is insensitive to the ordinate point") {
  EdgesOnlyOracle oracle = EdgesOnlyOracle::make(10, 0.4, 21, 100.0);
  UnadjustedTarget target{&oracle.surface};
  Vec mode = mple(oracle.surface).theta;
  ProposalSpec spec;
  spec.lambda = 2.4;
  spec.prior_precision = oracle.prior.precision;
  spec.curvature = -oracle.surface.hess_log_pl(mode);
  Mat sigma = proposal_covariance(spec);
  double sd = std::sqrt(sigma(0, 0));

  auto run_with = [&](std::optional<Vec> star, std::uint64_t seed) {
    ChibSettings cfg;
    cfg.draws = 60000;
    cfg.theta_star = star;
    Rng rng(seed);
    return chib_jeliazkov(target, oracle.prior, sigma, mode, cfg, rng)
        .log_evidence;
  };

  // replicate scatter at the default point
  RunningMoments reps;
  for (int r = 0; r < 6; ++r) reps.add(run_with(std::nullopt, 100 + r));
  double rep_sd = reps.sd();

  double at_mode = run_with(mode, 42);
  double offset = run_with(Vec::Constant(1, mode[0] + sd), 43);
  CHECK_THAT(at_mode, WithinAbs(reps.mean(), 3 * rep_sd + 1e-12));
  CHECK_THAT(offset, WithinAbs(reps.mean(), 3 * rep_sd + 1e-12));
}

TEST_CASE("chib-jeliazkov refuses an underflowing ordinate") {
  struct Spike {
    int dim() const { return 1; }
    double log_lik(const Vec& x) const { return -1e8 * x.squaredNorm(); }
    Vec grad_log_lik(const Vec& x) const { return -2e8 * x; }
  } target;
  GaussianPrior prior = GaussianPrior::isotropic(1, 0.0, 1.0);
  ChibSettings cfg;
  cfg.draws = 2000;
  cfg.theta_star = Vec::Zero(1);
  Rng rng(5);
  // proposals land far from the spike, so every acceptance underflows
  Mat wide = Mat::Constant(1, 1, 1e12);
  try {
    chib_jeliazkov(target, prior, wide, Vec::Zero(1), cfg, rng);
    FAIL("expected underflow refusal");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::numeric);
    CHECK(std::string(e.what()).find("theta_star") != std::string::npos);
  }
}

TEST_CASE("zero-variance control variates") {
  SECTION("a linear log likelihood is controlled to nothing") {
    LinearTarget target{Vec::Constant(2, 1.5)};
    GaussianPrior prior = GaussianPrior::isotropic(2, 0.0, 4.0);
    ProposalSpec spec;
    spec.lambda = 1.7;
    spec.prior_precision = prior.precision;
    spec.curvature = 0.25 * Mat::Identity(2, 2);
    PowerPosteriorRun run = run_power_posterior_chains(
        target, prior, small_pp(6, 4000), spec, Vec::Zero(2), 17);
    for (const auto& r : run.rungs) {
      ControlledMean cm = controlled_mean(r.n, r.phi_sum, r.phi_outer_sum,
                                          r.phi_ll_sum, r.mean_ll, r.var_ll,
                                          run.dim);
      REQUIRE_FALSE(cm.fallback);
      CHECK(cm.residual_variance < 1e-6 * std::max(cm.raw_variance, 1e-30));
    }
  }
  SECTION("degree-1 controls collapse the posterior-mean estimator") {
    // ZV for E[theta_k] on a Gaussian chain: theta + var * score is constant
    GaussianPrior prior = GaussianPrior::isotropic(1, 0.7, 2.25);
    Rng rng(90);
    RunningMoments raw_means, cv_means;
    for (int rep = 0; rep < 30; ++rep) {
      Chain chain = rw_metropolis(
          [&](const Vec& x) { return prior.log_pdf(x); }, Vec::Zero(1),
          Mat::Constant(1, 1, 4.0), 2000, 500, rng);
      long long n = chain.draws.rows();
      Vec phi_sum = Vec::Zero(1);
      Mat phi_outer = Mat::Zero(1, 1);
      Vec phi_g = Vec::Zero(1);
      RunningMoments g;
      for (Eigen::Index i = 0; i < n; ++i) {
        double x = chain.draws(i, 0);
        double score = prior.grad_log_pdf(Vec::Constant(1, x))[0];
        phi_sum[0] += score;
        phi_outer(0, 0) += score * score;
        phi_g[0] += score * x;
        g.add(x);
      }
      raw_means.add(g.mean());
      cv_means.add(controlled_mean(n, phi_sum, phi_outer, phi_g, g.mean(),
                                   g.variance(), 1)
                       .mean);
    }
    CHECK(cv_means.variance() < 0.2 * raw_means.variance());
    // both remain unbiased for the prior mean
    CHECK_THAT(cv_means.mean(), WithinAbs(0.7, 0.05));
  }
  SECTION("cti and ti agree in expectation on a toy model") {
    LinearTarget target{Vec::Constant(1, 2.0)};
    GaussianPrior prior = GaussianPrior::isotropic(1, 0.0, 1.0);
    ProposalSpec spec;
    spec.lambda = 2.4;
    spec.prior_precision = prior.precision;
    spec.curvature = Mat::Identity(1, 1);
    RunningMoments ti_vals, cti_vals;
    for (int rep = 0; rep < 50; ++rep) {
      PowerPosteriorRun run = run_power_posterior_chains(
          target, prior, small_pp(6, 1500), spec, Vec::Zero(1),
          derive_seed(3000, seeds::kReplicate, std::uint64_t(rep)));
      ti_vals.add(ti_improved_trapezoid(run).log_evidence);
      cti_vals.add(cti(run, 1).log_evidence);
    }
    // truth: E[exp(2 theta)] under N(0,1) = exp(2)
    double truth = 2.0;
    CHECK_THAT(ti_vals.mean(), WithinAbs(truth, 0.05));
    CHECK_THAT(cti_vals.mean(), WithinAbs(truth, 0.02));
    double joint_se = std::sqrt(ti_vals.variance() / 50 +
                                cti_vals.variance() / 50);
    CHECK_THAT(cti_vals.mean(), WithinAbs(ti_vals.mean(), 2 * joint_se + 1e-12));
    CHECK(cti_vals.variance() < ti_vals.variance());
  }
}

TEST_CASE("replicate harness") {
  ReplicateSummary s = replicate_runs(8, 99, [](std::uint64_t seed, int) {
    Rng rng(seed);
    return rng.normal();
  });
  CHECK(s.values.size() == 8);
  CHECK(std::isfinite(s.sd));
  // derived seeds differ
  CHECK(s.values[0] != s.values[1]);
  // deterministic rerun
  ReplicateSummary again = replicate_runs(8, 99, [](std::uint64_t seed, int) {
    Rng rng(seed);
    return rng.normal();
  });
  CHECK(again.values == s.values);
}
