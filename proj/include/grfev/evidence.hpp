#pragma once

// Evidence estimators over a tractable (adjusted) posterior: the one-block
// Metropolis posterior-ordinate identity, thermodynamic integration with a
// variance-corrected trapezium rule, its control-variate refinement, and
// stepping stones. All work in log space.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "grfev/common.hpp"
#include "grfev/mcmc.hpp"
#include "grfev/parallel.hpp"
#include "grfev/rng.hpp"

namespace grfev {

struct EvidenceEstimate {
  std::string method;
  double log_evidence = 0.0;
  double replicate_sd = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> replicate_values;
  double wall_sec = 0.0;
  bool cv_fallback = false;
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();
  std::string settings_desc;
};

// ---------------------------------------------------------------------------

struct ChibSettings {
  int draws = 200000;
  int burn_in = 5000;
  std::optional<Vec> theta_star;  // default: posterior sample mean
};

// log evidence = log lik(theta*) + log prior(theta*) - log post(theta*),
// with the posterior ordinate estimated from the Metropolis identity
//   post(theta*) = E_post[alpha(theta, theta*) N(theta*; theta, S)]
//                / E_{N(theta*, S)}[alpha(theta*, theta)].
template <class Target>
EvidenceEstimate chib_jeliazkov(const Target& target,
                                const GaussianPrior& prior,
                                const Mat& sigma_lambda, const Vec& init,
                                const ChibSettings& cfg, Rng& rng) {
  require(prior.dim() == target.dim(), ErrorCode::contract,
          "prior and target dimension mismatch");
  auto log_post = [&](const Vec& th) {
    return target.log_lik(th) + prior.log_pdf(th);
  };
  Chain chain =
      rw_metropolis(log_post, init, sigma_lambda, cfg.draws, cfg.burn_in, rng);

  Vec theta_star = cfg.theta_star
                       ? *cfg.theta_star
                       : Vec(chain.draws.colwise().mean().transpose());
  double lp_star = log_post(theta_star);

  const Eigen::Index d = theta_star.size();
  Eigen::LLT<Mat> llt(sigma_lambda);
  require(llt.info() == Eigen::Success, ErrorCode::numeric,
          "proposal covariance is not positive definite");
  Mat chol = llt.matrixL();
  double half_logdet = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) half_logdet += std::log(chol(i, i));
  const double gauss_norm =
      -0.5 * double(d) * std::log(2.0 * M_PI) - half_logdet;

  // numerator: mean over posterior draws of alpha * N(theta* ; draw, S)
  StreamingLse num;
  Vec diff(d);
  for (Eigen::Index i = 0; i < chain.draws.rows(); ++i) {
    diff = theta_star - chain.draws.row(i).transpose();
    double quad = chol.triangularView<Eigen::Lower>().solve(diff).squaredNorm();
    double log_alpha = std::min(0.0, lp_star - chain.log_density[i]);
    num.add(log_alpha + gauss_norm - 0.5 * quad);
  }

  // denominator: mean over proposal draws at theta* of alpha(theta*, .)
  StreamingLse den;
  Vec z(d);
  for (int j = 0; j < cfg.draws; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) z[i] = rng.normal();
    Vec prop = theta_star + chol * z;
    den.add(std::min(0.0, log_post(prop) - lp_star));
  }
  double log_den = den.log_mean();
  require(log_den > -600.0, ErrorCode::numeric,
          "posterior-ordinate denominator underflowed; choose theta_star "
          "closer to the posterior mode");

  EvidenceEstimate est;
  est.method = "cj";
  est.log_evidence = lp_star - (num.log_mean() - log_den);
  est.acceptance_rate = chain.acceptance_rate;
  return est;
}

// ---------------------------------------------------------------------------

namespace detail {

inline void check_rungs(const PowerPosteriorRun& run) {
  run.ladder.validate();
  require(run.rungs.size() == run.ladder.points.size(), ErrorCode::contract,
          "run is missing rung summaries");
  for (const auto& r : run.rungs)
    require(r.n > 0, ErrorCode::contract, "a rung has no draws");
}

// trapezium with second-order correction from the identity
// d/dt E_t[ll] = Var_t[ll]:
//   sum_i dt/2 (E_i + E_{i+1}) - dt^2/12 (V_{i+1} - V_i)
inline double corrected_trapezium(const PowerPosteriorRun& run,
                                  const std::vector<double>& means) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < run.rungs.size(); ++i) {
    double dt = run.ladder.points[i + 1] - run.ladder.points[i];
    acc += dt / 2.0 * (means[i + 1] + means[i]);
    acc -= dt * dt / 12.0 * (run.rungs[i + 1].var_ll - run.rungs[i].var_ll);
  }
  return acc;
}

}  // namespace detail

inline EvidenceEstimate ti_improved_trapezoid(const PowerPosteriorRun& run) {
  detail::check_rungs(run);
  std::vector<double> means(run.rungs.size());
  for (std::size_t i = 0; i < run.rungs.size(); ++i)
    means[i] = run.rungs[i].mean_ll;
  EvidenceEstimate est;
  est.method = "ti";
  est.log_evidence = detail::corrected_trapezium(run, means);
  return est;
}

struct ControlledMean {
  double mean = 0.0;            // control-variate-adjusted mean of g
  double raw_variance = 0.0;    // sample variance of g
  double residual_variance = 0.0;  // variance left after the controls
  bool fallback = false;        // ill-conditioned solve, raw mean kept
};

// Least-squares control variates from moment accumulators:
//   mean(g) - c' mean(phi),  c = Cov(phi)^+ Cov(phi, g),
// with the coefficient solve dropped (raw mean kept) when Cov(phi) is
// numerically singular.
inline ControlledMean controlled_mean(long long n, const Vec& phi_sum,
                                      const Mat& phi_outer_sum,
                                      const Vec& phi_g_sum, double mean_g,
                                      double var_g, int q) {
  ControlledMean out;
  const double dn = double(n);
  // population (1/n) convention throughout, so an exactly affine response
  // regresses to zero residual
  double var_n = var_g * (dn - 1.0) / dn;
  out.raw_variance = var_n;
  Vec mean_phi = phi_sum.head(q) / dn;
  Mat cov_phi = phi_outer_sum.topLeftCorner(q, q) / dn -
                mean_phi * mean_phi.transpose();
  Vec cov_phi_g = phi_g_sum.head(q) / dn - mean_phi * mean_g;
  Eigen::SelfAdjointEigenSolver<Mat> es(cov_phi);
  double lo = es.eigenvalues().minCoeff();
  double hi = es.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo <= 1e-12 * hi) {
    out.mean = mean_g;
    out.residual_variance = var_n;
    out.fallback = true;
    return out;
  }
  Vec c = es.eigenvectors() *
          (es.eigenvectors().transpose() * cov_phi_g).cwiseQuotient(
              es.eigenvalues());
  out.mean = mean_g - c.dot(mean_phi);
  out.residual_variance = std::max(0.0, var_n - c.dot(cov_phi_g));
  return out;
}

// Controlled thermodynamic integration: per rung, the raw mean of the log
// likelihood is replaced by the control-variate-adjusted mean, where phi
// are zero-mean score features (E[del P + grad P . score] = 0 by the
// divergence theorem, for polynomials P of the requested degree). The
// quadrature and its variance correction are unchanged.
inline EvidenceEstimate cti(const PowerPosteriorRun& run, int degree = 2) {
  detail::check_rungs(run);
  require(degree == 1 || degree == 2, ErrorCode::usage,
          "control variate degree must be 1 or 2");
  require(run.dim > 0, ErrorCode::contract, "run lacks the target dimension");
  const int d = run.dim;
  const int q_all = detail::cv_feature_count(d);
  const int q = degree == 1 ? d : q_all;
  EvidenceEstimate est;
  est.method = "cti";
  std::vector<double> means(run.rungs.size());
  for (std::size_t i = 0; i < run.rungs.size(); ++i) {
    const RungSummary& r = run.rungs[i];
    require(r.has_cv, ErrorCode::contract,
            "rung summaries carry no control-variate moments");
    require(int(r.phi_sum.size()) == q_all, ErrorCode::contract,
            "feature dimension mismatch");
    ControlledMean cm = controlled_mean(r.n, r.phi_sum, r.phi_outer_sum,
                                        r.phi_ll_sum, r.mean_ll, r.var_ll, q);
    means[i] = cm.mean;
    est.cv_fallback = est.cv_fallback || cm.fallback;
  }
  est.log_evidence = detail::corrected_trapezium(run, means);
  return est;
}

// Stepping stones: log pi(y) = sum_k log mean exp((t_{k+1} - t_k) ll) with
// the draws of rung k, telescoping the ratios of tempered normalisers.
inline EvidenceEstimate stepping_stones(const PowerPosteriorRun& run) {
  detail::check_rungs(run);
  EvidenceEstimate est;
  est.method = "ss";
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < run.rungs.size(); ++k)
    acc += run.rungs[k].ss_lse.log_mean();
  est.log_evidence = acc;
  return est;
}

inline double bayes_factor(const EvidenceEstimate& a,
                           const EvidenceEstimate& b) {
  return std::exp(a.log_evidence - b.log_evidence);
}

// ---------------------------------------------------------------------------

struct ReplicateSummary {
  double mean = 0.0;
  double sd = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> values;
};

// R independent runs of `one`, each with a replicate-derived RNG seed;
// replicates may execute in parallel, values land in index order.
template <class F>
ReplicateSummary replicate_runs(int replicates, std::uint64_t master_seed,
                                F&& one) {
  require(replicates >= 1, ErrorCode::contract, "need at least one replicate");
  ReplicateSummary out;
  out.values.resize(std::size_t(replicates));
  parallel_for(std::size_t(replicates), [&](std::size_t r) {
    out.values[r] = one(derive_seed(master_seed, seeds::kReplicate, r), int(r));
  });
  RunningMoments m;
  for (double v : out.values) m.add(v);
  out.mean = m.mean();
  if (replicates > 1) out.sd = m.sd();
  return out;
}

}  // namespace grfev
