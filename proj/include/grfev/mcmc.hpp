#pragma once

// Random walk Metropolis over any tractable log density, the proposal
// covariance construction lambda^2 (B0 + C)^-1, and power-posterior chains
// with temperature-dependent proposal scaling.
//
// A target for the samplers here is anything with
//   int dim() const;
//   double log_lik(const Vec&) const;
//   Vec grad_log_lik(const Vec&) const;   // only consulted when collecting
//                                         // control-variate moments

#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "grfev/calibration.hpp"
#include "grfev/common.hpp"
#include "grfev/parallel.hpp"
#include "grfev/rng.hpp"

namespace grfev {

struct GaussianPrior {
  Vec mean;
  Mat cov;
  Mat precision;
  Mat chol_lower;       // cov = L L'
  double log_norm = 0;  // -d/2 log 2pi - 1/2 log |cov|

  static GaussianPrior full(Vec mean, Mat cov) {
    GaussianPrior p;
    p.mean = std::move(mean);
    p.cov = std::move(cov);
    const Eigen::Index d = p.mean.size();
    require(p.cov.rows() == d && p.cov.cols() == d, ErrorCode::contract,
            "prior covariance shape mismatch");
    Eigen::LLT<Mat> llt(p.cov);
    require(llt.info() == Eigen::Success, ErrorCode::numeric,
            "prior covariance is not positive definite");
    p.chol_lower = llt.matrixL();
    p.precision = llt.solve(Mat::Identity(d, d));
    double half_logdet = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
      half_logdet += std::log(p.chol_lower(i, i));
    p.log_norm = -0.5 * double(d) * std::log(2.0 * M_PI) - half_logdet;
    return p;
  }

  static GaussianPrior diagonal(Vec mean, const Vec& variances) {
    Mat cov = variances.asDiagonal();
    return full(std::move(mean), cov);
  }

  static GaussianPrior isotropic(int d, double mean, double variance) {
    return diagonal(Vec::Constant(d, mean), Vec::Constant(d, variance));
  }

  int dim() const { return int(mean.size()); }

  double log_pdf(const Vec& x) const {
    Vec r = x - mean;
    return log_norm - 0.5 * r.dot(precision * r);
  }

  Vec grad_log_pdf(const Vec& x) const { return -(precision * (x - mean)); }

  Vec sample(Rng& rng) const {
    Vec z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return mean + chol_lower * z;
  }
};

// ---------------------------------------------------------------------------

struct ProposalSpec {
  double lambda = 1.0;
  Mat prior_precision;  // B0
  Mat curvature;        // negative Hessian of the target log likelihood
  double alpha = 0.0;   // temperature exponent for tempered scaling
  double tau_p = 0.0;   // proposal precision scale at t = 1
};

// lambda^2 (B0 + C)^-1; B0 regularises the curvature.
inline Mat proposal_covariance(const ProposalSpec& spec) {
  require(spec.lambda > 0.0, ErrorCode::contract, "lambda must be positive");
  const Eigen::Index d = spec.prior_precision.rows();
  Mat sum = spec.prior_precision + spec.curvature;
  Eigen::LLT<Mat> llt(sum);
  require(llt.info() == Eigen::Success, ErrorCode::numeric,
          "B0 + C is not positive definite; cannot form a proposal");
  Mat cov = llt.solve(Mat::Identity(d, d));
  return spec.lambda * spec.lambda * cov;
}

// Fills the tempered-scaling fields:
//   alpha = log(tau / tau_p) / log(t1)
// with tau the smallest diagonal of B0 and tau_p the smallest diagonal of
// the proposal precision at t = 1, so that proposals near zero temperature
// spread like the prior.
inline void configure_tempering(ProposalSpec& spec, const Mat& sigma_lambda,
                                double t1) {
  require(t1 > 0.0, ErrorCode::contract,
          "the first positive ladder rung must be > 0");
  Eigen::LLT<Mat> llt(sigma_lambda);
  require(llt.info() == Eigen::Success, ErrorCode::numeric,
          "proposal covariance is not positive definite");
  Mat prec = llt.solve(Mat::Identity(sigma_lambda.rows(), sigma_lambda.cols()));
  double tau = spec.prior_precision.diagonal().minCoeff();
  double tau_p = prec.diagonal().minCoeff();
  require(tau > 0.0 && tau_p > 0.0, ErrorCode::numeric,
          "precisions must be positive to scale tempered proposals");
  spec.tau_p = tau_p;
  spec.alpha = t1 >= 1.0 ? 0.0 : std::log(tau / tau_p) / std::log(t1);
}

// ---------------------------------------------------------------------------

struct Chain {
  Mat draws;         // T x d
  Vec log_density;   // target value at each draw
  double acceptance_rate = 0.0;
  std::uint64_t seed = 0;
};

// Symmetric Gaussian random walk Metropolis; the chain holds the post
// burn-in draws together with the target value at each one.
template <class LogDensity>
Chain rw_metropolis(LogDensity&& log_target, const Vec& init,
                    const Mat& proposal_cov, int draws, int burn_in, Rng& rng) {
  const Eigen::Index d = init.size();
  require(draws >= 1 && burn_in >= 0, ErrorCode::contract,
          "chain lengths must be positive");
  Eigen::LLT<Mat> llt(proposal_cov);
  require(llt.info() == Eigen::Success, ErrorCode::numeric,
          "proposal covariance is not positive definite");
  Mat chol = llt.matrixL();
  Vec cur = init;
  double cur_lp = log_target(cur);
  require(std::isfinite(cur_lp), ErrorCode::contract,
          "target is not finite at the chain start");
  Chain out;
  out.seed = rng.seed();
  out.draws.resize(draws, d);
  out.log_density.resize(draws);
  long long accepted = 0;
  const long long total = (long long)draws + burn_in;
  Vec z(d), prop(d);
  for (long long s = 0; s < total; ++s) {
    for (Eigen::Index i = 0; i < d; ++i) z[i] = rng.normal();
    prop = cur + chol * z;
    double lp = log_target(prop);
    if (lp >= cur_lp || std::log(rng.uniform_pos()) < lp - cur_lp) {
      cur = prop;
      cur_lp = lp;
      ++accepted;
    }
    if (s >= burn_in) {
      out.draws.row(s - burn_in) = cur.transpose();
      out.log_density[s - burn_in] = cur_lp;
    }
  }
  out.acceptance_rate = double(accepted) / double(total);
  return out;
}

inline void save_chain_csv(const Chain& chain, const std::string& path) {
  std::ofstream out(path);
  require(bool(out), ErrorCode::data, "cannot write chain file: " + path);
  out << "# acceptance_rate=" << chain.acceptance_rate
      << " seed=" << chain.seed << '\n';
  for (Eigen::Index c = 0; c < chain.draws.cols(); ++c) out << "theta" << c + 1 << ',';
  out << "log_density\n";
  out.precision(17);
  for (Eigen::Index r = 0; r < chain.draws.rows(); ++r) {
    for (Eigen::Index c = 0; c < chain.draws.cols(); ++c)
      out << chain.draws(r, c) << ',';
    out << chain.log_density[r] << '\n';
  }
}

// Multiplicative search for lambda hitting an acceptance window; off by
// default in the pipeline, available as an explicit tuning step.
template <class LogDensity>
double tune_lambda(LogDensity&& log_target, const Vec& init,
                   const ProposalSpec& spec, Rng& rng, double target_rate = 0.25,
                   int pilot_steps = 2000, int rounds = 12) {
  double lambda = spec.lambda;
  for (int r = 0; r < rounds; ++r) {
    ProposalSpec s = spec;
    s.lambda = lambda;
    Chain pilot = rw_metropolis(log_target, init, proposal_covariance(s),
                                pilot_steps, pilot_steps / 4, rng);
    double acc = pilot.acceptance_rate;
    if (acc > target_rate - 0.05 && acc < target_rate + 0.05) break;
    double ratio = (acc + 0.05) / (target_rate + 0.05);
    ratio = std::clamp(ratio, 0.33, 3.0);
    lambda *= ratio;
  }
  return lambda;
}

// ---------------------------------------------------------------------------

// Per-rung sufficient statistics for the evidence estimators: raw moments
// of the log likelihood, a log-sum-exp accumulator of (t_{i+1} - t_i) * ll
// for stepping stones, and cross moments of the score features used by the
// zero-variance control variates.
struct RungSummary {
  double t = 0.0;
  double delta_t = 0.0;  // to the next rung; 0 for the last
  long long n = 0;
  double mean_ll = 0.0;
  double var_ll = 0.0;
  StreamingLse ss_lse;
  double acceptance_rate = 0.0;
  // control-variate moments (features phi, response ll)
  Vec phi_sum;
  Mat phi_outer_sum;
  Vec phi_ll_sum;
  bool has_cv = false;
  Mat draws;  // retained only on request
};

struct PowerPosteriorSettings {
  TemperatureLadder ladder = TemperatureLadder::powered(100, 5.0);
  int draws_per_rung = 30000;
  int burn_in = 5000;
  bool collect_cv = true;   // accumulate score features for controlled TI
  bool keep_draws = false;  // retain raw draws per rung (diagnostics)
};

struct PowerPosteriorRun {
  TemperatureLadder ladder;
  std::vector<RungSummary> rungs;
  int draws_per_rung = 0;
  int dim = 0;
};

namespace detail {

// degree-2 polynomial feature block: [u, theta_j u_k + theta_k u_j + 2 delta_jk]
inline int cv_feature_count(int d) { return d + d * (d + 1) / 2; }

inline void cv_features(const Vec& theta, const Vec& score, Vec& out) {
  const int d = int(theta.size());
  for (int i = 0; i < d; ++i) out[i] = score[i];
  int idx = d;
  for (int j = 0; j < d; ++j)
    for (int k = j; k < d; ++k, ++idx)
      out[idx] = theta[j] * score[k] + theta[k] * score[j] + (j == k ? 2.0 : 0.0);
}

}  // namespace detail

// One chain per ladder rung, each targeting t * log_lik + log prior with a
// proposal spread by max(t, t1)^-alpha relative to the t = 1 covariance.
// Rungs are independent given (master seed, rung index) and may run in
// parallel; summaries land in ladder order.
template <class Target>
PowerPosteriorRun run_power_posterior_chains(const Target& target,
                                             const GaussianPrior& prior,
                                             const PowerPosteriorSettings& cfg,
                                             const ProposalSpec& proposal,
                                             const Vec& init,
                                             std::uint64_t master_seed) {
  cfg.ladder.validate();
  require(prior.dim() == target.dim(), ErrorCode::contract,
          "prior and target dimension mismatch");
  const int R = int(cfg.ladder.points.size());
  const double t1 = cfg.ladder.points[1];
  require(t1 > 0.0, ErrorCode::contract,
          "ladder must have a positive second rung");
  Mat sigma = proposal_covariance(proposal);
  ProposalSpec spec = proposal;
  if (spec.tau_p == 0.0) configure_tempering(spec, sigma, t1);
  const int d = target.dim();
  const int q = detail::cv_feature_count(d);

  PowerPosteriorRun run;
  run.ladder = cfg.ladder;
  run.draws_per_rung = cfg.draws_per_rung;
  run.dim = d;
  run.rungs.resize(std::size_t(R));

  parallel_for(std::size_t(R), [&](std::size_t r) {
    const double t = cfg.ladder.points[r];
    const double dt =
        r + 1 < std::size_t(R) ? cfg.ladder.points[r + 1] - t : 0.0;
    Rng rng = derive_rng(master_seed, seeds::kPowerChain, r);
    // tempered proposal: scale by max(t, t1)^-alpha
    double scale = std::pow(std::max(t, t1), -spec.alpha);
    Mat cov_t = sigma * scale;
    Eigen::LLT<Mat> llt(cov_t);
    require(llt.info() == Eigen::Success, ErrorCode::numeric,
            "tempered proposal covariance failed to factor");
    Mat chol = llt.matrixL();

    RungSummary& s = run.rungs[r];
    s.t = t;
    s.delta_t = dt;
    if (cfg.collect_cv) {
      s.phi_sum = Vec::Zero(q);
      s.phi_outer_sum = Mat::Zero(q, q);
      s.phi_ll_sum = Vec::Zero(q);
      s.has_cv = true;
    }
    if (cfg.keep_draws) s.draws.resize(cfg.draws_per_rung, d);
    RunningMoments ll_moments;

    Vec cur = init;
    double cur_ll = target.log_lik(cur);
    double cur_lp = t * cur_ll + prior.log_pdf(cur);
    require(std::isfinite(cur_lp), ErrorCode::contract,
            "power posterior is not finite at the chain start");
    Vec z(d), prop(d), score(d), phi(q);
    long long accepted = 0;
    const long long total = (long long)cfg.draws_per_rung + cfg.burn_in;
    for (long long step = 0; step < total; ++step) {
      for (int i = 0; i < d; ++i) z[i] = rng.normal();
      prop = cur + chol * z;
      double ll = target.log_lik(prop);
      double lp = t * ll + prior.log_pdf(prop);
      if (lp >= cur_lp || std::log(rng.uniform_pos()) < lp - cur_lp) {
        cur = prop;
        cur_ll = ll;
        cur_lp = lp;
        ++accepted;
      }
      if (step < cfg.burn_in) continue;
      ll_moments.add(cur_ll);
      s.ss_lse.add(dt * cur_ll);
      if (cfg.keep_draws) s.draws.row(step - cfg.burn_in) = cur.transpose();
      if (cfg.collect_cv) {
        score = t * target.grad_log_lik(cur) + prior.grad_log_pdf(cur);
        detail::cv_features(cur, score, phi);
        s.phi_sum += phi;
        s.phi_outer_sum.noalias() += phi * phi.transpose();
        s.phi_ll_sum += phi * cur_ll;
      }
    }
    s.n = ll_moments.count();
    s.mean_ll = ll_moments.mean();
    s.var_ll = ll_moments.variance();
    s.acceptance_rate = double(accepted) / double(total);
  });
  return run;
}

// Adapters presenting the adjusted and unadjusted pseudolikelihoods as
// sampler targets.
struct AdjustedTarget {
  const AdjustmentArtifact* art;
  int dim() const { return art->dim; }
  double log_lik(const Vec& th) const { return art->log_adjusted(th); }
  Vec grad_log_lik(const Vec& th) const { return art->grad_log_adjusted(th); }
};

struct UnadjustedTarget {
  const PlSurface* surface;
  int dim() const { return surface->dim(); }
  double log_lik(const Vec& th) const { return surface->log_pl(th); }
  Vec grad_log_lik(const Vec& th) const { return surface->grad_log_pl(th); }
};

}  // namespace grfev
