#pragma once

// Calibration of the pseudolikelihood against the intractable likelihood:
// Monte Carlo maximum likelihood, moment estimation of the likelihood
// gradient/Hessian, the curvature transform W, path-sampled estimation of
// log z at the likelihood mode, and assembly of the fully adjusted
// pseudolikelihood
//
//   log f~(y | theta) = log C + log_pl(theta_mple + W (theta - theta_mle))
//
// which matches the likelihood's mode, curvature at the mode, and value at
// the mode.

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "grfev/common.hpp"
#include "grfev/model.hpp"
#include "grfev/parallel.hpp"
#include "grfev/pseudolikelihood.hpp"
#include "grfev/rng.hpp"

namespace grfev {

struct TemperatureLadder {
  std::vector<double> points;  // t_0 = 0 < ... < t_L = 1

  static TemperatureLadder powered(int intervals, double power) {
    require(intervals >= 1, ErrorCode::contract, "ladder needs >= 1 interval");
    require(power > 0.0, ErrorCode::contract, "ladder power must be positive");
    TemperatureLadder l;
    l.points.resize(std::size_t(intervals) + 1);
    for (int i = 0; i <= intervals; ++i)
      l.points[std::size_t(i)] = std::pow(double(i) / intervals, power);
    l.points.front() = 0.0;
    l.points.back() = 1.0;
    return l;
  }

  static TemperatureLadder uniform(int intervals) {
    return powered(intervals, 1.0);
  }

  int intervals() const { return int(points.size()) - 1; }

  void validate() const {
    require(points.size() >= 2, ErrorCode::contract, "ladder needs >= 2 points");
    require(points.front() == 0.0 && points.back() == 1.0, ErrorCode::contract,
            "ladder endpoints must be exactly 0 and 1");
    for (std::size_t i = 1; i < points.size(); ++i)
      require(points[i] > points[i - 1], ErrorCode::contract,
              "ladder must be strictly increasing");
  }
};

// ---------------------------------------------------------------------------

struct McmleSettings {
  SamplerSettings sampler;       // per-iteration simulation effort
  int max_iterations = 20;
  double tol = 1e-4;             // stop when the move is below this
  double ess_fraction = 0.02;    // importance-weight degeneracy floor
  int newton_max = 50;
};

struct McmleResult {
  Vec theta;
  int iterations = 0;
  Mat final_sample;   // statistics drawn at sampled_at
  Vec sampled_at;
};

namespace detail {

struct RatioObjective {
  // Monte Carlo likelihood-ratio objective around theta_ref:
  //   l(u) = u's_obs - log mean_k exp(u'S_k),  u = theta - theta_ref
  const Mat& sample;   // K x d, statistics drawn at theta_ref
  const Vec& s_obs;

  void eval(const Vec& u, double* value, Vec* grad, Mat* hess,
            double* ess) const {
    const Eigen::Index K = sample.rows();
    Vec a = sample * u;
    double m = a.maxCoeff();
    Vec w = (a.array() - m).exp();
    double z = w.sum();
    if (value) *value = u.dot(s_obs) - (m + std::log(z / double(K)));
    w /= z;
    if (ess) *ess = 1.0 / w.squaredNorm();
    if (grad || hess) {
      Vec mean = sample.transpose() * w;
      if (grad) *grad = s_obs - mean;
      if (hess) {
        Mat scaled = sample;
        for (Eigen::Index r = 0; r < K; ++r)
          scaled.row(r) *= std::sqrt(w[r]);
        *hess = -(scaled.transpose() * scaled - mean * mean.transpose());
      }
    }
  }
};

}  // namespace detail

// Monte Carlo maximum likelihood: repeatedly simulate at the current
// iterate and maximise the likelihood-ratio objective, keeping the
// importance weights effective. Newton steps are halved both when the
// objective fails to increase and when they would push the effective sample
// size below ess_fraction * K.
template <class Model>
McmleResult mcmle(const Model& model, const Vec& init,
                  const McmleSettings& cfg, Rng& rng) {
  const int d = model.dim();
  Vec theta = init.size() == 0 ? Vec::Zero(d) : init;
  check_dim(theta, d, "init");
  const Vec s_obs = model.obs_stats();
  const double ess_floor = cfg.ess_fraction * cfg.sampler.draws;
  Mat sample;
  int stuck = 0;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    sample = model.simulate_stats(theta, cfg.sampler, rng);
    detail::RatioObjective obj{sample, s_obs};
    Vec u = Vec::Zero(d);
    double value;
    Vec grad(d);
    Mat hess(d, d);
    bool ess_bound = false;
    for (int nit = 0; nit < cfg.newton_max; ++nit) {
      obj.eval(u, &value, &grad, &hess, nullptr);
      if (grad.lpNorm<Eigen::Infinity>() < 1e-6 * (1.0 + s_obs.norm())) break;
      Vec step = (-hess).ldlt().solve(grad);
      double scale = 1.0;
      bool moved = false;
      for (int h = 0; h < 30; ++h) {
        Vec cand = u + scale * step;
        double cv, ess;
        obj.eval(cand, &cv, nullptr, nullptr, &ess);
        if (std::isfinite(cv) && cv > value && ess >= ess_floor) {
          u = cand;
          moved = true;
          break;
        }
        ess_bound = ess_bound || (std::isfinite(cv) && cv > value);
        scale *= 0.5;
      }
      if (!moved) break;
    }
    double move = u.lpNorm<Eigen::Infinity>();
    theta += u;
    if (move < cfg.tol) {
      if (!ess_bound) return {theta, it, std::move(sample), theta - u};
      // weights pinned the iterate in place: resample and try again
      if (++stuck >= 3)
        fail(ErrorCode::convergence,
             "likelihood maximisation stalled on degenerate importance "
             "weights; increase the per-iteration sample size");
    } else {
      stuck = 0;
    }
    if (it == cfg.max_iterations)  // iteration cap is a normal stop
      return {theta, it, std::move(sample), theta - u};
  }
  fail(ErrorCode::convergence, "unreachable");
}

// ---------------------------------------------------------------------------

struct Moments {
  Vec mean;
  Mat cov;
  int draws = 0;
};

inline Moments moments_from_sample(const Mat& stats, const Vec& log_weights) {
  const Eigen::Index K = stats.rows();
  require(K >= stats.cols() + 1, ErrorCode::contract,
          "need more draws than the statistic dimension");
  Vec w;
  if (log_weights.size() == 0) {
    w = Vec::Constant(K, 1.0 / double(K));
  } else {
    require(log_weights.size() == K, ErrorCode::contract,
            "weight count does not match the sample");
    w = (log_weights.array() - log_weights.maxCoeff()).exp();
    w /= w.sum();
  }
  Vec mean = stats.transpose() * w;
  Mat centered = stats.rowwise() - mean.transpose();
  for (Eigen::Index r = 0; r < K; ++r) centered.row(r) *= std::sqrt(w[r]);
  Mat cov = centered.transpose() * centered;
  cov = ((cov + cov.transpose()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  require(es.eigenvalues().minCoeff() > 1e-12 * (1.0 + es.eigenvalues().maxCoeff()),
          ErrorCode::numeric,
          "sample covariance of the statistics is singular; draw a larger "
          "sample or drop a degenerate term");
  return {std::move(mean), std::move(cov), int(K)};
}

// Sample mean and covariance of s(y) under f(. | theta); these realise the
// likelihood score s(y_obs) - E[s] and Hessian -V[s].
template <class Model>
Moments estimate_moments(const Model& model, const Vec& theta,
                         const SamplerSettings& cfg, Rng& rng) {
  Mat stats = model.simulate_stats(theta, cfg, rng);
  return moments_from_sample(stats, Vec());
}

// ---------------------------------------------------------------------------

// W = M^-1 N from the upper Cholesky factors N'N = -hess_ll and
// M'M = -hess_pl; then W' hess_pl W reproduces hess_ll.
inline Mat curvature_matrix(const Mat& hess_ll, const Mat& hess_pl) {
  const Eigen::Index d = hess_ll.rows();
  require(hess_pl.rows() == d && hess_pl.cols() == d && hess_ll.cols() == d,
          ErrorCode::contract, "curvature inputs must be d x d");
  auto upper_chol = [](const Mat& neg_hess, const char* which) {
    Eigen::SelfAdjointEigenSolver<Mat> es(neg_hess);
    double lo = es.eigenvalues().minCoeff();
    require(lo > 0.0, ErrorCode::numeric,
            std::string(which) +
                " Hessian is not negative definite (eigenvalue " +
                std::to_string(-lo) + ")");
    Eigen::LLT<Mat> llt(neg_hess);
    require(llt.info() == Eigen::Success, ErrorCode::numeric,
            std::string(which) + " Hessian failed to factor");
    return Mat(llt.matrixL().transpose());  // A = U'U, U upper, diag > 0
  };
  Mat n_factor = upper_chol(-hess_ll, "likelihood");
  Mat m_factor = upper_chol(-hess_pl, "pseudolikelihood");
  Mat w = m_factor.triangularView<Eigen::Upper>().solve(n_factor);
  Mat check = w.transpose() * hess_pl * w - hess_ll;
  double rel = check.norm() / std::max(1.0, hess_ll.norm());
  require(rel < 1e-8, ErrorCode::numeric,
          "curvature factorisation check failed: relative error " +
              std::to_string(rel));
  return w;
}

// ---------------------------------------------------------------------------

struct PathSettings {
  TemperatureLadder ladder = TemperatureLadder::uniform(100);
  SamplerSettings sampler;  // per-rung simulation effort
};

// log z(theta) estimated along the path t -> t * theta:
//   log z(theta) = log z(0) + sum_j log mean_k exp{(t_{j+1} - t_j) theta'S_k}
// with S_k drawn at t_j * theta. Rungs are independent; the reduction is
// ordered so the result does not depend on scheduling.
template <class Model>
double estimate_log_partition_path(const Model& model, const Vec& theta,
                                   const PathSettings& cfg,
                                   std::uint64_t master_seed) {
  check_dim(theta, model.dim(), "theta");
  cfg.ladder.validate();
  const int L = cfg.ladder.intervals();
  std::vector<double> terms(static_cast<std::size_t>(L));
  parallel_for(std::size_t(L), [&](std::size_t j) {
    Rng rng = derive_rng(master_seed, seeds::kZPath, j);
    double t = cfg.ladder.points[j];
    double dt = cfg.ladder.points[j + 1] - t;
    Mat stats = model.simulate_stats(t * theta, cfg.sampler, rng);
    StreamingLse acc;
    for (Eigen::Index k = 0; k < stats.rows(); ++k)
      acc.add(dt * theta.dot(stats.row(k)));
    terms[j] = acc.log_mean();
  });
  double log_z = model.log_z_zero();
  for (double t : terms) log_z += t;
  return log_z;
}

// ---------------------------------------------------------------------------

struct AdjustSettings {
  McmleSettings mcmle;
  SamplerSettings moments;     // used when the MC-MLE sample is not reused
  PathSettings zpath;
  bool reuse_mcmle_sample = true;
  double mple_tol = 1e-8;
  int mple_max_iter = 50;
  std::uint64_t seed = 0;
};

struct PhaseTimings {
  double mode_sec = 0.0;       // MPLE + MC-MLE
  double curvature_sec = 0.0;  // moments + W
  double magnitude_sec = 0.0;  // path estimate of log z + C
  double total_sec = 0.0;
};

// Everything defining the fully adjusted pseudolikelihood, plus the
// pseudolikelihood cache itself so the artifact can be evaluated without
// re-reading the data.
struct AdjustmentArtifact {
  int dim = 0;
  Vec theta_mple;
  Vec theta_mle;
  Mat w;                  // upper triangular, positive diagonal
  double log_c = 0.0;
  double log_z_at_mle = 0.0;
  Vec moment_mean;        // E[s] at theta_mle
  Mat moment_cov;         // V[s] at theta_mle
  Vec obs_stats;
  double log_z_zero = 0.0;
  PlSurface surface;
  std::string model_desc;
  std::string data_hash;
  std::uint64_t seed = 0;
  std::string settings_desc;
  PhaseTimings timing;    // informational; not serialised

  Vec map_to_pl(const Vec& theta) const {
    return theta_mple + w * (theta - theta_mle);
  }

  double log_adjusted(const Vec& theta) const {
    return log_c + surface.log_pl(map_to_pl(theta));
  }

  Vec grad_log_adjusted(const Vec& theta) const {
    return w.transpose() * surface.grad_log_pl(map_to_pl(theta));
  }

  double log_unadjusted(const Vec& theta) const {
    return surface.log_pl(theta);
  }
};

namespace detail {

class PhaseClock {
 public:
  double lap() {
    auto now = std::chrono::steady_clock::now();
    double s = std::chrono::duration<double>(now - mark_).count();
    mark_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point mark_ =
      std::chrono::steady_clock::now();
};

template <class F>
auto phase(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("[") + name + "] " + e.what());
  }
}

}  // namespace detail

// The adjustment pipeline: MPLE, MC-MLE, likelihood moments at the MLE,
// curvature transform, path-sampled log z, and the magnitude constant
//   log C = [theta_mle's_obs - log z(theta_mle)] - log_pl(theta_mple).
template <class Model>
AdjustmentArtifact build_adjusted(const Model& model, const PlSurface& surface,
                                  const AdjustSettings& cfg,
                                  const std::string& data_hash) {
  AdjustmentArtifact art;
  art.dim = model.dim();
  art.surface = surface;
  art.obs_stats = model.obs_stats();
  art.log_z_zero = model.log_z_zero();
  art.model_desc = model.describe();
  art.data_hash = data_hash;
  art.seed = cfg.seed;

  detail::PhaseClock clock;
  detail::PhaseClock total;

  // mode
  detail::phase("mode", [&] {
    art.theta_mple = mple(surface, Vec(), cfg.mple_tol, cfg.mple_max_iter).theta;
    Rng rng = derive_rng(cfg.seed, seeds::kMcmle);
    McmleResult fit = mcmle(model, art.theta_mple, cfg.mcmle, rng);
    art.theta_mle = fit.theta;
    if (cfg.reuse_mcmle_sample &&
        fit.final_sample.rows() >= art.dim + 1) {
      // reweight the final MC-MLE draws from sampled_at to theta_mle
      Vec lw = fit.final_sample * (art.theta_mle - fit.sampled_at);
      Moments m = moments_from_sample(fit.final_sample, lw);
      art.moment_mean = m.mean;
      art.moment_cov = m.cov;
    }
    return 0;
  });
  art.timing.mode_sec = clock.lap();

  // curvature
  detail::phase("curvature", [&] {
    if (art.moment_mean.size() == 0) {
      Rng rng = derive_rng(cfg.seed, seeds::kMoments);
      Moments m = estimate_moments(model, art.theta_mle, cfg.moments, rng);
      art.moment_mean = m.mean;
      art.moment_cov = m.cov;
    }
    Mat hess_ll = -art.moment_cov;
    Mat hess_pl = surface.hess_log_pl(art.theta_mple);
    art.w = curvature_matrix(hess_ll, hess_pl);
    return 0;
  });
  art.timing.curvature_sec = clock.lap();

  // magnitude
  detail::phase("magnitude", [&] {
    art.log_z_at_mle =
        estimate_log_partition_path(model, art.theta_mle, cfg.zpath, cfg.seed);
    double log_lik_at_mle = art.theta_mle.dot(art.obs_stats) - art.log_z_at_mle;
    art.log_c = log_lik_at_mle - surface.log_pl(art.theta_mple);
    return 0;
  });
  art.timing.magnitude_sec = clock.lap();
  art.timing.total_sec = total.lap();
  return art;
}

template <class Model>
AdjustmentArtifact build_adjusted(const Model& model, const AdjustSettings& cfg,
                                  const std::string& data_hash = "") {
  return build_adjusted(model, pl_surface(model), cfg, data_hash);
}

}  // namespace grfev
