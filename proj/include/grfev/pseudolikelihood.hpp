#pragma once

// Pseudolikelihood surface: the product of full conditionals of every
// variable given the rest, reduced to per-variable tables of state
// statistics. For a network, variable = dyad with rows {0, delta_s}; for a
// lattice, variable = site with one row per state holding the count of
// neighbors in that state. Evaluation, gradient, and Hessian all follow the
// multinomial-logistic form of those tables and are pure given the cache.

#include <string>
#include <vector>

#include "grfev/common.hpp"
#include "grfev/ergm.hpp"
#include "grfev/potts.hpp"

namespace grfev {

class PlSurface {
 public:
  PlSurface() = default;

  // table: (n_vars * n_states) x d, variable-major blocks of state rows.
  // observed[v] is the index of the realised state of variable v.
  PlSurface(Mat table, std::vector<int> observed, int n_states)
      : table_(std::move(table)), obs_(std::move(observed)),
        n_states_(n_states) {
    require(n_states_ >= 2, ErrorCode::contract, "need at least two states");
    require(table_.rows() % n_states_ == 0, ErrorCode::contract,
            "table rows must be a multiple of the state count");
    require(Eigen::Index(obs_.size()) * n_states_ == table_.rows(),
            ErrorCode::contract, "observed states do not match the table");
    obs_rows_sum_ = Vec::Zero(table_.cols());
    for (std::size_t v = 0; v < obs_.size(); ++v)
      obs_rows_sum_ += table_.row(Eigen::Index(v) * n_states_ + obs_[v]);
  }

  int dim() const { return int(table_.cols()); }
  int n_vars() const { return int(obs_.size()); }
  int n_states() const { return n_states_; }
  const Mat& table() const { return table_; }
  const std::vector<int>& observed() const { return obs_; }

  double log_pl(const Vec& theta) const {
    double v = 0.0;
    evaluate(theta, &v, nullptr, nullptr);
    return v;
  }

  Vec grad_log_pl(const Vec& theta) const {
    Vec g(dim());
    evaluate(theta, nullptr, &g, nullptr);
    return g;
  }

  Mat hess_log_pl(const Vec& theta) const {
    Mat h(dim(), dim());
    evaluate(theta, nullptr, nullptr, &h);
    return h;
  }

  // Any combination of value, gradient, Hessian in one pass.
  void evaluate(const Vec& theta, double* value, Vec* grad, Mat* hess) const {
    check_dim(theta, dim(), "theta");
    const int S = n_states_;
    const int V = n_vars();
    const int d = dim();
    Vec x = table_ * theta;  // stacked per-state linear predictors
    double logpl = 0.0;
    Vec p(x.size());
    for (int v = 0; v < V; ++v) {
      const Eigen::Index base = Eigen::Index(v) * S;
      double m = x[base];
      for (int s = 1; s < S; ++s) m = std::max(m, x[base + s]);
      double z = 0.0;
      for (int s = 0; s < S; ++s) {
        double e = std::exp(x[base + s] - m);
        p[base + s] = e;
        z += e;
      }
      logpl += x[base + obs_[std::size_t(v)]] - m - std::log(z);
      if (grad || hess)
        for (int s = 0; s < S; ++s) p[base + s] /= z;
    }
    if (value) *value = logpl;
    if (grad) *grad = obs_rows_sum_ - table_.transpose() * p;
    if (hess) {
      // -(sum_vs p A A' - sum_v mu mu'), mu_v the conditional mean row
      Mat scaled = table_;
      for (Eigen::Index r = 0; r < scaled.rows(); ++r)
        scaled.row(r) *= std::sqrt(p[r]);
      Mat h = scaled.transpose() * scaled;
      Vec mu(d);
      for (int v = 0; v < V; ++v) {
        const Eigen::Index base = Eigen::Index(v) * S;
        mu.setZero();
        for (int s = 0; s < S; ++s) mu += p[base + s] * table_.row(base + s);
        h.noalias() -= mu * mu.transpose();
      }
      *hess = -h;
    }
  }

  static PlSurface from_ergm(const ErgmModel& model) {
    const NetworkGraph& g = model.graph();
    const int d = model.dim();
    const int n = g.n();
    const int V = g.dyad_count();
    Mat table = Mat::Zero(Eigen::Index(V) * 2, d);
    std::vector<int> obs(static_cast<std::size_t>(V));
    Vec delta(d);
    int v = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j, ++v) {
        model.change_stats(g, i, j, delta);
        table.row(Eigen::Index(v) * 2 + 1) = delta.transpose();
        obs[std::size_t(v)] = g.has_edge(i, j) ? 1 : 0;
      }
    }
    return PlSurface(std::move(table), std::move(obs), 2);
  }

  static PlSurface from_potts(const Lattice& l) {
    const int S = l.states;
    const int N = l.size();
    Mat table(Eigen::Index(N) * S, 1);
    std::vector<int> obs(static_cast<std::size_t>(N));
    int counts[256];
    for (int site = 0; site < N; ++site) {
      neighbor_state_counts(l, site / l.width, site % l.width, counts);
      for (int s = 0; s < S; ++s)
        table(Eigen::Index(site) * S + s, 0) = double(counts[s]);
      obs[std::size_t(site)] = l.at(site / l.width, site % l.width);
    }
    return PlSurface(std::move(table), std::move(obs), S);
  }

 private:
  Mat table_;
  std::vector<int> obs_;
  int n_states_ = 2;
  Vec obs_rows_sum_;
};

inline PlSurface pl_surface(const ErgmModel& m) {
  return PlSurface::from_ergm(m);
}
inline PlSurface pl_surface(const PottsModel& m) {
  return PlSurface::from_potts(m.data());
}

// ---------------------------------------------------------------------------

struct MpleResult {
  Vec theta;
  int iterations = 0;
  double grad_norm = 0.0;
};

// Newton-Raphson on the concave log pseudolikelihood, with step halving
// until the objective increases. Divergence of the iterate signals data
// separation (a change statistic perfectly predicting ties).
inline MpleResult mple(const PlSurface& surface, const Vec& init = Vec(),
                       double tol = 1e-8, int max_iter = 50) {
  const int d = surface.dim();
  Vec theta = init.size() == 0 ? Vec::Zero(d) : init;
  check_dim(theta, d, "init");
  double value;
  Vec grad(d);
  Mat hess(d, d);
  for (int it = 1; it <= max_iter; ++it) {
    surface.evaluate(theta, &value, &grad, &hess);
    double gnorm = grad.lpNorm<Eigen::Infinity>();
    if (gnorm < tol) {
      require(theta.lpNorm<Eigen::Infinity>() < 15.0, ErrorCode::convergence,
              "pseudolikelihood maximiser ran to a saturated optimum; a "
              "term's change statistic perfectly separates ties from "
              "non-ties");
      return {theta, it - 1, gnorm};
    }
    Vec step = (-hess).ldlt().solve(grad);
    // accept up to slack: near the optimum the true increase underflows
    const double slack = 1e-10 * (1.0 + std::abs(value));
    double scale = 1.0;
    Vec cand;
    double cand_value = kNegInf;
    bool accepted = false;
    for (int h = 0; h < 30; ++h) {
      cand = theta + scale * step;
      cand_value = surface.log_pl(cand);
      if (std::isfinite(cand_value) && cand_value > value - slack) {
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted)
      fail(ErrorCode::convergence,
           "pseudolikelihood maximisation stalled at gradient norm " +
               std::to_string(gnorm));
    theta = cand;
    if (theta.lpNorm<Eigen::Infinity>() > 30.0)
      fail(ErrorCode::convergence,
           "pseudolikelihood maximiser diverged (|theta| > 30); a term's "
           "change statistic perfectly separates ties from non-ties");
  }
  surface.evaluate(theta, &value, &grad, nullptr);
  fail(ErrorCode::convergence,
       "pseudolikelihood maximisation did not converge in " +
           std::to_string(max_iter) + " iterations; last gradient norm " +
           std::to_string(grad.lpNorm<Eigen::Infinity>()) + ", last iterate [" +
           [&] {
             std::string s;
             for (int i = 0; i < d; ++i)
               s += (i ? ", " : "") + std::to_string(theta[i]);
             return s;
           }() + "]");
}

}  // namespace grfev
