#pragma once

// One-dimensional trapezoidal integration carried out entirely in log
// space: the integrand is exp(log_f) and each trapezoid contributes
// log((dx/2) (e^{f_i} + e^{f_{i-1}})) to a running log-sum-exp.

#include <concepts>
#include <vector>

#include "grfev/common.hpp"

namespace grfev {

struct QuadratureGrid {
  std::vector<double> points;  // strictly increasing

  static QuadratureGrid uniform(double lo, double hi, int m) {
    require(m >= 2, ErrorCode::contract, "grid needs at least two points");
    require(hi > lo, ErrorCode::contract, "grid interval is empty");
    QuadratureGrid g;
    g.points.resize(std::size_t(m));
    for (int i = 0; i < m; ++i)
      g.points[std::size_t(i)] = lo + (hi - lo) * double(i) / double(m - 1);
    return g;
  }

  void validate() const {
    require(points.size() >= 2, ErrorCode::contract,
            "grid needs at least two points");
    for (std::size_t i = 1; i < points.size(); ++i)
      require(points[i] > points[i - 1], ErrorCode::contract,
              "grid points must be strictly increasing");
  }
};

// log of the trapezoid sum of exp(log_f) over the grid.
template <class F>
  requires std::invocable<F&, double>
double log_trapezoid(const QuadratureGrid& grid, F&& log_f) {
  grid.validate();
  StreamingLse acc;
  double prev = log_f(grid.points[0]);
  for (std::size_t i = 1; i < grid.points.size(); ++i) {
    double cur = log_f(grid.points[i]);
    double dx = grid.points[i] - grid.points[i - 1];
    acc.add(std::log(dx / 2.0) + log_sum_exp(prev, cur));
    prev = cur;
  }
  return acc.log_sum();
}

// Same, from precomputed ordinates.
inline double log_trapezoid(const QuadratureGrid& grid,
                            const std::vector<double>& log_f) {
  grid.validate();
  require(log_f.size() == grid.points.size(), ErrorCode::contract,
          "ordinate count does not match the grid");
  std::size_t next = 0;
  return log_trapezoid(grid, [&](double) { return log_f[next++]; });
}

}  // namespace grfev
