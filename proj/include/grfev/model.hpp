#pragma once

// Model-agnostic layer for Gibbs random fields. A model type M plugs into
// the generic algorithms by providing:
//
//   using State = ...;
//   int dim() const;                      // statistic dimension d
//   Vec stats(const State&) const;        // sufficient statistics s(y)
//   Vec obs_stats() const;                // s of the bound observed data
//   double log_z_zero() const;            // exact log z(0)
//   double state_count() const;           // |configuration space|
//   template <class F> void for_each_state(F&&) const;  // F(const Vec& s)
//   Mat simulate_stats(const Vec& theta, const SamplerSettings&, Rng&) const;
//
// The un-normalised log density is theta . s(y) for every model here.

#include <cstdint>
#include <sstream>
#include <string>

#include "grfev/common.hpp"
#include "grfev/rng.hpp"

namespace grfev {

// Exhaustive enumeration beyond this many configurations must be requested
// explicitly.
inline constexpr std::uint64_t kDefaultEnumCap = std::uint64_t(1) << 22;

struct SamplerSettings {
  int draws = 1500;
  int burn_in = 5000;
  int thin = 50;
};

template <class Model>
double log_unnorm(const Model& model, const typename Model::State& y,
                  const Vec& theta) {
  check_dim(theta, model.dim(), "theta");
  return theta.dot(model.stats(y));
}

// log z(theta) by exhaustive enumeration with a running log-sum-exp.
template <class Model>
double brute_force_log_partition(const Model& model, const Vec& theta,
                                 std::uint64_t cap = kDefaultEnumCap) {
  check_dim(theta, model.dim(), "theta");
  double count = model.state_count();
  auto fmt_count = [](double c) {
    std::ostringstream os;
    if (c < 1e15)
      os << std::uint64_t(c);
    else
      os << c;
    return os.str();
  };
  require(count <= double(cap), ErrorCode::budget,
          "state space has " + fmt_count(count) +
              " configurations, above the enumeration cap of " +
              std::to_string(cap) + "; pass a larger cap explicitly");
  StreamingLse acc;
  model.for_each_state([&](const Vec& s) { acc.add(theta.dot(s)); });
  return acc.log_sum();
}

}  // namespace grfev
