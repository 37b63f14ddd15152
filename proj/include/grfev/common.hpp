#pragma once

// Shared numeric primitives: dense linear algebra aliases, error taxonomy,
// log-space accumulation, running moments, and content hashing.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace grfev {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Failure categories; the CLI maps these to process exit codes.
enum class ErrorCode : int {
  usage = 1,        // bad flags, unknown method names
  data = 2,         // malformed input files, mismatched covariates
  contract = 3,     // dimension mismatches, invalid arguments
  numeric = 4,      // singular matrices, underflow
  budget = 5,       // enumeration / recursion size refusals
  convergence = 6,  // optimizers and samplers that failed to settle
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool ok, ErrorCode code, const std::string& msg) {
  if (!ok) fail(code, msg);
}

// log(1 + e^x) without overflow for large |x|.
inline double log1p_exp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double log_sum_exp(const std::vector<double>& xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

// Streaming log-sum-exp; order-dependent only through rounding.
class StreamingLse {
 public:
  void add(double x) {
    ++n_;
    if (x == kNegInf) return;
    if (x <= max_) {
      sum_ += std::exp(x - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }
  // log(sum of exp(x_i))
  double log_sum() const {
    if (sum_ == 0.0) return kNegInf;
    return max_ + std::log(sum_);
  }
  // log(mean of exp(x_i))
  double log_mean() const { return log_sum() - std::log(double(n_)); }
  long long count() const { return n_; }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
  long long n_ = 0;
};

// Welford running mean/variance.
class RunningMoments {
 public:
  void add(double x) {
    ++n_;
    double d = x - mean_;
    mean_ += d / double(n_);
    m2_ += d * (x - mean_);
  }
  long long count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / double(n_ - 1) : 0.0; }
  double sd() const { return std::sqrt(variance()); }

 private:
  long long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline void check_finite(const Vec& v, const std::string& name) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    require(std::isfinite(v[i]), ErrorCode::contract,
            name + " has non-finite entry at index " + std::to_string(i));
}

inline void check_dim(const Vec& v, Eigen::Index d, const std::string& name) {
  require(v.size() == d, ErrorCode::contract,
          name + " has length " + std::to_string(v.size()) + ", expected " +
              std::to_string(d));
}

// FNV-1a over bytes; used to tie reports to their input data.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), seed);
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[std::size_t(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace grfev
