#pragma once

// S-state Potts / Ising lattice model with first-order neighborhood.
// The sufficient statistic is the number of equal-valued neighbor pairs,
// counted once per pair. States are stored 0-based internally; the file
// format uses 1..S.
//
// Exact computations run a column-sweep recursion over the smaller lattice
// dimension: the partition function is a forward pass over column
// configurations, and exact draws come from backward sampling through the
// stored forward messages.

#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "grfev/common.hpp"
#include "grfev/model.hpp"
#include "grfev/rng.hpp"

namespace grfev {

// Column configurations beyond this count refuse to run.
inline constexpr std::uint64_t kDefaultColumnStateBudget = std::uint64_t(1)
                                                           << 16;

struct Lattice {
  int height = 0;  // rows
  int width = 0;   // columns
  int states = 2;
  std::vector<std::uint8_t> cells;  // row-major, values 0..states-1

  Lattice() = default;
  Lattice(int h, int w, int s)
      : height(h), width(w), states(s), cells(std::size_t(h) * w, 0) {
    require(h >= 1 && w >= 1, ErrorCode::contract, "lattice dims must be >= 1");
    require(s >= 2, ErrorCode::contract, "lattice needs at least 2 states");
  }

  int size() const { return height * width; }
  std::uint8_t& at(int r, int c) { return cells[std::size_t(r) * width + c]; }
  std::uint8_t at(int r, int c) const {
    return cells[std::size_t(r) * width + c];
  }

  Lattice transposed() const {
    Lattice t(width, height, states);
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c) t.at(c, r) = at(r, c);
    return t;
  }
};

// Number of equal first-order neighbor pairs, each pair counted once.
inline double potts_stat(const Lattice& l) {
  long long s = 0;
  for (int r = 0; r < l.height; ++r) {
    for (int c = 0; c < l.width; ++c) {
      std::uint8_t v = l.at(r, c);
      if (c + 1 < l.width && l.at(r, c + 1) == v) ++s;
      if (r + 1 < l.height && l.at(r + 1, c) == v) ++s;
    }
  }
  return double(s);
}

// Count of neighbors of (r, c) in each state.
inline void neighbor_state_counts(const Lattice& l, int r, int c, int* counts) {
  for (int s = 0; s < l.states; ++s) counts[s] = 0;
  if (r > 0) ++counts[l.at(r - 1, c)];
  if (r + 1 < l.height) ++counts[l.at(r + 1, c)];
  if (c > 0) ++counts[l.at(r, c - 1)];
  if (c + 1 < l.width) ++counts[l.at(r, c + 1)];
}

// p(y_site = s | rest) for site = r*width + c; sums to one.
inline Vec full_conditional(const Lattice& l, int site, const Vec& theta) {
  check_dim(theta, 1, "theta");
  require(site >= 0 && site < l.size(), ErrorCode::contract,
          "site index out of range");
  int counts[256];
  neighbor_state_counts(l, site / l.width, site % l.width, counts);
  Vec p(l.states);
  double m = kNegInf;
  for (int s = 0; s < l.states; ++s) {
    p[s] = theta[0] * counts[s];
    m = std::max(m, p[s]);
  }
  double z = 0.0;
  for (int s = 0; s < l.states; ++s) {
    p[s] = std::exp(p[s] - m);
    z += p[s];
  }
  p /= z;
  return p;
}

// One systematic full-conditional update of every site.
inline void gibbs_sweep(Lattice& l, const Vec& theta, Rng& rng) {
  check_dim(theta, 1, "theta");
  int counts[256];
  double w[256];
  const double th = theta[0];
  for (int r = 0; r < l.height; ++r) {
    for (int c = 0; c < l.width; ++c) {
      neighbor_state_counts(l, r, c, counts);
      double total = 0.0;
      for (int s = 0; s < l.states; ++s) {
        w[s] = std::exp(th * counts[s]);
        total += w[s];
      }
      double u = rng.uniform() * total;
      int s = 0;
      while (s + 1 < l.states && u >= w[s]) {
        u -= w[s];
        ++s;
      }
      l.at(r, c) = std::uint8_t(s);
    }
  }
}

// Column-sweep exact recursion. Construction precomputes the theta-free
// structure (per-column vertical pair counts); log_partition and sampling
// are then evaluated per theta.
class PottsTransfer {
 public:
  PottsTransfer(int height, int width, int states,
                std::uint64_t column_budget = kDefaultColumnStateBudget)
      : states_(states) {
    require(height >= 1 && width >= 1 && states >= 2, ErrorCode::contract,
            "invalid lattice shape");
    transposed_ = height > width;
    rows_ = transposed_ ? width : height;
    cols_ = transposed_ ? height : width;
    double need = std::pow(double(states), rows_);
    require(need <= double(column_budget), ErrorCode::budget,
            "column recursion needs " + std::to_string(need) +
                " boundary configurations, above the budget of " +
                std::to_string(column_budget));
    m_ = 1;
    for (int r = 0; r < rows_; ++r) m_ *= std::uint64_t(states);
    vcount_.resize(m_);
    std::vector<int> digits(std::size_t(rows_), 0);
    int vc = rows_ - 1;  // all-zero column: every vertical pair equal
    for (std::uint64_t x = 0;; ++x) {
      vcount_[x] = std::uint8_t(vc);
      if (x + 1 == m_) break;
      // odometer increment with incremental vertical-pair update
      int pos = 0;
      while (true) {
        int old = digits[std::size_t(pos)];
        int nw = old + 1 == states ? 0 : old + 1;
        if (pos > 0) vc -= (digits[std::size_t(pos - 1)] == old);
        if (pos + 1 < rows_) vc -= (digits[std::size_t(pos + 1)] == old);
        digits[std::size_t(pos)] = nw;
        if (pos > 0) vc += (digits[std::size_t(pos - 1)] == nw);
        if (pos + 1 < rows_) vc += (digits[std::size_t(pos + 1)] == nw);
        if (nw != 0) break;
        ++pos;
      }
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int states() const { return states_; }

  double log_partition(double theta) const {
    std::vector<double> cur;
    return forward(theta, cur, nullptr);
  }

  // Forward messages for one theta; draw() yields iid exact samples.
  class Sampler {
   public:
    double log_partition() const { return log_z_; }

    Lattice draw(Rng& rng) const {
      std::vector<std::uint64_t> col_state(
          static_cast<std::size_t>(owner_->cols_));
      draw_columns(col_state, rng);
      const int rows = owner_->rows_;
      const int cols = owner_->cols_;
      Lattice out(rows, cols, owner_->states_);
      for (int c = 0; c < cols; ++c) {
        std::uint64_t x = col_state[std::size_t(c)];
        for (int r = 0; r < rows; ++r) {
          out.at(r, c) = std::uint8_t(x % std::uint64_t(owner_->states_));
          x /= std::uint64_t(owner_->states_);
        }
      }
      return owner_->transposed_ ? out.transposed() : out;
    }

    // statistic of a fresh draw, assembled from the column states
    double draw_stat(Rng& rng) const {
      std::vector<std::uint64_t> col_state(
          static_cast<std::size_t>(owner_->cols_));
      draw_columns(col_state, rng);
      long long stat = 0;
      for (std::size_t c = 0; c < col_state.size(); ++c) {
        stat += owner_->vcount_[col_state[c]];
        if (c + 1 < col_state.size())
          stat += owner_->match_count(col_state[c], col_state[c + 1]);
      }
      return double(stat);
    }

   private:
    friend class PottsTransfer;
    const PottsTransfer* owner_ = nullptr;
    double log_z_ = 0.0;
    // scaled linear messages per column; float is ample for sampling and
    // halves the memory traffic of the backward passes
    std::vector<std::vector<float>> msgs_;
    std::vector<double> hpow_;  // exp(theta * match), normalised

    void draw_columns(std::vector<std::uint64_t>& col_state, Rng& rng) const {
      const int cols = owner_->cols_;
      col_state[std::size_t(cols - 1)] =
          sample_plain(msgs_[std::size_t(cols - 1)], rng);
      for (int c = cols - 2; c >= 0; --c)
        col_state[std::size_t(c)] = sample_matched(
            msgs_[std::size_t(c)], col_state[std::size_t(c + 1)], rng);
    }

    std::uint64_t sample_plain(const std::vector<float>& msg, Rng& rng) const {
      double total = 0.0;
      for (float v : msg) total += v;
      double u = rng.uniform() * total;
      for (std::uint64_t x = 0; x < msg.size(); ++x) {
        if (u < msg[x]) return x;
        u -= msg[x];
      }
      return msg.size() - 1;  // rounding spill
    }

    // weight(x) = msg[x] * exp(theta * match(x, xn)). One unrolled pass
    // accumulates block sums; the draw then scans a single block.
    std::uint64_t sample_matched(const std::vector<float>& msg,
                                 std::uint64_t xn, Rng& rng) const {
      const std::uint64_t m = msg.size();
      const float* mg = msg.data();
      const int rows = owner_->rows_;
      // mismatch-indexed table: tab[pc] = exp(theta * (rows - pc)), scaled
      double tab[65];
      for (int pc = 0; pc <= rows; ++pc)
        tab[pc] = hpow_[std::size_t(rows - pc)];
      const bool binary = owner_->states_ == 2;
      auto weight = [&](std::uint64_t x) {
        int pc = binary ? __builtin_popcountll(x ^ xn)
                        : rows - owner_->match_count(x, xn);
        return mg[x] * tab[pc];
      };
      constexpr std::uint64_t kBlock = 4096;
      const std::uint64_t nblocks = (m + kBlock - 1) / kBlock;
      double block_sum[1 << 10];
      double total = 0.0;
      for (std::uint64_t b = 0; b < nblocks; ++b) {
        const std::uint64_t lo = b * kBlock;
        const std::uint64_t hi = std::min(m, lo + kBlock);
        double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
        std::uint64_t x = lo;
        if (binary) {
          for (; x + 4 <= hi; x += 4) {
            a0 += mg[x] * tab[__builtin_popcountll(x ^ xn)];
            a1 += mg[x + 1] * tab[__builtin_popcountll((x + 1) ^ xn)];
            a2 += mg[x + 2] * tab[__builtin_popcountll((x + 2) ^ xn)];
            a3 += mg[x + 3] * tab[__builtin_popcountll((x + 3) ^ xn)];
          }
        } else {
          for (; x + 4 <= hi; x += 4) {
            a0 += weight(x);
            a1 += weight(x + 1);
            a2 += weight(x + 2);
            a3 += weight(x + 3);
          }
        }
        for (; x < hi; ++x) a0 += weight(x);
        block_sum[b] = (a0 + a1) + (a2 + a3);
        total += block_sum[b];
      }
      double u = rng.uniform() * total;
      for (std::uint64_t b = 0; b < nblocks; ++b) {
        if (u >= block_sum[b] && b + 1 < nblocks) {
          u -= block_sum[b];
          continue;
        }
        const std::uint64_t lo = b * kBlock;
        const std::uint64_t hi = std::min(m, lo + kBlock);
        for (std::uint64_t x = lo; x < hi; ++x) {
          double w = weight(x);
          if (u < w) return x;
          u -= w;
        }
        return hi - 1;  // rounding spill stays inside the block
      }
      return m - 1;
    }
  };

  Sampler make_sampler(double theta) const {
    Sampler s;
    s.owner_ = this;
    s.msgs_.resize(std::size_t(cols_));
    std::vector<double> cur;
    s.log_z_ = forward(theta, cur, &s.msgs_);
    double shift = theta > 0 ? theta * rows_ : 0.0;
    s.hpow_.resize(std::size_t(rows_) + 1);
    for (int k = 0; k <= rows_; ++k)
      s.hpow_[std::size_t(k)] = std::exp(theta * k - shift);
    return s;
  }

 private:
  static void store_message(std::vector<std::vector<float>>* keep,
                            std::size_t col, const std::vector<double>& cur) {
    if (!keep) return;
    auto& dst = (*keep)[col];
    dst.resize(cur.size());
    for (std::size_t i = 0; i < cur.size(); ++i) dst[i] = float(cur[i]);
  }

 public:

 private:
  int rows_, cols_, states_;
  bool transposed_ = false;
  std::uint64_t m_;                   // states^rows
  std::vector<std::uint8_t> vcount_;  // vertical equal pairs per column state

  int match_count(std::uint64_t a, std::uint64_t b) const {
    if (states_ == 2) return rows_ - __builtin_popcountll(a ^ b);
    int match = 0;
    for (int r = 0; r < rows_; ++r) {
      match += (a % std::uint64_t(states_)) == (b % std::uint64_t(states_));
      a /= std::uint64_t(states_);
      b /= std::uint64_t(states_);
    }
    return match;
  }

  // Returns exact log z. When keep != nullptr, stores the scaled forward
  // message of every column for backward sampling.
  double forward(double theta, std::vector<double>& cur,
                 std::vector<std::vector<float>>* keep) const {
    const double eth = std::exp(theta);
    std::vector<double> pot(static_cast<std::size_t>(rows_));  // exp(theta * vcount), scaled
    {
      double mx = theta > 0 ? theta * (rows_ - 1) : 0.0;
      pot.resize(std::size_t(rows_));
      for (int k = 0; k < rows_; ++k)
        pot[std::size_t(k)] = std::exp(theta * k - mx);
    }
    cur.assign(m_, 0.0);
    for (std::uint64_t x = 0; x < m_; ++x) cur[x] = pot[vcount_[x]];
    double log_scale = theta > 0 ? theta * (rows_ - 1) : 0.0;
    log_scale += rescale(cur);
    store_message(keep, 0, cur);
    for (int c = 1; c < cols_; ++c) {
      // between-column operator: tensor product over rows of the S x S
      // kernel K[a][b] = e^{theta [a==b]}; K v = sum(v) + (e^theta - 1) v
      std::uint64_t stride = 1;
      for (int r = 0; r < rows_; ++r) {
        const std::uint64_t block = stride * std::uint64_t(states_);
        for (std::uint64_t base = 0; base < m_; base += block) {
          for (std::uint64_t off = 0; off < stride; ++off) {
            double total = 0.0;
            std::uint64_t idx = base + off;
            for (int sdx = 0; sdx < states_; ++sdx)
              total += cur[idx + std::uint64_t(sdx) * stride];
            for (int sdx = 0; sdx < states_; ++sdx) {
              std::uint64_t i = idx + std::uint64_t(sdx) * stride;
              cur[i] = total + (eth - 1.0) * cur[i];
            }
          }
        }
        stride = block;
      }
      for (std::uint64_t x = 0; x < m_; ++x) cur[x] *= pot[vcount_[x]];
      log_scale += theta > 0 ? theta * (rows_ - 1) : 0.0;
      log_scale += rescale(cur);
      store_message(keep, std::size_t(c), cur);
    }
    double total = 0.0;
    for (double v : cur) total += v;
    return std::log(total) + log_scale;
  }

  static double rescale(std::vector<double>& v) {
    double mx = 0.0;
    for (double x : v) mx = std::max(mx, x);
    require(mx > 0.0 && std::isfinite(mx), ErrorCode::numeric,
            "forward message degenerated");
    for (double& x : v) x /= mx;
    return std::log(mx);
  }
};

inline double exact_log_partition(int height, int width, int states,
                                  const Vec& theta,
                                  std::uint64_t budget = kDefaultColumnStateBudget) {
  check_dim(theta, 1, "theta");
  return PottsTransfer(height, width, states, budget).log_partition(theta[0]);
}

inline Lattice exact_sample(int height, int width, int states, const Vec& theta,
                            Rng& rng,
                            std::uint64_t budget = kDefaultColumnStateBudget) {
  check_dim(theta, 1, "theta");
  PottsTransfer t(height, width, states, budget);
  return t.make_sampler(theta[0]).draw(rng);
}

// ---------------------------------------------------------------------------

class PottsModel {
 public:
  using State = Lattice;

  enum class SamplerKind { automatic, exact, gibbs };

  explicit PottsModel(Lattice observed,
                      std::uint64_t column_budget = kDefaultColumnStateBudget)
      : data_(std::move(observed)), column_budget_(column_budget) {
    int lag = std::min(data_.height, data_.width);
    double need = std::pow(double(data_.states), lag);
    exact_ok_ = need <= double(column_budget_);
  }

  int dim() const { return 1; }
  const Lattice& data() const { return data_; }
  int states() const { return data_.states; }

  Vec stats(const Lattice& l) const {
    Vec s(1);
    s[0] = potts_stat(l);
    return s;
  }
  Vec obs_stats() const { return stats(data_); }

  double log_z_zero() const {
    return double(data_.size()) * std::log(double(data_.states));
  }

  double state_count() const {
    return std::pow(double(data_.states), data_.size());
  }

  bool exact_within_budget() const { return exact_ok_; }

  void set_sampler_kind(SamplerKind k) { sampler_kind_ = k; }

  // Enumerates every configuration, driving an odometer over the cells with
  // an incremental statistic update.
  template <class F>
  void for_each_state(F&& f) const {
    const int n = data_.size();
    const int S = data_.states;
    const int w = data_.width;
    const int h = data_.height;
    std::vector<std::uint8_t> cells(std::size_t(n), 0);
    // neighbor index lists, -1 terminated
    std::vector<std::array<int, 5>> nbr(static_cast<std::size_t>(n));
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        int i = r * w + c, k = 0;
        if (r > 0) nbr[std::size_t(i)][std::size_t(k++)] = i - w;
        if (r + 1 < h) nbr[std::size_t(i)][std::size_t(k++)] = i + w;
        if (c > 0) nbr[std::size_t(i)][std::size_t(k++)] = i - 1;
        if (c + 1 < w) nbr[std::size_t(i)][std::size_t(k++)] = i + 1;
        nbr[std::size_t(i)][std::size_t(k)] = -1;
      }
    }
    long long stat = 2LL * h * w - h - w;  // all-equal start
    Vec s(1);
    for (;;) {
      s[0] = double(stat);
      f(s);
      int pos = 0;
      for (;;) {
        if (pos == n) return;
        int old = cells[std::size_t(pos)];
        int nw = old + 1 == S ? 0 : old + 1;
        for (int k = 0; nbr[std::size_t(pos)][std::size_t(k)] >= 0; ++k) {
          std::uint8_t v = cells[std::size_t(nbr[std::size_t(pos)][std::size_t(k)])];
          stat -= (v == old);
          stat += (v == nw);
        }
        cells[std::size_t(pos)] = std::uint8_t(nw);
        if (nw != 0) break;
        ++pos;
      }
    }
  }

  // K draws of the sufficient statistic. Exact iid sampling when the column
  // budget allows it (burn-in/thin ignored); otherwise Gibbs sweeps with
  // burn_in sweeps up front and thin sweeps between draws.
  Mat simulate_stats(const Vec& theta, const SamplerSettings& s, Rng& rng) const {
    check_dim(theta, 1, "theta");
    Mat out(s.draws, 1);
    bool use_exact = sampler_kind_ == SamplerKind::exact ||
                     (sampler_kind_ == SamplerKind::automatic && exact_ok_);
    if (use_exact) {
      require(exact_ok_, ErrorCode::budget,
              "exact sampler requested beyond the column budget");
      PottsTransfer t(data_.height, data_.width, data_.states, column_budget_);
      auto sampler = t.make_sampler(theta[0]);
      for (int k = 0; k < s.draws; ++k) out(k, 0) = sampler.draw_stat(rng);
    } else {
      Lattice l = data_;
      int burn_sweeps = std::max(1, s.burn_in / std::max(1, l.size()));
      int thin_sweeps = std::max(1, s.thin / 10);
      for (int i = 0; i < burn_sweeps; ++i) gibbs_sweep(l, theta, rng);
      for (int k = 0; k < s.draws; ++k) {
        for (int i = 0; i < thin_sweeps; ++i) gibbs_sweep(l, theta, rng);
        out(k, 0) = potts_stat(l);
      }
    }
    return out;
  }

  std::string describe() const {
    std::ostringstream os;
    os << "potts " << data_.height << "x" << data_.width << " states="
       << data_.states;
    return os.str();
  }

 private:
  Lattice data_;
  std::uint64_t column_budget_;
  bool exact_ok_ = false;
  SamplerKind sampler_kind_ = SamplerKind::automatic;
};

// ---------------------------------------------------------------------------
// File format: one lattice row per line, comma-separated states in 1..S.

inline Lattice load_lattice(const std::string& path, int states = 0) {
  std::ifstream in(path);
  require(bool(in), ErrorCode::data, "cannot open lattice file: " + path);
  std::vector<std::vector<int>> rows;
  std::string line;
  int line_no = 0;
  int max_state = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<int> row;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        row.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        fail(ErrorCode::data, path + ":" + std::to_string(line_no) +
                                  ": not an integer: '" + tok + "'");
      }
      require(row.back() >= 1, ErrorCode::data,
              path + ":" + std::to_string(line_no) + ": states are 1-based");
      max_state = std::max(max_state, row.back());
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorCode::data, path + ": no lattice rows");
  std::size_t w = rows[0].size();
  for (const auto& r : rows)
    require(r.size() == w, ErrorCode::data, path + ": ragged lattice rows");
  int S = states > 0 ? states : std::max(max_state, 2);
  require(max_state <= S, ErrorCode::data,
          path + ": state " + std::to_string(max_state) + " above declared " +
              std::to_string(S));
  Lattice l(int(rows.size()), int(w), S);
  for (int r = 0; r < l.height; ++r)
    for (int c = 0; c < l.width; ++c)
      l.at(r, c) = std::uint8_t(rows[std::size_t(r)][std::size_t(c)] - 1);
  return l;
}

inline void save_lattice(const Lattice& l, const std::string& path) {
  std::ofstream out(path);
  require(bool(out), ErrorCode::data, "cannot write lattice file: " + path);
  for (int r = 0; r < l.height; ++r) {
    for (int c = 0; c < l.width; ++c) {
      if (c) out << ',';
      out << int(l.at(r, c)) + 1;
    }
    out << '\n';
  }
}

inline std::string lattice_hash(const Lattice& l) {
  std::uint64_t h = fnv1a64(&l.height, sizeof(l.height));
  h = fnv1a64(&l.width, sizeof(l.width), h);
  h = fnv1a64(&l.states, sizeof(l.states), h);
  h = fnv1a64(l.cells.data(), l.cells.size(), h);
  return hex64(h);
}

}  // namespace grfev
