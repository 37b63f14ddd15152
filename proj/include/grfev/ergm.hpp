#pragma once

// Undirected exponential random graph models: network representation,
// sufficient statistics (edges, gwesp, gwd, nodematch), incremental change
// statistics, the tie/no-tie Metropolis-Hastings sampler, and exhaustive
// graph enumeration for small n.

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "grfev/common.hpp"
#include "grfev/model.hpp"
#include "grfev/rng.hpp"

namespace grfev {

class NetworkGraph {
 public:
  NetworkGraph() = default;
  explicit NetworkGraph(int n) { reset(n); }

  void reset(int n) {
    require(n >= 1, ErrorCode::contract, "graph needs at least one node");
    n_ = n;
    adj_.assign(std::size_t(n) * n, 0);
    nbrs_.assign(std::size_t(n), {});
    edges_.clear();
    edge_pos_.assign(std::size_t(n) * n, -1);
    covariates_.clear();
  }

  int n() const { return n_; }
  int edge_count() const { return int(edges_.size()); }
  int dyad_count() const { return n_ * (n_ - 1) / 2; }

  bool has_edge(int i, int j) const { return adj_[idx(i, j)] != 0; }
  int degree(int i) const { return int(nbrs_[std::size_t(i)].size()); }
  const std::vector<int>& neighbors(int i) const {
    return nbrs_[std::size_t(i)];
  }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

  void add_edge(int i, int j) {
    check_pair(i, j);
    if (has_edge(i, j)) return;
    adj_[idx(i, j)] = adj_[idx(j, i)] = 1;
    nbrs_[std::size_t(i)].push_back(j);
    nbrs_[std::size_t(j)].push_back(i);
    edge_pos_[idx(std::min(i, j), std::max(i, j))] = int(edges_.size());
    edges_.emplace_back(std::min(i, j), std::max(i, j));
  }

  void remove_edge(int i, int j) {
    check_pair(i, j);
    if (!has_edge(i, j)) return;
    adj_[idx(i, j)] = adj_[idx(j, i)] = 0;
    drop_neighbor(i, j);
    drop_neighbor(j, i);
    int lo = std::min(i, j), hi = std::max(i, j);
    int pos = edge_pos_[idx(lo, hi)];
    int last = int(edges_.size()) - 1;
    if (pos != last) {
      edges_[std::size_t(pos)] = edges_[std::size_t(last)];
      edge_pos_[idx(edges_[std::size_t(pos)].first,
                    edges_[std::size_t(pos)].second)] = pos;
    }
    edges_.pop_back();
    edge_pos_[idx(lo, hi)] = -1;
  }

  void set_edge(int i, int j, bool present) {
    present ? add_edge(i, j) : remove_edge(i, j);
  }

  // |N(i) ∩ N(j)|; the empty diagonal keeps i and j out of the count
  int shared_partners(int i, int j) const {
    const auto& a = nbrs_[std::size_t(i)];
    int c = 0;
    for (int k : a) c += int(adj_[idx(j, k)]);
    return c;
  }

  void set_covariate(const std::string& name, std::vector<std::string> values) {
    require(int(values.size()) == n_, ErrorCode::data,
            "covariate '" + name + "' has " + std::to_string(values.size()) +
                " rows, expected " + std::to_string(n_));
    covariates_[name] = std::move(values);
  }
  bool has_covariate(const std::string& name) const {
    return covariates_.count(name) > 0;
  }
  const std::vector<std::string>& covariate(const std::string& name) const {
    auto it = covariates_.find(name);
    require(it != covariates_.end(), ErrorCode::data,
            "covariate not found: " + name);
    return it->second;
  }
  const std::map<std::string, std::vector<std::string>>& covariates() const {
    return covariates_;
  }

  std::string content_hash() const {
    std::uint64_t h = fnv1a64(&n_, sizeof(n_));
    std::vector<std::pair<int, int>> es = edges_;
    std::sort(es.begin(), es.end());
    for (auto [i, j] : es) {
      h = fnv1a64(&i, sizeof(i), h);
      h = fnv1a64(&j, sizeof(j), h);
    }
    for (const auto& [name, vals] : covariates_) {
      h = fnv1a64(name, h);
      for (const auto& v : vals) h = fnv1a64(v, h);
    }
    return hex64(h);
  }

 private:
  std::size_t idx(int i, int j) const {
    return std::size_t(i) * n_ + std::size_t(j);
  }
  void check_pair(int i, int j) const {
    require(i != j, ErrorCode::contract, "self loops are not permitted");
    require(i >= 0 && j >= 0 && i < n_ && j < n_, ErrorCode::contract,
            "node index out of range");
  }
  void drop_neighbor(int i, int j) {
    auto& v = nbrs_[std::size_t(i)];
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (v[k] == j) {
        v[k] = v.back();
        v.pop_back();
        return;
      }
    }
  }

  int n_ = 0;
  std::vector<std::uint8_t> adj_;
  std::vector<std::vector<int>> nbrs_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<int> edge_pos_;
  std::map<std::string, std::vector<std::string>> covariates_;
};

// ---------------------------------------------------------------------------

struct ModelTerm {
  enum class Kind { edges, gwesp, gwd, nodematch };
  Kind kind = Kind::edges;
  double decay = 0.0;                    // gwesp / gwd scale, fixed constant
  std::vector<std::string> covariates;   // nodematch

  std::string to_string() const {
    std::ostringstream os;
    switch (kind) {
      case Kind::edges:
        os << "edges";
        break;
      case Kind::gwesp:
        os << "gwesp(" << decay << ")";
        break;
      case Kind::gwd:
        os << "gwd(" << decay << ")";
        break;
      case Kind::nodematch: {
        os << "nodematch(";
        for (std::size_t i = 0; i < covariates.size(); ++i) {
          if (i) os << ",";
          os << covariates[i];
        }
        os << ")";
        break;
      }
    }
    return os.str();
  }
};

struct ModelSpec {
  std::vector<ModelTerm> terms;

  int dim() const { return int(terms.size()); }

  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      if (i) out += " + ";
      out += terms[i].to_string();
    }
    return out;
  }
};

// Grammar: term ('+' term)*, term = edges | gwesp(x) | gwd(x)
// | nodematch(name[,name...]). Errors carry the 1-based column position.
ModelSpec parse_model_spec(const std::string& text);

namespace detail {

class SpecParser {
 public:
  explicit SpecParser(const std::string& s) : s_(s) {}

  ModelSpec parse() {
    ModelSpec spec;
    spec.terms.push_back(term());
    skip_ws();
    while (pos_ < s_.size()) {
      if (s_[pos_] != '+' && s_[pos_] != ',')
        err("expected '+' between terms");
      ++pos_;
      spec.terms.push_back(term());
      skip_ws();
    }
    return spec;
  }

 private:
  [[noreturn]] void err(const std::string& msg) const {
    fail(ErrorCode::usage, "model spec error at column " +
                               std::to_string(pos_ + 1) + ": " + msg);
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
      ++pos_;
  }
  std::string ident() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) ||
            s_[pos_] == '_' || s_[pos_] == '.'))
      ++pos_;
    if (pos_ == start) err("expected a name");
    return s_.substr(start, pos_ - start);
  }
  double number() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ')' && s_[pos_] != ',') ++pos_;
    std::string tok = s_.substr(start, pos_ - start);
    try {
      std::size_t used = 0;
      double v = std::stod(tok, &used);
      while (used < tok.size() &&
             std::isspace(static_cast<unsigned char>(tok[used])))
        ++used;
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      pos_ = start;
      err("expected a number, got '" + tok + "'");
    }
  }
  void expect(char c) {
    skip_ws();
    if (pos_ >= s_.size() || s_[pos_] != c)
      err(std::string("expected '") + c + "'");
    ++pos_;
  }
  ModelTerm term() {
    std::string name = ident();
    ModelTerm t;
    if (name == "edges") {
      t.kind = ModelTerm::Kind::edges;
    } else if (name == "gwesp" || name == "gwd") {
      t.kind = name == "gwesp" ? ModelTerm::Kind::gwesp : ModelTerm::Kind::gwd;
      expect('(');
      t.decay = number();
      if (!(t.decay > 0))
        err(name + " decay must be positive");
      expect(')');
    } else if (name == "nodematch") {
      t.kind = ModelTerm::Kind::nodematch;
      expect('(');
      t.covariates.push_back(ident());
      skip_ws();
      while (pos_ < s_.size() && s_[pos_] == ',') {
        ++pos_;
        t.covariates.push_back(ident());
        skip_ws();
      }
      expect(')');
    } else {
      err("unknown term '" + name + "'");
    }
    return t;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline ModelSpec parse_model_spec(const std::string& text) {
  return detail::SpecParser(text).parse();
}

// ---------------------------------------------------------------------------

// Binds a graph to a term list. Change statistics are incremental: only the
// neighborhoods of the toggled pair are consulted.
class ErgmModel {
 public:
  using State = NetworkGraph;

  ErgmModel(NetworkGraph graph, ModelSpec spec)
      : graph_(std::move(graph)), spec_(std::move(spec)) {
    require(!spec_.terms.empty(), ErrorCode::contract, "empty model spec");
    for (const auto& t : spec_.terms) {
      if (t.kind != ModelTerm::Kind::nodematch) continue;
      for (const auto& c : t.covariates)
        require(graph_.has_covariate(c), ErrorCode::data,
                "model term needs missing covariate: " + c);
    }
    build_caches();
  }

  int dim() const { return spec_.dim(); }
  const NetworkGraph& graph() const { return graph_; }
  const ModelSpec& spec() const { return spec_; }

  double log_z_zero() const {
    return double(graph_.dyad_count()) * std::log(2.0);
  }

  double state_count() const {
    return std::pow(2.0, double(graph_.dyad_count()));
  }

  Vec obs_stats() const { return stats(graph_); }

  Vec stats(const NetworkGraph& g) const {
    Vec s = Vec::Zero(dim());
    for (int k = 0; k < dim(); ++k) {
      const ModelTerm& t = spec_.terms[std::size_t(k)];
      switch (t.kind) {
        case ModelTerm::Kind::edges:
          s[k] = double(g.edge_count());
          break;
        case ModelTerm::Kind::gwesp: {
          double u = 1.0 - std::exp(-t.decay);
          double acc = 0.0;
          for (auto [i, j] : g.edges()) {
            int sp = g.shared_partners(i, j);
            acc += 1.0 - std::pow(u, sp);
          }
          s[k] = std::exp(t.decay) * acc;
          break;
        }
        case ModelTerm::Kind::gwd: {
          double u = 1.0 - std::exp(-t.decay);
          double acc = 0.0;
          for (int i = 0; i < g.n(); ++i)
            acc += 1.0 - std::pow(u, g.degree(i));
          s[k] = std::exp(t.decay) * acc;
          break;
        }
        case ModelTerm::Kind::nodematch: {
          double acc = 0.0;
          for (auto [i, j] : g.edges()) acc += dyad_match(t, g, i, j);
          s[k] = acc;
          break;
        }
      }
    }
    return s;
  }

  // s(y with ij present) - s(y with ij absent), the rest of g held fixed.
  // g may have the edge in either state; counts that the edge itself would
  // inflate are corrected in place rather than toggling the graph.
  void change_stats(const NetworkGraph& g, int i, int j, Vec& out) const {
    require(i != j, ErrorCode::contract, "change statistic needs i != j");
    const int present = g.has_edge(i, j) ? 1 : 0;
    for (int k = 0; k < dim(); ++k) {
      const ModelTerm& t = spec_.terms[std::size_t(k)];
      switch (t.kind) {
        case ModelTerm::Kind::edges:
          out[k] = 1.0;
          break;
        case ModelTerm::Kind::gwesp: {
          const std::vector<double>& up = upow_[std::size_t(k)];
          double acc = 0.0;
          int cn = 0;
          for (int c : g.neighbors(i)) {
            if (!g.has_edge(j, c)) continue;
            ++cn;
            acc += up[std::size_t(g.shared_partners(i, c) - present)] +
                   up[std::size_t(g.shared_partners(j, c) - present)];
          }
          out[k] = std::exp(t.decay) * (1.0 - up[std::size_t(cn)]) + acc;
          break;
        }
        case ModelTerm::Kind::gwd: {
          const std::vector<double>& up = upow_[std::size_t(k)];
          out[k] = up[std::size_t(g.degree(i) - present)] +
                   up[std::size_t(g.degree(j) - present)];
          break;
        }
        case ModelTerm::Kind::nodematch:
          out[k] = dyad_match(t, g, i, j) ? 1.0 : 0.0;
          break;
      }
    }
  }

  Vec change_stats(const NetworkGraph& g, int i, int j) const {
    Vec out(dim());
    change_stats(g, i, j, out);
    return out;
  }

  // Enumerates all graphs over the node set (covariates preserved),
  // presenting the statistics of each. Feasible only for tiny n.
  template <class F>
  void for_each_state(F&& f) const {
    int n = graph_.n();
    int m = graph_.dyad_count();
    require(m < 63, ErrorCode::budget, "too many dyads to enumerate");
    std::vector<std::pair<int, int>> dyads;
    dyads.reserve(std::size_t(m));
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) dyads.emplace_back(i, j);
    NetworkGraph g(n);
    for (const auto& [name, vals] : graph_.covariates())
      g.set_covariate(name, vals);
    const std::uint64_t total = std::uint64_t(1) << m;
    for (std::uint64_t mask = 0;; ++mask) {
      f(stats(g));
      if (mask + 1 == total) break;
      // binary odometer over dyads
      std::uint64_t change = mask ^ (mask + 1);
      for (int b = 0; b < m; ++b) {
        if (change >> b & 1) {
          auto [i, j] = dyads[std::size_t(b)];
          g.set_edge(i, j, (mask + 1) >> b & 1);
        }
      }
    }
  }

  Mat simulate_stats(const Vec& theta, const SamplerSettings& s, Rng& rng) const;

  std::string describe() const {
    return "ergm n=" + std::to_string(graph_.n()) + ": " + spec_.to_string();
  }

  bool dyad_match(const ModelTerm& t, const NetworkGraph& g, int i, int j) const {
    for (const auto& c : t.covariates) {
      const auto& vals = g.covariate(c);
      if (vals[std::size_t(i)] != vals[std::size_t(j)]) return false;
    }
    return true;
  }

 private:
  void build_caches() {
    // u^k tables, k up to n; the change-statistic formulas are
    //   gwesp: e^phi (1 - u^cn) + sum over common neighbors c of
    //          u^sp(i,c) + u^sp(j,c), with u = 1 - e^-phi and sp taken
    //          in the graph without the toggled edge
    //   gwd:   u^deg(i) + u^deg(j), degrees without the toggled edge
    upow_.resize(std::size_t(dim()));
    for (int k = 0; k < dim(); ++k) {
      const ModelTerm& t = spec_.terms[std::size_t(k)];
      if (t.kind != ModelTerm::Kind::gwesp && t.kind != ModelTerm::Kind::gwd)
        continue;
      double u = 1.0 - std::exp(-t.decay);
      auto& up = upow_[std::size_t(k)];
      up.resize(std::size_t(graph_.n()) + 2);
      up[0] = 1.0;
      for (std::size_t p = 1; p < up.size(); ++p) up[p] = up[p - 1] * u;
    }
  }

  NetworkGraph graph_;
  ModelSpec spec_;
  std::vector<std::vector<double>> upow_;

  friend class TntSampler;
};

// ---------------------------------------------------------------------------

// Tie/no-tie sampler: a fair coin picks between toggling a uniformly chosen
// existing edge and toggling a uniformly chosen non-edge. When the chosen
// side is empty the proposal falls back to the other side, and the
// Metropolis-Hastings ratio carries the exact proposal asymmetry.
class TntSampler {
 public:
  TntSampler(const ErgmModel& model, const Vec& theta,
             double edge_side_prob = 0.5)
      : model_(model), theta_(theta), edge_prob_(edge_side_prob),
        work_(model.graph()), delta_(model.dim()) {
    check_dim(theta_, model.dim(), "theta");
    check_finite(theta_, "theta");
    rebuild_nonedges();
    stats_ = model_.stats(work_);
  }

  const NetworkGraph& graph() const { return work_; }
  const Vec& stats() const { return stats_; }
  long long accepted() const { return accepted_; }
  long long steps() const { return steps_; }

  void reset_to(const NetworkGraph& g) {
    work_ = g;
    rebuild_nonedges();
    stats_ = model_.stats(work_);
  }

  // One proposal; returns true when accepted.
  bool step(Rng& rng) {
    ++steps_;
    const int e = work_.edge_count();
    const int ne = int(nonedges_.size());
    bool pick_edge = rng.uniform() < edge_prob_;
    if (pick_edge && e == 0) pick_edge = false;    // empty graph fallback
    if (!pick_edge && ne == 0) pick_edge = true;   // complete graph fallback
    int i, j;
    bool adding;
    if (pick_edge) {
      auto [a, b] = work_.edges()[rng.uniform_below(std::uint64_t(e))];
      i = a;
      j = b;
      adding = false;
    } else {
      auto [a, b] = nonedges_[rng.uniform_below(std::uint64_t(ne))];
      i = a;
      j = b;
      adding = true;
    }
    model_.change_stats(work_, i, j, delta_);
    double log_target = theta_.dot(delta_) * (adding ? 1.0 : -1.0);
    int e_after = e + (adding ? 1 : -1);
    int ne_after = ne + (adding ? -1 : 1);
    double log_fwd = adding ? log_pick_nonedge(e, ne) : log_pick_edge(e, ne);
    double log_bwd = adding ? log_pick_edge(e_after, ne_after)
                            : log_pick_nonedge(e_after, ne_after);
    double log_alpha = log_target + log_bwd - log_fwd;
    if (log_alpha >= 0.0 || std::log(rng.uniform_pos()) < log_alpha) {
      apply_toggle(i, j, adding);
      ++accepted_;
      return true;
    }
    return false;
  }

  void run(int steps, Rng& rng) {
    for (int k = 0; k < steps; ++k) step(rng);
  }

 private:
  double log_pick_edge(int e, int ne) const {
    // probability of proposing a specific edge toggle from a state with
    // counts (e, ne)
    double p = edge_prob_ / double(e);
    if (ne == 0) p += (1.0 - edge_prob_) / double(e);
    return std::log(p);
  }
  double log_pick_nonedge(int e, int ne) const {
    double p = (1.0 - edge_prob_) / double(ne);
    if (e == 0) p += edge_prob_ / double(ne);
    return std::log(p);
  }

  void apply_toggle(int i, int j, bool adding) {
    int lo = std::min(i, j), hi = std::max(i, j);
    if (adding) {
      work_.add_edge(lo, hi);
      int pos = nonedge_pos_[key(lo, hi)];
      int last = int(nonedges_.size()) - 1;
      if (pos != last) {
        nonedges_[std::size_t(pos)] = nonedges_[std::size_t(last)];
        nonedge_pos_[key(nonedges_[std::size_t(pos)].first,
                         nonedges_[std::size_t(pos)].second)] = pos;
      }
      nonedges_.pop_back();
      nonedge_pos_[key(lo, hi)] = -1;
      stats_ += delta_;
    } else {
      work_.remove_edge(lo, hi);
      nonedge_pos_[key(lo, hi)] = int(nonedges_.size());
      nonedges_.emplace_back(lo, hi);
      stats_ -= delta_;
    }
    if (++toggles_since_refresh_ >= kStatsRefresh) {
      stats_ = model_.stats(work_);
      toggles_since_refresh_ = 0;
    }
  }

  void rebuild_nonedges() {
    int n = work_.n();
    nonedges_.clear();
    nonedge_pos_.assign(std::size_t(n) * n, -1);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (!work_.has_edge(i, j)) {
          nonedge_pos_[key(i, j)] = int(nonedges_.size());
          nonedges_.emplace_back(i, j);
        }
  }

  std::size_t key(int i, int j) const {
    return std::size_t(i) * work_.n() + std::size_t(j);
  }

  static constexpr int kStatsRefresh = 1 << 16;

  const ErgmModel& model_;
  Vec theta_;
  double edge_prob_;
  NetworkGraph work_;
  Vec delta_;
  Vec stats_;
  std::vector<std::pair<int, int>> nonedges_;
  std::vector<int> nonedge_pos_;
  long long accepted_ = 0;
  long long steps_ = 0;
  int toggles_since_refresh_ = 0;
};

// Statistics of K graphs from the tie/no-tie chain, started at the observed
// graph; the graphs themselves are discarded.
inline Mat ErgmModel::simulate_stats(const Vec& theta, const SamplerSettings& s,
                                     Rng& rng) const {
  require(s.draws >= 1, ErrorCode::contract, "need at least one draw");
  TntSampler sampler(*this, theta);
  sampler.run(s.burn_in, rng);
  Mat out(s.draws, dim());
  for (int k = 0; k < s.draws; ++k) {
    sampler.run(s.thin, rng);
    out.row(k) = sampler.stats().transpose();
  }
  return out;
}

}  // namespace grfev
