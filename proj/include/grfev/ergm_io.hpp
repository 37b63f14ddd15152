#pragma once

// Network data ingestion.
//
// Edge list: whitespace-separated "i j" pairs with 1-based node ids, '#'
// comment lines, and an optional "n=<count>" header for isolated nodes.
// Covariates: comma-separated with a header row; first column is the node
// id, remaining columns are categorical labels kept as strings.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "grfev/common.hpp"
#include "grfev/ergm.hpp"

namespace grfev {

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline NetworkGraph load_network(const std::string& edge_path,
                                 std::optional<std::string> covariate_path =
                                     std::nullopt) {
  std::ifstream in(edge_path);
  require(bool(in), ErrorCode::data, "cannot open edge file: " + edge_path);
  std::vector<std::pair<int, int>> pairs;
  int declared_n = 0;
  int max_id = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.rfind("n=", 0) == 0) {
      try {
        declared_n = std::stoi(t.substr(2));
      } catch (const std::exception&) {
        fail(ErrorCode::data, edge_path + ":" + std::to_string(line_no) +
                                  ": bad node count header '" + t + "'");
      }
      require(declared_n >= 1, ErrorCode::data,
              edge_path + ":" + std::to_string(line_no) +
                  ": node count must be positive");
      continue;
    }
    std::istringstream ss(t);
    long i = 0, j = 0;
    if (!(ss >> i >> j))
      fail(ErrorCode::data, edge_path + ":" + std::to_string(line_no) +
                                ": expected 'i j' pair, got '" + t + "'");
    std::string rest;
    if (ss >> rest)
      fail(ErrorCode::data, edge_path + ":" + std::to_string(line_no) +
                                ": trailing tokens after the pair");
    require(i >= 1 && j >= 1, ErrorCode::data,
            edge_path + ":" + std::to_string(line_no) +
                ": node ids are 1-based positive integers");
    require(i != j, ErrorCode::data,
            edge_path + ":" + std::to_string(line_no) +
                ": self loop on node " + std::to_string(i));
    pairs.emplace_back(int(i), int(j));
    max_id = std::max(max_id, int(std::max(i, j)));
  }
  int n = std::max(declared_n, max_id);
  require(n >= 1, ErrorCode::data, edge_path + ": empty network and no n= header");
  NetworkGraph g(n);
  for (auto [i, j] : pairs) g.add_edge(i - 1, j - 1);  // duplicates collapse

  if (covariate_path) {
    std::ifstream cov(*covariate_path);
    require(bool(cov), ErrorCode::data,
            "cannot open covariate file: " + *covariate_path);
    std::string header;
    require(bool(std::getline(cov, header)), ErrorCode::data,
            *covariate_path + ": missing header row");
    std::vector<std::string> names;
    {
      std::stringstream ss(header);
      std::string tok;
      while (std::getline(ss, tok, ',')) names.push_back(detail::trim(tok));
    }
    require(names.size() >= 2, ErrorCode::data,
            *covariate_path + ": header needs an id column plus covariates");
    std::vector<std::vector<std::string>> cols(names.size() - 1,
                                               std::vector<std::string>(
                                                   std::size_t(n)));
    std::vector<bool> seen(std::size_t(n), false);
    int rows = 0;
    int cov_line = 1;
    while (std::getline(cov, line)) {
      ++cov_line;
      std::string t = detail::trim(line);
      if (t.empty()) continue;
      std::vector<std::string> fields;
      std::stringstream ss(t);
      std::string tok;
      while (std::getline(ss, tok, ',')) fields.push_back(detail::trim(tok));
      require(fields.size() == names.size(), ErrorCode::data,
              *covariate_path + ":" + std::to_string(cov_line) + ": expected " +
                  std::to_string(names.size()) + " fields");
      int id = 0;
      try {
        id = std::stoi(fields[0]);
      } catch (const std::exception&) {
        fail(ErrorCode::data, *covariate_path + ":" + std::to_string(cov_line) +
                                  ": bad node id '" + fields[0] + "'");
      }
      require(id >= 1 && id <= n, ErrorCode::data,
              *covariate_path + ":" + std::to_string(cov_line) +
                  ": node id " + std::to_string(id) + " outside 1.." +
                  std::to_string(n));
      require(!seen[std::size_t(id - 1)], ErrorCode::data,
              *covariate_path + ":" + std::to_string(cov_line) +
                  ": duplicate node id " + std::to_string(id));
      seen[std::size_t(id - 1)] = true;
      for (std::size_t c = 1; c < fields.size(); ++c)
        cols[c - 1][std::size_t(id - 1)] = fields[c];
      ++rows;
    }
    require(rows == n, ErrorCode::data,
            *covariate_path + ": has " + std::to_string(rows) +
                " covariate rows, the network has " + std::to_string(n) +
                " nodes");
    for (std::size_t c = 1; c < names.size(); ++c)
      g.set_covariate(names[c], std::move(cols[c - 1]));
  }
  return g;
}

inline void save_network(const NetworkGraph& g, const std::string& path) {
  std::ofstream out(path);
  require(bool(out), ErrorCode::data, "cannot write edge file: " + path);
  out << "n=" << g.n() << '\n';
  auto es = g.edges();
  std::sort(es.begin(), es.end());
  for (auto [i, j] : es) out << i + 1 << ' ' << j + 1 << '\n';
}

}  // namespace grfev
