#pragma once

// Versioned JSON serialisation of adjustment artifacts. The file is
// self-contained: it embeds the pseudolikelihood cache, so evidence
// estimation needs only the artifact. Timings are deliberately left out so
// that a seeded rerun writes byte-identical files.

#include <fstream>
#include <string>

#include <json.hpp>

#include "grfev/calibration.hpp"
#include "grfev/common.hpp"

namespace grfev {

using Json = nlohmann::json;

inline Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vec vec_from_json(const Json& a) {
  require(a.is_array(), ErrorCode::data, "expected a JSON array of numbers");
  Vec v(Eigen::Index(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[Eigen::Index(i)] = a[i].get<double>();
  return v;
}

inline Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat mat_from_json(const Json& a) {
  require(a.is_array() && !a.empty(), ErrorCode::data,
          "expected a JSON array of rows");
  Eigen::Index rows = Eigen::Index(a.size());
  Eigen::Index cols = Eigen::Index(a[0].size());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    require(Eigen::Index(a[std::size_t(r)].size()) == cols, ErrorCode::data,
            "ragged JSON matrix");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = a[std::size_t(r)][std::size_t(c)].get<double>();
  }
  return m;
}

inline constexpr const char* kArtifactSchema = "grfev.artifact";
inline constexpr int kArtifactVersion = 1;

inline Json artifact_to_json(const AdjustmentArtifact& art) {
  Json j;
  j["schema"] = kArtifactSchema;
  j["version"] = kArtifactVersion;
  j["dim"] = art.dim;
  j["theta_mple"] = vec_to_json(art.theta_mple);
  j["theta_mle"] = vec_to_json(art.theta_mle);
  j["w"] = mat_to_json(art.w);
  j["log_c"] = art.log_c;
  j["log_z_at_mle"] = art.log_z_at_mle;
  j["moment_mean"] = vec_to_json(art.moment_mean);
  j["moment_cov"] = mat_to_json(art.moment_cov);
  j["obs_stats"] = vec_to_json(art.obs_stats);
  j["log_z_zero"] = art.log_z_zero;
  j["model"] = art.model_desc;
  j["data_hash"] = art.data_hash;
  j["seed"] = art.seed;
  j["settings"] = art.settings_desc;
  Json surf;
  surf["n_states"] = art.surface.n_states();
  surf["observed"] = art.surface.observed();
  surf["table"] = mat_to_json(art.surface.table());
  j["pl_surface"] = std::move(surf);
  return j;
}

inline AdjustmentArtifact artifact_from_json(const Json& j) {
  require(j.value("schema", "") == kArtifactSchema, ErrorCode::data,
          "not an adjustment artifact file");
  require(j.value("version", 0) == kArtifactVersion, ErrorCode::data,
          "unsupported artifact version " +
              std::to_string(j.value("version", 0)));
  AdjustmentArtifact art;
  art.dim = j.at("dim").get<int>();
  art.theta_mple = vec_from_json(j.at("theta_mple"));
  art.theta_mle = vec_from_json(j.at("theta_mle"));
  art.w = mat_from_json(j.at("w"));
  art.log_c = j.at("log_c").get<double>();
  art.log_z_at_mle = j.at("log_z_at_mle").get<double>();
  art.moment_mean = vec_from_json(j.at("moment_mean"));
  art.moment_cov = mat_from_json(j.at("moment_cov"));
  art.obs_stats = vec_from_json(j.at("obs_stats"));
  art.log_z_zero = j.at("log_z_zero").get<double>();
  art.model_desc = j.at("model").get<std::string>();
  art.data_hash = j.at("data_hash").get<std::string>();
  art.seed = j.at("seed").get<std::uint64_t>();
  art.settings_desc = j.value("settings", "");
  const Json& surf = j.at("pl_surface");
  art.surface = PlSurface(mat_from_json(surf.at("table")),
                          surf.at("observed").get<std::vector<int>>(),
                          surf.at("n_states").get<int>());
  return art;
}

inline void save_artifact(const AdjustmentArtifact& art,
                          const std::string& path) {
  std::ofstream out(path);
  require(bool(out), ErrorCode::data, "cannot write artifact: " + path);
  out << artifact_to_json(art).dump(1) << '\n';
}

inline AdjustmentArtifact load_artifact(const std::string& path) {
  std::ifstream in(path);
  require(bool(in), ErrorCode::data, "cannot open artifact: " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail(ErrorCode::data, path + ": " + e.what());
  }
  return artifact_from_json(j);
}

}  // namespace grfev
