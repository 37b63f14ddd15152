#pragma once

// Machine-readable run reports (JSON, versioned). Reports are deterministic
// functions of (config, data, seed): timings are printed to the console,
// never written here.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "grfev/artifact_io.hpp"
#include "grfev/evidence.hpp"
#include "grfev/mcmc.hpp"
#include "grfev/study.hpp"

namespace grfev {

inline constexpr const char* kEvidenceSchema = "grfev.evidence";
inline constexpr const char* kBfSchema = "grfev.bf";
inline constexpr const char* kStudySchema = "grfev.potts_study";
inline constexpr int kReportVersion = 1;

inline Json estimate_to_json(const EvidenceEstimate& e) {
  Json j;
  j["method"] = e.method;
  j["log_evidence"] = e.log_evidence;
  if (!std::isnan(e.replicate_sd)) j["replicate_sd"] = e.replicate_sd;
  if (!e.replicate_values.empty()) j["replicates"] = e.replicate_values;
  if (!std::isnan(e.acceptance_rate)) j["acceptance_rate"] = e.acceptance_rate;
  if (e.cv_fallback) j["cv_fallback"] = true;
  if (!e.settings_desc.empty()) j["settings"] = e.settings_desc;
  return j;
}

inline EvidenceEstimate estimate_from_json(const Json& j) {
  EvidenceEstimate e;
  e.method = j.at("method").get<std::string>();
  e.log_evidence = j.at("log_evidence").get<double>();
  e.replicate_sd = j.value("replicate_sd",
                           std::numeric_limits<double>::quiet_NaN());
  if (j.contains("replicates"))
    e.replicate_values = j.at("replicates").get<std::vector<double>>();
  e.acceptance_rate = j.value("acceptance_rate",
                              std::numeric_limits<double>::quiet_NaN());
  e.cv_fallback = j.value("cv_fallback", false);
  e.settings_desc = j.value("settings", "");
  return e;
}

struct EvidenceReport {
  std::string model_desc;
  std::string data_hash;
  bool adjusted = true;
  std::uint64_t seed = 0;
  std::string prior_desc;
  std::vector<EvidenceEstimate> estimates;
};

inline Json report_to_json(const EvidenceReport& r) {
  Json j;
  j["schema"] = kEvidenceSchema;
  j["version"] = kReportVersion;
  j["model"] = r.model_desc;
  j["data_hash"] = r.data_hash;
  j["adjusted"] = r.adjusted;
  j["seed"] = r.seed;
  j["prior"] = r.prior_desc;
  Json es = Json::array();
  for (const auto& e : r.estimates) es.push_back(estimate_to_json(e));
  j["estimates"] = std::move(es);
  return j;
}

inline EvidenceReport report_from_json(const Json& j) {
  require(j.value("schema", "") == kEvidenceSchema, ErrorCode::data,
          "not an evidence report");
  require(j.value("version", 0) == kReportVersion, ErrorCode::data,
          "unsupported report version");
  EvidenceReport r;
  r.model_desc = j.at("model").get<std::string>();
  r.data_hash = j.at("data_hash").get<std::string>();
  r.adjusted = j.at("adjusted").get<bool>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.prior_desc = j.value("prior", "");
  for (const auto& e : j.at("estimates")) r.estimates.push_back(estimate_from_json(e));
  return r;
}

inline Json study_to_json(const PottsStudyReport& r) {
  Json j;
  j["schema"] = kStudySchema;
  j["version"] = kReportVersion;
  Json cfg;
  cfg["height"] = r.config.height;
  cfg["width"] = r.config.width;
  cfg["states"] = r.config.states;
  cfg["theta_true"] = r.config.theta_true;
  cfg["datasets"] = r.config.datasets;
  cfg["grid"] = {{"lo", r.config.grid_lo},
                 {"hi", r.config.grid_hi},
                 {"points", r.config.grid_points}};
  cfg["prior"] = {{"mean", r.config.prior_mean}, {"var", r.config.prior_var}};
  cfg["seed"] = r.config.seed;
  j["config"] = std::move(cfg);
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json x;
    x["dataset"] = row.dataset;
    x["stat"] = row.stat;
    x["log_ev_true"] = row.log_ev_true;
    x["log_ev_pl"] = row.log_ev_pl;
    x["log_ev_adjusted"] = row.log_ev_adjusted;
    x["theta_mple"] = row.theta_mple;
    x["theta_mle"] = row.theta_mle;
    x["w"] = row.w;
    x["log_c"] = row.log_c;
    x["log_z_mle_path"] = row.log_z_mle_path;
    x["log_z_mle_exact"] = row.log_z_mle_exact;
    rows.push_back(std::move(x));
  }
  j["rows"] = std::move(rows);
  return j;
}

inline void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  require(bool(out), ErrorCode::data, "cannot write report: " + path);
  out << j.dump(1) << '\n';
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(bool(in), ErrorCode::data, "cannot open file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail(ErrorCode::data, path + ": " + e.what());
  }
  return j;
}

}  // namespace grfev
