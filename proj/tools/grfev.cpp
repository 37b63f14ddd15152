// grfev: evidence and Bayes factors for Gibbs random fields through
// adjusted pseudolikelihoods.
//
// Subcommands: adjust, evidence, bf, potts-study, sample-posterior, oracle.
// Every stochastic command requires --seed and is a deterministic function
// of (config, input files, seed). GRFEV_THREADS bounds worker threads.

#include <CLI11.hpp>

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "grfev/artifact_io.hpp"
#include "grfev/calibration.hpp"
#include "grfev/common.hpp"
#include "grfev/ergm.hpp"
#include "grfev/ergm_io.hpp"
#include "grfev/evidence.hpp"
#include "grfev/mcmc.hpp"
#include "grfev/model.hpp"
#include "grfev/potts.hpp"
#include "grfev/pseudolikelihood.hpp"
#include "grfev/quadrature.hpp"
#include "grfev/report.hpp"
#include "grfev/rng.hpp"
#include "grfev/study.hpp"

namespace {

using namespace grfev;

// ---------------------------------------------------------------------------
// config file: a JSON object with one section per subcommand; values play
// the role of defaults and every command-line flag overrides them

Json load_config_section(const std::string& path, const std::string& section) {
  if (path.empty()) return Json::object();
  Json j = read_json_file(path);
  require(j.is_object(), ErrorCode::usage, "config must be a JSON object");
  if (!j.contains(section)) return Json::object();
  require(j[section].is_object(), ErrorCode::usage,
          "config section '" + section + "' must be an object");
  return j[section];
}

template <class T>
void merge(const CLI::App& app, const std::string& flag, const Json& cfg,
           const std::string& key, T& value) {
  if (app.count(flag) > 0) return;  // explicit flag wins
  if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      fail(ErrorCode::usage, "expected a comma-separated number list, got '" +
                                 text + "'");
    }
  }
  require(!out.empty(), ErrorCode::usage, "empty number list");
  return out;
}

Vec broadcast(const std::vector<double>& values, int d, const char* what) {
  if (values.size() == 1) return Vec::Constant(d, values[0]);
  require(int(values.size()) == d, ErrorCode::usage,
          std::string(what) + " needs 1 or " + std::to_string(d) + " values");
  Vec v(d);
  for (int i = 0; i < d; ++i) v[i] = values[std::size_t(i)];
  return v;
}

std::string fmt3(double x) {
  if (std::isnan(x)) return "-";
  std::ostringstream os;
  os << std::setprecision(3) << x;
  return os.str();
}

// ---------------------------------------------------------------------------

struct DataFlags {
  std::string network;
  std::string covariates;
  std::string model_terms;
  std::string lattice;
  int states = 2;

  void attach(CLI::App* cmd) {
    cmd->add_option("--network", network, "edge list file (i j pairs, 1-based)");
    cmd->add_option("--covariates", covariates,
                    "node covariate csv (id + categorical columns)");
    cmd->add_option("--model", model_terms,
                    "network model terms, e.g. 'edges + gwesp(0.2)'");
    cmd->add_option("--lattice", lattice, "lattice csv (states 1..S)");
    cmd->add_option("--states", states, "lattice state count");
  }
  bool is_network() const { return !network.empty(); }
  void validate() const {
    require(network.empty() != lattice.empty(), ErrorCode::usage,
            "give exactly one of --network or --lattice");
    if (is_network())
      require(!model_terms.empty(), ErrorCode::usage,
              "--model is required with --network");
  }
};

struct AdjustFlags {
  int mcmle_draws = 1500;
  int mcmle_iters = 20;
  int burn_in = 5000;
  int thin = 50;
  int z_rungs = 100;
  int z_draws = 1500;
  bool fresh_moments = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--mcmle-draws", mcmle_draws,
                    "simulated draws per likelihood-fit iteration");
    cmd->add_option("--mcmle-iters", mcmle_iters, "likelihood-fit iterations");
    cmd->add_option("--burn-in", burn_in, "sampler burn-in steps");
    cmd->add_option("--thin", thin, "sampler thinning interval");
    cmd->add_option("--z-rungs", z_rungs, "path rungs for the log z estimate");
    cmd->add_option("--z-draws", z_draws, "draws per path rung");
    cmd->add_flag("--fresh-moments", fresh_moments,
                  "re-simulate at the likelihood mode for the curvature "
                  "moments instead of reusing the final fit sample");
  }
  void merge_config(const CLI::App& cmd, const Json& cfg) {
    merge(cmd, "--mcmle-draws", cfg, "mcmle-draws", mcmle_draws);
    merge(cmd, "--mcmle-iters", cfg, "mcmle-iters", mcmle_iters);
    merge(cmd, "--burn-in", cfg, "burn-in", burn_in);
    merge(cmd, "--thin", cfg, "thin", thin);
    merge(cmd, "--z-rungs", cfg, "z-rungs", z_rungs);
    merge(cmd, "--z-draws", cfg, "z-draws", z_draws);
    merge(cmd, "--fresh-moments", cfg, "fresh-moments", fresh_moments);
  }
  AdjustSettings to_settings(std::uint64_t seed) const {
    AdjustSettings s;
    s.mcmle.sampler = {mcmle_draws, burn_in, thin};
    s.mcmle.max_iterations = mcmle_iters;
    s.moments = {std::max(mcmle_draws, 1500), burn_in, thin};
    s.zpath.ladder = TemperatureLadder::uniform(z_rungs);
    s.zpath.sampler = {z_draws, burn_in, thin};
    s.reuse_mcmle_sample = !fresh_moments;
    s.seed = seed;
    return s;
  }
  std::string describe() const {
    std::ostringstream os;
    os << "mcmle{draws=" << mcmle_draws << ",iters=" << mcmle_iters
       << "} sampler{burn=" << burn_in << ",thin=" << thin << "} zpath{rungs="
       << z_rungs << ",draws=" << z_draws << "}"
       << (fresh_moments ? " fresh-moments" : "");
    return os.str();
  }
};

int cmd_adjust(const DataFlags& data, const AdjustFlags& adj,
               std::uint64_t seed, const std::string& out_path) {
  data.validate();
  AdjustSettings settings = adj.to_settings(seed);
  AdjustmentArtifact art;
  if (data.is_network()) {
    NetworkGraph g = load_network(
        data.network, data.covariates.empty()
                          ? std::nullopt
                          : std::optional<std::string>(data.covariates));
    ErgmModel model(std::move(g), parse_model_spec(data.model_terms));
    art = build_adjusted(model, settings, model.graph().content_hash());
  } else {
    Lattice l = load_lattice(data.lattice, data.states);
    PottsModel model(l);
    art = build_adjusted(model, settings, lattice_hash(l));
  }
  art.settings_desc = adj.describe();
  save_artifact(art, out_path);
  std::printf("model: %s\n", art.model_desc.c_str());
  std::printf("theta_mple:");
  for (int i = 0; i < art.dim; ++i) std::printf(" %.4f", art.theta_mple[i]);
  std::printf("\ntheta_mle: ");
  for (int i = 0; i < art.dim; ++i) std::printf(" %.4f", art.theta_mle[i]);
  std::printf("\nlog_z(theta_mle): %.4f   log C: %.4f\n", art.log_z_at_mle,
              art.log_c);
  std::printf("\nphase            minutes\n");
  std::printf("mode             %7.3f\n", art.timing.mode_sec / 60.0);
  std::printf("curvature        %7.3f\n", art.timing.curvature_sec / 60.0);
  std::printf("magnitude        %7.3f\n", art.timing.magnitude_sec / 60.0);
  std::printf("total            %7.3f\n", art.timing.total_sec / 60.0);
  std::printf("\nartifact written to %s\n", out_path.c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct EvidenceFlags {
  std::string method = "all";
  int replicates = 1;
  std::string prior_mean = "0";
  std::string prior_var;  // default depends on the model family
  int rungs = 100;
  double ladder_power = 5.0;
  int draws = 30000;
  int burn_in = 5000;
  int cj_draws = 200000;
  double lambda = 0.0;  // 0: 2.4 / sqrt(d)
  int cv_degree = 2;
  bool unadjusted = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--method", method, "cj | ti | cti | ss | all");
    cmd->add_option("--replicates", replicates, "independent estimator reruns");
    cmd->add_option("--prior-mean", prior_mean,
                    "prior mean (scalar or comma list)");
    cmd->add_option("--prior-var", prior_var,
                    "prior variance diagonal (scalar or comma list)");
    cmd->add_option("--rungs", rungs, "temperature ladder intervals");
    cmd->add_option("--ladder-power", ladder_power, "ladder spacing power");
    cmd->add_option("--draws", draws, "draws per power-posterior rung");
    cmd->add_option("--burn-in", burn_in, "burn-in per chain");
    cmd->add_option("--cj-draws", cj_draws, "posterior-ordinate chain length");
    cmd->add_option("--lambda", lambda,
                    "proposal tuning scalar (default 2.4/sqrt(d))");
    cmd->add_option("--cv-degree", cv_degree, "control variate degree (1|2)");
    cmd->add_flag("--unadjusted", unadjusted,
                  "estimate over the unadjusted pseudo-posterior");
  }
  void merge_config(const CLI::App& cmd, const Json& cfg) {
    merge(cmd, "--method", cfg, "method", method);
    merge(cmd, "--replicates", cfg, "replicates", replicates);
    merge(cmd, "--prior-mean", cfg, "prior-mean", prior_mean);
    merge(cmd, "--prior-var", cfg, "prior-var", prior_var);
    merge(cmd, "--rungs", cfg, "rungs", rungs);
    merge(cmd, "--ladder-power", cfg, "ladder-power", ladder_power);
    merge(cmd, "--draws", cfg, "draws", draws);
    merge(cmd, "--burn-in", cfg, "burn-in", burn_in);
    merge(cmd, "--cj-draws", cfg, "cj-draws", cj_draws);
    merge(cmd, "--lambda", cfg, "lambda", lambda);
    merge(cmd, "--cv-degree", cfg, "cv-degree", cv_degree);
    merge(cmd, "--unadjusted", cfg, "unadjusted", unadjusted);
  }
};

struct MethodSelection {
  bool cj = false, ti = false, cti = false, ss = false;
};

MethodSelection parse_methods(const std::string& m) {
  MethodSelection sel;
  if (m == "all") {
    sel.cj = sel.ti = sel.cti = sel.ss = true;
  } else if (m == "cj") {
    sel.cj = true;
  } else if (m == "ti") {
    sel.ti = true;
  } else if (m == "cti") {
    sel.cti = true;
  } else if (m == "ss") {
    sel.ss = true;
  } else {
    fail(ErrorCode::usage, "unknown method '" + m +
                               "'; expected cj, ti, cti, ss, or all");
  }
  return sel;
}

// One full estimator pass over a fixed target; power-posterior chains are
// shared by ti/cti/ss.
template <class Target>
std::vector<EvidenceEstimate> estimate_once(const Target& target,
                                            const GaussianPrior& prior,
                                            const Vec& init,
                                            const MethodSelection& sel,
                                            const EvidenceFlags& flags,
                                            const Mat& curvature,
                                            std::uint64_t seed) {
  const int d = target.dim();
  ProposalSpec spec;
  spec.lambda = flags.lambda > 0 ? flags.lambda : 2.4 / std::sqrt(double(d));
  spec.prior_precision = prior.precision;
  spec.curvature = curvature;
  Mat sigma = proposal_covariance(spec);

  std::vector<EvidenceEstimate> out;
  if (sel.ti || sel.cti || sel.ss) {
    PowerPosteriorSettings cfg;
    cfg.ladder = TemperatureLadder::powered(flags.rungs, flags.ladder_power);
    cfg.draws_per_rung = flags.draws;
    cfg.burn_in = flags.burn_in;
    cfg.collect_cv = sel.cti;
    PowerPosteriorRun run =
        run_power_posterior_chains(target, prior, cfg, spec, init, seed);
    if (sel.ti) out.push_back(ti_improved_trapezoid(run));
    if (sel.cti) out.push_back(cti(run, flags.cv_degree));
    if (sel.ss) out.push_back(stepping_stones(run));
  }
  if (sel.cj) {
    ChibSettings cfg;
    cfg.draws = flags.cj_draws;
    cfg.burn_in = flags.burn_in;
    Rng rng = derive_rng(seed, seeds::kChib);
    out.push_back(chib_jeliazkov(target, prior, sigma, init, cfg, rng));
  }
  return out;
}

int cmd_evidence(const std::string& artifact_path, const EvidenceFlags& flags,
                 std::uint64_t seed, const std::string& out_path) {
  AdjustmentArtifact art = load_artifact(artifact_path);
  const int d = art.dim;
  MethodSelection sel = parse_methods(flags.method);

  double default_var = art.model_desc.rfind("potts", 0) == 0 ? 25.0 : 100.0;
  Vec pmean = broadcast(parse_number_list(flags.prior_mean), d, "--prior-mean");
  Vec pvar = flags.prior_var.empty()
                 ? Vec::Constant(d, default_var)
                 : broadcast(parse_number_list(flags.prior_var), d,
                             "--prior-var");
  GaussianPrior prior = GaussianPrior::diagonal(pmean, pvar);

  Mat curvature = flags.unadjusted
                      ? Mat(-art.surface.hess_log_pl(art.theta_mple))
                      : art.moment_cov;
  Vec init = flags.unadjusted ? art.theta_mple : art.theta_mle;

  std::vector<std::vector<EvidenceEstimate>> by_replicate(
      std::size_t(flags.replicates));
  parallel_for(std::size_t(flags.replicates), [&](std::size_t r) {
    std::uint64_t rep_seed = derive_seed(seed, seeds::kReplicate, r);
    if (flags.unadjusted) {
      UnadjustedTarget target{&art.surface};
      by_replicate[r] =
          estimate_once(target, prior, init, sel, flags, curvature, rep_seed);
    } else {
      AdjustedTarget target{&art};
      by_replicate[r] =
          estimate_once(target, prior, init, sel, flags, curvature, rep_seed);
    }
  });

  EvidenceReport report;
  report.model_desc = art.model_desc;
  report.data_hash = art.data_hash;
  report.adjusted = !flags.unadjusted;
  report.seed = seed;
  {
    std::ostringstream os;
    os << "normal(mean=[" << pmean.transpose() << "], var_diag=["
       << pvar.transpose() << "])";
    report.prior_desc = os.str();
  }
  const std::size_t n_methods = by_replicate[0].size();
  for (std::size_t m = 0; m < n_methods; ++m) {
    EvidenceEstimate agg = by_replicate[0][m];
    RunningMoments vals;
    agg.replicate_values.clear();
    for (const auto& rep : by_replicate) {
      vals.add(rep[m].log_evidence);
      agg.replicate_values.push_back(rep[m].log_evidence);
    }
    agg.log_evidence = vals.mean();
    if (flags.replicates > 1) agg.replicate_sd = vals.sd();
    {
      std::ostringstream os;
      os << "rungs=" << flags.rungs << " power=" << flags.ladder_power
         << " draws=" << flags.draws << " burn=" << flags.burn_in
         << " cj_draws=" << flags.cj_draws << " cv_degree=" << flags.cv_degree;
      agg.settings_desc = os.str();
    }
    report.estimates.push_back(std::move(agg));
  }

  if (!out_path.empty()) write_json_file(report_to_json(report), out_path);

  std::printf("model: %s   (%s pseudolikelihood)\n", art.model_desc.c_str(),
              report.adjusted ? "adjusted" : "unadjusted");
  std::printf("%-6s %14s %12s %12s\n", "method", "log_evidence", "sd",
              "acceptance");
  for (const auto& e : report.estimates)
    std::printf("%-6s %14.3f %12s %12s\n", e.method.c_str(), e.log_evidence,
                fmt3(e.replicate_sd).c_str(), fmt3(e.acceptance_rate).c_str());
  if (!out_path.empty())
    std::printf("report written to %s\n", out_path.c_str());
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_bf(const std::string& path_a, const std::string& path_b,
           const std::string& out_path) {
  EvidenceReport a = report_from_json(read_json_file(path_a));
  EvidenceReport b = report_from_json(read_json_file(path_b));
  require(a.data_hash == b.data_hash, ErrorCode::data,
          "refusing to compare models fitted to different data (hash " +
              a.data_hash + " vs " + b.data_hash + ")");
  Json out;
  out["schema"] = kBfSchema;
  out["version"] = kReportVersion;
  out["model_a"] = a.model_desc;
  out["model_b"] = b.model_desc;
  out["data_hash"] = a.data_hash;
  Json rows = Json::array();
  std::printf("%-6s %12s %12s %12s\n", "method", "BF(a/b)", "log_BF", "sd(BF)");
  for (const auto& ea : a.estimates) {
    for (const auto& eb : b.estimates) {
      if (ea.method != eb.method) continue;
      double log_bf = ea.log_evidence - eb.log_evidence;
      double bf_val = std::exp(log_bf);
      double sd = std::numeric_limits<double>::quiet_NaN();
      if (ea.replicate_values.size() == eb.replicate_values.size() &&
          ea.replicate_values.size() > 1) {
        RunningMoments m;
        for (std::size_t i = 0; i < ea.replicate_values.size(); ++i)
          m.add(std::exp(ea.replicate_values[i] - eb.replicate_values[i]));
        bf_val = m.mean();
        sd = m.sd();
        log_bf = std::log(bf_val);
      } else if (!std::isnan(ea.replicate_sd) && !std::isnan(eb.replicate_sd)) {
        double log_sd = std::hypot(ea.replicate_sd, eb.replicate_sd);
        sd = bf_val * log_sd;  // delta method
      }
      Json row;
      row["method"] = ea.method;
      row["bf"] = bf_val;
      row["log_bf"] = log_bf;
      if (!std::isnan(sd)) row["sd"] = sd;
      rows.push_back(std::move(row));
      std::printf("%-6s %12.3f %12.3f %12s\n", ea.method.c_str(), bf_val,
                  log_bf, fmt3(sd).c_str());
    }
  }
  require(!rows.empty(), ErrorCode::usage,
          "the two reports share no estimator methods");
  out["rows"] = std::move(rows);
  if (!out_path.empty()) {
    write_json_file(out, out_path);
    std::printf("report written to %s\n", out_path.c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_potts_study(const PottsStudyConfig& cfg, const std::string& out_path) {
  PottsStudyReport report = run_potts_study(cfg);
  std::printf("%3s %8s %12s %12s %12s %9s %9s\n", "ds", "stat", "log_ev_true",
              "log_ev_pl", "log_ev_adj", "adj-true", "pl-true");
  RunningMoments adj_gap, pl_gap;
  for (const auto& r : report.rows) {
    std::printf("%3d %8.0f %12.3f %12.3f %12.3f %9.3f %9.3f\n", r.dataset,
                r.stat, r.log_ev_true, r.log_ev_pl, r.log_ev_adjusted,
                r.log_ev_adjusted - r.log_ev_true,
                r.log_ev_pl - r.log_ev_true);
    adj_gap.add(std::abs(r.log_ev_adjusted - r.log_ev_true));
    pl_gap.add(std::abs(r.log_ev_pl - r.log_ev_true));
  }
  std::printf("mean |adjusted - true| = %.4f   mean |pl - true| = %.4f\n",
              adj_gap.mean(), pl_gap.mean());
  if (!out_path.empty()) {
    write_json_file(study_to_json(report), out_path);
    std::printf("report written to %s\n", out_path.c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_sample_posterior(const std::string& artifact_path, int draws,
                         int burn_in, double lambda, bool unadjusted,
                         const std::string& prior_mean,
                         const std::string& prior_var, std::uint64_t seed,
                         const std::string& out_path) {
  AdjustmentArtifact art = load_artifact(artifact_path);
  const int d = art.dim;
  double default_var = art.model_desc.rfind("potts", 0) == 0 ? 25.0 : 100.0;
  Vec pmean = broadcast(parse_number_list(prior_mean), d, "--prior-mean");
  Vec pvar = prior_var.empty()
                 ? Vec::Constant(d, default_var)
                 : broadcast(parse_number_list(prior_var), d, "--prior-var");
  GaussianPrior prior = GaussianPrior::diagonal(pmean, pvar);
  ProposalSpec spec;
  spec.lambda = lambda > 0 ? lambda : 2.4 / std::sqrt(double(d));
  spec.prior_precision = prior.precision;
  spec.curvature = unadjusted ? Mat(-art.surface.hess_log_pl(art.theta_mple))
                              : art.moment_cov;
  Vec init = unadjusted ? art.theta_mple : art.theta_mle;
  Rng rng = derive_rng(seed, seeds::kSampler);
  auto log_post = [&](const Vec& th) {
    double ll = unadjusted ? art.log_unadjusted(th) : art.log_adjusted(th);
    return ll + prior.log_pdf(th);
  };
  Chain chain = rw_metropolis(log_post, init, proposal_covariance(spec), draws,
                              burn_in, rng);
  save_chain_csv(chain, out_path);
  std::printf("chain of %d draws written to %s (acceptance %.3f)\n", draws,
              out_path.c_str(), chain.acceptance_rate);
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_oracle_brute_z(const DataFlags& data, const std::string& theta_text,
                       std::uint64_t cap) {
  data.validate();
  if (data.is_network()) {
    NetworkGraph g = load_network(
        data.network, data.covariates.empty()
                          ? std::nullopt
                          : std::optional<std::string>(data.covariates));
    ErgmModel model(std::move(g), parse_model_spec(data.model_terms));
    Vec theta =
        broadcast(parse_number_list(theta_text), model.dim(), "--theta");
    std::printf("log_z = %.10f\n",
                brute_force_log_partition(model, theta, cap));
  } else {
    Lattice l = load_lattice(data.lattice, data.states);
    PottsModel model(l);
    Vec theta = broadcast(parse_number_list(theta_text), 1, "--theta");
    std::printf("log_z = %.10f\n",
                brute_force_log_partition(model, theta, cap));
  }
  return 0;
}

int cmd_oracle_exact_z(int height, int width, int states, double theta) {
  std::printf("log_z = %.10f\n",
              exact_log_partition(height, width, states,
                                  Vec::Constant(1, theta)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "evidence and Bayes factors for Gibbs random fields via adjusted "
      "pseudolikelihoods"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON config file; sections named after subcommands provide "
                 "defaults, explicit flags override");

  // adjust
  auto* adjust = app.add_subcommand(
      "adjust", "fit the fully adjusted pseudolikelihood and write an artifact");
  DataFlags adj_data;
  adj_data.attach(adjust);
  AdjustFlags adj_flags;
  adj_flags.attach(adjust);
  std::uint64_t adj_seed = 0;
  std::string adj_out = "artifact.json";
  adjust->add_option("--seed", adj_seed, "master seed")->required();
  adjust->add_option("--out", adj_out, "artifact output path");

  // evidence
  auto* evidence = app.add_subcommand(
      "evidence", "estimate the log evidence from an artifact");
  std::string ev_artifact;
  EvidenceFlags ev_flags;
  std::uint64_t ev_seed = 0;
  std::string ev_out;
  evidence->add_option("--artifact", ev_artifact, "artifact file")->required();
  ev_flags.attach(evidence);
  evidence->add_option("--seed", ev_seed, "master seed")->required();
  evidence->add_option("--out", ev_out, "report output path");

  // bf
  auto* bf = app.add_subcommand("bf", "Bayes factor from two evidence reports");
  std::string bf_a, bf_b, bf_out;
  bf->add_option("--a", bf_a, "evidence report of the numerator model")
      ->required();
  bf->add_option("--b", bf_b, "evidence report of the denominator model")
      ->required();
  bf->add_option("--out", bf_out, "report output path");

  // potts-study
  auto* study = app.add_subcommand(
      "potts-study",
      "replicate lattice study: exact vs pseudolikelihood-based evidence");
  PottsStudyConfig study_cfg;
  std::string study_out;
  AdjustFlags study_adj;
  study->add_option("--height", study_cfg.height, "lattice rows");
  study->add_option("--width", study_cfg.width, "lattice columns");
  study->add_option("--states", study_cfg.states, "state count");
  study->add_option("--theta", study_cfg.theta_true, "generating parameter");
  study->add_option("--datasets", study_cfg.datasets, "replicate datasets");
  study->add_option("--grid-lo", study_cfg.grid_lo, "grid lower end");
  study->add_option("--grid-hi", study_cfg.grid_hi, "grid upper end");
  study->add_option("--grid-points", study_cfg.grid_points, "grid size");
  study->add_option("--prior-mean", study_cfg.prior_mean, "prior mean");
  study->add_option("--prior-var", study_cfg.prior_var, "prior variance");
  study_adj.attach(study);
  std::uint64_t study_seed = 0;
  study->add_option("--seed", study_seed, "master seed")->required();
  study->add_option("--out", study_out, "report output path");

  // sample-posterior
  auto* sample = app.add_subcommand("sample-posterior",
                                    "export a posterior chain as csv");
  std::string sp_artifact, sp_out = "chain.csv";
  int sp_draws = 30000, sp_burn = 5000;
  double sp_lambda = 0.0;
  bool sp_unadjusted = false;
  std::string sp_prior_mean = "0", sp_prior_var;
  sample->add_option("--artifact", sp_artifact, "artifact file")->required();
  sample->add_option("--draws", sp_draws, "chain length after burn-in");
  sample->add_option("--burn-in", sp_burn, "burn-in steps");
  sample->add_option("--lambda", sp_lambda, "proposal tuning scalar");
  sample->add_flag("--unadjusted", sp_unadjusted,
                   "target the unadjusted pseudo-posterior");
  sample->add_option("--prior-mean", sp_prior_mean, "prior mean");
  sample->add_option("--prior-var", sp_prior_var, "prior variance diagonal");
  std::uint64_t sp_seed = 0;
  sample->add_option("--seed", sp_seed, "master seed")->required();
  sample->add_option("--out", sp_out, "chain csv path");

  // oracle
  auto* oracle = app.add_subcommand("oracle", "small-model reference values");
  oracle->require_subcommand(1);
  auto* brute = oracle->add_subcommand(
      "brute-z", "log z by exhaustive enumeration (tiny models)");
  DataFlags brute_data;
  brute_data.attach(brute);
  std::string brute_theta = "0";
  std::uint64_t brute_cap = kDefaultEnumCap;
  brute->add_option("--theta", brute_theta, "parameter (comma list)");
  brute->add_option("--cap", brute_cap, "enumeration cap");
  auto* exactz = oracle->add_subcommand(
      "exact-z", "lattice log z by the column recursion");
  int ez_h = 4, ez_w = 4, ez_s = 2;
  double ez_theta = 0.0;
  exactz->add_option("--height", ez_h, "rows");
  exactz->add_option("--width", ez_w, "columns");
  exactz->add_option("--states", ez_s, "state count");
  exactz->add_option("--theta", ez_theta, "parameter");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*adjust) {
      adj_flags.merge_config(*adjust,
                             load_config_section(config_path, "adjust"));
      return cmd_adjust(adj_data, adj_flags, adj_seed, adj_out);
    }
    if (*evidence) {
      ev_flags.merge_config(*evidence,
                            load_config_section(config_path, "evidence"));
      return cmd_evidence(ev_artifact, ev_flags, ev_seed, ev_out);
    }
    if (*bf) return cmd_bf(bf_a, bf_b, bf_out);
    if (*study) {
      study_adj.merge_config(*study,
                             load_config_section(config_path, "potts-study"));
      study_cfg.adjust = study_adj.to_settings(0);
      study_cfg.seed = study_seed;
      return cmd_potts_study(study_cfg, study_out);
    }
    if (*sample)
      return cmd_sample_posterior(sp_artifact, sp_draws, sp_burn, sp_lambda,
                                  sp_unadjusted, sp_prior_mean, sp_prior_var,
                                  sp_seed, sp_out);
    if (*brute) return cmd_oracle_brute_z(brute_data, brute_theta, brute_cap);
    if (*exactz) return cmd_oracle_exact_z(ez_h, ez_w, ez_s, ez_theta);
  } catch (const grfev::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return int(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return int(grfev::ErrorCode::numeric);
  }
  return 0;
}
