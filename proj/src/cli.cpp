#include "dml/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dml/data.hpp"
#include "dml/dgp.hpp"
#include "dml/engine.hpp"
#include "dml/errors.hpp"
#include "dml/report.hpp"
#include "dml/simulation.hpp"

namespace dml {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitFailure = 3;

const char* kDefaultRegressor = "rf:max_depth=5,n_trees=100";
const char* kDefaultClassifier = "rf_clf:max_depth=5,n_trees=100";

struct FitOptions {
  std::string data, y, z, model = "plr", score, algorithm = "dml2", folds_path, bootstrap, p_adjust, out;
  std::vector<std::string> d, x;
  std::map<std::string, std::string> learners;
  std::size_t n_folds = 5, n_reps = 1, n_boot = 500, threads = 1;
  double alpha = 0.05, trim = 0.01;
  std::uint64_t seed = 0;
  bool stratify = false, allow_no_split = false;
};

struct SimulateOptions {
  BiasStudyConfig config;
  std::string out, summary;
};

struct CoverageOptions {
  CoverageConfig config;
  std::string model = "plr", out;
  std::map<std::string, std::string> learners;
};

struct GenerateOptions {
  std::string dgp = "plr", out;
  DgpConfig config;
  bool linear = false;
};

bool needs_classifier(ModelKind model, const std::string& slot) {
  if (model == ModelKind::irm) return slot == "ml_m";
  if (model == ModelKind::iivm) return slot == "ml_m" || slot == "ml_r";
  return false;
}

std::vector<std::string> slots_for(ModelKind model, const std::string& score) {
  switch (model) {
    case ModelKind::plr:
      return score == "iv-type" ? std::vector<std::string>{"ml_l", "ml_m", "ml_g"}
                                : std::vector<std::string>{"ml_l", "ml_m"};
    case ModelKind::pliv: return {"ml_l", "ml_m", "ml_r"};
    case ModelKind::irm: return {"ml_g", "ml_m"};
    case ModelKind::iivm: return {"ml_g", "ml_m", "ml_r"};
  }
  return {};
}

// "rf" names a forest; in classifier slots it resolves to the classifier
// variant.
std::shared_ptr<const Learner> learner_for_slot(const std::string& spec, bool classifier) {
  std::unique_ptr<Learner> l = parse_learner_spec(spec);
  if (classifier && l->name() == "random_forest_reg") l = builtin("random_forest_clf", l->params());
  return l;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw DataError(DataErrc::io_failure, "cannot write '" + path + "'");
  f << text;
  if (!f) throw DataError(DataErrc::io_failure, "write to '" + path + "' failed");
}

int cmd_fit(const FitOptions& o, std::ostream& out) {
  // Flag-level checks come before any data is read.
  const ModelKind model = parse_model(o.model);
  FitSpec spec;
  spec.model = model;
  spec.score = o.score.empty() ? default_score(model) : o.score;
  spec.algorithm = parse_algorithm(o.algorithm);
  spec.n_folds = o.n_folds;
  spec.n_rep = o.n_reps;
  spec.seed = o.seed;
  spec.alpha = o.alpha;
  spec.trim = o.trim;
  spec.stratify = o.stratify;
  spec.threads = o.threads;
  if (o.n_folds == 1 && !o.allow_no_split)
    throw ValidationError("--n-folds 1 disables cross-fitting; pass --allow-no-split to run it as a diagnostic");
  if (o.n_folds < 1) throw ValidationError("--n-folds must be at least 1");
  std::optional<BootstrapWeights> weights;
  if (!o.bootstrap.empty()) weights = parse_bootstrap_weights(o.bootstrap);
  std::optional<PAdjustMethod> adjust;
  if (!o.p_adjust.empty()) {
    adjust = parse_p_adjust(o.p_adjust);
    if (*adjust == PAdjustMethod::romano_wolf && !weights)
      throw ValidationError("--p-adjust romano-wolf requires --bootstrap");
  }
  if (weights && o.n_boot < 1) throw ValidationError("--n-boot must be at least 1");
  const auto slots = slots_for(model, spec.score);
  for (const auto& [slot, _] : o.learners)
    if (std::find(slots.begin(), slots.end(), slot) == slots.end())
      throw ValidationError("--learner-" + slot.substr(3) + " is not used by model " + o.model);
  for (const auto& slot : slots) {
    const bool clf = needs_classifier(model, slot);
    auto it = o.learners.find(slot);
    spec.learners[slot] = learner_for_slot(
        it != o.learners.end() ? it->second : (clf ? kDefaultClassifier : kDefaultRegressor), clf);
  }

  std::optional<std::vector<std::string>> x_cols;
  if (!o.x.empty()) x_cols = o.x;
  std::vector<std::string> z_cols;
  if (!o.z.empty()) z_cols.push_back(o.z);
  const DmlData data = from_csv(o.data, o.y, o.d, x_cols, z_cols);
  if (!o.folds_path.empty()) {
    std::ifstream f(o.folds_path);
    if (!f) throw DataError(DataErrc::io_failure, "cannot open '" + o.folds_path + "'");
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("fold JSON: " + std::string(e.what()));
    }
    spec.folds = folds_from_json(j);
  }
  validate_spec(data, spec);

  const FitResult res = fit(data, spec);
  out << format_summary(res);

  InferenceExtras extras;
  BootstrapResult boot;
  if (weights) {
    boot = bootstrap(res, *weights, o.n_boot, o.seed, o.threads);
    extras.boot = &boot;
    extras.joint = joint_confint(res, boot, std::min(o.alpha, 0.999999));
    out << "\njoint confidence intervals (" << to_string(*weights) << " multiplier bootstrap, B=" << o.n_boot
        << ", critical value " << format_double(extras.joint->critical_value) << ")\n";
    for (std::size_t j = 0; j < res.coefs.size(); ++j) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%s %9.4f %9.4f\n", res.coefs[j].name.c_str(), extras.joint->lower[j],
                    extras.joint->upper[j]);
      out << buf;
    }
  }
  if (adjust) {
    extras.p_adjusted = p_adjust(res, *adjust, weights ? &boot : nullptr);
    extras.p_adjust_method = o.p_adjust;
    out << "\nadjusted p-values (" << o.p_adjust << ")\n";
    for (std::size_t j = 0; j < res.coefs.size(); ++j) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%s %9.4f\n", res.coefs[j].name.c_str(), (*extras.p_adjusted)[j]);
      out << buf;
    }
  }
  if (res.diagnostics.learner_not_converged > 0)
    out << "\nnote: " << res.diagnostics.learner_not_converged << " of " << res.diagnostics.learner_fits
        << " learner fits hit their iteration limit\n";
  if (!o.out.empty()) write_text(o.out, to_json(res, extras).dump(2) + "\n");
  return kExitOk;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? format_double(*v) : "n/a"; }

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  const auto rows = run_bias_study(o.config);
  std::ostringstream csv;
  csv << "rep,theta_naive,theta_nosplit,theta_dml,se_dml\n";
  for (const auto& r : rows)
    csv << r.rep << ',' << format_double(r.theta_naive) << ',' << format_double(r.theta_nosplit) << ','
        << format_double(r.theta_dml) << ',' << format_double(r.se_dml) << '\n';
  write_text(o.out, csv.str());
  const BiasStudySummary s = summarize_bias_study(rows, o.config.theta);
  write_text(o.summary.empty() ? o.out + ".summary.json" : o.summary, to_json(s).dump(2) + "\n");
  out << "estimator  mean_bias  sd  mc_se\n";
  auto line = [&](const char* name, const EstimatorSummary& e) {
    out << name << "  " << format_double(e.mean_bias) << "  " << fmt_opt(e.sd) << "  " << fmt_opt(e.mc_se) << '\n';
  };
  line("naive", s.naive);
  line("nosplit", s.nosplit);
  line("dml", s.dml);
  out << "standardized dml: mean " << format_double(s.standardized_mean) << ", sd " << fmt_opt(s.standardized_sd)
      << ", skewness " << fmt_opt(s.skewness) << ", excess kurtosis " << fmt_opt(s.excess_kurtosis) << '\n';
  return kExitOk;
}

int cmd_coverage(CoverageOptions o, std::ostream& out) {
  o.config.model = parse_model(o.model);
  o.config.learners = o.learners;
  const CoverageResult res = run_coverage(o.config);
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-9s %9s %11s %9s %9s\n", "algorithm", "coverage", "binomial_se", "mean_coef",
                "mean_se");
  out << buf;
  for (const auto& a : res.algorithms) {
    std::snprintf(buf, sizeof buf, "%-9s %9.4f %11.4f %9.4f %9.4f\n", a.algorithm.c_str(), a.coverage,
                  a.binomial_se, a.mean_coef, a.mean_se);
    out << buf;
  }
  if (!o.out.empty()) write_text(o.out, to_json(res).dump(2) + "\n");
  return kExitOk;
}

int cmd_generate(GenerateOptions o, std::ostream& out) {
  o.config.nonlinear = !o.linear;
  if (o.dgp != "plr" && o.dgp != "irm") throw ValidationError("unknown dgp '" + o.dgp + "'");
  const SimulatedData sim = o.dgp == "plr" ? make_plr_data(o.config) : make_irm_data(o.config);
  write_csv(std::filesystem::path(o.out), sim.data.to_table());
  out << "wrote " << sim.data.n_obs() << " rows to " << o.out << '\n';
  return kExitOk;
}

void add_learner_flags(CLI::App* cmd, std::map<std::string, std::string>& learners) {
  for (const char* slot : {"l", "m", "g", "r"}) {
    cmd->add_option_function<std::string>(
        std::string("--learner-") + slot,
        [&learners, slot](const std::string& v) { learners[std::string("ml_") + slot] = v; },
        "learner for nuisance slot ml_" + std::string(slot) + " as name:key=val,...");
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Double/debiased machine learning estimation"};
  app.set_version_flag("--version", std::string("dml ") + kVersion);
  app.require_subcommand(1);

  FitOptions fo;
  auto* fit_cmd = app.add_subcommand("fit", "fit a causal model on CSV data");
  fit_cmd->add_option("--data", fo.data, "input CSV")->required();
  fit_cmd->add_option("--y", fo.y, "outcome column")->required();
  fit_cmd->add_option("--d", fo.d, "treatment column(s)")->required()->delimiter(',');
  fit_cmd->add_option("--x", fo.x, "covariate columns (default: all others)")->delimiter(',');
  fit_cmd->add_option("--z", fo.z, "instrument column");
  fit_cmd->add_option("--model", fo.model, "plr | pliv | irm | iivm")
      ->check(CLI::IsMember({"plr", "pliv", "irm", "iivm"}));
  fit_cmd->add_option("--score", fo.score, "partialling-out | iv-type | ATE | ATTE | LATE");
  add_learner_flags(fit_cmd, fo.learners);
  fit_cmd->add_option("--n-folds", fo.n_folds, "number of folds K");
  fit_cmd->add_option("--n-reps", fo.n_reps, "repetitions of cross-fitting");
  fit_cmd->add_option("--algorithm", fo.algorithm, "dml1 | dml2")->check(CLI::IsMember({"dml1", "dml2"}));
  fit_cmd->add_option("--alpha", fo.alpha, "significance level");
  fit_cmd->add_option("--trim", fo.trim, "propensity trimming threshold");
  fit_cmd->add_option("--seed", fo.seed, "master seed");
  fit_cmd->add_option("--threads", fo.threads, "worker threads");
  fit_cmd->add_flag("--stratify", fo.stratify, "stratify folds on the binary treatment / instrument");
  fit_cmd->add_option("--folds", fo.folds_path, "explicit fold assignments as JSON");
  fit_cmd->add_flag("--allow-no-split", fo.allow_no_split, "permit --n-folds 1 (no cross-fitting)");
  fit_cmd->add_option("--bootstrap", fo.bootstrap, "normal | bayes | wild")
      ->check(CLI::IsMember({"normal", "bayes", "wild"}));
  fit_cmd->add_option("--n-boot", fo.n_boot, "bootstrap replications");
  fit_cmd->add_option("--p-adjust", fo.p_adjust, "romano-wolf | bonferroni | holm")
      ->check(CLI::IsMember({"romano-wolf", "bonferroni", "holm"}));
  fit_cmd->add_option("--out", fo.out, "write results as JSON");

  SimulateOptions so;
  auto* sim_cmd = app.add_subcommand("simulate", "naive vs. no-split vs. DML bias experiment");
  sim_cmd->add_option("--n-reps", so.config.n_reps, "replications");
  sim_cmd->add_option("--n-obs", so.config.n_obs, "observations per replication");
  sim_cmd->add_option("--theta", so.config.theta, "true effect");
  sim_cmd->add_option("--dim-x", so.config.dim_x, "number of covariates");
  sim_cmd->add_option("--learner", so.config.learner, "nuisance learner spec");
  sim_cmd->add_option("--n-folds", so.config.n_folds, "folds for the DML estimator");
  sim_cmd->add_option("--seed", so.config.seed, "master seed");
  sim_cmd->add_option("--threads", so.config.threads, "worker threads");
  sim_cmd->add_option("--out", so.out, "per-replication CSV")->required();
  sim_cmd->add_option("--summary", so.summary, "summary JSON (default: <out>.summary.json)");

  CoverageOptions co;
  auto* cov_cmd = app.add_subcommand("coverage", "confidence-interval coverage study");
  cov_cmd->add_option("--model", co.model, "plr | irm")->check(CLI::IsMember({"plr", "irm"}));
  cov_cmd->add_option("--n-reps", co.config.n_reps, "replications");
  cov_cmd->add_option("--n-obs", co.config.n_obs, "observations per replication");
  cov_cmd->add_option("--alpha", co.config.alpha, "significance level");
  cov_cmd->add_option("--theta", co.config.theta, "true effect");
  cov_cmd->add_option("--dim-x", co.config.dim_x, "number of covariates");
  cov_cmd->add_flag("--nonlinear", co.config.nonlinear, "use the nonlinear design");
  cov_cmd->add_option("--n-folds", co.config.n_folds, "number of folds");
  cov_cmd->add_option("--seed", co.config.seed, "master seed");
  cov_cmd->add_option("--threads", co.config.threads, "worker threads");
  add_learner_flags(cov_cmd, co.learners);
  cov_cmd->add_option("--out", co.out, "write results as JSON");

  GenerateOptions go;
  auto* gen_cmd = app.add_subcommand("generate", "export a simulated dataset as CSV");
  gen_cmd->add_option("--dgp", go.dgp, "plr | irm")->check(CLI::IsMember({"plr", "irm"}));
  gen_cmd->add_option("--n-obs", go.config.n_obs, "observations");
  gen_cmd->add_option("--dim-x", go.config.dim_x, "number of covariates");
  gen_cmd->add_option("--theta", go.config.theta, "true effect");
  gen_cmd->add_option("--noise-y", go.config.noise_y, "outcome noise scale");
  gen_cmd->add_option("--noise-d", go.config.noise_d, "treatment noise scale (plr)");
  gen_cmd->add_flag("--linear", go.linear, "linear nuisance functions");
  gen_cmd->add_option("--seed", go.config.seed, "seed");
  gen_cmd->add_option("--out", go.out, "output CSV")->required();

  std::vector<std::string> argv_store = {"dml"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    err << app.help();
    return kExitValidation;
  }

  try {
    if (*fit_cmd) return cmd_fit(fo, out);
    if (*sim_cmd) return cmd_simulate(so, out);
    if (*cov_cmd) return cmd_coverage(co, out);
    if (*gen_cmd) return cmd_generate(go, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IdentificationError& e) {
    err << "identification failure: " << e.what() << '\n';
    return kExitFailure;
  } catch (const LearnerError& e) {
    err << "learner failure: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitValidation;
}

}  // namespace dml
