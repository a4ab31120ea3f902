#include "dml/simulation.hpp"

#include <cmath>

#include "dml/errors.hpp"
#include "dml/parallel.hpp"
#include "dml/rng.hpp"
#include "dml/stats.hpp"

namespace dml {

std::vector<BiasStudyRow> run_bias_study(const BiasStudyConfig& config) {
  if (config.n_reps < 1) throw ValidationError("simulate: n_reps must be at least 1");
  const std::shared_ptr<const Learner> proto = parse_learner_spec(config.learner);
  if (proto->kind() != LearnerKind::regressor) throw ValidationError("simulate: learner must be a regressor");
  DgpConfig probe;
  probe.n_obs = config.n_obs;
  probe.dim_x = config.dim_x;
  probe.validate();

  std::vector<BiasStudyRow> rows(config.n_reps);
  parallel_for(config.n_reps, config.threads, [&](std::size_t rep) {
    DgpConfig dgp = probe;
    dgp.theta = config.theta;
    dgp.seed = derive_seed(config.seed, {rep, 0});
    const SimulatedData sim = make_plr_data(dgp);

    auto with_stream = [&](std::uint64_t unit) {
      auto l = proto->clone();
      l->set_stream(derive_seed(config.seed, {rep, unit}));
      return l;
    };
    BiasStudyRow row;
    row.rep = rep;
    row.theta_naive = naive_plugin_estimator(sim.data, *with_stream(1));
    row.theta_nosplit = orthogonal_no_split_estimator(sim.data, *with_stream(2), *with_stream(3));

    FitSpec spec;
    spec.model = ModelKind::plr;
    spec.learners = {{"ml_l", proto}, {"ml_m", proto}};
    spec.n_folds = config.n_folds;
    spec.seed = derive_seed(config.seed, {rep, 4});
    const FitResult res = fit(sim.data, spec);
    row.theta_dml = res.coefs[0].coef;
    row.se_dml = res.coefs[0].se;
    rows[rep] = row;
  });
  return rows;
}

namespace {

EstimatorSummary summarize(const std::vector<double>& est, double theta) {
  EstimatorSummary s;
  s.mean_bias = stats::mean(est) - theta;
  if (est.size() >= 2) {
    s.sd = stats::sample_sd(est);
    s.mc_se = *s.sd / std::sqrt(static_cast<double>(est.size()));
  }
  return s;
}

}  // namespace

BiasStudySummary summarize_bias_study(const std::vector<BiasStudyRow>& rows, double theta) {
  if (rows.empty()) throw ValidationError("summarize_bias_study: no rows");
  std::vector<double> naive, nosplit, dml, standardized;
  for (const auto& r : rows) {
    naive.push_back(r.theta_naive);
    nosplit.push_back(r.theta_nosplit);
    dml.push_back(r.theta_dml);
    standardized.push_back((r.theta_dml - theta) / r.se_dml);
  }
  BiasStudySummary s;
  s.n_reps = rows.size();
  s.theta = theta;
  s.naive = summarize(naive, theta);
  s.nosplit = summarize(nosplit, theta);
  s.dml = summarize(dml, theta);
  s.standardized_mean = stats::mean(standardized);
  if (rows.size() >= 2) {
    s.standardized_sd = stats::sample_sd(standardized);
    s.standardized_z = s.standardized_mean / (*s.standardized_sd / std::sqrt(static_cast<double>(rows.size())));
  }
  if (rows.size() >= 3) {
    s.skewness = stats::skewness(standardized);
    s.excess_kurtosis = stats::excess_kurtosis(standardized);
  }
  return s;
}

LearnerMap coverage_learners(const CoverageConfig& config) {
  std::map<std::string, std::string> specs;
  if (config.model == ModelKind::plr) {
    specs = {{"ml_l", "lasso:cv_folds=5"}, {"ml_m", "lasso:cv_folds=5"}};
  } else if (config.model == ModelKind::irm) {
    specs = {{"ml_g", "lasso:cv_folds=5"}, {"ml_m", "logistic"}};
  } else {
    throw ValidationError("coverage: only plr and irm designs are available");
  }
  for (const auto& [slot, spec] : config.learners) {
    if (!specs.count(slot)) throw ValidationError("coverage: learner slot " + slot + " not used by this model");
    specs[slot] = spec;
  }
  LearnerMap out;
  for (const auto& [slot, spec] : specs) out[slot] = parse_learner_spec(spec);
  return out;
}

CoverageResult run_coverage(const CoverageConfig& config) {
  if (config.n_reps < 1) throw ValidationError("coverage: n_reps must be at least 1");
  if (!(config.alpha > 0.0 && config.alpha <= 1.0)) throw ValidationError("coverage: alpha must lie in (0, 1]");
  const LearnerMap learners = coverage_learners(config);
  DgpConfig probe;
  probe.n_obs = config.n_obs;
  probe.dim_x = config.dim_x;
  probe.theta = config.theta;
  probe.nonlinear = config.nonlinear;
  probe.validate();

  constexpr std::size_t kAlgos = 2;
  struct Rep {
    double coef[kAlgos];
    double se[kAlgos];
    double lo[kAlgos];
    double hi[kAlgos];
  };
  std::vector<Rep> reps(config.n_reps);
  parallel_for(config.n_reps, config.threads, [&](std::size_t r) {
    DgpConfig dgp = probe;
    dgp.seed = derive_seed(config.seed, {r, 0});
    const SimulatedData sim = config.model == ModelKind::plr ? make_plr_data(dgp) : make_irm_data(dgp);
    FitSpec spec;
    spec.model = config.model;
    spec.learners = learners;
    spec.n_folds = config.n_folds;
    spec.alpha = config.alpha;
    spec.seed = derive_seed(config.seed, {r, 1});
    const CrossFit cf = cross_fit(sim.data, spec);
    for (std::size_t a = 0; a < kAlgos; ++a) {
      spec.algorithm = a == 0 ? Algorithm::dml1 : Algorithm::dml2;
      const CoefResult c = estimate(sim.data, spec, cf).coefs[0];
      reps[r].coef[a] = c.coef;
      reps[r].se[a] = c.se;
      reps[r].lo[a] = c.ci_lower;
      reps[r].hi[a] = c.ci_upper;
    }
  });

  CoverageResult out;
  out.n_reps = config.n_reps;
  out.alpha = config.alpha;
  out.theta = config.theta;
  const double m = static_cast<double>(config.n_reps);
  for (std::size_t a = 0; a < kAlgos; ++a) {
    AlgorithmCoverage ac;
    ac.algorithm = a == 0 ? "dml1" : "dml2";
    double hits = 0.0;
    for (const Rep& r : reps) {
      hits += (r.lo[a] <= config.theta && config.theta <= r.hi[a]) ? 1.0 : 0.0;
      ac.mean_coef += r.coef[a] / m;
      ac.mean_se += r.se[a] / m;
      ac.mean_ci_width += (r.hi[a] - r.lo[a]) / m;
    }
    ac.coverage = hits / m;
    ac.binomial_se = std::sqrt(ac.coverage * (1.0 - ac.coverage) / m);
    out.algorithms.push_back(ac);
  }
  return out;
}

}  // namespace dml
