#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dml/dgp.hpp"
#include "dml/engine.hpp"

namespace dml {

// Naive plug-in vs. orthogonal-without-splitting vs. cross-fitted DML on
// repeated draws from the nonlinear PLR design. One learner spec serves every
// nuisance.
struct BiasStudyConfig {
  std::size_t n_reps = 500;
  Eigen::Index n_obs = 500;
  Eigen::Index dim_x = 20;
  double theta = 0.5;
  std::string learner = "rf:max_depth=5,n_trees=100";
  std::size_t n_folds = 5;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct BiasStudyRow {
  std::size_t rep = 0;
  double theta_naive = 0.0;
  double theta_nosplit = 0.0;
  double theta_dml = 0.0;
  double se_dml = 0.0;
};

struct EstimatorSummary {
  double mean_bias = 0.0;
  std::optional<double> sd;     // absent with a single replication
  std::optional<double> mc_se;  // sd / sqrt(reps)
};

struct BiasStudySummary {
  std::size_t n_reps = 0;
  double theta = 0.0;
  EstimatorSummary naive, nosplit, dml;
  // Standardised DML estimates (theta_dml - theta) / se_dml.
  double standardized_mean = 0.0;
  std::optional<double> standardized_sd;
  std::optional<double> standardized_z;  // mean / (sd / sqrt(reps))
  std::optional<double> skewness;
  std::optional<double> excess_kurtosis;
};

std::vector<BiasStudyRow> run_bias_study(const BiasStudyConfig& config);
BiasStudySummary summarize_bias_study(const std::vector<BiasStudyRow>& rows, double theta);

struct CoverageConfig {
  ModelKind model = ModelKind::plr;
  std::size_t n_reps = 500;
  Eigen::Index n_obs = 1000;
  Eigen::Index dim_x = 20;
  double theta = 0.5;
  bool nonlinear = false;
  double alpha = 0.05;
  std::size_t n_folds = 5;
  std::uint64_t seed = 0;
  // Learner specs per slot; missing slots take the model defaults
  // (PLR: lasso with 5-fold CV; IRM: lasso with CV for ml_g, logistic for ml_m).
  std::map<std::string, std::string> learners;
  std::size_t threads = 1;
};

struct AlgorithmCoverage {
  std::string algorithm;
  double coverage = 0.0;
  double binomial_se = 0.0;
  double mean_coef = 0.0;
  double mean_se = 0.0;
  double mean_ci_width = 0.0;
};

struct CoverageResult {
  std::size_t n_reps = 0;
  double alpha = 0.0;
  double theta = 0.0;
  std::vector<AlgorithmCoverage> algorithms;  // dml1, dml2
};

LearnerMap coverage_learners(const CoverageConfig& config);
CoverageResult run_coverage(const CoverageConfig& config);

}  // namespace dml
