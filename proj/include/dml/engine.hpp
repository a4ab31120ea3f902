#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dml/data.hpp"
#include "dml/learners.hpp"
#include "dml/resampling.hpp"
#include "dml/rng.hpp"
#include "dml/scores.hpp"

namespace dml {

enum class ModelKind { plr, pliv, irm, iivm };
enum class Algorithm { dml1, dml2 };

ModelKind parse_model(std::string_view name);
Algorithm parse_algorithm(std::string_view name);
std::string to_string(ModelKind m);
std::string to_string(Algorithm a);
// partialling-out for PLR/PLIV, ATE for IRM, LATE for IIVM.
std::string default_score(ModelKind m);

// Learner prototypes per nuisance slot.
//   PLR   ml_l (Y~X), ml_m (D~X), ml_g (iv-type only)
//   PLIV  ml_l (Y~X), ml_m (Z~X), ml_r (D~X)
//   IRM   ml_g regressor (Y~X per treatment arm), ml_m classifier (D~X)
//   IIVM  ml_g regressor (Y~X per instrument arm), ml_m classifier (Z~X),
//         ml_r classifier (D~X per instrument arm)
using LearnerMap = std::map<std::string, std::shared_ptr<const Learner>>;

struct FitSpec {
  ModelKind model = ModelKind::plr;
  std::string score;  // empty: default_score(model)
  LearnerMap learners;
  std::size_t n_folds = 5;  // 1 selects the no-split diagnostic mode
  std::size_t n_rep = 1;
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::dml2;
  double trim = 0.01;
  double alpha = 0.05;
  bool stratify = false;             // stratify folds on binary D (IRM) or Z (IIVM)
  std::optional<FoldScheme> folds;   // overrides n_folds / n_rep / stratify
  ScoreFunction custom_score;        // replaces the built-in score when set
  std::size_t threads = 1;
};

// Checks model / score / learner-slot compatibility; throws ValidationError.
void validate_spec(const DmlData& data, const FitSpec& spec);

struct FitDiagnostics {
  std::size_t learner_fits = 0;
  std::size_t learner_not_converged = 0;
  std::size_t trimmed = 0;  // propensity predictions clamped, summed over reps
};

// Out-of-fold nuisance predictions for one treatment column.
struct CrossFitTreatment {
  std::string name;
  std::vector<NuisancePredictions> rep_predictions;
  // PLR iv-type only: preliminary partialling-out estimate used to build the
  // g target, per repetition.
  std::vector<double> rep_initial_theta;
};

struct CrossFit {
  FoldScheme folds;
  std::vector<CrossFitTreatment> treatments;
  FitDiagnostics diagnostics;
};

struct CoefResult {
  std::string name;
  double coef = 0.0;
  double se = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  std::vector<double> rep_coef;
  std::vector<double> rep_se;
  std::vector<std::vector<double>> rep_fold_coef;  // dml1 only
  std::vector<ScoreComponents> rep_scores;

  // psi(theta_r) for repetition r.
  Eigen::VectorXd psi(std::size_t rep) const { return rep_scores.at(rep).at(rep_coef.at(rep)); }
};

struct FitResult {
  ModelKind model = ModelKind::plr;
  std::string score;
  Algorithm algorithm = Algorithm::dml2;
  double alpha = 0.05;
  Eigen::Index n_obs = 0;
  std::size_t n_folds = 0;
  std::size_t n_rep = 0;
  std::vector<CoefResult> coefs;
  FitDiagnostics diagnostics;
};

// theta = -mean(psi_b) / mean(psi_a). IdentificationError when
// |mean(psi_a)| <= 1e-12.
double solve_theta_dml2(const Eigen::VectorXd& psi_a, const Eigen::VectorXd& psi_b);

struct Dml1Solution {
  double theta = 0.0;
  std::vector<double> fold_theta;
};
// Per-fold solutions averaged. `folds` lists the observation indices of each
// fold.
Dml1Solution solve_theta_dml1(const Eigen::VectorXd& psi_a, const Eigen::VectorXd& psi_b,
                              const std::vector<IndexList>& folds);

// sqrt(mean(psi^2) / mean(psi_a)^2 / n).
double standard_error(const Eigen::VectorXd& psi_at_theta, const Eigen::VectorXd& psi_a);

// Median theta; se = sqrt(median(se_r^2 + (theta_r - theta)^2)).
std::pair<double, double> aggregate_repetitions(std::span<const double> rep_theta,
                                                std::span<const double> rep_se);

CrossFit cross_fit(const DmlData& data, const FitSpec& spec);
// Solves scores from stored predictions using spec.algorithm / score / alpha.
FitResult estimate(const DmlData& data, const FitSpec& spec, const CrossFit& cf);
FitResult fit(const DmlData& data, const FitSpec& spec);

// ---------------------------------------------------------------------------
// Multiplier bootstrap and simultaneous inference

enum class BootstrapWeights { normal, bayes, wild };
BootstrapWeights parse_bootstrap_weights(std::string_view name);
std::string to_string(BootstrapWeights w);

// Fills one draw of n multipliers.
using MultiplierDraw = std::function<void(Rng&, std::span<double>)>;
MultiplierDraw multiplier_draw(BootstrapWeights w);

struct BootstrapResult {
  std::string weights;
  std::size_t n_boot = 0;
  // Per repetition, a B x p matrix of bootstrapped t-statistics. Multipliers
  // are shared across coefficients within a draw.
  std::vector<Eigen::MatrixXd> t_stats;
};

BootstrapResult bootstrap(const FitResult& fit, BootstrapWeights weights, std::size_t n_boot,
                          std::uint64_t seed, std::size_t threads = 1);
// Same with a caller-supplied multiplier distribution.
BootstrapResult bootstrap(const FitResult& fit, const MultiplierDraw& draw, std::string label,
                          std::size_t n_boot, std::uint64_t seed, std::size_t threads = 1);

struct JointConfint {
  double critical_value = 0.0;
  std::vector<double> lower;
  std::vector<double> upper;
};

// Critical value: (1 - alpha) quantile of max_j |t*_j| per repetition,
// median across repetitions.
JointConfint joint_confint(const FitResult& fit, const BootstrapResult& boot, double alpha);

enum class PAdjustMethod { romano_wolf, bonferroni, holm };
PAdjustMethod parse_p_adjust(std::string_view name);

std::vector<double> bonferroni(std::span<const double> p);
std::vector<double> holm(std::span<const double> p);
// Step-down max-t adjustment; t_obs has p entries, t_boot is B x p.
std::vector<double> romano_wolf(std::span<const double> t_obs, const Eigen::MatrixXd& t_boot);

// Romano-Wolf is computed per repetition and the median taken across
// repetitions; it requires `boot`.
std::vector<double> p_adjust(const FitResult& fit, PAdjustMethod method, const BootstrapResult* boot = nullptr);

}  // namespace dml
