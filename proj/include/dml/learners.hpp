#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace dml {

using Params = std::map<std::string, double>;

enum class LearnerKind { regressor, classifier };

// Uniform fit/predict interface for nuisance estimators. Classifiers predict
// P(target = 1 | x) and require 0/1 targets.
class Learner {
 public:
  virtual ~Learner() = default;

  virtual LearnerKind kind() const = 0;
  // Registry name, accepted by builtin().
  virtual std::string name() const = 0;
  const Params& params() const { return params_; }

  // Unfitted copy with identical hyperparameters and stream.
  virtual std::unique_ptr<Learner> clone() const = 0;

  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;

  bool is_fitted() const { return fitted_; }
  // False when an iterative solver stopped at its iteration cap.
  bool converged() const { return converged_; }

  // Randomised learners mix this value into their seed. The engine gives
  // every fold fit its own stream so parallel and serial runs agree.
  void set_stream(std::uint64_t stream) { stream_ = stream; }
  std::uint64_t stream() const { return stream_; }

 protected:
  explicit Learner(Params params) : params_(std::move(params)) {}

  virtual void fit_impl(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) = 0;
  virtual Eigen::VectorXd predict_impl(const Eigen::MatrixXd& x) const = 0;

  bool converged_ = true;

 private:
  Params params_;
  std::uint64_t stream_ = 0;
  bool fitted_ = false;
  Eigen::Index width_ = 0;
};

// Ridge regression with unpenalised intercept:
//   min ||y - b - X beta||^2 + lambda ||beta||^2
// solved via Cholesky of the centred Gram matrix. lambda = 0 is OLS.
class RidgeRegression final : public Learner {
 public:
  explicit RidgeRegression(Params params, bool ols = false);
  LearnerKind kind() const override { return LearnerKind::regressor; }
  std::string name() const override { return ols_ ? "ols" : "ridge"; }
  std::unique_ptr<Learner> clone() const override;

  const Eigen::VectorXd& coefficients() const { return beta_; }
  double intercept() const { return intercept_; }

 private:
  void fit_impl(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) override;
  Eigen::VectorXd predict_impl(const Eigen::MatrixXd& x) const override;

  bool ols_;
  double lambda_;
  Eigen::VectorXd beta_;
  double intercept_ = 0.0;
};

// Lasso by cyclic coordinate descent:
//   min (1/2n) ||y - b - X beta||^2 + lambda ||beta||_1
// Features are standardised internally (population sd) unless standardize=0;
// the penalty then applies to standardised coefficients. Coefficients are
// reported on the original scale. With cv_folds >= 2, lambda is chosen by
// K-fold CV over a log-spaced path from lambda_max down to
// lambda_max * lambda_min_ratio.
class Lasso final : public Learner {
 public:
  explicit Lasso(Params params);
  LearnerKind kind() const override { return LearnerKind::regressor; }
  std::string name() const override { return "lasso"; }
  std::unique_ptr<Learner> clone() const override;

  const Eigen::VectorXd& coefficients() const { return beta_; }
  double intercept() const { return intercept_; }
  double lambda() const { return lambda_used_; }
  int iterations() const { return iterations_; }

  // Smallest lambda for which every coefficient is zero, on the same feature
  // scale the solver uses.
  static double lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool standardize);

 private:
  void fit_impl(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) override;
  Eigen::VectorXd predict_impl(const Eigen::MatrixXd& x) const override;

  Eigen::VectorXd beta_;
  double intercept_ = 0.0;
  double lambda_used_ = 0.0;
  int iterations_ = 0;
};

// Logistic regression by iteratively reweighted least squares with a 1e-10
// ridge jitter on the weighted Gram matrix. Hitting max_iter is reported via
// converged(), not an error.
class LogisticRegression final : public Learner {
 public:
  explicit LogisticRegression(Params params);
  LearnerKind kind() const override { return LearnerKind::classifier; }
  std::string name() const override { return "logistic"; }
  std::unique_ptr<Learner> clone() const override;

  const Eigen::VectorXd& coefficients() const { return beta_; }
  double intercept() const { return intercept_; }
  int iterations() const { return iterations_; }

 private:
  void fit_impl(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) override;
  Eigen::VectorXd predict_impl(const Eigen::MatrixXd& x) const override;

  Eigen::VectorXd beta_;
  double intercept_ = 0.0;
  int iterations_ = 0;
};

// Bagged CART trees grown on variance reduction. Splits use midpoints between
// sorted distinct values; ties go to the lowest feature index, then the lowest
// threshold. The classifier variant grows the same trees on 0/1 targets and
// averages leaf frequencies.
class RandomForest final : public Learner {
 public:
  RandomForest(Params params, LearnerKind kind);
  LearnerKind kind() const override { return kind_; }
  std::string name() const override;
  std::unique_ptr<Learner> clone() const override;

  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  const std::vector<Tree>& trees() const { return trees_; }

 private:
  void fit_impl(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) override;
  Eigen::VectorXd predict_impl(const Eigen::MatrixXd& x) const override;

  LearnerKind kind_;
  std::vector<Tree> trees_;
};

// Factory for: ols, ridge, lasso, logistic, random_forest_reg,
// random_forest_clf. Aliases: rf, rf_reg, rf_clf, logit. Unknown names and
// out-of-range hyperparameters throw ValidationError.
std::unique_ptr<Learner> builtin(std::string_view name, const Params& params = {});

// Same learner family with `overrides` merged into its hyperparameters.
std::unique_ptr<Learner> with_params(const Learner& learner, const Params& overrides);

// "max_depth=5,n_trees=100" -> {max_depth: 5, n_trees: 100}
Params parse_params(std::string_view text);
std::string format_params(const Params& params);

// "name:key=val,key=val" or just "name".
std::unique_ptr<Learner> parse_learner_spec(std::string_view spec);

struct TuneResult {
  Params best;
  std::size_t best_index = 0;
  // Mean inner-CV loss per grid point, in grid order.
  std::vector<double> scores;
};

// Cartesian product; keys in lexicographic order, last key varying fastest.
std::vector<Params> expand_grid(const std::map<std::string, std::vector<double>>& axes);

// Picks the grid point with the lowest inner-CV loss (MSE for regressors, log
// loss for classifiers); ties go to the earlier grid point.
TuneResult tune(const Learner& learner, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                const std::vector<Params>& grid, std::size_t inner_folds, std::uint64_t seed);

double mean_squared_error(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred);
double log_loss(const Eigen::VectorXd& truth, const Eigen::VectorXd& prob);

}  // namespace dml
