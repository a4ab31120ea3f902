#include "dml/learners.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "dml/data.hpp"
#include "dml/errors.hpp"
#include "dml/resampling.hpp"

namespace dml {

void Learner::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size())
    throw LearnerError(name() + ": X has " + std::to_string(x.rows()) + " rows but y has " +
                       std::to_string(y.size()));
  if (x.rows() < 1) throw LearnerError(name() + ": cannot fit on zero observations");
  if (x.cols() < 1) throw LearnerError(name() + ": X has no columns");
  if (!x.allFinite() || !y.allFinite()) throw LearnerError(name() + ": non-finite training data");
  if (kind() == LearnerKind::classifier && !is_binary(y))
    throw LearnerError(name() + ": classifier targets must be 0 or 1");
  converged_ = true;
  fit_impl(x, y);
  width_ = x.cols();
  fitted_ = true;
}

Eigen::VectorXd Learner::predict(const Eigen::MatrixXd& x) const {
  if (!fitted_) throw LearnerError(name() + ": predict called before fit");
  if (x.cols() != width_)
    throw LearnerError(name() + ": expected " + std::to_string(width_) + " columns, got " +
                       std::to_string(x.cols()));
  return predict_impl(x);
}

namespace {

std::string canonical_name(std::string_view name) {
  if (name == "rf" || name == "rf_reg" || name == "random_forest" || name == "random_forest_reg")
    return "random_forest_reg";
  if (name == "rf_clf" || name == "random_forest_clf") return "random_forest_clf";
  if (name == "logit" || name == "logistic") return "logistic";
  return std::string(name);
}

}  // namespace

std::unique_ptr<Learner> builtin(std::string_view name, const Params& params) {
  const std::string canon = canonical_name(name);
  if (canon == "ols") return std::make_unique<RidgeRegression>(params, true);
  if (canon == "ridge") return std::make_unique<RidgeRegression>(params, false);
  if (canon == "lasso") return std::make_unique<Lasso>(params);
  if (canon == "logistic") return std::make_unique<LogisticRegression>(params);
  if (canon == "random_forest_reg") return std::make_unique<RandomForest>(params, LearnerKind::regressor);
  if (canon == "random_forest_clf") return std::make_unique<RandomForest>(params, LearnerKind::classifier);
  throw ValidationError("unknown learner '" + std::string(name) + "'");
}

std::unique_ptr<Learner> with_params(const Learner& learner, const Params& overrides) {
  Params merged = learner.params();
  for (const auto& [k, v] : overrides) merged[k] = v;
  auto out = builtin(learner.name(), merged);
  out->set_stream(learner.stream());
  return out;
}

Params parse_params(std::string_view text) {
  Params out;
  while (!text.empty()) {
    const std::size_t comma = text.find(',');
    std::string_view item = text.substr(0, comma);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    if (item.empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0)
      throw ValidationError("hyperparameter '" + std::string(item) + "' is not of the form key=value");
    const std::string key(item.substr(0, eq));
    std::string_view val = item.substr(eq + 1);
    if (!val.empty() && val.front() == '+') val.remove_prefix(1);
    double v;
    const auto res = std::from_chars(val.data(), val.data() + val.size(), v);
    if (val.empty() || res.ec != std::errc() || res.ptr != val.data() + val.size())
      throw ValidationError("hyperparameter '" + key + "' has non-numeric value '" +
                            std::string(item.substr(eq + 1)) + "'");
    out[key] = v;
  }
  return out;
}

std::string format_params(const Params& params) {
  std::string out;
  for (const auto& [k, v] : params) out += (out.empty() ? "" : ",") + k + "=" + format_double(v);
  return out;
}

std::unique_ptr<Learner> parse_learner_spec(std::string_view spec) {
  const std::size_t colon = spec.find(':');
  const std::string_view name = spec.substr(0, colon);
  const Params params = colon == std::string_view::npos ? Params{} : parse_params(spec.substr(colon + 1));
  return builtin(name, params);
}

std::vector<Params> expand_grid(const std::map<std::string, std::vector<double>>& axes) {
  std::vector<Params> out{Params{}};
  for (const auto& [key, values] : axes) {
    if (values.empty()) throw ValidationError("grid axis '" + key + "' is empty");
    std::vector<Params> next;
    for (const auto& p : out)
      for (double v : values) {
        Params q = p;
        q[key] = v;
        next.push_back(std::move(q));
      }
    out = std::move(next);
  }
  return out;
}

double mean_squared_error(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred) {
  return (truth - pred).squaredNorm() / static_cast<double>(truth.size());
}

double log_loss(const Eigen::VectorXd& truth, const Eigen::VectorXd& prob) {
  constexpr double eps = 1e-15;
  double total = 0.0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    const double p = std::clamp(prob[i], eps, 1.0 - eps);
    total -= truth[i] * std::log(p) + (1.0 - truth[i]) * std::log1p(-p);
  }
  return total / static_cast<double>(truth.size());
}

TuneResult tune(const Learner& learner, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                const std::vector<Params>& grid, std::size_t inner_folds, std::uint64_t seed) {
  if (grid.empty()) throw ValidationError("tune: empty hyperparameter grid");
  if (inner_folds < 2) throw ValidationError("tune: inner_folds must be at least 2");
  const auto n = static_cast<std::size_t>(y.size());
  if (inner_folds > n)
    throw ValidationError("tune: inner_folds (" + std::to_string(inner_folds) +
                          ") exceeds number of observations (" + std::to_string(n) + ")");
  const FoldScheme folds = make_folds(n, inner_folds, 1, seed);
  auto rows = [](const Eigen::MatrixXd& m, const IndexList& idx) { return Eigen::MatrixXd(m(idx, Eigen::all)); };
  auto elems = [](const Eigen::VectorXd& v, const IndexList& idx) { return Eigen::VectorXd(v(idx)); };

  TuneResult result;
  for (const Params& point : grid) {
    auto candidate = with_params(learner, point);
    Eigen::VectorXd oof(y.size());
    for (std::size_t f = 0; f < inner_folds; ++f) {
      const IndexList train = folds.train_indices(0, f);
      const IndexList& test = folds.test_indices(0, f);
      auto model = candidate->clone();
      model->fit(rows(x, train), elems(y, train));
      oof(test) = model->predict(rows(x, test));
    }
    result.scores.push_back(learner.kind() == LearnerKind::classifier ? log_loss(y, oof)
                                                                        : mean_squared_error(y, oof));
  }
  result.best_index = static_cast<std::size_t>(
      std::min_element(result.scores.begin(), result.scores.end()) - result.scores.begin());
  result.best = learner.params();
  for (const auto& [k, v] : grid[result.best_index]) result.best[k] = v;
  return result;
}

}  // namespace dml
