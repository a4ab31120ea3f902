#include <algorithm>
#include <cmath>
#include <numeric>

#include "dml/errors.hpp"
#include "dml/learners.hpp"
#include "dml/resampling.hpp"
#include "param_reader.hpp"

namespace dml {

// ---------------------------------------------------------------------------
// Ridge / OLS

RidgeRegression::RidgeRegression(Params params, bool ols) : Learner(std::move(params)), ols_(ols) {
  if (ols_) {
    detail::ParamReader reader("ols", this->params(), {});
    lambda_ = 0.0;
  } else {
    detail::ParamReader reader("ridge", this->params(), {"lambda"});
    lambda_ = reader.real("lambda", 1.0, 0.0);
  }
}

std::unique_ptr<Learner> RidgeRegression::clone() const {
  auto out = std::make_unique<RidgeRegression>(params(), ols_);
  out->set_stream(stream());
  return out;
}

void RidgeRegression::fit_impl(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += lambda_;
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw LearnerError(name() + ": Gram matrix is not positive definite (collinear or constant columns)");
  beta_ = llt.solve(xc.transpose() * (y.array() - y_mean).matrix());
  intercept_ = y_mean - x_mean.dot(beta_);
}

Eigen::VectorXd RidgeRegression::predict_impl(const Eigen::MatrixXd& x) const {
  return (x * beta_).array() + intercept_;
}

// ---------------------------------------------------------------------------
// Lasso

namespace {

struct LassoSettings {
  double lambda;
  bool standardize;
  long max_iter;
  double tol;
  long cv_folds;
  long n_lambda;
  double lambda_min_ratio;
  long seed;
};

LassoSettings read_lasso(const Params& p) {
  detail::ParamReader r("lasso", p,
                        {"lambda", "standardize", "max_iter", "tol", "cv_folds", "n_lambda",
                         "lambda_min_ratio", "seed"});
  LassoSettings s;
  s.lambda = r.real("lambda", 0.1, 0.0);
  s.standardize = r.flag("standardize", true);
  s.max_iter = r.integer("max_iter", 10000, 1);
  s.tol = r.real("tol", 1e-7, 0.0);
  s.cv_folds = r.integer("cv_folds", 0, 0);
  if (s.cv_folds == 1) throw ValidationError("lasso: cv_folds must be 0 (off) or >= 2");
  s.n_lambda = r.integer("n_lambda", 50, 2);
  s.lambda_min_ratio = r.real("lambda_min_ratio", 1e-3, 0.0);
  if (s.lambda_min_ratio <= 0.0 || s.lambda_min_ratio >= 1.0)
    throw ValidationError("lasso: lambda_min_ratio must lie in (0, 1)");
  s.seed = r.integer("seed", 0, 0);
  return s;
}

// Centred (and optionally scaled) design. Zero-variance columns keep scale 1
// and stay at zero coefficient because their squared norm is 0.
struct Standardized {
  Eigen::MatrixXd z;
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;
  Eigen::VectorXd yc;
  double y_mean;
  Eigen::VectorXd col_sq;  // ||z_j||^2 / n
};

Standardized standardize(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool scale_columns) {
  Standardized s;
  const auto n = static_cast<double>(x.rows());
  s.mean = x.colwise().mean();
  s.z = x.rowwise() - s.mean;
  s.scale = Eigen::RowVectorXd::Ones(x.cols());
  if (scale_columns) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double sd = std::sqrt(s.z.col(j).squaredNorm() / n);
      if (sd > 0.0) {
        s.scale[j] = sd;
        s.z.col(j) /= sd;
      }
    }
  }
  s.y_mean = y.mean();
  s.yc = y.array() - s.y_mean;
  s.col_sq = s.z.colwise().squaredNorm().transpose() / n;
  return s;
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// Cyclic coordinate descent from a warm start. Stops once a full sweep moves
// no coefficient by more than tol and no zero coefficient violates its KKT
// bound by more than tol. Returns sweeps used; sets converged.
int coordinate_descent(const Standardized& s, double lambda, double tol, long max_iter,
                       Eigen::VectorXd& beta, bool& converged) {
  const auto n = static_cast<double>(s.z.rows());
  const Eigen::Index p = s.z.cols();
  Eigen::VectorXd r = s.yc - s.z * beta;
  converged = false;
  int sweep = 0;
  while (sweep < max_iter) {
    ++sweep;
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (s.col_sq[j] <= 0.0) {
        beta[j] = 0.0;
        continue;
      }
      const double old = beta[j];
      const double rho = s.z.col(j).dot(r) / n + s.col_sq[j] * old;
      const double updated = soft_threshold(rho, lambda) / s.col_sq[j];
      if (updated != old) {
        r.noalias() -= (updated - old) * s.z.col(j);
        beta[j] = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    if (max_change < tol) {
      bool kkt_ok = true;
      for (Eigen::Index j = 0; j < p && kkt_ok; ++j)
        if (beta[j] == 0.0 && s.col_sq[j] > 0.0) kkt_ok = std::abs(s.z.col(j).dot(r) / n) <= lambda + tol;
      if (kkt_ok) {
        converged = true;
        break;
      }
    }
  }
  return sweep;
}

}  // namespace

Lasso::Lasso(Params params) : Learner(std::move(params)) { read_lasso(this->params()); }

std::unique_ptr<Learner> Lasso::clone() const {
  auto out = std::make_unique<Lasso>(params());
  out->set_stream(stream());
  return out;
}

double Lasso::lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool standardize_columns) {
  const Standardized s = standardize(x, y, standardize_columns);
  return (s.z.transpose() * s.yc).cwiseAbs().maxCoeff() / static_cast<double>(x.rows());
}

void Lasso::fit_impl(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const LassoSettings cfg = read_lasso(params());
  double lambda = cfg.lambda;

  if (cfg.cv_folds >= 2) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (static_cast<std::size_t>(cfg.cv_folds) > n)
      throw LearnerError("lasso: cv_folds exceeds number of observations");
    const double top = lambda_max(x, y, cfg.standardize);
    std::vector<double> path(static_cast<std::size_t>(cfg.n_lambda));
    for (std::size_t i = 0; i < path.size(); ++i)
      path[i] = top * std::pow(cfg.lambda_min_ratio,
                               static_cast<double>(i) / static_cast<double>(path.size() - 1));
    if (top <= 0.0) path.assign(1, 0.0);
    const FoldScheme folds =
        make_folds(n, static_cast<std::size_t>(cfg.cv_folds), 1,
                   static_cast<std::uint64_t>(cfg.seed) ^ stream());
    std::vector<double> cv_err(path.size(), 0.0);
    for (std::size_t f = 0; f < folds.k(); ++f) {
      const IndexList train = folds.train_indices(0, f);
      const IndexList& test = folds.test_indices(0, f);
      const Eigen::MatrixXd xt = x(train, Eigen::all);
      const Standardized s = standardize(xt, y(train), cfg.standardize);
      const Eigen::MatrixXd xv = x(test, Eigen::all);
      const Eigen::VectorXd yv = y(test);
      Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
      for (std::size_t i = 0; i < path.size(); ++i) {
        bool ok;
        coordinate_descent(s, path[i], cfg.tol, cfg.max_iter, beta, ok);
        const Eigen::VectorXd raw = beta.cwiseQuotient(s.scale.transpose());
        const double b0 = s.y_mean - s.mean.dot(raw);
        cv_err[i] += ((xv * raw).array() + b0 - yv.array()).square().sum();
      }
    }
    lambda = path[static_cast<std::size_t>(std::min_element(cv_err.begin(), cv_err.end()) - cv_err.begin())];
  }

  const Standardized s = standardize(x, y, cfg.standardize);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  bool ok;
  iterations_ = coordinate_descent(s, lambda, cfg.tol, cfg.max_iter, beta, ok);
  converged_ = ok;
  lambda_used_ = lambda;
  beta_ = beta.cwiseQuotient(s.scale.transpose());
  intercept_ = s.y_mean - s.mean.dot(beta_);
}

Eigen::VectorXd Lasso::predict_impl(const Eigen::MatrixXd& x) const {
  return (x * beta_).array() + intercept_;
}

// ---------------------------------------------------------------------------
// Logistic regression

namespace {

struct LogisticSettings {
  double lambda;
  long max_iter;
  double tol;
};

LogisticSettings read_logistic(const Params& p) {
  detail::ParamReader r("logistic", p, {"lambda", "max_iter", "tol"});
  return {r.real("lambda", 0.0, 0.0), r.integer("max_iter", 100, 1), r.real("tol", 1e-10, 0.0)};
}

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Mean negative log-likelihood plus ridge term on slopes.
double objective(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Eigen::VectorXd& coef,
                 double lambda) {
  const Eigen::VectorXd eta = design * coef;
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    // log(1 + exp(eta)) - y * eta, computed stably.
    const double e = eta[i];
    total += (e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e))) - y[i] * e;
  }
  return total / static_cast<double>(y.size()) + 0.5 * lambda * coef.tail(coef.size() - 1).squaredNorm();
}

}  // namespace

LogisticRegression::LogisticRegression(Params params) : Learner(std::move(params)) {
  read_logistic(this->params());
}

std::unique_ptr<Learner> LogisticRegression::clone() const {
  auto out = std::make_unique<LogisticRegression>(params());
  out->set_stream(stream());
  return out;
}

void LogisticRegression::fit_impl(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const LogisticSettings cfg = read_logistic(params());
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols() + 1;
  const auto nd = static_cast<double>(n);
  Eigen::MatrixXd design(n, p);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;

  Eigen::VectorXd coef = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p, cfg.lambda);
  penalty[0] = 0.0;
  double current = objective(design, y, coef, cfg.lambda);
  converged_ = false;
  iterations_ = 0;
  for (long it = 0; it < cfg.max_iter; ++it) {
    const Eigen::VectorXd eta = design * coef;
    Eigen::VectorXd prob(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = sigmoid(eta[i]);
      w[i] = prob[i] * (1.0 - prob[i]);
    }
    const Eigen::VectorXd grad =
        (design.transpose() * (y - prob)) / nd - penalty.cwiseProduct(coef);
    if (grad.cwiseAbs().maxCoeff() <= cfg.tol) {
      converged_ = true;
      break;
    }
    Eigen::MatrixXd hess = design.transpose() * w.asDiagonal() * design / nd;
    hess.diagonal() += penalty;
    hess.diagonal().array() += 1e-10;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    ++iterations_;
    // Step halving guards against overshooting on near-separable data.
    double t = 1.0;
    Eigen::VectorXd trial = coef + step;
    double value = objective(design, y, trial, cfg.lambda);
    for (int h = 0; h < 30 && !(value <= current); ++h) {
      t *= 0.5;
      trial = coef + t * step;
      value = objective(design, y, trial, cfg.lambda);
    }
    if (!(value <= current)) break;
    const double moved = (trial - coef).cwiseAbs().maxCoeff();
    coef = trial;
    current = value;
    if (moved == 0.0) break;
  }
  if (!converged_) {
    Eigen::VectorXd prob = design * coef;
    for (Eigen::Index i = 0; i < n; ++i) prob[i] = sigmoid(prob[i]);
    const Eigen::VectorXd grad = (design.transpose() * (y - prob)) / nd - penalty.cwiseProduct(coef);
    converged_ = grad.cwiseAbs().maxCoeff() <= cfg.tol;
  }
  intercept_ = coef[0];
  beta_ = coef.tail(x.cols());
}

Eigen::VectorXd LogisticRegression::predict_impl(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd eta = (x * beta_).array() + intercept_;
  for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = sigmoid(eta[i]);
  return eta;
}

}  // namespace dml
