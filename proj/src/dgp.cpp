#include "dml/dgp.hpp"

#include <cmath>

#include "dml/errors.hpp"
#include "dml/rng.hpp"
#include "dml/scores.hpp"

namespace dml {

void DgpConfig::validate() const {
  if (n_obs < 2) throw ValidationError("dgp: n_obs must be at least 2");
  if (dim_x < 1) throw ValidationError("dgp: dim_x must be at least 1");
  if (!(noise_y > 0.0) || !(noise_d > 0.0)) throw ValidationError("dgp: noise scales must be positive");
  if (!std::isfinite(theta)) throw ValidationError("dgp: theta must be finite");
}

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// AR(1) recursion gives exactly the Toeplitz 0.7^|j-k| covariance.
Eigen::MatrixXd draw_covariates(Rng& rng, Eigen::Index n, Eigen::Index p) {
  constexpr double rho = 0.7;
  const double innov = std::sqrt(1.0 - rho * rho);
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    for (Eigen::Index j = 1; j < p; ++j) x(i, j) = rho * x(i, j - 1) + innov * rng.normal();
  }
  return x;
}

// Column 3 is absent when dim_x < 3; those designs read it as 0.
double col_or_zero(const Eigen::MatrixXd& x, Eigen::Index i, Eigen::Index j) {
  return j < x.cols() ? x(i, j) : 0.0;
}

double g0_value(const Eigen::MatrixXd& x, Eigen::Index i, bool nonlinear) {
  const double x1 = x(i, 0), x3 = col_or_zero(x, i, 2);
  return nonlinear ? logistic(x1) + 0.25 * x3 : x1 + 0.25 * x3;
}

Table assemble(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::MatrixXd& x) {
  Table t;
  auto col = [](const auto& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  t.add_column("y", col(y));
  t.add_column("d", col(d));
  for (Eigen::Index j = 0; j < x.cols(); ++j) t.add_column("X" + std::to_string(j + 1), col(Eigen::VectorXd(x.col(j))));
  return t;
}

}  // namespace

SimulatedData make_plr_data(const DgpConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const Eigen::Index n = config.n_obs;
  const Eigen::MatrixXd x = draw_covariates(rng, n, config.dim_x);
  DgpTruth truth;
  truth.theta = config.theta;
  truth.g0.resize(n);
  truth.m0.resize(n);
  Eigen::VectorXd d(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x1 = x(i, 0), x3 = col_or_zero(x, i, 2);
    truth.m0[i] = config.nonlinear ? x1 + logistic(x3) : x1 + 0.5 * x3;
    truth.g0[i] = g0_value(x, i, config.nonlinear);
    d[i] = truth.m0[i] + config.noise_d * rng.normal();
    y[i] = config.theta * d[i] + truth.g0[i] + config.noise_y * rng.normal();
  }
  truth.l0 = config.theta * truth.m0 + truth.g0;
  return {DmlData::from_columns(assemble(y, d, x), "y", {"d"}), std::move(truth)};
}

SimulatedData make_irm_data(const DgpConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const Eigen::Index n = config.n_obs;
  const Eigen::MatrixXd x = draw_covariates(rng, n, config.dim_x);
  DgpTruth truth;
  truth.theta = config.theta;
  truth.g0.resize(n);
  truth.m0.resize(n);
  Eigen::VectorXd d(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x2 = col_or_zero(x, i, 1);
    truth.m0[i] = logistic(config.propensity_x1 * x(i, 0) + config.propensity_x2 * x2);
    truth.g0[i] = g0_value(x, i, config.nonlinear);
    d[i] = rng.bernoulli(truth.m0[i]) ? 1.0 : 0.0;
    y[i] = config.theta * d[i] + truth.g0[i] + config.noise_y * rng.normal();
  }
  truth.mu0 = truth.g0;
  truth.mu1 = truth.g0.array() + config.theta;
  truth.l0 = config.theta * truth.m0 + truth.g0;
  return {DmlData::from_columns(assemble(y, d, x), "y", {"d"}), std::move(truth)};
}

double naive_plugin_estimator(const DmlData& data, const Learner& learner_g) {
  const Eigen::VectorXd d = data.d().col(0);
  auto g = learner_g.clone();
  g->fit(data.covariates_for(0), data.y());
  const Eigen::VectorXd g_hat = g->predict(data.covariates_for(0));
  const double dd = d.squaredNorm();
  if (!(dd > 0.0)) throw IdentificationError("naive estimator: sum of squared treatments is zero");
  return d.dot(data.y() - g_hat) / dd;
}

double orthogonal_no_split_estimator(const DmlData& data, const Learner& learner_l, const Learner& learner_m) {
  const Eigen::MatrixXd x = data.covariates_for(0);
  const Eigen::VectorXd d = data.d().col(0);
  auto l = learner_l.clone();
  auto m = learner_m.clone();
  l->fit(x, data.y());
  m->fit(x, d);
  const Eigen::VectorXd v = d - m->predict(x);
  const Eigen::VectorXd u = data.y() - l->predict(x);
  const double vv = v.squaredNorm() / static_cast<double>(v.size());
  if (!(vv > 1e-12)) throw IdentificationError("no-split estimator: residualised treatment is zero");
  return u.dot(v) / v.squaredNorm();
}

}  // namespace dml
