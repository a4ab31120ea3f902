#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "dml/data.hpp"
#include "dml/learners.hpp"

namespace dml {

// Covariates are N(0, S) with S_jk = 0.7^|j-k|.
//
// PLR, nonlinear (default):
//   m0(x) = x1 + logistic(x3)        g0(x) = logistic(x1) + 0.25 x3
// PLR, linear (nonlinear = false; a sparse linear design):
//   m0(x) = x1 + 0.5 x3              g0(x) = x1 + 0.25 x3
//   D = m0(X) + noise_d V,  Y = theta D + g0(X) + noise_y zeta
//
// IRM:
//   m0(x) = logistic(propensity_x1 * x1 + propensity_x2 * x2)
//   D ~ Bernoulli(m0(X)),  Y = theta D + g0(X) + noise_y zeta  (g0 as PLR)
struct DgpConfig {
  Eigen::Index n_obs = 500;
  Eigen::Index dim_x = 20;
  double theta = 0.5;
  std::uint64_t seed = 0;
  double noise_y = 1.0;
  double noise_d = 1.0;
  bool nonlinear = true;
  double propensity_x1 = 1.0;
  double propensity_x2 = -0.5;

  void validate() const;
};

// Nuisance functions evaluated at the sampled covariates.
struct DgpTruth {
  double theta = 0.0;
  Eigen::VectorXd g0;  // outcome baseline g0(X)
  Eigen::VectorXd m0;  // E[D|X] (PLR) or propensity (IRM)
  Eigen::VectorXd l0;  // E[Y|X] = theta m0(X) + g0(X)
  Eigen::VectorXd mu0, mu1;  // IRM potential-outcome means E[Y(d)|X]
};

struct SimulatedData {
  DmlData data;  // columns y, d, X1..Xp
  DgpTruth truth;
};

SimulatedData make_plr_data(const DgpConfig& config);
SimulatedData make_irm_data(const DgpConfig& config);

// Fits g on Y ~ X over the full sample, then sum d (y - g) / sum d^2.
double naive_plugin_estimator(const DmlData& data, const Learner& learner_g);

// Fits l on Y ~ X and m on D ~ X over the full sample and solves the
// partialling-out score on that same sample.
double orthogonal_no_split_estimator(const DmlData& data, const Learner& learner_l, const Learner& learner_m);

}  // namespace dml
