#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dml {

// Score linear in theta: psi_i(theta) = psi_a_i * theta + psi_b_i.
struct ScoreComponents {
  Eigen::VectorXd psi_a;
  Eigen::VectorXd psi_b;

  Eigen::Index size() const { return psi_a.size(); }
  Eigen::VectorXd at(double theta) const { return psi_a * theta + psi_b; }
  // Throws ValidationError on length mismatch, empty or non-finite entries.
  void validate() const;
};

// Cross-fitted nuisance predictions; which slots are filled depends on the model.
//   PLR   l_hat = E[Y|X], m_hat = E[D|X], g_hat = E[Y - D theta | X] (iv-type)
//   PLIV  l_hat = E[Y|X], m_hat = E[Z|X], r_hat = E[D|X]
//   IRM   g0_hat, g1_hat = E[Y|X, D=d], m_hat = P(D=1|X)
//   IIVM  g0_hat, g1_hat = E[Y|X, Z=z], m_hat = P(Z=1|X), r0_hat, r1_hat = E[D|X, Z=z]
struct NuisancePredictions {
  std::optional<Eigen::VectorXd> l_hat, m_hat, g_hat, g0_hat, g1_hat, r_hat, r0_hat, r1_hat;

  static constexpr std::array<std::string_view, 8> kSlots = {"l_hat",  "m_hat",  "g_hat",  "g0_hat",
                                                             "g1_hat", "r_hat",  "r0_hat", "r1_hat"};

  std::optional<Eigen::VectorXd>& slot(std::string_view name);
  const std::optional<Eigen::VectorXd>& slot(std::string_view name) const;
  // Names of filled slots, in kSlots order.
  std::vector<std::string> present() const;
  // Throws ValidationError naming the slot when absent.
  const Eigen::VectorXd& require(std::string_view name) const;
};

enum class PlrScore { partialling_out, iv_type };
enum class IrmScore { ate, atte };

// Stable CLI names: partialling-out, iv-type, ATE, ATTE, LATE.
PlrScore parse_plr_score(std::string_view name);
IrmScore parse_irm_score(std::string_view name);
std::string to_string(PlrScore s);
std::string to_string(IrmScore s);

// Clamps propensities into [trim, 1 - trim].
Eigen::VectorXd trim_propensity(const Eigen::VectorXd& m, double trim);
std::size_t count_trimmed(const Eigen::VectorXd& m, double trim);

//   partialling-out: psi_a = -(d - m)^2,   psi_b = (y - l)(d - m)
//   iv-type:         psi_a = -d (d - m),   psi_b = (y - g)(d - m)
// theta does not enter the components; it is accepted for signature symmetry
// with custom scores.
ScoreComponents plr_score(PlrScore variant, const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                          const NuisancePredictions& preds, double theta = 0.0);

// ATE:  psi_a = -1,
//       psi_b = g1 - g0 + d (y - g1) / m - (1 - d)(y - g0) / (1 - m)
// ATTE: psi_a = -d / p,
//       psi_b = d (y - g0) / p - m (1 - d)(y - g0) / (p (1 - m))
// with m trimmed and p the treated share. `treated_share` supplies p per
// observation (fold-local shares for dml1); by default p = mean(d).
ScoreComponents irm_score(IrmScore variant, const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                          const NuisancePredictions& preds, double trim = 0.01,
                          const std::optional<Eigen::VectorXd>& treated_share = std::nullopt);

// psi_a = -(d - r)(z - m), psi_b = (y - l)(z - m)
ScoreComponents pliv_score(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::VectorXd& z,
                           const NuisancePredictions& preds, double theta = 0.0);

// LATE: psi_b = g1 - g0 + z (y - g1) / m - (1 - z)(y - g0) / (1 - m)
//       psi_a = -(r1 - r0 + z (d - r1) / m - (1 - z)(d - r0) / (1 - m))
ScoreComponents iivm_score(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::VectorXd& z,
                           const NuisancePredictions& preds, double trim = 0.01);

// Non-orthogonal plug-in score (y - d theta - g) d, kept as a reference for
// simulations and the orthogonality diagnostic. Uses g_hat.
ScoreComponents naive_plr_score(const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                                const NuisancePredictions& preds);

struct ScoreInputs {
  const Eigen::VectorXd& y;
  const Eigen::VectorXd& d;
  const Eigen::MatrixXd& x;
  const Eigen::VectorXd* z;  // null without an instrument
  const NuisancePredictions& preds;
};

// User score: returns components evaluated at theta.
using ScoreFunction = std::function<ScoreComponents(const ScoreInputs&, double theta)>;

// Evaluates a user score at theta = 0, 1 and 2, rejects non-finite or
// wrongly sized output, and verifies psi(2) matches the extrapolation from
// psi(0) and psi(1) within 1e-10 (scaled by magnitude). Returns components
// psi_a = psi(1) - psi(0), psi_b = psi(0).
ScoreComponents evaluate_custom_score(const ScoreFunction& score, const ScoreInputs& inputs);

struct SlotDerivative {
  std::string slot;
  std::vector<double> eps;
  // Central difference (mean psi(eta + eps h) - mean psi(eta - eps h)) / (2 eps)
  // per eps.
  std::vector<double> derivative;
};

// Pathwise derivative of the mean score in the direction h, at theta0 and the
// supplied (true) nuisances, for every filled nuisance slot.
std::vector<SlotDerivative> orthogonality_diagnostic(
    const std::function<ScoreComponents(const NuisancePredictions&)>& build_score,
    const NuisancePredictions& truth, double theta0, const Eigen::VectorXd& direction,
    const std::vector<double>& eps_grid = {1e-3});

}  // namespace dml
