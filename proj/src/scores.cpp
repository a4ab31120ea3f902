#include "dml/scores.hpp"

#include <algorithm>
#include <cmath>

#include "dml/data.hpp"
#include "dml/errors.hpp"

namespace dml {

void ScoreComponents::validate() const {
  if (psi_a.size() != psi_b.size())
    throw ValidationError("score components differ in length (" + std::to_string(psi_a.size()) + " vs " +
                          std::to_string(psi_b.size()) + ")");
  if (psi_a.size() < 1) throw ValidationError("score components are empty");
  if (!psi_a.allFinite()) throw ValidationError("psi_a contains non-finite values");
  if (!psi_b.allFinite()) throw ValidationError("psi_b contains non-finite values");
}

std::optional<Eigen::VectorXd>& NuisancePredictions::slot(std::string_view name) {
  return const_cast<std::optional<Eigen::VectorXd>&>(std::as_const(*this).slot(name));
}

const std::optional<Eigen::VectorXd>& NuisancePredictions::slot(std::string_view name) const {
  if (name == "l_hat") return l_hat;
  if (name == "m_hat") return m_hat;
  if (name == "g_hat") return g_hat;
  if (name == "g0_hat") return g0_hat;
  if (name == "g1_hat") return g1_hat;
  if (name == "r_hat") return r_hat;
  if (name == "r0_hat") return r0_hat;
  if (name == "r1_hat") return r1_hat;
  throw ValidationError("unknown nuisance slot '" + std::string(name) + "'");
}

std::vector<std::string> NuisancePredictions::present() const {
  std::vector<std::string> out;
  for (auto s : kSlots)
    if (slot(s)) out.emplace_back(s);
  return out;
}

const Eigen::VectorXd& NuisancePredictions::require(std::string_view name) const {
  const auto& s = slot(name);
  if (!s) throw ValidationError("missing nuisance prediction '" + std::string(name) + "'");
  return *s;
}

PlrScore parse_plr_score(std::string_view name) {
  if (name == "partialling-out") return PlrScore::partialling_out;
  if (name == "iv-type") return PlrScore::iv_type;
  throw ValidationError("unknown PLR/PLIV score '" + std::string(name) + "'");
}

IrmScore parse_irm_score(std::string_view name) {
  if (name == "ATE") return IrmScore::ate;
  if (name == "ATTE") return IrmScore::atte;
  throw ValidationError("unknown IRM score '" + std::string(name) + "'");
}

std::string to_string(PlrScore s) { return s == PlrScore::iv_type ? "iv-type" : "partialling-out"; }
std::string to_string(IrmScore s) { return s == IrmScore::atte ? "ATTE" : "ATE"; }

Eigen::VectorXd trim_propensity(const Eigen::VectorXd& m, double trim) {
  if (!(trim >= 0.0 && trim < 0.5)) throw ValidationError("trimming threshold must lie in [0, 0.5)");
  return m.cwiseMax(trim).cwiseMin(1.0 - trim);
}

std::size_t count_trimmed(const Eigen::VectorXd& m, double trim) {
  std::size_t c = 0;
  for (Eigen::Index i = 0; i < m.size(); ++i) c += (m[i] < trim || m[i] > 1.0 - trim);
  return c;
}

namespace {

void check_length(const Eigen::VectorXd& v, Eigen::Index n, std::string_view what) {
  if (v.size() != n)
    throw ValidationError(std::string(what) + " has length " + std::to_string(v.size()) + ", expected " +
                          std::to_string(n));
}

}  // namespace

ScoreComponents plr_score(PlrScore variant, const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                          const NuisancePredictions& preds, double /*theta*/) {
  const Eigen::Index n = y.size();
  check_length(d, n, "d");
  const Eigen::VectorXd& m = preds.require("m_hat");
  check_length(m, n, "m_hat");
  const Eigen::VectorXd v = d - m;
  ScoreComponents s;
  if (variant == PlrScore::partialling_out) {
    const Eigen::VectorXd& l = preds.require("l_hat");
    check_length(l, n, "l_hat");
    s.psi_a = -v.array().square();
    s.psi_b = (y - l).cwiseProduct(v);
  } else {
    const Eigen::VectorXd& g = preds.require("g_hat");
    check_length(g, n, "g_hat");
    s.psi_a = -d.cwiseProduct(v);
    s.psi_b = (y - g).cwiseProduct(v);
  }
  return s;
}

ScoreComponents irm_score(IrmScore variant, const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                          const NuisancePredictions& preds, double trim,
                          const std::optional<Eigen::VectorXd>& treated_share) {
  const Eigen::Index n = y.size();
  check_length(d, n, "d");
  if (!is_binary(d)) throw ValidationError("IRM requires a binary treatment");
  const Eigen::VectorXd& g0 = preds.require("g0_hat");
  check_length(g0, n, "g0_hat");
  const Eigen::VectorXd m = trim_propensity(preds.require("m_hat"), trim);
  check_length(m, n, "m_hat");
  const Eigen::ArrayXd u0 = (y - g0).array();
  const Eigen::ArrayXd da = d.array();
  ScoreComponents s;
  if (variant == IrmScore::ate) {
    const Eigen::VectorXd& g1 = preds.require("g1_hat");
    check_length(g1, n, "g1_hat");
    const Eigen::ArrayXd u1 = (y - g1).array();
    s.psi_a = Eigen::VectorXd::Constant(n, -1.0);
    s.psi_b = ((g1 - g0).array() + da * u1 / m.array() - (1.0 - da) * u0 / (1.0 - m.array())).matrix();
  } else {
    Eigen::ArrayXd p;
    if (treated_share) {
      check_length(*treated_share, n, "treated_share");
      p = treated_share->array();
    } else {
      p = Eigen::ArrayXd::Constant(n, d.mean());
    }
    if ((p <= 0.0).any()) throw IdentificationError("ATTE: treated share is zero");
    s.psi_a = (-da / p).matrix();
    s.psi_b = (da * u0 / p - m.array() * (1.0 - da) * u0 / (p * (1.0 - m.array()))).matrix();
  }
  return s;
}

ScoreComponents pliv_score(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::VectorXd& z,
                           const NuisancePredictions& preds, double /*theta*/) {
  const Eigen::Index n = y.size();
  check_length(d, n, "d");
  if (z.size() == 0) throw ValidationError("PLIV requires an instrument");
  check_length(z, n, "z");
  const Eigen::VectorXd& l = preds.require("l_hat");
  const Eigen::VectorXd& m = preds.require("m_hat");
  const Eigen::VectorXd& r = preds.require("r_hat");
  check_length(l, n, "l_hat");
  check_length(m, n, "m_hat");
  check_length(r, n, "r_hat");
  const Eigen::VectorXd w = z - m;
  ScoreComponents s;
  s.psi_a = -(d - r).cwiseProduct(w);
  s.psi_b = (y - l).cwiseProduct(w);
  return s;
}

ScoreComponents iivm_score(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::VectorXd& z,
                           const NuisancePredictions& preds, double trim) {
  const Eigen::Index n = y.size();
  check_length(d, n, "d");
  if (z.size() == 0) throw ValidationError("IIVM requires an instrument");
  check_length(z, n, "z");
  if (!is_binary(d)) throw ValidationError("IIVM requires a binary treatment");
  if (!is_binary(z)) throw ValidationError("IIVM requires a binary instrument");
  const Eigen::VectorXd& g0 = preds.require("g0_hat");
  const Eigen::VectorXd& g1 = preds.require("g1_hat");
  const Eigen::VectorXd& r0 = preds.require("r0_hat");
  const Eigen::VectorXd& r1 = preds.require("r1_hat");
  for (auto [v, name] : {std::pair{&g0, "g0_hat"}, {&g1, "g1_hat"}, {&r0, "r0_hat"}, {&r1, "r1_hat"}})
    check_length(*v, n, name);
  const Eigen::VectorXd m = trim_propensity(preds.require("m_hat"), trim);
  check_length(m, n, "m_hat");
  const Eigen::ArrayXd za = z.array(), ma = m.array();
  ScoreComponents s;
  s.psi_b = ((g1 - g0).array() + za * (y - g1).array() / ma - (1.0 - za) * (y - g0).array() / (1.0 - ma))
                .matrix();
  s.psi_a = -((r1 - r0).array() + za * (d - r1).array() / ma - (1.0 - za) * (d - r0).array() / (1.0 - ma))
                 .matrix();
  return s;
}

ScoreComponents naive_plr_score(const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                                const NuisancePredictions& preds) {
  const Eigen::VectorXd& g = preds.require("g_hat");
  check_length(d, y.size(), "d");
  check_length(g, y.size(), "g_hat");
  ScoreComponents s;
  s.psi_a = -d.array().square();
  s.psi_b = (y - g).cwiseProduct(d);
  return s;
}

ScoreComponents evaluate_custom_score(const ScoreFunction& score, const ScoreInputs& inputs) {
  const Eigen::Index n = inputs.y.size();
  auto full = [&](double theta) {
    ScoreComponents c = score(inputs, theta);
    c.validate();
    if (c.size() != n)
      throw ValidationError("custom score returned " + std::to_string(c.size()) + " entries, expected " +
                            std::to_string(n));
    return c.at(theta);
  };
  const Eigen::VectorXd psi0 = full(0.0);
  const Eigen::VectorXd psi1 = full(1.0);
  const Eigen::VectorXd psi2 = full(2.0);
  const Eigen::VectorXd slope = psi1 - psi0;
  const Eigen::VectorXd predicted = psi0 + 2.0 * slope;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double scale = std::max({1.0, std::abs(psi0[i]), std::abs(psi1[i]), std::abs(psi2[i])});
    if (std::abs(psi2[i] - predicted[i]) > 1e-10 * scale)
      throw ValidationError("score not linear in theta (observation " + std::to_string(i) + ")");
  }
  return {slope, psi0};
}

std::vector<SlotDerivative> orthogonality_diagnostic(
    const std::function<ScoreComponents(const NuisancePredictions&)>& build_score,
    const NuisancePredictions& truth, double theta0, const Eigen::VectorXd& direction,
    const std::vector<double>& eps_grid) {
  if (eps_grid.empty()) throw ValidationError("orthogonality diagnostic: empty eps grid");
  for (double e : eps_grid)
    if (!(e > 0.0)) throw ValidationError("orthogonality diagnostic: eps must be positive");
  std::vector<SlotDerivative> out;
  for (const std::string& name : truth.present()) {
    if (truth.require(name).size() != direction.size())
      throw ValidationError("orthogonality diagnostic: direction length differs from nuisance '" + name + "'");
    SlotDerivative sd{name, eps_grid, {}};
    for (double eps : eps_grid) {
      auto mean_score = [&](double shift) {
        NuisancePredictions perturbed = truth;
        *perturbed.slot(name) += shift * direction;
        return build_score(perturbed).at(theta0).mean();
      };
      sd.derivative.push_back((mean_score(eps) - mean_score(-eps)) / (2.0 * eps));
    }
    out.push_back(std::move(sd));
  }
  return out;
}

}  // namespace dml
