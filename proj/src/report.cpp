#include "dml/report.hpp"

#include <cstdio>
#include <sstream>

#include "dml/errors.hpp"

namespace dml {

namespace {

nlohmann::json coef_json(const FitResult& fit, std::size_t j, const InferenceExtras& extras) {
  const CoefResult& c = fit.coefs[j];
  nlohmann::json o;
  o["treatment"] = c.name;
  o["coef"] = c.coef;
  o["se"] = c.se;
  o["t"] = c.t_stat;
  o["p"] = c.p_value;
  o["ci"] = {c.ci_lower, c.ci_upper};
  o["n_rep"] = fit.n_rep;
  o["algorithm"] = to_string(fit.algorithm);
  o["model"] = to_string(fit.model);
  o["score"] = fit.score;
  o["alpha"] = fit.alpha;
  o["n_obs"] = fit.n_obs;
  o["n_folds"] = fit.n_folds;
  if (fit.n_rep > 1) {
    o["rep_coef"] = c.rep_coef;
    o["rep_se"] = c.rep_se;
  }
  if (extras.boot && extras.joint) {
    o["bootstrap"] = {{"weights", extras.boot->weights},
                      {"n_boot", extras.boot->n_boot},
                      {"critical_value", extras.joint->critical_value},
                      {"joint_ci", {extras.joint->lower[j], extras.joint->upper[j]}}};
  }
  if (extras.p_adjusted) o["p_adjusted"] = {{"method", extras.p_adjust_method}, {"p", (*extras.p_adjusted)[j]}};
  return o;
}

std::string percent_label(double q) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g %%", q * 100.0);
  return buf;
}

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json summary_json(const EstimatorSummary& s) {
  return {{"mean_bias", s.mean_bias}, {"sd", optional_number(s.sd)}, {"mc_se", optional_number(s.mc_se)}};
}

}  // namespace

nlohmann::json to_json(const FitResult& fit, const InferenceExtras& extras) {
  if (fit.coefs.size() == 1) return coef_json(fit, 0, extras);
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t j = 0; j < fit.coefs.size(); ++j) arr.push_back(coef_json(fit, j, extras));
  return arr;
}

std::string format_summary(const FitResult& fit) {
  std::size_t width = 1;
  for (const auto& c : fit.coefs) width = std::max(width, c.name.size());
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %9s %9s %9s %9s %9s %9s\n", static_cast<int>(width), "", "coef", "std err",
                "t", "P>|t|", percent_label(fit.alpha / 2.0).c_str(), percent_label(1.0 - fit.alpha / 2.0).c_str());
  out << buf;
  for (const auto& c : fit.coefs) {
    std::snprintf(buf, sizeof buf, "%-*s %9.4f %9.4f %9.4f %9.4f %9.4f %9.4f\n", static_cast<int>(width),
                  c.name.c_str(), c.coef, c.se, c.t_stat, c.p_value, c.ci_lower, c.ci_upper);
    out << buf;
  }
  return out.str();
}

FoldScheme folds_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || !j.contains("n") || !j.contains("folds"))
      throw ValidationError("fold JSON must be an object with keys n and folds");
    const auto n = j.at("n").get<std::size_t>();
    auto assignments = j.at("folds").get<std::vector<std::vector<IndexList>>>();
    FoldScheme s = FoldScheme::from_assignments(n, std::move(assignments));
    if (j.contains("k") && j.at("k").get<std::size_t>() != s.k())
      throw ValidationError("fold JSON: k does not match the number of folds");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("fold JSON: ") + e.what());
  }
}

nlohmann::json folds_to_json(const FoldScheme& folds) {
  return {{"n", folds.n()}, {"k", folds.k()}, {"folds", folds.assignments()}};
}

nlohmann::json to_json(const BiasStudySummary& s) {
  return {{"n_reps", s.n_reps},
          {"theta", s.theta},
          {"naive", summary_json(s.naive)},
          {"nosplit", summary_json(s.nosplit)},
          {"dml", summary_json(s.dml)},
          {"dml_standardized",
           {{"mean", s.standardized_mean},
            {"sd", optional_number(s.standardized_sd)},
            {"z", optional_number(s.standardized_z)},
            {"skewness", optional_number(s.skewness)},
            {"excess_kurtosis", optional_number(s.excess_kurtosis)}}}};
}

nlohmann::json to_json(const CoverageResult& c) {
  nlohmann::json algos = nlohmann::json::array();
  for (const auto& a : c.algorithms)
    algos.push_back({{"algorithm", a.algorithm},
                     {"coverage", a.coverage},
                     {"binomial_se", a.binomial_se},
                     {"mean_coef", a.mean_coef},
                     {"mean_se", a.mean_se},
                     {"mean_ci_width", a.mean_ci_width}});
  return {{"n_reps", c.n_reps}, {"alpha", c.alpha}, {"theta", c.theta}, {"algorithms", algos}};
}

}  // namespace dml
