#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "dml/engine.hpp"
#include "dml/resampling.hpp"
#include "dml/simulation.hpp"

namespace dml {

struct InferenceExtras {
  const BootstrapResult* boot = nullptr;
  std::optional<JointConfint> joint;
  std::optional<std::vector<double>> p_adjusted;
  std::string p_adjust_method;
};

// One flat object per coefficient:
//   {"treatment", "coef", "se", "t", "p", "ci": [lo, hi], "n_rep", "algorithm", ...}
// A single-treatment fit serialises to that object, several treatments to an
// array of them.
nlohmann::json to_json(const FitResult& fit, const InferenceExtras& extras = {});

// Fixed-width table with header "coef std err t P>|t| 2.5 % 97.5 %" (the
// percent labels follow alpha).
std::string format_summary(const FitResult& fit);

// {"n": 4, "k": 2, "folds": [[[0, 1], [2, 3]]]}; the outer array holds
// repetitions.
FoldScheme folds_from_json(const nlohmann::json& j);
nlohmann::json folds_to_json(const FoldScheme& folds);

nlohmann::json to_json(const BiasStudySummary& s);
nlohmann::json to_json(const CoverageResult& c);

}  // namespace dml
