#pragma once

#include <cmath>
#include <initializer_list>
#include <string>

#include "dml/errors.hpp"
#include "dml/learners.hpp"

namespace dml::detail {

// Reads hyperparameters against a whitelist; unknown keys are rejected so
// typos in CLI specs fail loudly.
class ParamReader {
 public:
  ParamReader(std::string learner, const Params& params, std::initializer_list<const char*> allowed)
      : learner_(std::move(learner)), params_(params) {
    for (const auto& [key, value] : params_) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) throw ValidationError(learner_ + ": unknown hyperparameter '" + key + "'");
      if (!std::isfinite(value)) throw ValidationError(learner_ + ": hyperparameter '" + key + "' is not finite");
    }
  }

  double real(const std::string& key, double fallback, double min) const {
    const double v = get(key, fallback);
    if (v < min)
      throw ValidationError(learner_ + ": hyperparameter '" + key + "' must be >= " + std::to_string(min));
    return v;
  }

  long integer(const std::string& key, long fallback, long min) const {
    const double v = get(key, static_cast<double>(fallback));
    if (v != std::floor(v)) throw ValidationError(learner_ + ": hyperparameter '" + key + "' must be an integer");
    if (v < static_cast<double>(min))
      throw ValidationError(learner_ + ": hyperparameter '" + key + "' must be >= " + std::to_string(min));
    return static_cast<long>(v);
  }

  bool flag(const std::string& key, bool fallback) const {
    const double v = get(key, fallback ? 1.0 : 0.0);
    if (v != 0.0 && v != 1.0) throw ValidationError(learner_ + ": hyperparameter '" + key + "' must be 0 or 1");
    return v == 1.0;
  }

 private:
  double get(const std::string& key, double fallback) const {
    auto it = params_.find(key);
    return it == params_.end() ? fallback : it->second;
  }

  std::string learner_;
  const Params& params_;
};

}  // namespace dml::detail
