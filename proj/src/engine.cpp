#include "dml/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "dml/errors.hpp"
#include "dml/parallel.hpp"
#include "dml/stats.hpp"

namespace dml {

namespace {

constexpr double kIdentificationTol = 1e-12;

}  // namespace

ModelKind parse_model(std::string_view name) {
  if (name == "plr" || name == "PLR") return ModelKind::plr;
  if (name == "pliv" || name == "PLIV") return ModelKind::pliv;
  if (name == "irm" || name == "IRM") return ModelKind::irm;
  if (name == "iivm" || name == "IIVM") return ModelKind::iivm;
  throw ValidationError("unknown model '" + std::string(name) + "'");
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "dml1") return Algorithm::dml1;
  if (name == "dml2") return Algorithm::dml2;
  throw ValidationError("unknown algorithm '" + std::string(name) + "'");
}

std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::plr: return "plr";
    case ModelKind::pliv: return "pliv";
    case ModelKind::irm: return "irm";
    case ModelKind::iivm: return "iivm";
  }
  return "?";
}

std::string to_string(Algorithm a) { return a == Algorithm::dml1 ? "dml1" : "dml2"; }

std::string default_score(ModelKind m) {
  switch (m) {
    case ModelKind::plr:
    case ModelKind::pliv: return "partialling-out";
    case ModelKind::irm: return "ATE";
    case ModelKind::iivm: return "LATE";
  }
  return "";
}

namespace {

std::string resolved_score(const FitSpec& spec) {
  if (spec.custom_score) return spec.score.empty() ? "custom" : spec.score;
  return spec.score.empty() ? default_score(spec.model) : spec.score;
}

std::vector<std::string> required_slots(const FitSpec& spec, const std::string& score) {
  switch (spec.model) {
    case ModelKind::plr:
      if (score == "iv-type") return {"ml_l", "ml_m", "ml_g"};
      return {"ml_l", "ml_m"};
    case ModelKind::pliv: return {"ml_l", "ml_m", "ml_r"};
    case ModelKind::irm: return {"ml_g", "ml_m"};
    case ModelKind::iivm: return {"ml_g", "ml_m", "ml_r"};
  }
  return {};
}

}  // namespace

void validate_spec(const DmlData& data, const FitSpec& spec) {
  const std::string score = resolved_score(spec);
  if (!spec.custom_score) {
    switch (spec.model) {
      case ModelKind::plr: parse_plr_score(score); break;
      case ModelKind::pliv:
        if (score != "partialling-out") throw ValidationError("PLIV supports only the partialling-out score");
        break;
      case ModelKind::irm: parse_irm_score(score); break;
      case ModelKind::iivm:
        if (score != "LATE") throw ValidationError("IIVM supports only the LATE score");
        break;
    }
  }
  const auto slots = required_slots(spec, score);
  for (const auto& slot : slots) {
    auto it = spec.learners.find(slot);
    if (it == spec.learners.end() || !it->second)
      throw ValidationError("model " + to_string(spec.model) + " with score " + score + " requires learner " +
                            slot);
  }
  for (const auto& [slot, learner] : spec.learners)
    if (std::find(slots.begin(), slots.end(), slot) == slots.end())
      throw ValidationError("learner slot " + slot + " is not used by model " + to_string(spec.model) +
                            " with score " + score);

  const bool interactive = spec.model == ModelKind::irm || spec.model == ModelKind::iivm;
  if (interactive) {
    if (spec.learners.at("ml_g")->kind() != LearnerKind::regressor)
      throw ValidationError("ml_g must be a regressor");
    if (spec.learners.at("ml_m")->kind() != LearnerKind::classifier)
      throw ValidationError("ml_m must be a classifier for model " + to_string(spec.model));
    if (spec.model == ModelKind::iivm && spec.learners.at("ml_r")->kind() != LearnerKind::classifier)
      throw ValidationError("ml_r must be a classifier for model iivm");
    const auto binary = check_binary_treatment(data);
    for (std::size_t j = 0; j < binary.size(); ++j)
      if (!binary[j])
        throw ValidationError("model " + to_string(spec.model) + " requires binary treatment; column '" +
                              data.d_names()[j] + "' is not 0/1");
  } else {
    // Partially linear models: a classifier is only usable on a 0/1 target.
    auto target_binary = [&](const std::string& slot) {
      if (slot == "ml_g") return false;
      if (slot == "ml_l") return is_binary(data.y());
      const bool on_z = spec.model == ModelKind::pliv && slot == "ml_m";
      if (on_z) return data.has_instrument() && is_binary(data.z().col(0));
      for (Eigen::Index j = 0; j < data.n_treatments(); ++j)
        if (!is_binary(data.d().col(j))) return false;
      return true;
    };
    for (const auto& slot : slots)
      if (spec.learners.at(slot)->kind() == LearnerKind::classifier && !target_binary(slot))
        throw ValidationError("learner " + slot + " is a classifier but its target is not 0/1");
  }
  const bool iv = spec.model == ModelKind::pliv || spec.model == ModelKind::iivm;
  if (iv && data.n_instruments() != 1)
    throw ValidationError("model " + to_string(spec.model) + " requires exactly one instrument column, got " +
                          std::to_string(data.n_instruments()));
  if (!iv && data.has_instrument())
    throw ValidationError("model " + to_string(spec.model) + " does not use instruments");
  if (spec.model == ModelKind::iivm && !is_binary(data.z().col(0)))
    throw ValidationError("model iivm requires a binary instrument");

  if (!(spec.alpha > 0.0 && spec.alpha <= 1.0)) throw ValidationError("alpha must lie in (0, 1]");
  if (!(spec.trim >= 0.0 && spec.trim < 0.5)) throw ValidationError("trimming threshold must lie in [0, 0.5)");
  const auto n = static_cast<std::size_t>(data.n_obs());
  if (spec.folds) {
    if (spec.folds->n() != n)
      throw ValidationError("fold scheme is for n=" + std::to_string(spec.folds->n()) + " but data has n=" +
                            std::to_string(n));
  } else {
    if (spec.n_folds < 1) throw ValidationError("n_folds must be at least 1");
    if (spec.n_folds > n) throw ValidationError("n_folds exceeds number of observations");
    if (spec.n_rep < 1) throw ValidationError("n_rep must be at least 1");
    if (spec.n_folds == 1 && spec.n_rep != 1)
      throw ValidationError("the no-split mode (n_folds=1) takes a single repetition");
  }
}

// ---------------------------------------------------------------------------
// Solvers

double solve_theta_dml2(const Eigen::VectorXd& psi_a, const Eigen::VectorXd& psi_b) {
  if (psi_a.size() != psi_b.size() || psi_a.size() == 0)
    throw ValidationError("solve_theta_dml2: psi_a and psi_b must be non-empty and equally long");
  const double ja = psi_a.mean();
  if (!(std::abs(ja) > kIdentificationTol))
    throw IdentificationError("theta not identified: mean(psi_a) = " + format_double(ja));
  return -psi_b.mean() / ja;
}

Dml1Solution solve_theta_dml1(const Eigen::VectorXd& psi_a, const Eigen::VectorXd& psi_b,
                              const std::vector<IndexList>& folds) {
  if (psi_a.size() != psi_b.size()) throw ValidationError("solve_theta_dml1: length mismatch");
  if (folds.empty()) throw ValidationError("solve_theta_dml1: no folds");
  Dml1Solution sol;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (folds[f].empty()) throw ValidationError("solve_theta_dml1: fold " + std::to_string(f) + " is empty");
    double sa = 0.0, sb = 0.0;
    for (std::size_t i : folds[f]) {
      sa += psi_a[static_cast<Eigen::Index>(i)];
      sb += psi_b[static_cast<Eigen::Index>(i)];
    }
    const double k = static_cast<double>(folds[f].size());
    if (!(std::abs(sa / k) > kIdentificationTol))
      throw IdentificationError("theta not identified in fold " + std::to_string(f) +
                                ": mean(psi_a) = " + format_double(sa / k));
    sol.fold_theta.push_back(-(sb / k) / (sa / k));
  }
  sol.theta = std::accumulate(sol.fold_theta.begin(), sol.fold_theta.end(), 0.0) /
              static_cast<double>(sol.fold_theta.size());
  return sol;
}

double standard_error(const Eigen::VectorXd& psi_at_theta, const Eigen::VectorXd& psi_a) {
  if (psi_at_theta.size() != psi_a.size() || psi_a.size() == 0)
    throw ValidationError("standard_error: vectors must be non-empty and equally long");
  const double ja = psi_a.mean();
  if (!(std::abs(ja) > kIdentificationTol))
    throw IdentificationError("standard error undefined: mean(psi_a) = " + format_double(ja));
  const double n = static_cast<double>(psi_a.size());
  const double sigma2 = psi_at_theta.squaredNorm() / n / (ja * ja);
  return std::sqrt(sigma2 / n);
}

std::pair<double, double> aggregate_repetitions(std::span<const double> rep_theta,
                                                std::span<const double> rep_se) {
  if (rep_theta.empty() || rep_theta.size() != rep_se.size())
    throw ValidationError("aggregate_repetitions: need equally many (>= 1) estimates and standard errors");
  if (rep_theta.size() == 1) return {rep_theta[0], rep_se[0]};
  const double theta = stats::median(rep_theta);
  std::vector<double> v(rep_theta.size());
  for (std::size_t r = 0; r < v.size(); ++r)
    v[r] = rep_se[r] * rep_se[r] + (rep_theta[r] - theta) * (rep_theta[r] - theta);
  return {theta, std::sqrt(stats::median(v))};
}

// ---------------------------------------------------------------------------
// Cross-fitting

namespace {

enum class Target { y, d, z, g_residual };
enum class Arm { all, d0, d1, z0, z1 };

struct UnitKind {
  const char* learner;
  Target target;
  Arm arm;
  const char* slot;
};

std::vector<UnitKind> stage_one_units(ModelKind model) {
  switch (model) {
    case ModelKind::plr:
      return {{"ml_l", Target::y, Arm::all, "l_hat"}, {"ml_m", Target::d, Arm::all, "m_hat"}};
    case ModelKind::pliv:
      return {{"ml_l", Target::y, Arm::all, "l_hat"},
              {"ml_m", Target::z, Arm::all, "m_hat"},
              {"ml_r", Target::d, Arm::all, "r_hat"}};
    case ModelKind::irm:
      return {{"ml_g", Target::y, Arm::d0, "g0_hat"},
              {"ml_g", Target::y, Arm::d1, "g1_hat"},
              {"ml_m", Target::d, Arm::all, "m_hat"}};
    case ModelKind::iivm:
      return {{"ml_g", Target::y, Arm::z0, "g0_hat"},
              {"ml_g", Target::y, Arm::z1, "g1_hat"},
              {"ml_m", Target::z, Arm::all, "m_hat"},
              {"ml_r", Target::d, Arm::z0, "r0_hat"},
              {"ml_r", Target::d, Arm::z1, "r1_hat"}};
  }
  return {};
}

const char* arm_label(Arm a) {
  switch (a) {
    case Arm::all: return "";
    case Arm::d0: return " (d=0)";
    case Arm::d1: return " (d=1)";
    case Arm::z0: return " (z=0)";
    case Arm::z1: return " (z=1)";
  }
  return "";
}

struct TreatmentInputs {
  Eigen::VectorXd y, d, z;
  Eigen::MatrixXd x;
};

class CrossFitter {
 public:
  CrossFitter(const FitSpec& spec, const FoldScheme& folds, std::size_t treatment, const TreatmentInputs& in)
      : spec_(spec), folds_(folds), treatment_(treatment), in_(in) {}

  // Fits every (rep, fold, unit) and writes out-of-fold predictions.
  void run(const std::vector<UnitKind>& units, std::size_t unit_offset, std::vector<NuisancePredictions>& preds,
           const std::vector<Eigen::VectorXd>* residual_targets, FitDiagnostics& diag) const {
    const std::size_t n_rep = folds_.n_rep(), k = folds_.k();
    const auto n = in_.y.size();
    for (auto& p : preds)
      for (const auto& u : units) p.slot(u.slot) = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());

    const std::size_t n_tasks = n_rep * k * units.size();
    std::vector<char> converged(n_tasks, 1);
    parallel_for(n_tasks, spec_.threads, [&](std::size_t task) {
      const std::size_t u = task % units.size();
      const std::size_t fold = (task / units.size()) % k;
      const std::size_t rep = task / (units.size() * k);
      const UnitKind& unit = units[u];
      const Eigen::VectorXd& target = unit.target == Target::y   ? in_.y
                                      : unit.target == Target::d ? in_.d
                                      : unit.target == Target::z ? in_.z
                                                                 : (*residual_targets)[rep];
      const std::string where = "rep " + std::to_string(rep) + ", fold " + std::to_string(fold) + ", learner " +
                                unit.learner + arm_label(unit.arm);
      IndexList train = folds_.train_indices(rep, fold);
      if (unit.arm != Arm::all) {
        const Eigen::VectorXd& by = (unit.arm == Arm::d0 || unit.arm == Arm::d1) ? in_.d : in_.z;
        const double want = (unit.arm == Arm::d1 || unit.arm == Arm::z1) ? 1.0 : 0.0;
        std::erase_if(train, [&](std::size_t i) { return by[static_cast<Eigen::Index>(i)] != want; });
      }
      if (train.empty()) throw LearnerError(where + ": no training observations");
      const IndexList& test = folds_.test_indices(rep, fold);
      try {
        auto learner = spec_.learners.at(unit.learner)->clone();
        learner->set_stream(derive_seed(spec_.seed, {treatment_, rep, fold, unit_offset + u}));
        learner->fit(in_.x(train, Eigen::all), target(train));
        const Eigen::VectorXd pred = learner->predict(in_.x(test, Eigen::all));
        if (!pred.allFinite()) throw LearnerError("non-finite predictions");
        (*preds[rep].slot(unit.slot))(test) = pred;
        converged[task] = learner->converged();
      } catch (const Error& e) {
        throw LearnerError(where + ": " + e.what());
      }
    });
    diag.learner_fits += n_tasks;
    diag.learner_not_converged += static_cast<std::size_t>(std::count(converged.begin(), converged.end(), 0));
    for (std::size_t r = 0; r < n_rep; ++r)
      for (const auto& u : units)
        if (!preds[r].slot(u.slot)->allFinite())
          throw LearnerError(std::string("cross-fitting left observations without a ") + u.slot +
                             " prediction in rep " + std::to_string(r));
  }

 private:
  const FitSpec& spec_;
  const FoldScheme& folds_;
  std::size_t treatment_;
  const TreatmentInputs& in_;
};

TreatmentInputs treatment_inputs(const DmlData& data, Eigen::Index j) {
  TreatmentInputs in;
  in.y = data.y();
  in.d = data.d().col(j);
  if (data.has_instrument()) in.z = data.z().col(0);
  in.x = data.covariates_for(j);
  return in;
}

}  // namespace

CrossFit cross_fit(const DmlData& data, const FitSpec& spec) {
  validate_spec(data, spec);
  const std::string score = resolved_score(spec);
  const auto n = static_cast<std::size_t>(data.n_obs());

  CrossFit cf{spec.folds ? *spec.folds : FoldScheme::no_split(n), {}, {}};
  if (!spec.folds && spec.n_folds >= 2) {
    std::optional<std::span<const double>> strata;
    Eigen::VectorXd strat_col;
    if (spec.stratify) {
      if (spec.model == ModelKind::iivm || spec.model == ModelKind::pliv)
        strat_col = data.z().col(0);
      else
        strat_col = data.d().col(0);
      if (!is_binary(strat_col)) throw ValidationError("stratified folds need a binary treatment/instrument");
      strata = std::span<const double>(strat_col.data(), static_cast<std::size_t>(strat_col.size()));
    }
    cf.folds = FoldScheme::generate(n, spec.n_folds, spec.n_rep, spec.seed, strata);
  }

  const auto units = stage_one_units(spec.model);
  for (Eigen::Index j = 0; j < data.n_treatments(); ++j) {
    const TreatmentInputs in = treatment_inputs(data, j);
    CrossFitTreatment t;
    t.name = data.d_names()[static_cast<std::size_t>(j)];
    t.rep_predictions.resize(cf.folds.n_rep());
    const CrossFitter fitter(spec, cf.folds, static_cast<std::size_t>(j), in);
    fitter.run(units, 0, t.rep_predictions, nullptr, cf.diagnostics);

    if (spec.model == ModelKind::plr && score == "iv-type") {
      // g targets E[Y - D theta | X]; theta comes from a preliminary
      // partialling-out solve on the same cross-fitted predictions.
      std::vector<Eigen::VectorXd> residual(cf.folds.n_rep());
      for (std::size_t r = 0; r < cf.folds.n_rep(); ++r) {
        const ScoreComponents po = plr_score(PlrScore::partialling_out, in.y, in.d, t.rep_predictions[r]);
        const double theta0 = solve_theta_dml2(po.psi_a, po.psi_b);
        t.rep_initial_theta.push_back(theta0);
        residual[r] = in.y - theta0 * in.d;
      }
      const std::vector<UnitKind> g_unit = {{"ml_g", Target::g_residual, Arm::all, "g_hat"}};
      fitter.run(g_unit, units.size(), t.rep_predictions, &residual, cf.diagnostics);
    }
    cf.treatments.push_back(std::move(t));
  }
  return cf;
}

FitResult estimate(const DmlData& data, const FitSpec& spec, const CrossFit& cf) {
  validate_spec(data, spec);
  const std::string score = resolved_score(spec);
  FitResult res;
  res.model = spec.model;
  res.score = score;
  res.algorithm = spec.algorithm;
  res.alpha = spec.alpha;
  res.n_obs = data.n_obs();
  res.n_folds = cf.folds.k();
  res.n_rep = cf.folds.n_rep();
  res.diagnostics = cf.diagnostics;
  res.diagnostics.trimmed = 0;
  const double z_crit = stats::normal_quantile(1.0 - spec.alpha / 2.0);

  for (Eigen::Index j = 0; j < data.n_treatments(); ++j) {
    const TreatmentInputs in = treatment_inputs(data, j);
    const CrossFitTreatment& t = cf.treatments.at(static_cast<std::size_t>(j));
    CoefResult coef;
    coef.name = t.name;
    for (std::size_t r = 0; r < cf.folds.n_rep(); ++r) {
      const NuisancePredictions& preds = t.rep_predictions.at(r);
      const auto& fold_lists = cf.folds.assignments()[r];
      ScoreComponents sc;
      if (spec.custom_score) {
        const ScoreInputs inputs{in.y, in.d, in.x, data.has_instrument() ? &in.z : nullptr, preds};
        sc = evaluate_custom_score(spec.custom_score, inputs);
      } else {
        switch (spec.model) {
          case ModelKind::plr: sc = plr_score(parse_plr_score(score), in.y, in.d, preds); break;
          case ModelKind::pliv: sc = pliv_score(in.y, in.d, in.z, preds); break;
          case ModelKind::irm: {
            std::optional<Eigen::VectorXd> share;
            if (parse_irm_score(score) == IrmScore::atte && spec.algorithm == Algorithm::dml1) {
              share = Eigen::VectorXd(in.d.size());
              for (const auto& fold : fold_lists) {
                const double p = in.d(fold).mean();
                (*share)(fold).setConstant(p);
              }
            }
            sc = irm_score(parse_irm_score(score), in.y, in.d, preds, spec.trim, share);
            break;
          }
          case ModelKind::iivm: sc = iivm_score(in.y, in.d, in.z, preds, spec.trim); break;
        }
      }
      if (preds.m_hat && (spec.model == ModelKind::irm || spec.model == ModelKind::iivm))
        res.diagnostics.trimmed += count_trimmed(*preds.m_hat, spec.trim);
      sc.validate();

      double theta;
      if (spec.algorithm == Algorithm::dml1) {
        const Dml1Solution sol = solve_theta_dml1(sc.psi_a, sc.psi_b, fold_lists);
        theta = sol.theta;
        coef.rep_fold_coef.push_back(sol.fold_theta);
      } else {
        theta = solve_theta_dml2(sc.psi_a, sc.psi_b);
      }
      coef.rep_coef.push_back(theta);
      coef.rep_se.push_back(standard_error(sc.at(theta), sc.psi_a));
      coef.rep_scores.push_back(std::move(sc));
    }
    std::tie(coef.coef, coef.se) = aggregate_repetitions(coef.rep_coef, coef.rep_se);
    if (!(coef.se > 0.0)) throw IdentificationError("standard error is zero for '" + coef.name + "'");
    coef.t_stat = coef.coef / coef.se;
    coef.p_value = 2.0 * (1.0 - stats::normal_cdf(std::abs(coef.t_stat)));
    coef.ci_lower = coef.coef - z_crit * coef.se;
    coef.ci_upper = coef.coef + z_crit * coef.se;
    res.coefs.push_back(std::move(coef));
  }
  return res;
}

FitResult fit(const DmlData& data, const FitSpec& spec) { return estimate(data, spec, cross_fit(data, spec)); }

// ---------------------------------------------------------------------------
// Bootstrap

BootstrapWeights parse_bootstrap_weights(std::string_view name) {
  if (name == "normal") return BootstrapWeights::normal;
  if (name == "bayes") return BootstrapWeights::bayes;
  if (name == "wild") return BootstrapWeights::wild;
  throw ValidationError("unknown bootstrap weights '" + std::string(name) + "'");
}

std::string to_string(BootstrapWeights w) {
  switch (w) {
    case BootstrapWeights::normal: return "normal";
    case BootstrapWeights::bayes: return "bayes";
    case BootstrapWeights::wild: return "wild";
  }
  return "?";
}

MultiplierDraw multiplier_draw(BootstrapWeights w) {
  switch (w) {
    case BootstrapWeights::normal:
      return [](Rng& rng, std::span<double> out) {
        for (double& v : out) v = rng.normal();
      };
    case BootstrapWeights::bayes:
      return [](Rng& rng, std::span<double> out) {
        for (double& v : out) v = rng.exponential() - 1.0;
      };
    case BootstrapWeights::wild:
      // Mammen's two-point distribution: mean 0, variance 1, third moment 1.
      return [](Rng& rng, std::span<double> out) {
        const double s5 = std::sqrt(5.0);
        const double p_low = (s5 + 1.0) / (2.0 * s5);
        for (double& v : out) v = rng.uniform() < p_low ? (1.0 - s5) / 2.0 : (1.0 + s5) / 2.0;
      };
  }
  throw ValidationError("unknown bootstrap weights");
}

BootstrapResult bootstrap(const FitResult& fit, BootstrapWeights weights, std::size_t n_boot, std::uint64_t seed,
                          std::size_t threads) {
  return bootstrap(fit, multiplier_draw(weights), to_string(weights), n_boot, seed, threads);
}

BootstrapResult bootstrap(const FitResult& fit, const MultiplierDraw& draw, std::string label, std::size_t n_boot,
                          std::uint64_t seed, std::size_t threads) {
  if (fit.coefs.empty() || fit.coefs.front().rep_scores.empty())
    throw ValidationError("bootstrap requires a fitted model with stored scores");
  if (n_boot < 1) throw ValidationError("bootstrap requires at least one replication");
  const std::size_t p = fit.coefs.size();
  const Eigen::Index n = fit.n_obs;
  BootstrapResult out;
  out.weights = std::move(label);
  out.n_boot = n_boot;
  for (std::size_t r = 0; r < fit.n_rep; ++r) {
    // Column j holds psi_j(theta_r) / (n |J_j| se_j), so a draw is one
    // matrix-vector product.
    Eigen::MatrixXd scaled(n, static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) {
      const CoefResult& c = fit.coefs[j];
      const double ja = std::abs(c.rep_scores[r].psi_a.mean());
      scaled.col(static_cast<Eigen::Index>(j)) = c.psi(r) / (static_cast<double>(n) * ja * c.rep_se[r]);
    }
    Eigen::MatrixXd t(static_cast<Eigen::Index>(n_boot), static_cast<Eigen::Index>(p));
    parallel_for(n_boot, threads, [&](std::size_t b) {
      Rng rng(derive_seed(seed, {r, b}));
      Eigen::VectorXd xi(n);
      draw(rng, std::span<double>(xi.data(), static_cast<std::size_t>(n)));
      t.row(static_cast<Eigen::Index>(b)) = (scaled.transpose() * xi).transpose();
    });
    out.t_stats.push_back(std::move(t));
  }
  return out;
}

JointConfint joint_confint(const FitResult& fit, const BootstrapResult& boot, double alpha) {
  if (boot.t_stats.size() != fit.n_rep || boot.t_stats.empty())
    throw ValidationError("joint_confint: bootstrap results missing or from a different fit");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("joint_confint: alpha must lie in (0, 1)");
  std::vector<double> crit;
  for (const auto& t : boot.t_stats) {
    const Eigen::VectorXd max_abs = t.cwiseAbs().rowwise().maxCoeff();
    crit.push_back(stats::quantile(std::span<const double>(max_abs.data(), static_cast<std::size_t>(max_abs.size())),
                                   1.0 - alpha));
  }
  JointConfint out;
  out.critical_value = stats::median(crit);
  for (const auto& c : fit.coefs) {
    out.lower.push_back(c.coef - out.critical_value * c.se);
    out.upper.push_back(c.coef + out.critical_value * c.se);
  }
  return out;
}

PAdjustMethod parse_p_adjust(std::string_view name) {
  if (name == "romano-wolf" || name == "rw") return PAdjustMethod::romano_wolf;
  if (name == "bonferroni") return PAdjustMethod::bonferroni;
  if (name == "holm") return PAdjustMethod::holm;
  throw ValidationError("unknown p-value adjustment '" + std::string(name) + "'");
}

std::vector<double> bonferroni(std::span<const double> p) {
  std::vector<double> out;
  for (double v : p) out.push_back(std::min(1.0, static_cast<double>(p.size()) * v));
  return out;
}

std::vector<double> holm(std::span<const double> p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> out(m);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double adj = std::min(1.0, static_cast<double>(m - k) * p[order[k]]);
    running = std::max(running, adj);
    out[order[k]] = running;
  }
  return out;
}

std::vector<double> romano_wolf(std::span<const double> t_obs, const Eigen::MatrixXd& t_boot) {
  const std::size_t m = t_obs.size();
  if (static_cast<std::size_t>(t_boot.cols()) != m || t_boot.rows() < 1)
    throw ValidationError("romano_wolf: bootstrap matrix must be B x p with B >= 1");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(t_obs[a]) > std::abs(t_obs[b]); });
  const Eigen::MatrixXd abs_boot = t_boot.cwiseAbs();
  std::vector<double> out(m);
  double running = 0.0;
  for (std::size_t step = 0; step < m; ++step) {
    const double stat = std::abs(t_obs[order[step]]);
    std::size_t exceed = 0;
    for (Eigen::Index b = 0; b < abs_boot.rows(); ++b) {
      double mx = 0.0;
      for (std::size_t s = step; s < m; ++s) mx = std::max(mx, abs_boot(b, static_cast<Eigen::Index>(order[s])));
      exceed += mx >= stat;
    }
    const double p = std::min(1.0, static_cast<double>(exceed) / static_cast<double>(abs_boot.rows()));
    running = std::max(running, p);
    out[order[step]] = running;
  }
  return out;
}

std::vector<double> p_adjust(const FitResult& fit, PAdjustMethod method, const BootstrapResult* boot) {
  std::vector<double> raw;
  for (const auto& c : fit.coefs) raw.push_back(c.p_value);
  switch (method) {
    case PAdjustMethod::bonferroni: return bonferroni(raw);
    case PAdjustMethod::holm: return holm(raw);
    case PAdjustMethod::romano_wolf: break;
  }
  if (!boot || boot->t_stats.size() != fit.n_rep)
    throw ValidationError("romano-wolf adjustment requires bootstrap results for this fit");
  if (fit.coefs.size() == 1) return raw;
  std::vector<std::vector<double>> per_coef(fit.coefs.size());
  for (std::size_t r = 0; r < fit.n_rep; ++r) {
    std::vector<double> t_obs;
    for (const auto& c : fit.coefs) t_obs.push_back(c.rep_coef[r] / c.rep_se[r]);
    const auto adj = romano_wolf(t_obs, boot->t_stats[r]);
    for (std::size_t j = 0; j < adj.size(); ++j) per_coef[j].push_back(adj[j]);
  }
  std::vector<double> out;
  for (const auto& v : per_coef) out.push_back(stats::median(v));
  return out;
}

}  // namespace dml
