#include <doctest.h>

#include <cmath>

#include "dml/dgp.hpp"
#include "dml/engine.hpp"
#include "dml/errors.hpp"
#include "dml/scores.hpp"
#include "helpers.hpp"

using namespace dml;
using Eigen::VectorXd;

namespace {

VectorXd bernoulli_vector(const VectorXd& p, std::uint64_t seed) {
  Rng rng(seed);
  VectorXd out(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) out(i) = rng.bernoulli(p(i)) ? 1.0 : 0.0;
  return out;
}

VectorXd logistic(const VectorXd& v) { return (1.0 / (1.0 + (-v.array()).exp())).matrix(); }

void check_linear(const ScoreComponents& c) {
  // Extrapolating from two evaluations reproduces a third.
  for (double t : {-3.7, 0.25, 11.0}) {
    const VectorXd p0 = c.at(t), p1 = c.at(t + 1.0), p2 = c.at(t + 2.5);
    const VectorXd extrapolated = p0 + 2.5 * (p1 - p0);
    const double scale = std::max(1.0, p2.cwiseAbs().maxCoeff());
    CHECK((extrapolated - p2).cwiseAbs().maxCoeff() <= 1e-12 * scale * 16);
  }
}

struct IrmSample {
  VectorXd y, d, m, g0, g1;
};

IrmSample irm_sample(Eigen::Index n, std::uint64_t seed) {
  const VectorXd x = testing::normal_vector(n, seed);
  IrmSample s;
  s.m = logistic(0.8 * x);
  s.d = bernoulli_vector(s.m, seed + 1);
  s.g0 = x.array().sin();
  s.g1 = s.g0.array() + 0.5 + 0.2 * x.array();
  s.y = (s.d.array() * s.g1.array() + (1.0 - s.d.array()) * s.g0.array()).matrix() +
        testing::normal_vector(n, seed + 2);
  return s;
}

}  // namespace

TEST_CASE("noiseless partialling-out reduces to least squares") {
  const VectorXd d = testing::normal_vector(50, 1);
  const VectorXd y = 0.7 * d;
  NuisancePredictions p;
  p.l_hat = VectorXd::Zero(50);
  p.m_hat = VectorXd::Zero(50);
  const auto c = plr_score(PlrScore::partialling_out, y, d, p);
  const double theta = solve_theta_dml2(c.psi_a, c.psi_b);
  CHECK(theta == doctest::Approx(y.dot(d) / d.squaredNorm()).epsilon(1e-14));
  CHECK(theta == doctest::Approx(0.7).epsilon(1e-14));
}

TEST_CASE("zero residualized treatment is not identified") {
  const VectorXd d = testing::normal_vector(20, 2);
  NuisancePredictions p;
  p.l_hat = VectorXd::Zero(20);
  p.m_hat = d;
  const auto c = plr_score(PlrScore::partialling_out, testing::normal_vector(20, 3), d, p);
  CHECK(c.psi_a.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(solve_theta_dml2(c.psi_a, c.psi_b), IdentificationError);
}

TEST_CASE("plr score with true nuisances has mean near zero") {
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    DgpConfig cfg;
    cfg.n_obs = 1000;
    cfg.seed = seed;
    const auto sim = make_plr_data(cfg);
    NuisancePredictions p;
    p.l_hat = sim.truth.l0;
    p.m_hat = sim.truth.m0;
    const VectorXd psi =
        plr_score(PlrScore::partialling_out, sim.data.y(), sim.data.d().col(0), p).at(sim.truth.theta);
    const double sd = std::sqrt((psi.array() - psi.mean()).square().sum() / 999.0);
    inside += std::abs(psi.mean()) < 3.0 * sd / std::sqrt(1000.0);
  }
  CHECK(inside >= 95);
}

TEST_CASE("iv-type components") {
  const VectorXd d = testing::normal_vector(30, 4), y = testing::normal_vector(30, 5);
  NuisancePredictions p;
  p.m_hat = 0.3 * d;
  p.g_hat = 0.1 * y;
  const auto c = plr_score(PlrScore::iv_type, y, d, p);
  CHECK((c.psi_a + d.cwiseProduct(d - *p.m_hat)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(plr_score(PlrScore::partialling_out, y, d, p), ValidationError);  // l_hat missing
}

TEST_CASE("IRM ATE") {
  SUBCASE("perfect outcome fit leaves only the plug-in term") {
    const IrmSample s = irm_sample(100, 10);
    NuisancePredictions p;
    p.g0_hat = s.g0;
    p.g1_hat = s.g0.array() + 1.25;
    p.m_hat = s.m;
    const VectorXd y = (s.d.array() * p.g1_hat->array() + (1 - s.d.array()) * s.g0.array()).matrix();
    const auto c = irm_score(IrmScore::ate, y, s.d, p);
    CHECK(solve_theta_dml2(c.psi_a, c.psi_b) == doctest::Approx(1.25).epsilon(1e-14));
  }
  SUBCASE("psi_a is exactly -1") {
    const IrmSample s = irm_sample(300, 11);
    NuisancePredictions p;
    p.g0_hat = s.g0;
    p.g1_hat = s.g1;
    p.m_hat = s.m;
    const auto c = irm_score(IrmScore::ate, s.y, s.d, p);
    CHECK((c.psi_a.array() == -1.0).all());
    check_linear(c);
  }
  SUBCASE("trimming clamps propensities in denominators") {
    const Eigen::Vector2d y(1.0, 2.0), d(1.0, 0.0);
    NuisancePredictions p;
    p.g0_hat = VectorXd::Zero(2);
    p.g1_hat = VectorXd::Zero(2);
    p.m_hat = Eigen::Vector2d(1e-6, 1.0 - 1e-6);
    const auto c = irm_score(IrmScore::ate, y, d, p, 0.01);
    CHECK(c.psi_b(0) == doctest::Approx(1.0 / 0.01).epsilon(1e-14));
    CHECK(c.psi_b(1) == doctest::Approx(-2.0 / 0.01).epsilon(1e-12));
    CHECK(count_trimmed(*p.m_hat, 0.01) == 2);
  }
  SUBCASE("matches an independent AIPW computation") {
    const IrmSample s = irm_sample(200, 12);
    NuisancePredictions p;
    p.g0_hat = s.g0;
    p.g1_hat = s.g1;
    p.m_hat = s.m;
    const auto c = irm_score(IrmScore::ate, s.y, s.d, p, 0.0);
    double aipw = 0.0;
    for (Eigen::Index i = 0; i < 200; ++i) {
      const double mu1 = s.g1(i) + (s.d(i) == 1.0 ? (s.y(i) - s.g1(i)) / s.m(i) : 0.0);
      const double mu0 = s.g0(i) + (s.d(i) == 0.0 ? (s.y(i) - s.g0(i)) / (1.0 - s.m(i)) : 0.0);
      aipw += mu1 - mu0;
    }
    aipw /= 200.0;
    // psi_a is -1, so theta = mean(psi_b).
    CHECK(std::abs(c.psi_b.mean() - aipw) < 1e-12);
    CHECK(std::abs(solve_theta_dml2(c.psi_a, c.psi_b) - aipw) < 1e-12);
  }
  SUBCASE("non-binary treatment is rejected") {
    NuisancePredictions p;
    p.g0_hat = p.g1_hat = p.m_hat = VectorXd::Constant(3, 0.5);
    CHECK_THROWS_AS(irm_score(IrmScore::ate, VectorXd::Zero(3), Eigen::Vector3d(0, 0.5, 1), p), ValidationError);
  }
}

TEST_CASE("IRM ATTE") {
  const IrmSample s = irm_sample(400, 13);
  NuisancePredictions p;
  p.g0_hat = s.g0;
  p.g1_hat = s.g1;
  p.m_hat = s.m;
  const auto c = irm_score(IrmScore::atte, s.y, s.d, p);
  const double share = s.d.mean();
  CHECK((c.psi_a + s.d / share).cwiseAbs().maxCoeff() < 1e-15);
  check_linear(c);
  // With a perfect control-outcome fit the estimate is the treated mean of y - g0.
  VectorXd y = s.y;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (s.d(i) == 0.0) y(i) = s.g0(i);
  const auto c2 = irm_score(IrmScore::atte, y, s.d, p);
  const double treated_gap = (s.d.array() * (y - s.g0).array()).sum() / s.d.sum();
  CHECK(solve_theta_dml2(c2.psi_a, c2.psi_b) == doctest::Approx(treated_gap).epsilon(1e-12));
}

TEST_CASE("trimming") {
  const VectorXd m = Eigen::Vector4d(0.0, 0.005, 0.5, 0.999);
  const VectorXd once = trim_propensity(m, 0.01);
  CHECK((trim_propensity(once, 0.01).array() == once.array()).all());
  CHECK(once(0) == 0.01);
  CHECK(once(3) == 0.99);
  CHECK(once(2) == 0.5);
  CHECK_THROWS_AS(trim_propensity(m, 0.5), ValidationError);
  CHECK_THROWS_AS(trim_propensity(m, -0.1), ValidationError);
}

TEST_CASE("PLIV") {
  SUBCASE("instrument equal to treatment reduces to partialling-out") {
    const VectorXd d = testing::normal_vector(60, 20), y = testing::normal_vector(60, 21);
    NuisancePredictions p;
    p.l_hat = 0.3 * y;
    p.m_hat = 0.2 * d;
    p.r_hat = p.m_hat;
    const auto iv = pliv_score(y, d, d, p);
    const auto plr = plr_score(PlrScore::partialling_out, y, d, p);
    CHECK((iv.psi_a - plr.psi_a).cwiseAbs().maxCoeff() == 0.0);
    CHECK((iv.psi_b - plr.psi_b).cwiseAbs().maxCoeff() == 0.0);
    check_linear(iv);
  }
  SUBCASE("constant instrument residual is not identified") {
    const VectorXd z = testing::normal_vector(10, 22);
    NuisancePredictions p;
    p.l_hat = VectorXd::Zero(10);
    p.r_hat = VectorXd::Zero(10);
    p.m_hat = z;
    const auto c = pliv_score(testing::normal_vector(10, 23), testing::normal_vector(10, 24), z, p);
    CHECK_THROWS_AS(solve_theta_dml2(c.psi_a, c.psi_b), IdentificationError);
  }
  SUBCASE("noiseless linear IV design") {
    const Eigen::Index n = 500;
    const VectorXd x1 = testing::normal_vector(n, 30), w = testing::normal_vector(n, 31),
                   u = testing::normal_vector(n, 32);
    const VectorXd z = x1 + w;
    const VectorXd d = 0.5 * x1 + w + u;  // u is the endogenous part
    const VectorXd g = x1.array().cos();
    const double theta = -1.3;
    const VectorXd y = theta * d + g;
    NuisancePredictions p;
    p.m_hat = x1;
    p.r_hat = 0.5 * x1;
    p.l_hat = theta * *p.r_hat + g;
    const auto c = pliv_score(y, d, z, p);
    CHECK(std::abs(solve_theta_dml2(c.psi_a, c.psi_b) - theta) < 1e-10);
  }
}

TEST_CASE("IIVM LATE") {
  SUBCASE("perfect compliance reduces to the ATE score") {
    const IrmSample s = irm_sample(150, 40);
    NuisancePredictions p;
    p.g0_hat = s.g0;
    p.g1_hat = s.g1;
    p.m_hat = s.m;
    p.r0_hat = VectorXd::Zero(150);
    p.r1_hat = VectorXd::Ones(150);
    const auto late = iivm_score(s.y, s.d, s.d, p);
    const auto ate = irm_score(IrmScore::ate, s.y, s.d, p);
    CHECK((late.psi_a.array() == -1.0).all());
    CHECK((late.psi_b - ate.psi_b).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("no instrument variation is not identified") {
    NuisancePredictions p;
    p.g0_hat = p.g1_hat = VectorXd::Zero(4);
    p.r0_hat = p.r1_hat = VectorXd::Constant(4, 0.5);
    p.m_hat = VectorXd::Constant(4, 0.5);
    const Eigen::Vector4d z(0, 1, 0, 1), d(0, 1, 1, 0);
    const auto c = iivm_score(VectorXd::Zero(4), d, z, p);
    CHECK_THROWS_AS(solve_theta_dml2(c.psi_a, c.psi_b), IdentificationError);
  }
  SUBCASE("constructed compliers") {
    const Eigen::Index n = 2000;
    const VectorXd x = testing::normal_vector(n, 41);
    const VectorXd m = logistic(0.5 * x);
    const VectorXd z = bernoulli_vector(m, 42);
    // Always-takers 20%, never-takers 30%, compliers 50%.
    const VectorXd r0 = VectorXd::Constant(n, 0.2), r1 = VectorXd::Constant(n, 0.7);
    Rng rng(43);
    VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = rng.uniform();
      const bool always = u < 0.2, complier = u >= 0.2 && u < 0.7;
      d(i) = (always || (complier && z(i) == 1.0)) ? 1.0 : 0.0;
    }
    const double tau = 0.8;
    const VectorXd g = x.array().square();
    const VectorXd y = g + tau * d;
    NuisancePredictions p;
    p.m_hat = m;
    p.r0_hat = r0;
    p.r1_hat = r1;
    p.g0_hat = g + tau * r0;
    p.g1_hat = g + tau * r1;
    const auto c = iivm_score(y, d, z, p, 0.0);
    CHECK(std::abs(solve_theta_dml2(c.psi_a, c.psi_b) - tau) < 1e-10);
    check_linear(c);
  }
}

TEST_CASE("custom scores") {
  const VectorXd y = testing::normal_vector(40, 50), d = testing::normal_vector(40, 51);
  const Eigen::MatrixXd x = testing::normal_matrix(40, 2, 52);
  NuisancePredictions p;
  p.l_hat = 0.1 * y;
  p.m_hat = 0.2 * d;
  const ScoreInputs in{y, d, x, nullptr, p};

  const ScoreFunction plr = [](const ScoreInputs& s, double) {
    const VectorXd res = s.d - *s.preds.m_hat;
    return ScoreComponents{-res.cwiseProduct(res), (s.y - *s.preds.l_hat).cwiseProduct(res)};
  };
  const auto c = evaluate_custom_score(plr, in);
  const auto builtin_c = plr_score(PlrScore::partialling_out, y, d, p);
  CHECK((c.psi_a - builtin_c.psi_a).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((c.psi_b - builtin_c.psi_b).cwiseAbs().maxCoeff() == 0.0);

  const ScoreFunction with_nan = [](const ScoreInputs& s, double) {
    VectorXd a = VectorXd::Constant(s.y.size(), -1.0);
    a(3) = std::nan("");
    return ScoreComponents{a, s.y};
  };
  CHECK_THROWS_AS(evaluate_custom_score(with_nan, in), ValidationError);

  // Returns components whose assembled value is quadratic in theta.
  const ScoreFunction quadratic = [](const ScoreInputs& s, double theta) {
    return ScoreComponents{VectorXd::Constant(s.y.size(), theta), s.y};
  };
  try {
    evaluate_custom_score(quadratic, in);
    FAIL("expected linearity error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("not linear") != std::string::npos);
  }

  const ScoreFunction short_output = [](const ScoreInputs&, double) {
    return ScoreComponents{VectorXd::Ones(3), VectorXd::Ones(3)};
  };
  CHECK_THROWS_AS(evaluate_custom_score(short_output, in), ValidationError);
}

TEST_CASE("orthogonality diagnostic on a small sample") {
  DgpConfig cfg;
  cfg.n_obs = 20000;
  cfg.seed = 60;
  const auto sim = make_plr_data(cfg);
  const VectorXd y = sim.data.y(), d = sim.data.d().col(0);
  NuisancePredictions truth;
  truth.l_hat = sim.truth.l0;
  truth.m_hat = sim.truth.m0;
  const VectorXd h = sim.data.x().col(0);
  auto build = [&](const NuisancePredictions& p) { return plr_score(PlrScore::partialling_out, y, d, p); };
  const auto res = orthogonality_diagnostic(build, truth, sim.truth.theta, h, {1e-2, 1e-3});
  REQUIRE(res.size() == 2);
  for (const auto& r : res) {
    CHECK(r.derivative.size() == 2);
    for (double v : r.derivative) CHECK(std::abs(v) < 0.06);
  }
  const auto zero = orthogonality_diagnostic(build, truth, sim.truth.theta, VectorXd::Zero(20000));
  for (const auto& r : zero) CHECK(r.derivative[0] == 0.0);
}

TEST_CASE("score name parsing") {
  CHECK(parse_plr_score("partialling-out") == PlrScore::partialling_out);
  CHECK(parse_plr_score("iv-type") == PlrScore::iv_type);
  CHECK(parse_irm_score("ATTE") == IrmScore::atte);
  CHECK(to_string(IrmScore::ate) == "ATE");
  CHECK_THROWS_AS(parse_plr_score("ATE"), ValidationError);
}
