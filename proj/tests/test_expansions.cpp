#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pvs/expansions.hpp"
#include "support.hpp"

using namespace pvs;

namespace {

Gaussian gauss1(double m, double v) {
  return {Eigen::VectorXd::Constant(1, m), Eigen::MatrixXd::Constant(1, 1, v)};
}

Eigen::VectorXd vec1(double x) { return Eigen::VectorXd::Constant(1, x); }

}  // namespace

TEST_CASE("gslr is exact for affine models") {
  const QuadratureRule rule = gauss_hermite_rule(5, 1);
  auto cm = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(2.0 * x + vec1(1.0)); };
  auto cc = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Constant(1, 1, 0.5); };
  for (double m : {-1.0, 0.0, 2.5}) {
    const AffineRegression reg = gslr(cm, cc, gauss1(m, 1.7), rule);
    CHECK(reg.gain(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(reg.offset(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(reg.noise_cov(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("gslr on quadratic conditional means") {
  const QuadratureRule rule = gauss_hermite_rule(5, 1);
  auto cm = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(x.array().square()); };

  // y = x^2 + w with V[w] = 0.1, marg N(0,1): A=0, b=1, noise 2.1
  {
    auto cc = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Constant(1, 1, 0.1); };
    const AffineRegression reg = gslr(cm, cc, gauss1(0, 1), rule);
    CHECK(reg.gain(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(reg.offset(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(reg.noise_cov(0, 0) == doctest::Approx(2.1).epsilon(1e-12));
  }
  // marg N(1,1), no conditional noise: A=2, b=0, noise 2
  {
    auto cc = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(1, 1); };
    const AffineRegression reg = gslr(cm, cc, gauss1(1, 1), rule);
    CHECK(reg.gain(0, 0) == doctest::Approx(2.0).epsilon(1e-11));
    CHECK(reg.offset(0) == doctest::Approx(0.0).epsilon(1e-11));
    CHECK(reg.noise_cov(0, 0) == doctest::Approx(2.0).epsilon(1e-11));
  }
}

TEST_CASE("gslr minimizes mean squared error") {
  const QuadratureRule rule = gauss_hermite_rule(9, 1);
  auto cm = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(x.array().sin()); };
  auto cc = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Constant(1, 1, 0.2); };
  const Gaussian marg = gauss1(0.4, 1.1);
  const AffineRegression reg = gslr(cm, cc, marg, rule);

  auto mse = [&](double a, double b) {
    // E[(y - a x - b)^2] = E[(E[y|x] - a x - b)^2] + E[V[y|x]]
    return expect(rule, marg,
                  [&](const Eigen::VectorXd& x) {
                    const double r = std::sin(x(0)) - a * x(0) - b;
                    return r * r;
                  }) +
           0.2;
  };
  const double best = mse(reg.gain(0, 0), reg.offset(0));
  for (double da : {-1e-3, 0.0, 1e-3}) {
    for (double db : {-1e-3, 0.0, 1e-3}) {
      CHECK(mse(reg.gain(0, 0) + da, reg.offset(0) + db) >= best - 1e-12);
    }
  }
}

TEST_CASE("regression_to_dyn_quadratic coefficient values") {
  {
    const PairQuadratic q = regression_to_dyn_quadratic(
        {Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1)});
    CHECK(q.block_nn(0, 0) == doctest::Approx(1.0));
    CHECK(q.block_nc(0, 0) == doctest::Approx(1.0));
    CHECK(q.block_cc(0, 0) == doctest::Approx(1.0));
    CHECK(q.lin_n(0) == doctest::Approx(0.0));
    CHECK(q.lin_c(0) == doctest::Approx(0.0));
    CHECK(q.constant == doctest::Approx(-0.9189385332046727).epsilon(1e-12));
  }
  {
    const PairQuadratic q = regression_to_dyn_quadratic({Eigen::MatrixXd::Zero(1, 1),
                                                         Eigen::VectorXd::Ones(1),
                                                         Eigen::MatrixXd::Constant(1, 1, 2.0)});
    CHECK(q.block_nn(0, 0) == doctest::Approx(0.5));
    CHECK(q.block_cc(0, 0) == doctest::Approx(0.0));
    CHECK(q.lin_n(0) == doctest::Approx(0.5));
    CHECK(q.lin_c(0) == doctest::Approx(0.0));
  }
}

TEST_CASE("regression_to_meas_quadratic coefficient values") {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  {
    const Quadratic q = regression_to_meas_quadratic({one, zero, one}, vec1(0.0));
    CHECK(q.curvature(0, 0) == doctest::Approx(1.0));
    CHECK(q.linear(0) == doctest::Approx(0.0));
    CHECK(q.constant == doctest::Approx(-0.9189385332046727).epsilon(1e-12));
  }
  {
    const Quadratic q = regression_to_meas_quadratic({one, zero, one}, vec1(1.0));
    CHECK(q.curvature(0, 0) == doctest::Approx(1.0));
    CHECK(q.linear(0) == doctest::Approx(1.0));
    CHECK(q.constant == doctest::Approx(-1.4189385332046727).epsilon(1e-12));
  }
}

TEST_CASE("fourier_hermite recovers quadratics exactly") {
  std::mt19937_64 gen(55);
  const QuadratureRule rule = gauss_hermite_rule(3, 2);
  for (int trial = 0; trial < 10; ++trial) {
    Quadratic target{testsupport::random_spd(2, gen) -
                         1.5 * Eigen::MatrixXd::Identity(2, 2),  // may be indefinite
                     testsupport::random_vec(2, gen), testsupport::random_vec(1, gen)(0)};
    Gaussian marg{testsupport::random_vec(2, gen), testsupport::random_spd(2, gen)};
    const Quadratic rec = fourier_hermite(
        [&](const Eigen::VectorXd& x) { return target(x); }, marg, rule);
    CHECK((rec.curvature - target.curvature).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((rec.linear - target.linear).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(rec.constant == doctest::Approx(target.constant).epsilon(1e-9));
  }
}

TEST_CASE("fourier_hermite of linear and cosine functions") {
  {
    const Quadratic q = fourier_hermite([](const Eigen::VectorXd& x) { return x(0); },
                                        gauss1(0, 1), gauss_hermite_rule(5, 1));
    CHECK(std::abs(q.curvature(0, 0)) < 1e-12);
    CHECK(q.linear(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(q.constant) < 1e-12);
  }
  {
    // analytic Gaussian expectations: E[cos] = e^{-1/2}, E[-sin] = 0, E[-cos] = -e^{-1/2}
    const Quadratic q = fourier_hermite([](const Eigen::VectorXd& x) { return std::cos(x(0)); },
                                        gauss1(0, 1), gauss_hermite_rule(20, 1));
    const double e = std::exp(-0.5);
    CHECK(q.curvature(0, 0) == doctest::Approx(e).epsilon(1e-9));
    CHECK(q.linear(0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(q.constant == doctest::Approx(1.5 * e).epsilon(1e-9));
  }
  CHECK_THROWS_AS(
      fourier_hermite([](const Eigen::VectorXd& x) { return std::log(x(0)); },  // nan at x<0
                      gauss1(0, 1), gauss_hermite_rule(5, 1)),
      EvaluationError);
}

TEST_CASE("fourier_hermite invariant to covariance square root") {
  // expansion coefficients must not depend on which square root the rule sees;
  // equivalently they are invariant under rotating the unit nodes
  std::mt19937_64 gen(91);
  Gaussian marg{testsupport::random_vec(2, gen), testsupport::random_spd(2, gen)};
  auto g = [](const Eigen::VectorXd& x) { return std::sin(x(0)) + 0.3 * x(1) * x(1); };
  const QuadratureRule rule = gauss_hermite_rule(15, 2);

  QuadratureRule rotated = rule;
  const double c = std::cos(0.7), s = std::sin(0.7);
  Eigen::Matrix2d rot;
  rot << c, -s, s, c;
  rotated.nodes = rule.nodes * rot.transpose();

  const Quadratic a = fourier_hermite(g, marg, rule);
  const Quadratic b = fourier_hermite(g, marg, rotated);
  CHECK((a.curvature - b.curvature).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((a.linear - b.linear).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(a.constant == doctest::Approx(b.constant).epsilon(1e-8));
}

namespace {

struct ExpansionFixture {
  LinearGaussianModel model;
  std::vector<Eigen::VectorXd> observations;
  std::vector<Gaussian> marginals;
  std::vector<PairGaussian> joints;

  static ExpansionFixture make(std::mt19937_64& gen, int T) {
    const int d = 2, m = 1;
    Eigen::MatrixXd A = 0.5 * testsupport::random_matrix(d, d, gen);
    ExpansionFixture fx{
        linear_gaussian_model(A, testsupport::random_vec(d, gen), testsupport::random_spd(d, gen),
                              testsupport::random_matrix(m, d, gen), testsupport::random_vec(m, gen),
                              testsupport::random_spd(m, gen), testsupport::random_vec(d, gen),
                              testsupport::random_spd(d, gen)),
        {}, {}, {}};
    for (int k = 0; k < T; ++k) fx.observations.push_back(testsupport::random_vec(m, gen));
    fx.marginals.push_back(fx.model.prior_moments());
    for (int k = 0; k < T; ++k) {
      AffineConditional cond{fx.model.A(), fx.model.b(), fx.model.Q(), Direction::forward};
      fx.joints.push_back(pairwise_joint(fx.marginals.back(), cond));
      fx.marginals.push_back(marginalize_affine(fx.marginals.back(), cond));
    }
    return fx;
  }
};

}  // namespace

TEST_CASE("expand_model: both methods exact on linear-Gaussian models") {
  std::mt19937_64 gen(101);
  const ExpansionFixture fx = ExpansionFixture::make(gen, 4);
  const ModelExpansion exact = exact_linear_expansion(fx.model, fx.observations);

  for (ExpansionMethod method : {ExpansionMethod::gslr, ExpansionMethod::fourier_hermite}) {
    const ModelExpansion ex =
        expand_model(fx.model, fx.observations, fx.marginals, fx.joints, method,
                     {QuadratureSpec::Kind::gauss_hermite, 5});
    for (int k = 0; k < 4; ++k) {
      CHECK((ex.dyn[k].block_nn - exact.dyn[k].block_nn).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((ex.dyn[k].block_cc - exact.dyn[k].block_cc).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((ex.dyn[k].block_nc - exact.dyn[k].block_nc).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((ex.dyn[k].lin_n - exact.dyn[k].lin_n).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((ex.dyn[k].lin_c - exact.dyn[k].lin_c).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(ex.dyn[k].constant == doctest::Approx(exact.dyn[k].constant).epsilon(1e-8));
      CHECK((ex.meas[k + 1].curvature - exact.meas[k + 1].curvature).cwiseAbs().maxCoeff() <
            1e-8);
      CHECK((ex.meas[k + 1].linear - exact.meas[k + 1].linear).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(ex.meas[k + 1].constant == doctest::Approx(exact.meas[k + 1].constant).epsilon(1e-8));
    }
    CHECK((ex.prior.curvature - exact.prior.curvature).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((ex.prior.linear - exact.prior.linear).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(ex.prior.constant == doctest::Approx(exact.prior.constant).epsilon(1e-8));
  }
}

TEST_CASE("expand_model: FH and GSLR differ on the pendulum") {
  const PendulumModel model = pendulum_model(0.1, 9.81, 0.1, 0.1);
  const int T = 3;
  std::vector<Eigen::VectorXd> obs(T, vec1(0.3));
  std::vector<Gaussian> margs;
  std::vector<PairGaussian> joints;
  Gaussian marg = model.prior_moments();
  margs.push_back(marg);
  for (int k = 0; k < T; ++k) {
    AffineConditional cond{Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2),
                           0.5 * Eigen::MatrixXd::Identity(2, 2), Direction::forward};
    joints.push_back(pairwise_joint(margs.back(), cond));
    margs.push_back(marginalize_affine(margs.back(), cond));
  }
  const QuadratureSpec spec{QuadratureSpec::Kind::gauss_hermite, 5};
  const ModelExpansion a =
      expand_model(model, obs, margs, joints, ExpansionMethod::gslr, spec);
  const ModelExpansion b =
      expand_model(model, obs, margs, joints, ExpansionMethod::fourier_hermite, spec);
  // the FH expansion carries curvature the regression cannot represent
  CHECK((a.dyn[0].block_cc - b.dyn[0].block_cc).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("expand_model: GSLR measurement is uninformative for the SV model") {
  const StochasticVolatilityModel model = stochastic_volatility_model();
  const QuadratureRule rule = gauss_hermite_rule(11, 1);
  const AffineRegression reg = gslr(
      [&](const Eigen::VectorXd& x) { return model.meas_cond_mean(1, x); },
      [&](const Eigen::VectorXd& x) { return model.meas_cond_cov(1, x); }, gauss1(0, 1), rule);
  // E[y|x] = 0 identically, so the regression gain and the curvature vanish
  CHECK(std::abs(reg.gain(0, 0)) < 1e-12);
  const Quadratic lh = regression_to_meas_quadratic(reg, vec1(0.7));
  CHECK(std::abs(lh.curvature(0, 0)) < 1e-12);

  // Fourier-Hermite sees the state-dependent variance
  const Quadratic fh = fourier_hermite(
      [&](const Eigen::VectorXd& x) { return model.meas_logpdf(1, vec1(0.7), x); }, gauss1(0, 1),
      gauss_hermite_rule(11, 1));
  CHECK(std::abs(fh.curvature(0, 0)) > 1e-3);
}

TEST_CASE("FH pair split reassembles the stacked quadratic") {
  std::mt19937_64 gen(202);
  const ExpansionFixture fx = ExpansionFixture::make(gen, 2);
  const ModelExpansion ex =
      expand_model(fx.model, fx.observations, fx.marginals, fx.joints,
                   ExpansionMethod::fourier_hermite, {QuadratureSpec::Kind::gauss_hermite, 4});
  for (int k = 0; k < 2; ++k) {
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::VectorXd xn = testsupport::random_vec(2, gen);
      const Eigen::VectorXd xc = testsupport::random_vec(2, gen);
      CHECK(ex.dyn[k](xn, xc) ==
            doctest::Approx(fx.model.dyn_logpdf(k, xn, xc)).epsilon(1e-7));
    }
  }
}
