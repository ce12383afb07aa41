#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tailgraph/detail/mvn.hpp"
#include "tailgraph/detail/quadrature.hpp"
#include "tailgraph/models.hpp"

using namespace tailgraph;
using namespace tailgraph::models;
using Catch::Approx;

namespace {

Eigen::MatrixXd chain_gamma(double g12, double g23) {
  Eigen::MatrixXd G(3, 3);
  G << 0.0, g12, g12 + g23, g12, 0.0, g23, g12 + g23, g23, 0.0;
  return G;
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

}  // namespace

TEST_CASE("normal rectangle probabilities agree with Monte Carlo") {
  Eigen::MatrixXd S(3, 3);
  S << 1.0, 0.5, 0.2, 0.5, 1.5, -0.3, 0.2, -0.3, 0.8;
  Eigen::VectorXd b = vec3(0.4, -0.2, 0.9);
  // MC oracle
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  auto eng = detail::make_engine(123);
  int n = 400000, hits = 0;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd z(3);
    for (int k = 0; k < 3; ++k) z(k) = detail::normal(eng);
    Eigen::VectorXd x = llt.matrixL() * z;
    if ((x.array() <= b.array()).all()) ++hits;
  }
  double mc = static_cast<double>(hits) / n;
  double se = std::sqrt(mc * (1 - mc) / n);
  double v = detail::mvn_cdf(b, S);
  CHECK(std::abs(v - mc) < 3 * se);
  // bivariate special case vs independence at rho = 0
  Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  CHECK(detail::mvn_cdf(vec2(0.3, -0.7), I2) ==
        Approx(detail::norm_cdf(0.3) * detail::norm_cdf(-0.7)).epsilon(1e-12));
}

TEST_CASE("bivariate sum model matches its closed forms") {
  BivariateSumModel m;
  CHECK(m.density(vec2(1.0, 1.0)) == Approx(1.0 / 6.0).epsilon(1e-14));
  // censoring the second margin
  for (double x : {1.0, 1.7, 3.0, 10.0}) {
    double expect = (2.0 / 3.0) * (std::pow(x, -2.0) - std::pow(x + 1.0, -2.0));
    CHECK(m.censored_density(Eigen::VectorXd::Constant(1, x), {0}) ==
          Approx(expect).epsilon(1e-12));
  }
  // full pattern equals the density
  CHECK(m.censored_density(vec2(2.0, 1.5), {0, 1}) == Approx(m.density(vec2(2.0, 1.5))));
  // unit Pareto margin after conditioning
  auto marg = m.marginal({1});
  CHECK(marg->density(Eigen::VectorXd::Constant(1, 2.0)) == Approx(0.25).epsilon(1e-12));
  CHECK(m.exceed_prob({1}) == Approx(2.0 / 3.0));
  // kernel cone integral
  auto nc = m.normalizing_constant(1 << 14, 5);
  CHECK(std::abs(nc.value - 0.75) < std::max(3 * nc.std_error, 1e-4));
}

TEST_CASE("elliptical limit density is exactly homogeneous and marginal-stable") {
  Eigen::MatrixXd Q(3, 3);
  Q << 1.0, 0.3, 0.1, 0.3, 1.2, 0.2, 0.1, 0.2, 0.9;
  StudentLimit m(Q, 2.0);
  auto eng = detail::make_engine(2);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd x = vec3(1.0 + detail::uniform01(eng), -2.0 * detail::uniform01(eng),
                             3.0 * detail::uniform01(eng) - 1.5);
    if (x.cwiseAbs().maxCoeff() < 1.0) x(0) += 1.0;
    double lam = 1.0 + 9.0 * detail::uniform01(eng);
    CHECK(m.density(lam * x) == Approx(std::pow(lam, -(2.0 + 3.0)) * m.density(x)).epsilon(1e-10));
  }
  // Schur-complement marginal equals the integrated-out density
  auto marg = m.marginal({0, 1});
  Eigen::VectorXd xa = vec2(1.4, -1.1);
  auto inner = [&](double u) { return m.density(vec3(xa(0), xa(1), u)); };
  double up = detail::upper_tail_integral(inner, 0.0, 1e-12).value;
  double dn = detail::upper_tail_integral([&](double u) { return inner(-u); }, 0.0, 1e-12).value;
  double oracle = (up + dn) / m.exceed_prob({0, 1});
  CHECK(marg->density(xa) == Approx(oracle).epsilon(1e-7));
}

TEST_CASE("elliptical censored density matches the box quadrature oracle") {
  Eigen::MatrixXd Q(2, 2);
  Q << 1.0, 0.4, 0.4, 1.0;
  StudentLimit m(Q, 1.5);
  Eigen::VectorXd xa = Eigen::VectorXd::Constant(1, 2.0);
  double err = 0.0;
  double val = m.censored_density(xa, {0}, &err);
  auto inner = [&](double u) { return m.density(vec2(2.0, u)); };
  double oracle = detail::integrate(inner, -1.0, 1.0, 1e-12).value;
  CHECK(std::abs(val - oracle) <= std::max(3 * err, 1e-6));
}

TEST_CASE("one-dimensional elliptical limit has Pareto radius of index nu") {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(1, 1);
  double nu = 2.5;
  StudentLimit m(Q, nu);
  // density (nu/2)|x|^{-nu-1} on |x| >= 1
  CHECK(m.density(Eigen::VectorXd::Constant(1, 2.0)) ==
        Approx(nu / 2.0 * std::pow(2.0, -nu - 1.0)).epsilon(1e-12));
  double mass = detail::upper_tail_integral(
                    [&](double x) { return m.density(Eigen::VectorXd::Constant(1, x)); }, 1.0,
                    1e-12)
                    .value;
  CHECK(2.0 * mass == Approx(1.0).epsilon(1e-10));
}

TEST_CASE("finite-threshold elliptical ratio approaches the limit kernel ratio") {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(2, 2);
  auto lim = student_tail_limit(Q, 2.0);
  for (auto x : {vec2(2.0, 1.0), vec2(1.0, -1.5), vec2(3.0, 0.5)}) {
    double limit = lim.kernel(x) / lim.kernel(Eigen::VectorXd::Ones(2));
    double at3 = lim.finite_t_ratio(x, 1e3);
    CHECK(std::abs(at3 - limit) / limit < 0.01);
    // the convergence is monotone in t
    double at2 = lim.finite_t_ratio(x, 1e2);
    CHECK(std::abs(at2 - limit) >= std::abs(at3 - limit) * 0.999);
  }
}

TEST_CASE("variogram model agrees across anchors and with its printed value") {
  Eigen::MatrixXd G2(2, 2);
  G2 << 0.0, 1.0, 1.0, 0.0;
  HuslerReissPareto hr2(G2);
  double printed = std::exp(-0.125) / std::sqrt(2.0 * detail::kPi);
  CHECK(hr2.anchor_density(vec2(1.0, 1.0), 0) == Approx(printed).epsilon(1e-12));
  CHECK(hr2.cone_mass() == Approx(2.0 * detail::norm_cdf(0.5)).epsilon(1e-10));
  CHECK(hr2.density(vec2(1.0, 1.0)) == Approx(printed / hr2.cone_mass()).epsilon(1e-10));

  HuslerReissPareto hr3(chain_gamma(0.8, 1.1));
  auto eng = detail::make_engine(9);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd y = vec3(0.3 + 3.0 * detail::uniform01(eng), 0.3 + 3.0 * detail::uniform01(eng),
                             0.3 + 3.0 * detail::uniform01(eng));
    double v0 = 0.0;
    for (int k = 0; k < 3; ++k) {
      Eigen::VectorXd yy = y;
      double vk = hr3.anchor_density(
          (yy(k) = std::max(yy(k), 1.0), yy), k);  // anchor needs y_k >= 1
      if (k == 0) v0 = vk;
    }
    (void)v0;
    // direct anchor agreement on the overlap region: make every entry >= 1
    Eigen::VectorXd z = y.array() + 1.0;
    double a0 = hr3.anchor_density(z, 0);
    double a1 = hr3.anchor_density(z, 1);
    double a2 = hr3.anchor_density(z, 2);
    CHECK(a1 == Approx(a0).epsilon(1e-10));
    CHECK(a2 == Approx(a0).epsilon(1e-10));
  }
}

TEST_CASE("variogram model is homogeneous of order minus one minus d") {
  HuslerReissPareto hr(chain_gamma(1.0, 1.0));
  auto eng = detail::make_engine(21);
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd y = vec3(0.2 + 2.0 * detail::uniform01(eng), 0.2 + 2.0 * detail::uniform01(eng),
                             0.2 + 2.0 * detail::uniform01(eng));
    if (y.maxCoeff() < 1.0) y(1) += 1.0;
    double lam = 1.0 + 9.0 * detail::uniform01(eng);
    CHECK(hr.density(lam * y) == Approx(std::pow(lam, -4.0) * hr.density(y)).epsilon(1e-8));
  }
}

TEST_CASE("variogram censored density matches one-dimensional quadrature") {
  HuslerReissPareto hr(chain_gamma(0.8, 1.1));
  Eigen::VectorXd ya = vec2(2.0, 1.3);
  double err = 0.0;
  double val = hr.censored_density(ya, {0, 1}, &err);
  auto inner = [&](double u) { return hr.density(vec3(2.0, 1.3, u)); };
  double oracle = detail::integrate(inner, 1e-12, 1.0, 1e-13).value;
  CHECK(val == Approx(oracle).epsilon(1e-8));
  // censoring two margins: anchor pattern {1}
  double err2 = 0.0;
  double val2 = hr.censored_density(Eigen::VectorXd::Constant(1, 1.5), {1}, &err2);
  auto inner2 = [&](const std::vector<double>& u) {
    return hr.density(vec3(u[0], 1.5, u[1]));
  };
  auto est = detail::qmc_mean(inner2, 2, 1 << 15, 2);
  CHECK(std::abs(val2 - est.value) < std::max(4 * est.std_error, 1e-6));
}

TEST_CASE("variogram marginal restriction matches the integrated density") {
  HuslerReissPareto hr(chain_gamma(0.8, 1.1));
  auto marg = hr.marginal({0, 1});
  Eigen::VectorXd xa = vec2(1.6, 1.2);
  auto inner = [&](double u) { return hr.density(vec3(xa(0), xa(1), u)); };
  double oracle = (detail::integrate(inner, 1e-12, 1.0, 1e-13).value +
                   detail::upper_tail_integral(inner, 1.0, 1e-12).value) /
                  hr.exceed_prob({0, 1});
  CHECK(marg->density(xa) == Approx(oracle).epsilon(1e-7));
  // one-dimensional marginals are unit Pareto
  auto m1 = hr.marginal({2});
  CHECK(m1->density(Eigen::VectorXd::Constant(1, 3.0)) == Approx(1.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("exceedance weights from the variogram agree with sampling") {
  HuslerReissPareto hr(chain_gamma(0.8, 1.1));
  int n = 100000;
  auto Y = hr.sample(n, 77);
  for (auto S : std::vector<std::vector<int>>{{0}, {0, 1}, {1, 2}}) {
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      for (int v : S)
        if (Y(i, v) >= 1.0) {
          ++hits;
          break;
        }
    }
    double emp = static_cast<double>(hits) / n;
    double expect = hr.exceed_prob(S);
    double se = std::sqrt(expect * (1 - expect) / n);
    INFO("S size " << S.size());
    CHECK(std::abs(emp - expect) < 4 * se);
  }
}

TEST_CASE("samplers draw a unit-Pareto radius of the model index") {
  auto radius_check = [](const Eigen::MatrixXd& Y, double alpha) {
    const int n = static_cast<int>(Y.rows());
    for (double lam : {1.5, 2.0, 4.0}) {
      int hits = 0;
      for (int i = 0; i < n; ++i)
        if (Y.row(i).cwiseAbs().maxCoeff() >= lam) ++hits;
      double emp = static_cast<double>(hits) / n;
      double expect = std::pow(lam, -alpha);
      double se = std::sqrt(expect * (1 - expect) / n);
      CHECK(std::abs(emp - expect) < 4 * se);
    }
  };
  HuslerReissPareto hr(chain_gamma(1.0, 1.0));
  radius_check(hr.sample(60000, 3), 1.0);
  Eigen::MatrixXd Q(2, 2);
  Q << 1.0, 0.2, 0.2, 1.0;
  StudentLimit st(Q, 2.0);
  radius_check(st.sample(60000, 4), 2.0);
  BivariateSumModel bs;
  radius_check(bs.sample(60000, 5), 1.0);
}

TEST_CASE("variogram sample exceedance proportions match quadrature") {
  Eigen::MatrixXd G(2, 2);
  G << 0.0, 1.0, 1.0, 0.0;
  HuslerReissPareto hr(G);
  int n = 200000;
  auto Y = hr.sample(n, 11);
  int num = 0, den = 0;
  for (int i = 0; i < n; ++i) {
    if (Y(i, 0) >= 1.0) {
      ++den;
      if (Y(i, 1) >= 2.0) ++num;
    }
  }
  double emp = static_cast<double>(num) / den;
  // oracle by quadrature of the anchored form over y1 >= 1, y2 >= 2
  auto joint = [&](double y1) {
    // integrate the lognormal conditional beyond 2
    Eigen::VectorXd y(2);
    y << y1, 0.0;
    double mu = std::log(y1) - 0.5;
    double z = (std::log(2.0) - mu) / 1.0;
    return std::pow(y1, -2.0) * detail::norm_sf(z);
  };
  double pr_joint = detail::upper_tail_integral(joint, 1.0, 1e-12).value;
  double oracle = pr_joint;  // Pr(Y1>=1) on the anchor-1 cone is one
  double se = std::sqrt(emp * (1 - emp) / den);
  CHECK(std::abs(emp - oracle) < 4 * se);
}

TEST_CASE("sum-model sample reproduces a closed-form functional") {
  BivariateSumModel m;
  int n = 200000;
  auto Y = m.sample(n, 8);
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += 1.0 / (Y(i, 0) + Y(i, 1));
  mean /= n;
  // E[1/(X+Y)] = 7/18
  double expect = 7.0 / 18.0;
  CHECK(std::abs(mean - expect) < 4 * 0.3 / std::sqrt(n));
}

TEST_CASE("quasi-Monte Carlo cone constants match deterministic quadrature") {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(2, 2);
  StudentLimit st(Q, 1.0);
  auto nc = st.normalizing_constant(1 << 14, 1);
  // deterministic value is 4 sqrt(2) for this kernel
  CHECK(st.cone_constant() == Approx(4.0 * std::sqrt(2.0)).epsilon(1e-8));
  CHECK(std::abs(nc.value - st.cone_constant()) < std::max(3 * nc.std_error, 1e-3));

  HuslerReissPareto hr(chain_gamma(0.8, 1.1));
  auto nh = hr.normalizing_constant(1 << 14, 1);
  CHECK(std::abs(nh.value - hr.cone_mass()) < std::max(3 * nh.std_error, 2e-3));
}

TEST_CASE("normalization recovers unity for every shipped model") {
  // integral of the normalized density over the cone = qmc kernel constant
  // divided by the cached constant
  Eigen::MatrixXd Q(2, 2);
  Q << 1.0, -0.3, -0.3, 1.4;
  StudentLimit st(Q, 2.0);
  auto nc = st.normalizing_constant(1 << 14, 3);
  CHECK(std::abs(nc.value / st.cone_constant() - 1.0) < 3 * nc.std_error / st.cone_constant());
  BivariateSumModel bs;
  auto nb = bs.normalizing_constant(1 << 14, 3);
  CHECK(std::abs(nb.value / 0.75 - 1.0) < 3 * nb.std_error / 0.75 + 1e-6);
}

TEST_CASE("domain violations are rejected") {
  BivariateSumModel bs;
  CHECK_THROWS_AS(bs.density(vec2(0.5, 0.2)), std::domain_error);
  CHECK_THROWS_AS(bs.density(vec2(-2.0, 1.0)), std::domain_error);
  Eigen::MatrixXd Gbad(2, 2);
  Gbad << 0.0, -1.0, -1.0, 0.0;
  CHECK_THROWS_AS(HuslerReissPareto{Gbad}, std::invalid_argument);
  Eigen::MatrixXd Qbad(2, 2);
  Qbad << 1.0, 2.0, 2.0, 1.0;  // indefinite
  CHECK_THROWS_AS(StudentLimit(Qbad, 1.0), std::invalid_argument);
  HuslerReissPareto hr(chain_gamma(1.0, 1.0));
  CHECK_THROWS_AS(hr.censored_density(vec2(0.5, 2.0), {0, 1}), std::domain_error);
  CHECK_THROWS_AS(hr.marginal(std::vector<int>{}), std::invalid_argument);
}
