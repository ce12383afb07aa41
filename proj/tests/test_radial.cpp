#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tailgraph/models.hpp"
#include "tailgraph/radial.hpp"

using namespace tailgraph;
using Catch::Approx;

namespace {

std::vector<RadialSystem> shipped_systems(int d) {
  return {linf_system(d), l1_simplex_system(d), sphere_system(d), log_pseudo_polar_system(d)};
}

Eigen::VectorXd sample_point(const RadialSystem& sys, std::mt19937_64& eng) {
  AngularPoint ap = sys.sample_angle(eng);
  double r0;
  if (sys.name == "log-pseudo-polar") {
    double s = 0.0;
    for (Eigen::Index k = 0; k < ap.theta.size(); ++k) s += std::exp(ap.theta(k));
    double rmin = std::max(-std::log1p(-s), ap.theta.size() ? -ap.theta.minCoeff() : 0.0);
    r0 = rmin + 0.1 + 2.0 * detail::uniform01(eng);
  } else {
    r0 = 1.0 + 2.0 * detail::uniform01(eng);
  }
  return sys.inverse(r0, ap);
}

}  // namespace

TEST_CASE("sup-norm chart splits radius, ratios and the maximizing coordinate") {
  auto sys = linf_system(2);
  Eigen::VectorXd x(2);
  x << 3.0, 1.0;
  auto [r, th] = to_radial(x, sys);
  CHECK(r == Approx(3.0));
  CHECK(th.theta(0) == Approx(1.0 / 3.0));
  CHECK(th.chart == 0);
  Eigen::VectorXd back = from_radial(3.0, th, sys);
  CHECK(back(0) == Approx(3.0));
  CHECK(back(1) == Approx(1.0));
}

TEST_CASE("additive-decay chart matches the log-sum-exp form") {
  auto sys = log_pseudo_polar_system(2);
  Eigen::VectorXd x(2);
  x << std::log(2.0), std::log(2.0);
  auto [r, th] = to_radial(x, sys);
  CHECK(r == Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(th.theta(0) == Approx(std::log(2.0) - std::log(4.0)).epsilon(1e-14));
}

TEST_CASE("to_radial and from_radial are mutually inverse on random points") {
  for (int d : {1, 2, 3, 4}) {
    for (const auto& sys : shipped_systems(d)) {
      INFO(sys.name << " d=" << d);
      auto eng = detail::make_engine(11);
      for (int i = 0; i < 10000 / (d * 4); ++i) {
        Eigen::VectorXd x = sample_point(sys, eng);
        auto [r, th] = to_radial(x, sys);
        Eigen::VectorXd back = from_radial(r, th, sys);
        for (int k = 0; k < d; ++k)
          CHECK(std::abs(back(k) - x(k)) <= 1e-10 * std::max(1.0, std::abs(x(k))));
        // angle and chart are invariant under the scaling action
        double lam = sys.decay.T_inv(1.0 + 3.0 * detail::uniform01(eng));
        Eigen::VectorXd xs = sys.scale(lam, x);
        auto [rs, ths] = to_radial(xs, sys);
        CHECK(rs == Approx(star(lam, r, sys.decay)).epsilon(1e-10));
        CHECK(ths.chart == th.chart);
        for (Eigen::Index k = 0; k < th.theta.size(); ++k)
          CHECK(std::abs(ths.theta(k) - th.theta(k)) <= 1e-10 * std::max(1.0, std::abs(th.theta(k))));
      }
    }
  }
}

TEST_CASE("from_radial at unit radius lands on the unit level set") {
  auto sys = linf_system(3);
  auto eng = detail::make_engine(3);
  for (int i = 0; i < 50; ++i) {
    auto ap = sys.sample_angle(eng);
    Eigen::VectorXd x = from_radial(1.0, ap, sys);
    CHECK(sys.r(x) == Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("from_radial is homogeneous of order one under multiplication") {
  auto sys = l1_simplex_system(3);
  auto eng = detail::make_engine(5);
  for (int i = 0; i < 50; ++i) {
    auto ap = sys.sample_angle(eng);
    double r = 1.0 + detail::uniform01(eng);
    double lam = 1.0 + 2.0 * detail::uniform01(eng);
    Eigen::VectorXd a = from_radial(lam * r, ap, sys);
    Eigen::VectorXd b = lam * from_radial(r, ap, sys);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12 * b.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("jacobian matches finite differences of the inverse") {
  for (int d : {2, 3}) {
    for (const auto& sys : shipped_systems(d)) {
      INFO(sys.name << " d=" << d);
      auto eng = detail::make_engine(17);
      for (int rep = 0; rep < 25; ++rep) {
        Eigen::VectorXd x = sample_point(sys, eng);
        auto [r, th] = to_radial(x, sys);
        const int m = d;
        Eigen::MatrixXd J(m, m);
        double hr = 1e-6 * std::max(1.0, std::abs(r));
        AngularPoint up = th, dn = th;
        J.col(0) = (sys.inverse(r + hr, th) - sys.inverse(r - hr, th)) / (2 * hr);
        for (int k = 0; k < d - 1; ++k) {
          double ht = 1e-7;
          up = th;
          dn = th;
          up.theta(k) += ht;
          dn.theta(k) -= ht;
          J.col(k + 1) = (sys.inverse(r, up) - sys.inverse(r, dn)) / (2 * ht);
        }
        double fd = std::abs(J.determinant());
        double an = sys.jacobian(r, th);
        CHECK(fd == Approx(an).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("domain errors at the origin and outside the chart") {
  auto sys = linf_system(2);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(to_radial(zero, sys), std::domain_error);
  AngularPoint bad;
  bad.chart = 0;
  bad.theta = Eigen::VectorXd::Constant(1, 1.5);
  CHECK_THROWS_AS(from_radial(1.0, bad, sys), std::domain_error);
  auto l1 = l1_simplex_system(2);
  Eigen::VectorXd neg(2);
  neg << 1.0, -0.5;
  CHECK_THROWS_AS(to_radial(neg, l1), std::domain_error);
}

TEST_CASE("homogeneity check accepts exact powers and rejects a shifted exponential") {
  // Student-type kernel: exactly homogeneous of order -(nu+d)
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(2, 2);
  Q(0, 1) = Q(1, 0) = 0.3;
  models::StudentLimit st(Q, 2.0);
  auto sys = linf_system(2);
  auto rep = check_homogeneity([&](const Eigen::VectorXd& x) { return st.kernel(x); },
                               -(2.0 + 2.0), sys, 200, {1.5, 2.0, 5.0}, 42);
  CHECK(rep.max_relative_residual < 1e-10);

  // Huesler-Reiss density: homogeneous of order -1-d on the positive cone
  Eigen::MatrixXd G(2, 2);
  G << 0.0, 1.0, 1.0, 0.0;
  models::HuslerReissPareto hr(G);
  auto positive_sampler = [&](std::mt19937_64& eng) {
    Eigen::VectorXd x(2);
    x(0) = 1.0 + 2.0 * detail::uniform01(eng);
    x(1) = 0.2 + 2.0 * detail::uniform01(eng);
    if (x.maxCoeff() < 1.0) x(0) += 1.0;
    return x;
  };
  auto rep2 = check_homogeneity([&](const Eigen::VectorXd& x) { return hr.exponent_density(x); },
                                -3.0, sys, 1000, {1.5, 2.0}, 42, positive_sampler);
  CHECK(rep2.max_relative_residual < 1e-8);

  // 2/(e^{|x|}+1) is regularly varying for the additive decay but not
  // homogeneous: the residual stays away from zero
  auto lp = log_pseudo_polar_system(1);
  auto rep3 = check_homogeneity(
      [](const Eigen::VectorXd& x) { return 2.0 / (std::exp(std::abs(x(0))) + 1.0); }, -1.0, lp,
      100, {1.0}, 42,
      [](std::mt19937_64& eng) {
        return Eigen::VectorXd::Constant(1, 0.2 + detail::uniform01(eng));
      });
  CHECK(rep3.max_relative_residual > 0.05);
}
