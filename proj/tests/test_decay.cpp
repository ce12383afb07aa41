#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "tailgraph/decay.hpp"
#include "tailgraph/detail/rng.hpp"

using namespace tailgraph;
using Catch::Approx;

namespace {

// per-transform range of T-values that keeps three-fold star products inside
// double range
double safe_t_cap(const DecayTransform& d) {
  if (d.name == "log") return 8.0;  // T(x)^3 stays under exp overflow after T_inv
  // near the finite endpoint the representation of x quantizes T(x) at
  // relative eps * T, so keep three-fold products small
  if (d.name == "finite-endpoint") return 100.0;
  return 1e50;
}

std::vector<DecayTransform> named_transforms() {
  return {identity_decay(), exp_decay(), power_exp_decay(2.0), power_exp_decay(0.7), log_decay(),
          finite_endpoint_decay(1.0), finite_endpoint_decay(3.5)};
}

}  // namespace

TEST_CASE("star reduces to multiplication, addition and the finite-endpoint rule") {
  CHECK(star(2.0, 3.0, identity_decay()) == Approx(6.0).epsilon(1e-14));
  CHECK(star(2.0, 3.0, exp_decay()) == Approx(5.0).epsilon(1e-14));
  CHECK(star(0.5, 0.5, finite_endpoint_decay(1.0)) == Approx(0.75).epsilon(1e-12));
  // x + y - xy/e1 for a non-unit endpoint
  CHECK(star(1.0, 2.0, finite_endpoint_decay(3.5)) == Approx(1.0 + 2.0 - 2.0 / 3.5).epsilon(1e-12));
}

TEST_CASE("star_vec broadcasts the scalar componentwise") {
  Eigen::VectorXd y(2);
  y << 1.0, 3.0;
  auto r = star_vec(2.0, y, identity_decay());
  CHECK(r(0) == Approx(2.0));
  CHECK(r(1) == Approx(6.0));

  Eigen::VectorXd z(2);
  z << 0.0, 2.0;
  auto s = star_vec(1.0, z, exp_decay());
  CHECK(s(0) == Approx(1.0));
  CHECK(s(1) == Approx(3.0));

  Eigen::VectorXd w(1);
  w << 4.0;
  auto t = star_vec(3.0, w, power_exp_decay(2.0));
  CHECK(t(0) == Approx(5.0).epsilon(1e-12));  // (3^2 + 4^2)^{1/2}
}

TEST_CASE("named transforms satisfy the structural invariants") {
  for (const auto& d : named_transforms()) {
    INFO(d.name);
    CHECK_NOTHROW(d.validate());
    CHECK(d.T(d.e0) == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("T composed with its inverse is the identity on [1, 1e6]") {
  for (const auto& d : named_transforms()) {
    INFO(d.name);
    for (int i = 0; i < 200; ++i) {
      double v = std::pow(10.0, 6.0 * i / 199.0);
      double x = d.T_inv(v);
      if (!std::isfinite(x) || !std::isfinite(d.T(x))) continue;  // beyond double range
      // the rounding of x itself limits the attainable accuracy to ~ v * eps
      // for transforms with a finite endpoint
      CHECK(d.T(x) == Approx(v).epsilon(1e-10).margin(2.3e-16 * v * v));
    }
  }
}

TEST_CASE("star is commutative and associative over random triples") {
  for (const auto& d : named_transforms()) {
    INFO(d.name);
    auto eng = detail::make_engine(7);
    const double cap = safe_t_cap(d);
    auto draw = [&] {
      double v = std::exp(std::log(cap) * detail::uniform01(eng));
      return d.T_inv(std::max(1.0, v));
    };
    for (int i = 0; i < 1000; ++i) {
      double x = draw(), y = draw(), z = draw();
      double xy = star(x, y, d);
      double yx = star(y, x, d);
      CHECK(std::abs(xy - yx) <= 1e-12 * std::max(1.0, std::abs(xy)));
      double a = star(star(x, y, d), z, d);
      double b = star(x, star(y, z, d), d);
      CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST_CASE("star rejects arguments outside the domain and signals overflow") {
  auto id = identity_decay();
  CHECK_THROWS_AS(star(0.5, 2.0, id), std::domain_error);
  CHECK_THROWS_AS(star(2.0, -1.0, exp_decay()), std::domain_error);
  auto fe = finite_endpoint_decay(1.0);
  CHECK_THROWS_AS(star(1.0, 0.5, fe), std::domain_error);  // right endpoint excluded
  CHECK_THROWS_AS(star(400.0, 400.0, exp_decay()), std::overflow_error);
}

TEST_CASE("custom transforms are validated on construction") {
  // a valid custom transform: T(x) = x^2 on [1, inf)
  auto good = custom_decay(
      1.0, std::numeric_limits<double>::infinity(), [](double x) { return x * x; },
      [](double v) { return std::sqrt(v); }, [](double x) { return 2 * x; });
  CHECK(star(2.0, 3.0, good) == Approx(6.0));  // conjugate of multiplication

  // broken inverse must be rejected
  CHECK_THROWS_AS(custom_decay(
                      1.0, std::numeric_limits<double>::infinity(),
                      [](double x) { return x * x; }, [](double v) { return v; },
                      [](double x) { return 2 * x; }),
                  std::invalid_argument);
  // T(e0) != 1 must be rejected
  CHECK_THROWS_AS(custom_decay(
                      2.0, std::numeric_limits<double>::infinity(), [](double x) { return x; },
                      [](double v) { return v; }, [](double) { return 1.0; }),
                  std::invalid_argument);
}

TEST_CASE("decay_by_name covers the shipped family") {
  CHECK(decay_by_name("id").name == "id");
  CHECK(decay_by_name("exp-sq").parameters.at("p") == Approx(2.0));
  CHECK(decay_by_name("finite-endpoint", {{"e1", 2.0}}).e1 == Approx(2.0));
  CHECK_THROWS_AS(decay_by_name("nope"), std::invalid_argument);
}
