#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "tailgraph/decay.hpp"
#include "tailgraph/detail/mvn.hpp"

namespace tailgraph::fixtures {

// Sine integral Si(x) = int_0^x sin(t)/t dt. Taylor series below 4, Pade
// approximants of the auxiliary functions f,g above (|err| ~ 1e-16).
inline double sine_integral(double x) {
  double ax = std::abs(x);
  double s;
  if (ax <= 4.0) {
    double term = ax, sum = ax;
    double x2 = ax * ax;
    for (int k = 1; k < 40; ++k) {
      term *= -x2 / ((2.0 * k) * (2.0 * k + 1.0));
      sum += term / (2.0 * k + 1.0);
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    s = sum;
  } else {
    static const double fa[] = {7.44437068161936700618e2, 1.96396372895146869801e5,
                                2.37750310125431834034e7, 1.43073403821274636888e9,
                                4.33736238870432522765e10, 6.40533830574022022911e11,
                                4.20968180571076940208e12, 1.00795182980368574617e13,
                                4.94816688199951963482e12, -4.94701168645415959931e11};
    static const double fb[] = {7.46437068161927678031e2, 1.97865247031583951450e5,
                                2.41535670165126845144e7, 1.47478952192985464958e9,
                                4.58595115847765779830e10, 7.08501308149515401563e11,
                                5.06084464593475076774e12, 1.43468549171581016479e13,
                                1.11535493509914254097e13};
    static const double gc[] = {8.13595201151686150e2, 2.35239181626478200e5,
                                3.12557570795778731e7, 2.06297595146763354e9,
                                6.83052205423625007e10, 1.09049528450362786e12,
                                7.57664583257834349e12, 1.81004487464664575e13,
                                6.43291613143049485e12, -1.36517137670871689e12};
    static const double gd[] = {8.19595201151451564e2, 2.40036752835578777e5,
                                3.26026661647090822e7, 2.23355543278099360e9,
                                7.87465017341829930e10, 1.39866710696414565e12,
                                1.17164723371736605e13, 4.01839087307656620e13,
                                3.99653257887490811e13};
    double u = 1.0 / (ax * ax);
    double fn = 1.0, fd = 1.0, p = 1.0;
    for (int i = 0; i < 10; ++i) { p *= u; fn += fa[i] * p; }
    p = 1.0;
    for (int i = 0; i < 9; ++i) { p *= u; fd += fb[i] * p; }
    double f = (fn / fd) / ax;
    double gn = 1.0, gdd = 1.0;
    p = 1.0;
    for (int i = 0; i < 10; ++i) { p *= u; gn += gc[i] * p; }
    p = 1.0;
    for (int i = 0; i < 9; ++i) { p *= u; gdd += gd[i] * p; }
    double g = (gn / gdd) * u;
    s = 0.5 * detail::kPi - f * std::cos(ax) - g * std::sin(ax);
  }
  return x < 0 ? -s : s;
}

// A univariate fixture: density, survival function, the decay it is
// regularly varying against, and the left end of its natural probe range.
struct Fixture1D {
  std::string name;
  std::function<double(double)> density;
  std::function<double(double)> survival;
  DecayTransform decay;
  double probe_left = 1.0;
  double alpha = 0.0;  // true index of survival w.r.t. decay, 0 = none/unstable
};

inline Fixture1D gaussian_fixture(double sigma = 1.0) {
  Fixture1D f;
  f.name = "gaussian";
  f.density = [sigma](double x) { return detail::norm_pdf(x / sigma) / sigma; };
  f.survival = [sigma](double x) { return detail::norm_sf(x / sigma); };
  f.decay = power_exp_decay(2.0);
  f.probe_left = 0.5;
  f.alpha = -0.5 / (sigma * sigma);
  return f;
}

// log-Cauchy: f(x) = 1/(pi x (1+log^2 x)) on (0,inf).
inline Fixture1D log_cauchy_fixture() {
  Fixture1D f;
  f.name = "log-cauchy";
  f.density = [](double x) {
    double l = std::log(x);
    return 1.0 / (detail::kPi * x * (1.0 + l * l));
  };
  f.survival = [](double x) {
    double l = std::log(x);
    return (0.5 * detail::kPi - std::atan(l)) / detail::kPi;
  };
  f.decay = log_decay();
  f.probe_left = 3.0;
  f.alpha = -1.0;
  return f;
}

// Survival exp(-int_1^x (sin z + 2)/z dz) = x^{-2} exp(-(Si(x)-Si(1))):
// the distribution is regularly varying but its density is not (the local
// index sin(x)+2 never settles).
inline Fixture1D oscillating_fixture() {
  Fixture1D f;
  f.name = "oscillating";
  const double si1 = sine_integral(1.0);
  f.survival = [si1](double x) {
    return std::pow(x, -2.0) * std::exp(-(sine_integral(x) - si1));
  };
  f.density = [surv = f.survival](double x) { return (std::sin(x) + 2.0) / x * surv(x); };
  f.decay = identity_decay();
  f.probe_left = 1.0;
  f.alpha = -2.0;
  return f;
}

inline Fixture1D pareto_fixture(double alpha = 2.0) {
  Fixture1D f;
  f.name = "pareto";
  f.density = [alpha](double x) { return alpha * std::pow(x, -alpha - 1.0); };
  f.survival = [alpha](double x) { return std::pow(x, -alpha); };
  f.decay = identity_decay();
  f.probe_left = 1.0;
  f.alpha = -alpha;
  return f;
}

inline Fixture1D fixture_by_name(const std::string& name) {
  if (name == "gaussian") return gaussian_fixture();
  if (name == "log-cauchy") return log_cauchy_fixture();
  if (name == "oscillating") return oscillating_fixture();
  if (name == "pareto") return pareto_fixture();
  throw std::invalid_argument("fixture_by_name: unknown fixture '" + name + "'");
}

// Bivariate wedge fixture on [1,inf) x (0,1]:
//   f(x,y) = (6/5) x^{-2}        for y < 1/x,
//   f(x,y) = (6/5) x^{-2} y      otherwise.
// Its angular limit is h(y)/h(1) = y and the x-survival ratio tends to
// x^{-1} y^2.
struct WedgeFixture {
  double density(double x, double y) const {
    if (x < 1.0 || y <= 0.0 || y > 1.0) return 0.0;
    double c = 1.2 * std::pow(x, -2.0);
    return (y < 1.0 / x) ? c : c * y;
  }
  // survival Pr(X >= x, Y <= y), closed form (used to cross-check the
  // quadrature oracle in tests)
  double survival(double x, double y) const {
    if (y <= 0.0) return 0.0;
    y = std::min(y, 1.0);
    if (x < 1.0) x = 1.0;
    if (x >= 1.0 / y) {
      return 1.2 * (0.5 / (x * x) + 0.5 * y * y / x - std::pow(x, -3.0) / 6.0);
    }
    return 1.2 * (y / x - y * y + 0.5 * y * y + y * y * y / 3.0);
  }
};

}  // namespace tailgraph::fixtures
