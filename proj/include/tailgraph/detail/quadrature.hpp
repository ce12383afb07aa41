#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tailgraph::detail {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

// Adaptive Gauss-Kronrod on a finite interval.
template <class F>
QuadResult integrate(F&& f, double a, double b, double tol = 1e-10, int max_depth = 15) {
  double err = 0.0;
  double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      std::forward<F>(f), a, b, max_depth, tol, &err);
  return {v, err};
}

// Upper-tail integral, truncated where the integrand has fallen below 1e-16
// of its largest probed value; integrated piecewise over the doubling
// segments so the adaptive rule can resolve heavy tails.
template <class F>
QuadResult upper_tail_integral(F&& f, double a, double tol = 1e-10) {
  double peak = std::abs(f(a));
  QuadResult total;
  double lo = a;
  double hi = (a > 0 ? a * 2.0 : a + 1.0);
  for (int guard = 0; guard < 400; ++guard) {
    auto seg = integrate(f, lo, hi, tol);
    total.value += seg.value;
    total.error += seg.error;
    double fb = std::abs(f(hi));
    peak = std::max(peak, fb);
    if (fb <= 1e-16 * peak) return total;
    lo = hi;
    hi = (hi > 0 ? hi * 2.0 : hi + 1.0);
    if (!std::isfinite(hi)) break;
  }
  throw std::runtime_error("upper_tail_integral: no decay detected");
}

}  // namespace tailgraph::detail
