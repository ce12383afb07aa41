#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <stdexcept>

#include "tailgraph/detail/quadrature.hpp"

namespace tailgraph::detail {

inline constexpr double kPi = 3.141592653589793238462643;
inline constexpr double kSqrt2Pi = 2.506628274631000502415765;

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }
inline double norm_sf(double x) { return 0.5 * std::erfc(x * 0.7071067811865475244); }
inline double norm_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}
inline double chisq_sf(double x, double df) {
  return boost::math::cdf(boost::math::complement(
      boost::math::chi_squared_distribution<double>(df), x));
}

// Pr(X > dh, Y > dk) for standard bivariate normal, correlation r.
// Genz (2004) rectangular bivariate normal algorithm.
inline double bvnu(double dh, double dk, double r) {
  static const double w6[] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
  static const double x6[] = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
  static const double w12[] = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                               0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
  static const double x12[] = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                               0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
  static const double w20[] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                               0.08327674157670475, 0.10193011981724040, 0.11819453196151840,
                               0.13168863844917660, 0.14209610931838210, 0.14917298647260370,
                               0.15275338713072590};
  static const double x20[] = {0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                               0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                               0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                               0.07652652113349733};
  const double* w;
  const double* x;
  int ng;
  double ar = std::abs(r);
  if (ar < 0.3) {
    w = w6; x = x6; ng = 3;
  } else if (ar < 0.75) {
    w = w12; x = x12; ng = 6;
  } else {
    w = w20; x = x20; ng = 10;
  }
  double h = dh, k = dk, hk = h * k, bvn = 0.0;
  if (ar < 0.925) {
    double hs = (h * h + k * k) / 2, asr = std::asin(r);
    for (int i = 0; i < ng; ++i) {
      for (int is = -1; is <= 1; is += 2) {
        double sn = std::sin(asr * (is * x[i] + 1) / 2);
        bvn += w[i] * std::exp((sn * hk - hs) / (1 - sn * sn));
      }
    }
    bvn = bvn * asr / (4 * kPi) + norm_cdf(-h) * norm_cdf(-k);
  } else {
    if (r < 0) {
      k = -k;
      hk = -hk;
    }
    if (ar < 1) {
      double as = (1 - r) * (1 + r), a = std::sqrt(as), bs = (h - k) * (h - k);
      double c = (4 - hk) / 8, d = (12 - hk) / 16, asr = -(bs / as + hk) / 2;
      if (asr > -100)
        bvn = a * std::exp(asr) * (1 - c * (bs - as) * (1 - d * bs / 5) / 3 + c * d * as * as / 5);
      if (-hk < 100) {
        double b = std::sqrt(bs), sp = kSqrt2Pi * norm_cdf(-b / a);
        bvn -= std::exp(-hk / 2) * sp * b * (1 - c * bs * (1 - d * bs / 5) / 3);
      }
      a = a / 2;
      for (int i = 0; i < ng; ++i) {
        for (int is = -1; is <= 1; is += 2) {
          double xs = a * (is * x[i] + 1);
          xs = xs * xs;
          double rs = std::sqrt(1 - xs), asr2 = -(bs / xs + hk) / 2;
          if (asr2 > -100) {
            double sp = 1 + c * xs * (1 + d * xs);
            double ep = std::exp(-hk * (1 - rs) / (2 * (1 + rs))) / rs;
            bvn += a * w[i] * std::exp(asr2) * (ep - sp);
          }
        }
      }
      bvn = -bvn / (2 * kPi);
    }
    if (r > 0) {
      bvn += norm_cdf(-std::max(h, k));
    } else {
      bvn = -bvn;
      if (k > h) bvn += norm_cdf(k) - norm_cdf(h);
    }
  }
  return std::max(0.0, std::min(1.0, bvn));
}

inline double bvn_cdf(double b1, double b2, double rho) { return bvnu(-b1, -b2, rho); }

// Pr(Z <= b) for Z ~ N(0, Sigma). Dimensions 1 and 2 are closed-form /
// Genz quadrature; higher dimensions integrate out the last coordinate with
// adaptive Gauss-Kronrod on the conditional (deterministic, ~1e-11).
inline double mvn_cdf(const Eigen::VectorXd& b, const Eigen::MatrixXd& Sigma) {
  const int m = static_cast<int>(b.size());
  if (m == 0) return 1.0;
  if (Sigma.rows() != m || Sigma.cols() != m)
    throw std::invalid_argument("mvn_cdf: dimension mismatch");
  if (m == 1) {
    double s = std::sqrt(Sigma(0, 0));
    return norm_cdf(b(0) / s);
  }
  if (m == 2) {
    double s1 = std::sqrt(Sigma(0, 0)), s2 = std::sqrt(Sigma(1, 1));
    double rho = Sigma(0, 1) / (s1 * s2);
    rho = std::max(-1.0, std::min(1.0, rho));
    return bvn_cdf(b(0) / s1, b(1) / s2, rho);
  }
  double smm = Sigma(m - 1, m - 1);
  double s = std::sqrt(smm);
  Eigen::VectorXd c = Sigma.topRightCorner(m - 1, 1) / smm;
  Eigen::MatrixXd Sc = Sigma.topLeftCorner(m - 1, m - 1) -
                       Sigma.topRightCorner(m - 1, 1) * Sigma.bottomLeftCorner(1, m - 1) / smm;
  Eigen::VectorXd bh = b.head(m - 1);
  double lo = -8.5 * s;
  double hi = std::min(b(m - 1), 8.5 * s);
  if (hi <= lo) return 0.0;
  auto f = [&](double z) {
    Eigen::VectorXd bc = bh - z * c;
    return norm_pdf(z / s) / s * mvn_cdf(bc, Sc);
  };
  return integrate(f, lo, hi, 1e-12, 18).value;
}

}  // namespace tailgraph::detail
