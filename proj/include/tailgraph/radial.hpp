#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "tailgraph/decay.hpp"
#include "tailgraph/detail/rng.hpp"

namespace tailgraph {

// Angular part of a radial decomposition. `theta` holds the d-1 chart
// coordinates; `chart` records which coordinate is implicit (needed for the
// sup-norm chart, where the maximizing coordinate is not recoverable from
// theta alone); `signs` carries the orthant for sign-aware systems.
struct AngularPoint {
  Eigen::VectorXd theta;
  int chart = -1;
  Eigen::VectorXd signs;  // size d with entries in {-1,0,1}; empty = all +1

  bool operator==(const AngularPoint& o) const {
    return chart == o.chart && theta == o.theta && signs == o.signs;
  }
};

// A radial system of coordinates phi(x) = (r(x), theta(x)) on a cone,
// homogeneous with respect to the decay's scaling action:
//   r(scale(lambda, x)) = lambda (*) r(x),  theta(scale(lambda, x)) = theta(x).
struct RadialSystem {
  int dim = 0;
  DecayTransform decay;
  std::string name;
  std::function<double(const Eigen::VectorXd&)> r;
  std::function<AngularPoint(const Eigen::VectorXd&)> theta;
  std::function<Eigen::VectorXd(double, const AngularPoint&)> inverse;
  // |det D phi^{-1}(r, theta)|
  std::function<double(double, const AngularPoint&)> jacobian;
  // the scaling action (lambda (*) |x|) sigma_x specialized to this system
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> scale;
  // samples a valid angular point (for invariant checks and integration)
  std::function<AngularPoint(std::mt19937_64&)> sample_angle;
};

namespace radial_detail {

inline void require_nonzero(const Eigen::VectorXd& x, const char* who) {
  if (x.size() == 0 || x.cwiseAbs().maxCoeff() == 0.0)
    throw std::domain_error(std::string(who) + ": x = 0 is outside the cone");
}

inline Eigen::VectorXd sign_vector(const Eigen::VectorXd& x) {
  Eigen::VectorXd s(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) s(i) = (x(i) > 0) - (x(i) < 0);
  return s;
}

// Componentwise star extended below e0: the scaling action applies to every
// magnitude where T is defined, not only to the decay domain E.
inline double extended_star(double lambda, double a, const DecayTransform& d) {
  d.require(lambda, "scale");
  double ta = d.T(a);
  if (!(ta > 0) || !std::isfinite(ta))
    throw std::domain_error("scale: component outside the transform's range");
  double p = d.T(lambda) * ta;
  if (!std::isfinite(p)) throw std::overflow_error("scale: T(lambda)T(a) overflows");
  return d.T_inv(p);
}

// (lambda (*) |x|) sigma_x, the componentwise signed action; zero components
// stay zero.
inline Eigen::VectorXd signed_scale(double lambda, const Eigen::VectorXd& x,
                                    const DecayTransform& d) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) == 0.0) {
      out(i) = 0.0;
    } else {
      double s = (x(i) > 0) ? 1.0 : -1.0;
      out(i) = s * extended_star(lambda, std::abs(x(i)), d);
    }
  }
  return out;
}

}  // namespace radial_detail

// Sup-norm pseudo-polar chart: r = ||x||_inf, theta = the other d-1
// magnitudes over r in index order, chart = index attaining the max
// (lowest on ties), signs stored separately. T = id.
inline RadialSystem linf_system(int d) {
  if (d < 1) throw std::invalid_argument("linf_system: d >= 1 required");
  RadialSystem sys;
  sys.dim = d;
  sys.decay = identity_decay();
  sys.name = "linf";
  sys.r = [](const Eigen::VectorXd& x) {
    radial_detail::require_nonzero(x, "linf.r");
    return x.cwiseAbs().maxCoeff();
  };
  sys.theta = [d](const Eigen::VectorXd& x) {
    radial_detail::require_nonzero(x, "linf.theta");
    Eigen::VectorXd a = x.cwiseAbs();
    int jstar = 0;
    a.maxCoeff(&jstar);
    for (int i = 0; i < jstar; ++i)
      if (a(i) == a(jstar)) { jstar = i; break; }
    double r = a(jstar);
    AngularPoint ap;
    ap.chart = jstar;
    ap.theta.resize(d - 1);
    int k = 0;
    for (int i = 0; i < d; ++i)
      if (i != jstar) ap.theta(k++) = a(i) / r;
    ap.signs = radial_detail::sign_vector(x);
    return ap;
  };
  sys.inverse = [d](double r, const AngularPoint& ap) {
    if (!(r > 0)) throw std::domain_error("linf.inverse: r must be > 0");
    if (ap.chart < 0 || ap.chart >= d) throw std::domain_error("linf.inverse: bad chart");
    if (ap.theta.size() != d - 1 ||
        (d > 1 && (ap.theta.minCoeff() < 0.0 || ap.theta.maxCoeff() > 1.0)))
      throw std::domain_error("linf.inverse: theta outside [0,1]^{d-1}");
    Eigen::VectorXd mag(d);
    int k = 0;
    for (int i = 0; i < d; ++i) mag(i) = (i == ap.chart) ? r : r * ap.theta(k++);
    if (ap.signs.size() == d) return Eigen::VectorXd(mag.cwiseProduct(ap.signs));
    return mag;
  };
  sys.jacobian = [d](double r, const AngularPoint&) { return std::pow(r, d - 1); };
  sys.scale = [dec = sys.decay](double lam, const Eigen::VectorXd& x) {
    return radial_detail::signed_scale(lam, x, dec);
  };
  sys.sample_angle = [d](std::mt19937_64& eng) {
    AngularPoint ap;
    ap.theta.resize(d - 1);
    for (int i = 0; i < d - 1; ++i) ap.theta(i) = detail::uniform01(eng);
    ap.chart = static_cast<int>(eng() % static_cast<std::uint64_t>(d));
    ap.signs = Eigen::VectorXd::Ones(d);
    for (int i = 0; i < d; ++i)
      if (detail::uniform01(eng) < 0.5) ap.signs(i) = -1.0;
    return ap;
  };
  return sys;
}

// L1 simplex chart on the nonnegative orthant: r = ||x||_1,
// theta = x_{1:d-1}/r, implicit last coordinate 1 - sum(theta). T = id.
inline RadialSystem l1_simplex_system(int d) {
  if (d < 1) throw std::invalid_argument("l1_simplex_system: d >= 1 required");
  RadialSystem sys;
  sys.dim = d;
  sys.decay = identity_decay();
  sys.name = "l1-simplex";
  sys.r = [](const Eigen::VectorXd& x) {
    radial_detail::require_nonzero(x, "l1.r");
    if (x.minCoeff() < 0) throw std::domain_error("l1.r: negative component");
    return x.sum();
  };
  sys.theta = [d](const Eigen::VectorXd& x) {
    radial_detail::require_nonzero(x, "l1.theta");
    if (x.minCoeff() < 0) throw std::domain_error("l1.theta: negative component");
    AngularPoint ap;
    ap.chart = d - 1;
    ap.theta = x.head(d - 1) / x.sum();
    return ap;
  };
  sys.inverse = [d](double r, const AngularPoint& ap) {
    if (!(r > 0)) throw std::domain_error("l1.inverse: r must be > 0");
    double s = (d > 1) ? ap.theta.sum() : 0.0;
    if (ap.theta.size() != d - 1 || (d > 1 && ap.theta.minCoeff() < 0.0) || s > 1.0)
      throw std::domain_error("l1.inverse: theta outside the simplex");
    Eigen::VectorXd x(d);
    x.head(d - 1) = r * ap.theta;
    x(d - 1) = r * (1.0 - s);
    return x;
  };
  sys.jacobian = [d](double r, const AngularPoint&) { return std::pow(r, d - 1); };
  sys.scale = [dec = sys.decay](double lam, const Eigen::VectorXd& x) {
    return radial_detail::signed_scale(lam, x, dec);
  };
  sys.sample_angle = [d](std::mt19937_64& eng) {
    // uniform on the open simplex via sorted-uniform spacings
    std::vector<double> u(d - 1);
    for (auto& v : u) v = detail::uniform01(eng);
    std::sort(u.begin(), u.end());
    AngularPoint ap;
    ap.chart = d - 1;
    ap.theta.resize(d - 1);
    double prev = 0.0;
    for (int i = 0; i < d - 1; ++i) {
      ap.theta(i) = u[i] - prev;
      prev = u[i];
    }
    return ap;
  };
  return sys;
}

// Euclidean chart per orthant: r = ||x||_2, theta = |x|_{1:d-1}/r with
// implicit last magnitude sqrt(1-||theta||^2), signs stored. T = id.
inline RadialSystem sphere_system(int d) {
  if (d < 1) throw std::invalid_argument("sphere_system: d >= 1 required");
  RadialSystem sys;
  sys.dim = d;
  sys.decay = identity_decay();
  sys.name = "sphere";
  sys.r = [](const Eigen::VectorXd& x) {
    radial_detail::require_nonzero(x, "sphere.r");
    return x.norm();
  };
  sys.theta = [d](const Eigen::VectorXd& x) {
    radial_detail::require_nonzero(x, "sphere.theta");
    AngularPoint ap;
    ap.chart = d - 1;
    ap.theta = x.head(d - 1).cwiseAbs() / x.norm();
    ap.signs = radial_detail::sign_vector(x);
    return ap;
  };
  sys.inverse = [d](double r, const AngularPoint& ap) {
    if (!(r > 0)) throw std::domain_error("sphere.inverse: r must be > 0");
    double s2 = ap.theta.squaredNorm();
    if (ap.theta.size() != d - 1 || s2 > 1.0 + 1e-14)
      throw std::domain_error("sphere.inverse: theta outside the unit ball");
    Eigen::VectorXd mag(d);
    mag.head(d - 1) = r * ap.theta;
    mag(d - 1) = r * std::sqrt(std::max(0.0, 1.0 - s2));
    if (ap.signs.size() == d) return Eigen::VectorXd(mag.cwiseProduct(ap.signs));
    return mag;
  };
  sys.jacobian = [d](double r, const AngularPoint& ap) {
    double last = std::sqrt(std::max(1e-300, 1.0 - ap.theta.squaredNorm()));
    return std::pow(r, d - 1) / last;
  };
  sys.scale = [dec = sys.decay](double lam, const Eigen::VectorXd& x) {
    return radial_detail::signed_scale(lam, x, dec);
  };
  sys.sample_angle = [d](std::mt19937_64& eng) {
    AngularPoint ap;
    ap.chart = d - 1;
    ap.theta.resize(d - 1);
    for (;;) {
      double s2 = 0.0;
      for (int i = 0; i < d - 1; ++i) {
        ap.theta(i) = detail::uniform01(eng);
        s2 += ap.theta(i) * ap.theta(i);
      }
      if (s2 < 0.98) break;
    }
    ap.signs = Eigen::VectorXd::Ones(d);
    return ap;
  };
  return sys;
}

// Additive-decay chart (T = exp): r(x) = log(sum_i e^{x_i}),
// theta = x_{1:d-1} - r. The scaling action is the additive shift x + lambda.
inline RadialSystem log_pseudo_polar_system(int d) {
  if (d < 1) throw std::invalid_argument("log_pseudo_polar_system: d >= 1 required");
  RadialSystem sys;
  sys.dim = d;
  sys.decay = exp_decay();
  sys.name = "log-pseudo-polar";
  auto logsumexp = [](const Eigen::VectorXd& x) {
    double m = x.maxCoeff();
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += std::exp(x(i) - m);
    return m + std::log(s);
  };
  sys.r = [logsumexp](const Eigen::VectorXd& x) { return logsumexp(x); };
  sys.theta = [d, logsumexp](const Eigen::VectorXd& x) {
    AngularPoint ap;
    ap.chart = d - 1;
    double r = logsumexp(x);
    ap.theta = x.head(d - 1).array() - r;
    return ap;
  };
  sys.inverse = [d](double r, const AngularPoint& ap) {
    if (ap.theta.size() != d - 1)
      throw std::domain_error("log-pseudo-polar.inverse: bad theta size");
    double s = 0.0;
    for (Eigen::Index i = 0; i < ap.theta.size(); ++i) s += std::exp(ap.theta(i));
    if (s >= 1.0) throw std::domain_error("log-pseudo-polar.inverse: theta outside Omega");
    Eigen::VectorXd x(d);
    x.head(d - 1) = ap.theta.array() + r;
    x(d - 1) = r + std::log1p(-s);
    return x;
  };
  sys.jacobian = [](double, const AngularPoint& ap) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < ap.theta.size(); ++i) s += std::exp(ap.theta(i));
    return 1.0 / (1.0 - s);
  };
  sys.scale = [](double lam, const Eigen::VectorXd& x) {
    return Eigen::VectorXd(x.array() + lam);
  };
  sys.sample_angle = [d](std::mt19937_64& eng) {
    // theta with sum(exp(theta)) < 1: draw simplex weights and log them
    AngularPoint ap;
    ap.chart = d - 1;
    ap.theta.resize(d - 1);
    double rest = 1.0;
    for (int i = 0; i < d - 1; ++i) {
      double w = rest * detail::uniform01(eng) * 0.95;
      ap.theta(i) = std::log(std::max(w, 1e-12));
      rest -= w;
    }
    return ap;
  };
  return sys;
}

inline RadialSystem radial_system(const std::string& name, int d) {
  if (name == "linf") return linf_system(d);
  if (name == "l1-simplex") return l1_simplex_system(d);
  if (name == "sphere") return sphere_system(d);
  if (name == "log-pseudo-polar") return log_pseudo_polar_system(d);
  throw std::invalid_argument("radial_system: unknown system '" + name + "'");
}

inline std::pair<double, AngularPoint> to_radial(const Eigen::VectorXd& x,
                                                 const RadialSystem& sys) {
  if (x.size() != sys.dim) throw std::domain_error("to_radial: dimension mismatch");
  return {sys.r(x), sys.theta(x)};
}

inline Eigen::VectorXd from_radial(double r, const AngularPoint& theta, const RadialSystem& sys) {
  return sys.inverse(r, theta);
}

struct HomogeneityReport {
  double max_relative_residual = 0.0;
  int n_checked = 0;
  int n_zero_density = 0;  // points where f = 0, reported instead of divided
};

// Samples points on the cone and scalings lambda, and reports
// max |f(scale(lambda,x)) - T(lambda)^order f(x)| / f(x).
inline HomogeneityReport check_homogeneity(
    const std::function<double(const Eigen::VectorXd&)>& f, double order, const RadialSystem& sys,
    int n_points, const std::vector<double>& lambdas, std::uint64_t seed = 42,
    const std::function<Eigen::VectorXd(std::mt19937_64&)>& point_sampler = nullptr) {
  HomogeneityReport rep;
  auto eng = detail::make_engine(seed);
  for (int i = 0; i < n_points; ++i) {
    Eigen::VectorXd x;
    if (point_sampler) {
      x = point_sampler(eng);
    } else {
      AngularPoint ap = sys.sample_angle(eng);
      double r0 = (sys.name == "log-pseudo-polar") ? 3.0 * detail::uniform01(eng)
                                                   : 1.0 + 2.0 * detail::uniform01(eng);
      if (sys.name == "log-pseudo-polar") {
        // keep the base point inside the positive-shift region
        double s = 0.0;
        for (Eigen::Index k = 0; k < ap.theta.size(); ++k) s += std::exp(ap.theta(k));
        double rmin = std::max(-std::log1p(-s), (ap.theta.size() ? -ap.theta.minCoeff() : 0.0));
        r0 += rmin;
      }
      x = sys.inverse(r0, ap);
    }
    double fx = f(x);
    if (fx == 0.0) {
      ++rep.n_zero_density;
      continue;
    }
    for (double lam : lambdas) {
      double fs = f(sys.scale(lam, x));
      double expect = std::pow(sys.decay.T(lam), order) * fx;
      double res = std::abs(fs - expect) / std::abs(fx);
      rep.max_relative_residual = std::max(rep.max_relative_residual, res);
      ++rep.n_checked;
    }
  }
  return rep;
}

}  // namespace tailgraph
