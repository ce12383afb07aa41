#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace tailgraph {

// A decay transform T: E = [e0, e1) -> [1, inf), a strictly increasing
// diffeomorphism with T(e0) = 1. It defines the scaling operation
// x (*) y = T^{-1}(T(x) T(y)) that generalizes multiplication (T = id),
// addition (T = exp), p-norm combination (T = exp(x^p)) and decays with a
// finite endpoint.
struct DecayTransform {
  double e0 = 1.0;
  double e1 = std::numeric_limits<double>::infinity();
  std::function<double(double)> T;
  std::function<double(double)> T_inv;
  std::function<double(double)> T_prime;
  std::string name = "custom";
  std::map<std::string, double> parameters;

  bool contains(double x) const { return x >= e0 && x < e1; }

  void require(double x, const char* who) const {
    if (!(x >= e0) || !(x < e1))
      throw std::domain_error(std::string(who) + ": argument " + std::to_string(x) +
                              " outside E = [" + std::to_string(e0) + ", " +
                              std::to_string(e1) + ")");
  }

  // Grid checks of the structural invariants; throws on violation.
  // The grid covers T-range [1, 1e6] so unbounded domains are probed where
  // they matter.
  void validate(int grid_n = 64) const {
    if (!T || !T_inv || !T_prime) throw std::invalid_argument("DecayTransform: missing callable");
    if (std::abs(T(e0) - 1.0) > 1e-12)
      throw std::invalid_argument("DecayTransform: T(e0) must equal 1");
    double prev = -std::numeric_limits<double>::infinity();
    int usable = 0;
    for (int i = 0; i < grid_n; ++i) {
      double v = std::pow(10.0, 6.0 * i / (grid_n - 1));  // T-scale in [1, 1e6]
      double x = T_inv(v);
      if (!std::isfinite(x) || !std::isfinite(T(x))) continue;  // beyond double range
      ++usable;
      if (!(x >= e0 - 1e-12) || !(x <= e1))
        throw std::invalid_argument("DecayTransform: T_inv leaves the domain");
      double tx = T(x);
      if (std::abs(tx - v) > 1e-10 * v)
        throw std::invalid_argument("DecayTransform: T(T_inv(v)) != v on the grid");
      if (!(tx > prev)) throw std::invalid_argument("DecayTransform: T not strictly increasing");
      prev = tx;
      // derivative against central differences, away from the endpoints
      double h = (std::abs(x) + 1.0) * 1e-6;
      if (x - h > e0 && x + h < e1) {
        double fd = (T(x + h) - T(x - h)) / (2 * h);
        double tp = T_prime(x);
        if (std::abs(fd - tp) > 1e-6 * std::max(1.0, std::abs(tp)) * std::max(1.0, std::abs(fd)))
          throw std::invalid_argument("DecayTransform: T_prime inconsistent with T");
        if (!(tp > 0)) throw std::invalid_argument("DecayTransform: T_prime must be > 0");
      }
    }
    if (usable < grid_n / 4)
      throw std::invalid_argument("DecayTransform: domain too small to validate");
  }
};

inline DecayTransform identity_decay() {
  DecayTransform d;
  d.e0 = 1.0;
  d.e1 = std::numeric_limits<double>::infinity();
  d.T = [](double x) { return x; };
  d.T_inv = [](double v) { return v; };
  d.T_prime = [](double) { return 1.0; };
  d.name = "id";
  return d;
}

inline DecayTransform exp_decay() {
  DecayTransform d;
  d.e0 = 0.0;
  d.e1 = std::numeric_limits<double>::infinity();
  d.T = [](double x) { return std::exp(x); };
  d.T_inv = [](double v) { return std::log(v); };
  d.T_prime = [](double x) { return std::exp(x); };
  d.name = "exp";
  return d;
}

// T(x) = exp(x^p): x (*) y = (x^p + y^p)^{1/p}.
inline DecayTransform power_exp_decay(double p) {
  if (!(p > 0)) throw std::invalid_argument("power_exp_decay: p must be > 0");
  DecayTransform d;
  d.e0 = 0.0;
  d.e1 = std::numeric_limits<double>::infinity();
  d.T = [p](double x) { return std::exp(std::pow(x, p)); };
  d.T_inv = [p](double v) { return std::pow(std::log(v), 1.0 / p); };
  d.T_prime = [p](double x) {
    return (x == 0.0 && p < 1) ? std::numeric_limits<double>::infinity()
                               : p * std::pow(x, p - 1) * std::exp(std::pow(x, p));
  };
  d.name = "power-exp";
  d.parameters["p"] = p;
  return d;
}

// T(x) = log x on [e, inf); e0 = Euler's e so that T(e0) = 1.
inline DecayTransform log_decay() {
  DecayTransform d;
  d.e0 = 2.718281828459045235360287;
  d.e1 = std::numeric_limits<double>::infinity();
  d.T = [](double x) { return std::log(x); };
  d.T_inv = [](double v) { return std::exp(v); };
  d.T_prime = [](double x) { return 1.0 / x; };
  d.name = "log";
  return d;
}

// T(x) = (1 - x/e1)^{-1} on [0, e1): x (*) y = x + y - xy/e1.
inline DecayTransform finite_endpoint_decay(double e1) {
  if (!(e1 > 0) || !std::isfinite(e1))
    throw std::invalid_argument("finite_endpoint_decay: e1 must be finite and positive");
  DecayTransform d;
  d.e0 = 0.0;
  d.e1 = e1;
  d.T = [e1](double x) { return 1.0 / (1.0 - x / e1); };
  d.T_inv = [e1](double v) { return e1 * (1.0 - 1.0 / v); };
  d.T_prime = [e1](double x) {
    double u = 1.0 - x / e1;
    return 1.0 / (e1 * u * u);
  };
  d.name = "finite-endpoint";
  d.parameters["e1"] = e1;
  return d;
}

// User-supplied transform; checked on construction rather than trusted.
inline DecayTransform custom_decay(double e0, double e1, std::function<double(double)> T,
                                   std::function<double(double)> T_inv,
                                   std::function<double(double)> T_prime) {
  DecayTransform d;
  d.e0 = e0;
  d.e1 = e1;
  d.T = std::move(T);
  d.T_inv = std::move(T_inv);
  d.T_prime = std::move(T_prime);
  d.name = "custom";
  d.validate();
  return d;
}

inline DecayTransform decay_by_name(const std::string& name,
                                    const std::map<std::string, double>& params = {}) {
  if (name == "id") return identity_decay();
  if (name == "exp") return exp_decay();
  if (name == "power-exp") return power_exp_decay(params.count("p") ? params.at("p") : 2.0);
  if (name == "exp-sq") return power_exp_decay(2.0);
  if (name == "log") return log_decay();
  if (name == "finite-endpoint")
    return finite_endpoint_decay(params.count("e1") ? params.at("e1") : 1.0);
  throw std::invalid_argument("decay_by_name: unknown transform '" + name + "'");
}

// x (*) y = T^{-1}(T(x) T(y)).
inline double star(double x, double y, const DecayTransform& d) {
  d.require(x, "star");
  d.require(y, "star");
  double p = d.T(x) * d.T(y);
  if (!std::isfinite(p)) throw std::overflow_error("star: T(x)*T(y) overflows");
  double r = d.T_inv(p);
  if (!std::isfinite(r)) throw std::overflow_error("star: result exceeds the double range");
  return r;
}

// Componentwise star with a scalar broadcast: x (*) y := (x 1) (*) y.
inline Eigen::VectorXd star_vec(double x, const Eigen::VectorXd& y, const DecayTransform& d) {
  Eigen::VectorXd out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out(i) = star(x, y(i), d);
  return out;
}

}  // namespace tailgraph
