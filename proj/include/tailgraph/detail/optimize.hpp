#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>

namespace tailgraph::detail {

struct OptimResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  double grad_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double scale = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double h = scale * (1.0 + std::abs(x(i)));
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

inline Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                                  const Eigen::VectorXd& x, double scale = 1e-4) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd H(n, n);
  double f0 = f(x);
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) h(i) = scale * (1.0 + std::abs(x(i)));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      if (i == j) {
        Eigen::VectorXd xp = x, xm = x;
        xp(i) += h(i);
        xm(i) -= h(i);
        H(i, i) = (f(xp) - 2 * f0 + f(xm)) / (h(i) * h(i));
      } else {
        Eigen::VectorXd xpp = x, xpm = x, xmp = x, xmm = x;
        xpp(i) += h(i); xpp(j) += h(j);
        xpm(i) += h(i); xpm(j) -= h(j);
        xmp(i) -= h(i); xmp(j) += h(j);
        xmm(i) -= h(i); xmm(j) -= h(j);
        H(i, j) = H(j, i) = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4 * h(i) * h(j));
      }
    }
  }
  return H;
}

// BFGS with finite-difference gradients and Armijo backtracking. Objectives
// may return +inf outside their feasible region; the line search backs off.
inline OptimResult bfgs_minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                                 Eigen::VectorXd x0, double grad_tol = 1e-8, int max_iter = 500) {
  const Eigen::Index n = x0.size();
  OptimResult res;
  res.x = x0;
  res.value = f(x0);
  if (!std::isfinite(res.value)) return res;
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd g = fd_gradient(f, res.x);
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    res.grad_norm = g.norm();
    if (res.grad_norm <= grad_tol) {
      res.converged = true;
      return res;
    }
    Eigen::VectorXd dir = -Hinv * g;
    if (dir.dot(g) >= 0) {  // reset on loss of descent
      Hinv.setIdentity();
      dir = -g;
    }
    double step = 1.0;
    double fx = res.value;
    const double c1 = 1e-4;
    Eigen::VectorXd xn;
    double fn = std::numeric_limits<double>::infinity();
    bool ok = false;
    for (int ls = 0; ls < 50; ++ls) {
      xn = res.x + step * dir;
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + c1 * step * g.dot(dir)) {
        ok = true;
        break;
      }
      step *= 0.5;
    }
    if (!ok) {
      res.converged = res.grad_norm <= 1e2 * grad_tol;
      return res;
    }
    Eigen::VectorXd gn = fd_gradient(f, xn);
    Eigen::VectorXd s = xn - res.x;
    Eigen::VectorXd yv = gn - g;
    double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      Eigen::MatrixXd V = I - (s * yv.transpose()) / sy;
      Hinv = V * Hinv * V.transpose() + (s * s.transpose()) / sy;
    }
    res.x = xn;
    res.value = fn;
    g = gn;
  }
  res.grad_norm = g.norm();
  res.converged = res.grad_norm <= grad_tol;
  return res;
}

}  // namespace tailgraph::detail
