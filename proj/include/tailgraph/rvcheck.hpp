#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tailgraph/decay.hpp"
#include "tailgraph/detail/quadrature.hpp"
#include "tailgraph/detail/rng.hpp"

namespace tailgraph {

// Default probe grid: geometric between T-levels 10 and 1e5, pulled back
// through the transform; levels beyond the double range are dropped.
inline std::vector<double> default_t_grid(const DecayTransform& T, int n = 10,
                                          double lo = 10.0, double hi = 1e5) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) {
    double t = T.T_inv(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
    if (std::isfinite(t) && std::isfinite(T.T(t))) g.push_back(t);
  }
  if (g.size() < 3) throw std::invalid_argument("default_t_grid: domain too small");
  return g;
}

inline std::vector<double> default_x_ref(const DecayTransform& T, int n = 6) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = T.T_inv(std::pow(2.0, i + 1));
  return g;
}

struct IndexEstimate {
  double alpha = 0.0;
  bool converged = false;
  std::vector<std::pair<double, double>> path;  // (t, slope estimate at t)
};

// Least-squares slope of log[u(t*x)/u(t*e0)] against log T(x) over x_ref at
// the largest grid t, with a stability check across the grid.
inline IndexEstimate index_estimate(const std::function<double(double)>& u,
                                    const DecayTransform& T, std::vector<double> t_grid,
                                    const std::vector<double>& x_ref,
                                    double stability_tol = 1e-2) {
  if (t_grid.empty() || x_ref.size() < 2)
    throw std::invalid_argument("index_estimate: need a t grid and >= 2 reference points");
  std::sort(t_grid.begin(), t_grid.end());
  IndexEstimate out;
  for (double t : t_grid) {
    double u0 = u(star(t, T.e0, T));
    if (!(u0 > 0)) throw std::domain_error("index_estimate: u(t * e0) <= 0");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (double x : x_ref) {
      double sx_val;
      try {
        sx_val = star(t, x, T);  // probe points beyond double range are skipped
      } catch (const std::overflow_error&) {
        continue;
      }
      double ux = u(sx_val);
      if (!(ux > 0)) throw std::domain_error("index_estimate: u hit a nonpositive value");
      double lx = std::log(T.T(x));
      double ly = std::log(ux / u0);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++n;
    }
    if (n < 2) continue;  // this threshold cannot be probed in double precision
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    out.path.emplace_back(t, slope);
  }
  if (out.path.empty())
    throw std::domain_error("index_estimate: no usable grid point (range too extreme)");
  out.alpha = out.path.back().second;
  if (out.path.size() >= 2) {
    double prev = out.path[out.path.size() - 2].second;
    out.converged =
        std::abs(out.alpha - prev) <= stability_tol * std::max(1.0, std::abs(out.alpha));
  }
  return out;
}

struct AngularEstimate {
  std::vector<std::pair<Eigen::VectorXd, double>> h;  // (y, h-hat(y)), h-hat(1) = 1
  bool converged = false;
  double max_cross_t_change = 0.0;
};

// h-hat(y) = u(t_max, y)/u(t_max, 1) with cross-t stability diagnostics.
inline AngularEstimate angular_limit(
    const std::function<double(double, const Eigen::VectorXd&)>& u, const DecayTransform& T,
    std::vector<double> t_grid, const std::vector<Eigen::VectorXd>& y_grid,
    double stability_tol = 1e-2) {
  if (t_grid.empty() || y_grid.empty())
    throw std::invalid_argument("angular_limit: empty grid");
  std::sort(t_grid.begin(), t_grid.end());
  const Eigen::Index dy = y_grid.front().size();
  const Eigen::VectorXd pivot = Eigen::VectorXd::Ones(dy);
  auto h_at = [&](double t, std::vector<double>& vals) {
    double u1 = u(t, pivot);
    if (!(u1 > 0)) throw std::domain_error("angular_limit: u(t, 1) <= 0");
    vals.clear();
    for (const auto& y : y_grid) vals.push_back(u(t, y) / u1);
  };
  std::vector<double> last, prev;
  h_at(t_grid.back(), last);
  AngularEstimate out;
  if (t_grid.size() >= 2) {
    h_at(t_grid[t_grid.size() - 2], prev);
    for (std::size_t i = 0; i < last.size(); ++i)
      out.max_cross_t_change =
          std::max(out.max_cross_t_change,
                   std::abs(last[i] - prev[i]) / std::max(1.0, std::abs(last[i])));
    out.converged = out.max_cross_t_change <= stability_tol;
  }
  for (std::size_t i = 0; i < y_grid.size(); ++i) out.h.emplace_back(y_grid[i], last[i]);
  return out;
}

struct KaramataReport {
  std::vector<std::pair<double, double>> residuals;  // (t, residual)
  double alpha_hat = 0.0;
  double h_hat = 1.0;
  double quadrature_error = 0.0;
};

// residual(t) = T(t)/T'(t) * u(t,y)/U_bar(t,1) - alpha_hat * h_hat(y),
// with alpha and h estimated by the probes above. U_bar is the upper-tail
// integral of u in its first argument; computed by adaptive quadrature when
// not supplied.
inline KaramataReport karamata_residual(
    const std::function<double(double, const Eigen::VectorXd&)>& u,
    std::optional<std::function<double(double)>> U_bar, const DecayTransform& T,
    std::vector<double> t_grid, const Eigen::VectorXd& y = Eigen::VectorXd()) {
  if (t_grid.empty()) throw std::invalid_argument("karamata_residual: empty t grid");
  std::sort(t_grid.begin(), t_grid.end());
  const Eigen::VectorXd pivot = Eigen::VectorXd::Ones(y.size());
  auto u1 = [&](double x) { return u(x, pivot); };

  auto idx = index_estimate([&](double x) { return u1(x) / T.T_prime(x); }, T, t_grid,
                            default_x_ref(T));
  KaramataReport rep;
  rep.alpha_hat = -(1.0 + idx.alpha);
  rep.h_hat = 1.0;
  if (y.size() > 0) {
    auto ang = angular_limit(u, T, t_grid, {y});
    rep.h_hat = ang.h.front().second;
  }
  for (double t : t_grid) {
    double ub;
    if (U_bar) {
      ub = (*U_bar)(t);
    } else {
      auto q = detail::upper_tail_integral(u1, t, 1e-12);
      ub = q.value;
      rep.quadrature_error = std::max(rep.quadrature_error, q.error);
    }
    if (!(ub > 0)) throw std::domain_error("karamata_residual: U_bar(t,1) <= 0");
    double lhs = T.T(t) / T.T_prime(t) * u(t, y) / ub;
    rep.residuals.emplace_back(t, lhs - rep.alpha_hat * rep.h_hat);
  }
  return rep;
}

struct RVProbeReport {
  std::vector<std::pair<double, double>> alpha_path;  // (t, alpha-hat(t))
  std::vector<std::pair<double, double>> c_path;      // (t, c-hat(t))
  std::vector<std::pair<Eigen::VectorXd, double>> h_estimates;
  bool converged = false;
  bool alpha_stable = false;
  bool c_stable = false;
  double quadrature_error = 0.0;
  double stability_tol = 1e-2;
  std::string diagnostics;
};

// Splits a survival function into its local index alpha-hat(x) =
// [f(x)/F(x)] / [T'(x)/T(x)] (f by central differences) and the slowly
// varying residual c-hat(x) = F(x) exp(+int alpha-hat T'/T). A
// non-stabilizing alpha path is a legitimate outcome and is only flagged.
inline RVProbeReport representation_decompose(const std::function<double(double)>& F_bar,
                                              const DecayTransform& T,
                                              std::vector<double> x_grid,
                                              double stability_tol = 1e-2) {
  if (x_grid.size() < 2) throw std::invalid_argument("representation_decompose: short grid");
  std::sort(x_grid.begin(), x_grid.end());
  RVProbeReport rep;
  rep.stability_tol = stability_tol;
  auto density = [&](double x) {
    double h = std::max(std::abs(x), 1e-3) * 1e-6;
    return -(F_bar(x + h) - F_bar(x - h)) / (2 * h);
  };
  auto hazard = [&](double z) {  // alpha-hat(z) T'(z)/T(z) = f(z)/F(z)
    double Fb = F_bar(z);
    if (!(Fb > 0)) throw std::domain_error("representation_decompose: F_bar <= 0");
    return density(z) / Fb;
  };
  double cum = 0.0;
  double prev_x = T.e0;
  for (double x : x_grid) {
    if (!(x >= T.e0)) throw std::domain_error("representation_decompose: x below e0");
    auto q = detail::integrate(hazard, prev_x, x, 1e-10);
    cum += q.value;
    rep.quadrature_error += q.error;
    prev_x = x;
    double alpha_x = hazard(x) * T.T(x) / T.T_prime(x);
    rep.alpha_path.emplace_back(x, alpha_x);
    rep.c_path.emplace_back(x, F_bar(x) * std::exp(cum));
  }
  auto stable = [&](const std::vector<std::pair<double, double>>& p) {
    double a = p[p.size() - 1].second, b = p[p.size() - 2].second;
    return std::abs(a - b) <= stability_tol * std::max(1.0, std::abs(a));
  };
  rep.alpha_stable = stable(rep.alpha_path);
  rep.c_stable = stable(rep.c_path);
  rep.converged = rep.alpha_stable && rep.c_stable;
  std::ostringstream ss;
  ss << "alpha " << (rep.alpha_stable ? "stable" : "not stabilized") << ", c "
     << (rep.c_stable ? "stable" : "not stabilized") << " at tol " << stability_tol;
  rep.diagnostics = ss.str();
  return rep;
}

// Reconstruction F(x) = c(x) exp(-int alpha T'/T) from a decomposition
// report; inverse of representation_decompose on its own grid.
inline std::vector<std::pair<double, double>> recompose_survival(
    const RVProbeReport& rep, const std::function<double(double)>& F_bar,
    const DecayTransform& T) {
  std::vector<std::pair<double, double>> out;
  double cum = 0.0, prev = T.e0;
  for (std::size_t i = 0; i < rep.alpha_path.size(); ++i) {
    double x = rep.alpha_path[i].first;
    auto q = detail::integrate(
        [&](double z) {
          double Fb = F_bar(z);
          double h = std::max(std::abs(z), 1e-3) * 1e-6;
          double f = -(F_bar(z + h) - F_bar(z - h)) / (2 * h);
          return f / Fb;
        },
        prev, x, 1e-10);
    cum += q.value;
    prev = x;
    out.emplace_back(x, rep.c_path[i].second * std::exp(-cum));
  }
  return out;
}

struct MarginalLimitReport {
  // empirical Pr(b X_i >= t | ||X||_inf >= t) at the largest t, keyed (b, i)
  std::vector<std::tuple<int, int, double>> c_bi;
  double max_standardized_distance = 0.0;
  bool within_bands = false;
  bool widened_uncertainty = false;
  int n_exceedances = 0;
  std::string diagnostics;
};

// Compares the empirical law of t^{-1} X_A | ||X_A||_inf >= t against draws
// from the limit's A-marginal via exceedance probabilities over a fixed box
// family {min_i |y_i| >= lambda} and {|y_i| >= lambda}.
inline MarginalLimitReport marginal_limit_check(
    const std::function<Eigen::MatrixXd(int, std::uint64_t)>& sampler, const std::vector<int>& A,
    std::vector<double> t_grid, int n, std::uint64_t seed,
    const std::function<Eigen::MatrixXd(int, std::uint64_t)>& limit_marginal_sampler,
    int n_model = 20000) {
  if (A.empty()) throw std::invalid_argument("marginal_limit_check: empty margin set");
  std::sort(t_grid.begin(), t_grid.end());
  Eigen::MatrixXd X = sampler(n, seed);
  const int d = static_cast<int>(X.cols());
  const double t = t_grid.back();

  MarginalLimitReport rep;
  // monitor the marginal balance condition at the largest threshold
  int n_cone = 0;
  std::vector<int> pos(d, 0), neg(d, 0);
  for (int r = 0; r < X.rows(); ++r) {
    if (X.row(r).cwiseAbs().maxCoeff() >= t) {
      ++n_cone;
      for (int i = 0; i < d; ++i) {
        if (X(r, i) >= t) ++pos[i];
        if (-X(r, i) >= t) ++neg[i];
      }
    }
  }
  for (int i = 0; i < d; ++i) {
    rep.c_bi.emplace_back(+1, i, n_cone ? double(pos[i]) / n_cone : 0.0);
    rep.c_bi.emplace_back(-1, i, n_cone ? double(neg[i]) / n_cone : 0.0);
  }

  // scaled A-exceedances of the data
  std::vector<Eigen::VectorXd> emp;
  for (int r = 0; r < X.rows(); ++r) {
    Eigen::VectorXd xa(A.size());
    for (std::size_t j = 0; j < A.size(); ++j) xa(j) = X(r, A[j]);
    if (xa.cwiseAbs().maxCoeff() >= t) emp.push_back(xa / t);
  }
  rep.n_exceedances = static_cast<int>(emp.size());
  if (rep.n_exceedances < 50) rep.widened_uncertainty = true;

  Eigen::MatrixXd Y = limit_marginal_sampler(n_model, detail::derive_seed(seed, 7));
  const double band = rep.widened_uncertainty ? 5.0 : 3.0;
  auto box_prob = [](const std::vector<Eigen::VectorXd>& pts, auto&& pred) {
    if (pts.empty()) return std::pair<double, double>{0.0, 1.0};
    int c = 0;
    for (const auto& p : pts)
      if (pred(p)) ++c;
    double ph = double(c) / pts.size();
    return std::pair<double, double>{ph, std::sqrt(std::max(ph * (1 - ph), 1e-12) / pts.size())};
  };
  std::vector<Eigen::VectorXd> mod;
  for (int r = 0; r < Y.rows(); ++r) mod.push_back(Y.row(r).transpose());

  double maxz = 0.0;
  for (double lam : {1.5, 2.0, 3.0}) {
    for (std::size_t j = 0; j <= A.size(); ++j) {
      auto pred = [&](const Eigen::VectorXd& p) {
        if (j < A.size()) return std::abs(p(j)) >= lam;
        return p.cwiseAbs().minCoeff() >= lam;  // joint box
      };
      auto [pe, se] = box_prob(emp, pred);
      auto [pm, sm] = box_prob(mod, pred);
      double s = std::sqrt(se * se + sm * sm);
      if (s > 0) maxz = std::max(maxz, std::abs(pe - pm) / s);
    }
  }
  rep.max_standardized_distance = maxz;
  rep.within_bands = maxz <= band;
  std::ostringstream ss;
  ss << "n_exceed " << rep.n_exceedances << ", max |z| " << maxz << " vs band " << band;
  rep.diagnostics = ss.str();
  return rep;
}

}  // namespace tailgraph
