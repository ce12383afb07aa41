#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tailgraph/censor.hpp"
#include "tailgraph/detail/mvn.hpp"
#include "tailgraph/detail/optimize.hpp"
#include "tailgraph/detail/rng.hpp"
#include "tailgraph/graph.hpp"
#include "tailgraph/models.hpp"

namespace tailgraph {

struct FitResult {
  std::vector<int> clique;
  std::string family;
  Eigen::VectorXd parameters;      // hr: upper off-diagonal Gamma entries; pareto: alpha
  double log_likelihood = 0.0;
  int n_used = 0;
  bool converged = false;
  bool boundary = false;
  Eigen::VectorXd standard_errors;  // observed-information based
  models::ModelPtr model;
};

namespace infer_detail {

inline Eigen::MatrixXd gamma_from_vector(const Eigen::VectorXd& g, int m) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, m);
  int k = 0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      G(i, j) = G(j, i) = g(k++);
    }
  return G;
}

inline Eigen::VectorXd vector_from_gamma(const Eigen::MatrixXd& G) {
  const int m = static_cast<int>(G.rows());
  Eigen::VectorXd g(m * (m - 1) / 2);
  int k = 0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) g(k++) = G(i, j);
  return g;
}

// magnitudes of the non-atom censored points with their local patterns
struct CliqueData {
  std::vector<Eigen::VectorXd> values;       // |y| restricted to the pattern
  std::vector<std::vector<int>> patterns;    // local indices within the clique
};

inline CliqueData clique_data(const CensoredSample& s, int min_points) {
  CliqueData cd;
  for (const auto& p : s.points) {
    if (p.is_atom) continue;
    auto a = p.pattern();
    Eigen::VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v(i) = std::abs(p.values(a[i]));
    cd.values.push_back(std::move(v));
    cd.patterns.push_back(std::move(a));
  }
  if (static_cast<int>(cd.values.size()) < min_points)
    throw std::invalid_argument("fit_clique: fewer than " + std::to_string(min_points) +
                                " non-atom points");
  return cd;
}

// permutation-invariant sum of per-point log terms
inline double stable_sum(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

inline double censored_loglik(const models::HomogeneousTailDensity& m, const CliqueData& cd) {
  std::vector<double> logs;
  logs.reserve(cd.values.size());
  for (std::size_t i = 0; i < cd.values.size(); ++i) {
    double v = m.censored_density(cd.values[i], cd.patterns[i]);
    if (!(v > 0) || !std::isfinite(v)) return -std::numeric_limits<double>::infinity();
    logs.push_back(std::log(v));
  }
  return stable_sum(logs);
}

}  // namespace infer_detail

// Censored maximum likelihood on one clique. Families: "hr" (variogram
// entries, quasi-Newton on log-reparameterized off-diagonals, five jittered
// restarts), "pareto" (closed-form index MLE, dimension one) and
// "bivariate-sum" (no parameters, likelihood evaluation only).
inline FitResult fit_clique(const CensoredSample& sample_S, const std::string& family,
                            std::optional<Eigen::VectorXd> init, std::uint64_t seed,
                            int min_points = 30) {
  const int m = sample_S.dim();
  FitResult out;
  out.family = family;
  auto cd = infer_detail::clique_data(sample_S, min_points);
  out.n_used = static_cast<int>(cd.values.size());

  if (family == "pareto") {
    if (m != 1) throw std::invalid_argument("fit_clique: pareto family is univariate");
    double slog = 0.0;
    for (const auto& v : cd.values) slog += std::log(v(0));
    if (slog <= 0.0) throw std::invalid_argument("fit_clique: degenerate pareto sample");
    double alpha = out.n_used / slog;
    out.parameters = Eigen::VectorXd::Constant(1, alpha);
    out.standard_errors = Eigen::VectorXd::Constant(1, alpha / std::sqrt(out.n_used));
    out.converged = true;
    out.model = std::make_shared<models::UnitPareto>(alpha);
    out.log_likelihood = infer_detail::censored_loglik(*out.model, cd);
    return out;
  }
  if (family == "bivariate-sum") {
    if (m != 2) throw std::invalid_argument("fit_clique: bivariate-sum is two-dimensional");
    out.model = std::make_shared<models::BivariateSumModel>();
    out.parameters = Eigen::VectorXd();
    out.standard_errors = Eigen::VectorXd();
    out.converged = true;
    out.log_likelihood = infer_detail::censored_loglik(*out.model, cd);
    return out;
  }
  if (family != "hr") throw std::invalid_argument("fit_clique: unsupported family " + family);
  if (m < 2) throw std::invalid_argument("fit_clique: hr needs dimension >= 2");

  const int npar = m * (m - 1) / 2;
  auto nll_log = [&](const Eigen::VectorXd& t) {
    Eigen::VectorXd g = t.array().exp();
    try {
      models::HuslerReissPareto hr(infer_detail::gamma_from_vector(g, m));
      return -infer_detail::censored_loglik(hr, cd);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  Eigen::VectorXd t0 = Eigen::VectorXd::Zero(npar);
  if (init) {
    if (init->size() != npar) throw std::invalid_argument("fit_clique: bad init size");
    t0 = init->array().log();
  }
  detail::OptimResult best;
  auto eng = detail::make_engine(seed);
  for (int restart = 0; restart < 5; ++restart) {
    Eigen::VectorXd t = t0;
    if (restart > 0)
      for (int i = 0; i < npar; ++i) t(i) += (detail::uniform01(eng) - 0.5);
    auto r = detail::bfgs_minimize(nll_log, t, 1e-8, 500);
    if (r.value < best.value) best = r;
  }
  if (!std::isfinite(best.value))
    throw std::runtime_error("fit_clique: optimization failed from all restarts");

  Eigen::VectorXd gamma_hat = best.x.array().exp();
  out.parameters = gamma_hat;
  out.converged = best.converged;
  out.boundary = (gamma_hat.minCoeff() < 1e-3) || (gamma_hat.maxCoeff() > 25.0);
  out.log_likelihood = -best.value;
  out.model = std::make_shared<models::HuslerReissPareto>(
      infer_detail::gamma_from_vector(gamma_hat, m));

  // observed information in the Gamma parameterization
  auto nll_gamma = [&](const Eigen::VectorXd& g) {
    if (g.minCoeff() <= 0) return std::numeric_limits<double>::infinity();
    try {
      models::HuslerReissPareto hr(infer_detail::gamma_from_vector(g, m));
      return -infer_detail::censored_loglik(hr, cd);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  Eigen::MatrixXd H = detail::fd_hessian(nll_gamma, gamma_hat);
  out.standard_errors = Eigen::VectorXd::Constant(npar, std::numeric_limits<double>::quiet_NaN());
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd Hinv = llt.solve(Eigen::MatrixXd::Identity(npar, npar));
    for (int i = 0; i < npar; ++i)
      out.standard_errors(i) = std::sqrt(std::max(Hinv(i, i), 0.0));
  }
  return out;
}

struct PSEstimate {
  double value = 0.0;
  int n_hits = 0;
  bool small_sample = false;
};

// p_S = p_hat * fraction of exceedance points with some |value| >= 1 in S.
inline PSEstimate estimate_pS(const CensoredSample& sample, const std::vector<int>& S) {
  PSEstimate est;
  int n_exceed = 0;
  for (const auto& p : sample.points) {
    if (p.is_atom) continue;
    ++n_exceed;
    for (int v : S)
      if (std::abs(p.values(v)) >= 1.0) {
        ++est.n_hits;
        break;
      }
  }
  if (n_exceed == 0) throw std::invalid_argument("estimate_pS: empty exceedance sample");
  est.value = sample.p_hat * static_cast<double>(est.n_hits) / n_exceed;
  est.small_sample = est.n_hits < 20;
  return est;
}

struct StratumTable {
  std::uint32_t code = 0;     // pattern of conditioning indicators (post pooling: lowest code)
  int pooled_from = 1;        // number of raw strata pooled into this row
  long n11 = 0, n10 = 0, n01 = 0, n00 = 0;
  long total() const { return n11 + n10 + n01 + n00; }
};

struct CITestResult {
  std::pair<int, int> pair;
  std::vector<int> conditioning;
  double statistic = 0.0;
  std::optional<double> p_value;  // absent when every stratum is degenerate
  std::string method = "binary-chisq";
  std::vector<StratumTable> strata;
  bool inconclusive = false;
};

// Cochran-Mantel-Haenszel chi-square for independence of the exceedance
// indicators of margins i and j across the strata of the conditioning
// indicators. Strata below min_cell observations are pooled with the next
// stratum in code order.
inline CITestResult binary_ci_test(const Eigen::MatrixXd& data, int i, int j,
                                   const std::vector<int>& cond, const Eigen::VectorXd& t,
                                   int min_cell = 5) {
  const int n = static_cast<int>(data.rows());
  const int d = static_cast<int>(data.cols());
  if (i == j || i < 0 || j < 0 || i >= d || j >= d)
    throw std::invalid_argument("binary_ci_test: bad pair");
  for (int c : cond)
    if (c == i || c == j || c < 0 || c >= d)
      throw std::invalid_argument("binary_ci_test: bad conditioning set");
  if (t.size() != d && t.size() != 1)
    throw std::invalid_argument("binary_ci_test: thresholds must be scalar or per margin");
  auto thr = [&](int c) { return t.size() == 1 ? t(0) : t(c); };

  CITestResult res;
  res.pair = {std::min(i, j), std::max(i, j)};
  res.conditioning = cond;

  std::map<std::uint32_t, StratumTable> raw;
  for (int r = 0; r < n; ++r) {
    std::uint32_t code = 0;
    for (std::size_t k = 0; k < cond.size(); ++k)
      if (std::abs(data(r, cond[k])) >= thr(cond[k])) code |= (1u << k);
    bool bi = std::abs(data(r, i)) >= thr(i);
    bool bj = std::abs(data(r, j)) >= thr(j);
    auto& s = raw[code];
    s.code = code;
    if (bi && bj) ++s.n11;
    else if (bi) ++s.n10;
    else if (bj) ++s.n01;
    else ++s.n00;
  }
  // adjacent pooling in code order
  std::vector<StratumTable> pooled;
  for (auto& [code, s] : raw) {
    if (!pooled.empty() && pooled.back().total() < min_cell) {
      auto& p = pooled.back();
      p.n11 += s.n11; p.n10 += s.n10; p.n01 += s.n01; p.n00 += s.n00;
      p.pooled_from += 1;
    } else {
      pooled.push_back(s);
    }
  }
  if (pooled.size() >= 2 && pooled.back().total() < min_cell) {
    auto last = pooled.back();
    pooled.pop_back();
    auto& p = pooled.back();
    p.n11 += last.n11; p.n10 += last.n10; p.n01 += last.n01; p.n00 += last.n00;
    p.pooled_from += last.pooled_from;
  }
  res.strata = pooled;

  double num = 0.0, den = 0.0;
  for (const auto& s : pooled) {
    double ns = static_cast<double>(s.total());
    if (ns < 2) continue;
    double r1 = static_cast<double>(s.n11 + s.n10);
    double c1 = static_cast<double>(s.n11 + s.n01);
    if (r1 == 0 || c1 == 0 || r1 == ns || c1 == ns) continue;
    num += s.n11 - r1 * c1 / ns;
    den += r1 * (ns - r1) * c1 * (ns - c1) / (ns * ns * (ns - 1.0));
  }
  if (den <= 0.0) {
    res.inconclusive = true;
    return res;
  }
  res.statistic = num * num / den;
  res.p_value = detail::chisq_sf(res.statistic, 1.0);
  return res;
}

// Gamma_ij - Gamma_ik - Gamma_jk: zero exactly when margins i and j are
// conditionally independent on the anchor-k cone of the Huesler-Reiss
// family. A descriptive statistic; no null distribution is attached.
inline double hr_ci_statistic(const Eigen::MatrixXd& Gamma, int i, int j, int k) {
  const int d = static_cast<int>(Gamma.rows());
  if (i == j || i == k || j == k) throw std::invalid_argument("hr_ci_statistic: indices collide");
  if (i < 0 || j < 0 || k < 0 || i >= d || j >= d || k >= d)
    throw std::invalid_argument("hr_ci_statistic: index out of range");
  return Gamma(i, j) - Gamma(i, k) - Gamma(j, k);
}

namespace infer_detail {

// greedy minimum-fill triangulation, lowest-index tie-breaking
inline std::set<std::pair<int, int>> min_fill_triangulate(int n,
                                                          std::set<std::pair<int, int>> edges) {
  std::vector<std::set<int>> adj(n);
  for (auto [a, b] : edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  std::vector<char> done(n, 0);
  for (int step = 0; step < n; ++step) {
    int best = -1;
    long best_fill = -1;
    for (int v = 0; v < n; ++v) {
      if (done[v]) continue;
      std::vector<int> nb;
      for (int u : adj[v])
        if (!done[u]) nb.push_back(u);
      long fill = 0;
      for (std::size_t a = 0; a < nb.size(); ++a)
        for (std::size_t b = a + 1; b < nb.size(); ++b)
          if (!adj[nb[a]].count(nb[b])) ++fill;
      if (best < 0 || fill < best_fill) {
        best = v;
        best_fill = fill;
      }
    }
    std::vector<int> nb;
    for (int u : adj[best])
      if (!done[u]) nb.push_back(u);
    for (std::size_t a = 0; a < nb.size(); ++a)
      for (std::size_t b = a + 1; b < nb.size(); ++b)
        if (!adj[nb[a]].count(nb[b])) {
          adj[nb[a]].insert(nb[b]);
          adj[nb[b]].insert(nb[a]);
          edges.insert({std::min(nb[a], nb[b]), std::max(nb[a], nb[b])});
        }
    done[best] = 1;
  }
  return edges;
}

}  // namespace infer_detail

struct GraphSelection {
  DecomposableGraph graph;
  std::vector<CITestResult> tests;
  std::set<std::pair<int, int>> removed_edges;
  std::set<std::pair<int, int>> fill_edges;
};

// Removes edges whose binary conditional-independence test retains the null
// at the given level (conditioning on the first max_cond other vertices;
// inconclusive tests keep the edge), then restores decomposability by
// minimum-fill triangulation.
inline GraphSelection select_graph_with_tests(const Eigen::MatrixXd& data,
                                              const Eigen::VectorXd& t, double level,
                                              int max_cond, int min_cell = 5) {
  const int d = static_cast<int>(data.cols());
  GraphSelection sel;
  std::set<std::pair<int, int>> kept;
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      std::vector<int> cond;
      for (int c = 0; c < d && static_cast<int>(cond.size()) < max_cond; ++c)
        if (c != i && c != j) cond.push_back(c);
      auto res = binary_ci_test(data, i, j, cond, t, min_cell);
      bool keep = res.inconclusive || (res.p_value && *res.p_value <= level);
      if (keep) kept.insert({i, j});
      else sel.removed_edges.insert({i, j});
      sel.tests.push_back(std::move(res));
    }
  }
  auto chordal = infer_detail::min_fill_triangulate(d, kept);
  for (auto e : chordal)
    if (!kept.count(e)) sel.fill_edges.insert(e);
  sel.graph = decomposable_check(d, chordal);
  return sel;
}

inline DecomposableGraph select_graph(const Eigen::MatrixXd& data, const Eigen::VectorXd& t,
                                      double level, int max_cond, int min_cell = 5) {
  return select_graph_with_tests(data, t, level, max_cond, min_cell).graph;
}

// ---------------------------------------------------------------------------
// End-to-end pipeline: transform/censor, select a decomposable graph, fit
// clique models and exceedance weights, assemble.

struct PipelineConfig {
  double tail_fraction = 0.05;
  std::string family = "hr";
  double level = 0.05;
  int max_cond = 2;
  int min_cell = 5;
  int min_clique_points = 30;
  std::uint64_t seed = 0;
};

struct PipelineResult {
  TransformResult transform;
  CensoredSample censored;
  GraphSelection selection;
  std::vector<FitResult> fits;
  std::vector<PSEstimate> p_cliques_empirical;
  std::vector<PSEstimate> p_separators_empirical;
  FactorizedTailModel model;
  double log_likelihood = 0.0;
};

inline PipelineResult fit_pipeline(const Eigen::MatrixXd& raw, const PipelineConfig& cfg) {
  PipelineResult out;
  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("fit_pipeline[") + name + "]: " + e.what());
    }
  };
  out.transform = stage("transform", [&] { return transform_to_pareto(raw, cfg.tail_fraction); });
  out.censored = censor_sample(out.transform);
  const int d = static_cast<int>(raw.cols());
  out.selection = stage("select-graph", [&] {
    return select_graph_with_tests(out.transform.transformed, Eigen::VectorXd::Constant(1, 1.0),
                                   cfg.level, cfg.max_cond, cfg.min_cell);
  });
  const auto& g = out.selection.graph;
  const bool single_singleton = (g.cliques.size() == 1 && g.cliques[0].size() == 1);
  std::vector<models::ModelPtr> clique_models;
  for (std::size_t c = 0; c < g.cliques.size(); ++c) {
    const auto& S = g.cliques[c];
    auto sub = out.censored.restrict(S);
    std::string family = S.size() == 1 ? "pareto" : cfg.family;
    auto fit = stage("fit-clique", [&] {
      return fit_clique(sub, family, std::nullopt, detail::derive_seed(cfg.seed, c),
                        cfg.min_clique_points);
    });
    fit.clique = S;
    // standardized margins: singleton cliques inside a larger graph use the
    // unit Pareto index so the assembly's shared alpha is coherent
    if (S.size() == 1 && !single_singleton)
      fit.model = std::make_shared<models::UnitPareto>(1.0);
    clique_models.push_back(fit.model);
    out.fits.push_back(std::move(fit));
  }
  for (const auto& S : g.cliques) out.p_cliques_empirical.push_back(estimate_pS(out.censored, S));
  for (const auto& S : g.separators)
    out.p_separators_empirical.push_back(S.empty() ? PSEstimate{}
                                                   : estimate_pS(out.censored, S));
  out.model = stage("assemble", [&] {
    return assemble(g, clique_models, out.p_cliques_empirical.front().value);
  });
  std::vector<double> logs;
  for (const auto& p : out.censored.points) {
    if (p.is_atom) continue;  // atoms carry the (1 - p_S) weights already
    logs.push_back(std::log(factorized_censored_density(out.model, p)));
  }
  out.log_likelihood = infer_detail::stable_sum(logs);
  (void)d;
  return out;
}

}  // namespace tailgraph
