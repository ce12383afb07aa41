#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tailgraph/censor.hpp"
#include "tailgraph/detail/qmc.hpp"
#include "tailgraph/detail/quadrature.hpp"
#include "tailgraph/models.hpp"
#include "tailgraph/radial.hpp"

namespace tailgraph {

struct NotDecomposableError : std::runtime_error {
  std::vector<int> cycle;
  explicit NotDecomposableError(std::vector<int> cyc)
      : std::runtime_error(make_message(cyc)), cycle(std::move(cyc)) {}
  static std::string make_message(const std::vector<int>& cyc) {
    std::ostringstream ss;
    ss << "graph is not decomposable; chordless cycle (";
    for (std::size_t i = 0; i < cyc.size(); ++i) ss << (i ? "," : "") << cyc[i];
    ss << ")";
    return ss.str();
  }
};

struct AssemblyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A decomposable (chordal) graph with its maximal cliques, junction-tree
// separators (with multiplicity) and a perfect elimination order. Cliques
// are listed in junction-tree discovery order; separator k joins clique
// tree_edges[k].second to the earlier clique tree_edges[k].first.
struct DecomposableGraph {
  int n_vertices = 0;
  std::set<std::pair<int, int>> edges;  // normalized i < j
  std::vector<std::vector<int>> cliques;
  std::vector<std::vector<int>> separators;
  std::vector<int> elimination_order;
  std::vector<std::pair<int, int>> tree_edges;

  bool has_edge(int a, int b) const {
    if (a > b) std::swap(a, b);
    return edges.count({a, b}) > 0;
  }
};

namespace graph_detail {

inline std::set<std::pair<int, int>> normalize_edges(int n,
                                                     const std::set<std::pair<int, int>>& in) {
  std::set<std::pair<int, int>> out;
  for (auto [a, b] : in) {
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (a < 0 || b >= n) throw std::invalid_argument("graph: vertex out of range");
    out.insert({a, b});
  }
  return out;
}

// maximum-cardinality search from vertex 0, lowest-index tie-breaking
inline std::vector<int> mcs_order(int n, const std::vector<std::set<int>>& adj) {
  std::vector<int> label(n, 0), order;
  std::vector<char> used(n, 0);
  for (int step = 0; step < n; ++step) {
    int best = -1;
    for (int v = 0; v < n; ++v)
      if (!used[v] && (best < 0 || label[v] > label[best])) best = v;
    used[best] = 1;
    order.push_back(best);
    for (int u : adj[best])
      if (!used[u]) ++label[u];
  }
  return order;
}

}  // namespace graph_detail

// Runs maximum-cardinality search, verifies the perfect elimination order,
// extracts maximal cliques and junction-tree separators. Throws
// NotDecomposableError with a chordless-cycle certificate when the graph is
// not chordal.
inline DecomposableGraph decomposable_check(int n, const std::set<std::pair<int, int>>& edges_in) {
  if (n < 1) throw std::invalid_argument("decomposable_check: n >= 1 required");
  DecomposableGraph g;
  g.n_vertices = n;
  g.edges = graph_detail::normalize_edges(n, edges_in);
  std::vector<std::set<int>> adj(n);
  for (auto [a, b] : g.edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  std::vector<int> mcs = graph_detail::mcs_order(n, adj);
  // eliminate in reverse visit order
  std::vector<int> elim(mcs.rbegin(), mcs.rend());
  std::vector<int> pos(n);
  for (int i = 0; i < n; ++i) pos[elim[i]] = i;

  std::vector<std::vector<int>> cand;  // elimination cliques
  for (int i = 0; i < n; ++i) {
    int v = elim[i];
    std::vector<int> later;
    for (int u : adj[v])
      if (pos[u] > i) later.push_back(u);
    for (std::size_t a = 0; a < later.size(); ++a) {
      for (std::size_t b = a + 1; b < later.size(); ++b) {
        int x = later[a], y = later[b];
        if (!adj[x].count(y)) {
          // certificate: shortest x..y path avoiding N[v] \ {x,y}, plus v
          std::vector<int> blocked(n, 0);
          blocked[v] = 1;
          for (int u : adj[v]) blocked[u] = 1;
          blocked[x] = blocked[y] = 0;
          std::vector<int> parent(n, -2);
          std::queue<int> q;
          q.push(x);
          parent[x] = -1;
          while (!q.empty() && parent[y] == -2) {
            int c = q.front();
            q.pop();
            for (int u : adj[c])
              if (!blocked[u] && parent[u] == -2) {
                parent[u] = c;
                q.push(u);
              }
          }
          std::vector<int> cyc{v};
          for (int c = y; c != -1; c = parent[c]) cyc.push_back(c);
          std::reverse(cyc.begin() + 1, cyc.end());
          throw NotDecomposableError(std::move(cyc));
        }
      }
    }
    std::vector<int> cl = later;
    cl.push_back(v);
    std::sort(cl.begin(), cl.end());
    cand.push_back(std::move(cl));
  }
  g.elimination_order = elim;

  // maximal cliques: drop candidates contained in another candidate
  std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
    return a.size() > b.size() || (a.size() == b.size() && a < b);
  });
  std::vector<std::vector<int>> maximal;
  for (const auto& c : cand) {
    bool sub = false;
    for (const auto& m : maximal)
      if (std::includes(m.begin(), m.end(), c.begin(), c.end())) {
        sub = true;
        break;
      }
    if (!sub) maximal.push_back(c);
  }
  // junction tree by running intersection: cliques ordered by their earliest
  // vertex in the elimination order
  auto rank = [&](const std::vector<int>& cl) {
    int best = n;
    for (int v : cl) best = std::min(best, pos[v]);
    return best;
  };
  std::sort(maximal.begin(), maximal.end(), [&](const auto& a, const auto& b) {
    int ra = rank(a), rb = rank(b);
    return ra < rb || (ra == rb && a < b);
  });
  g.cliques = maximal;
  std::set<int> seen;
  for (std::size_t j = 0; j < g.cliques.size(); ++j) {
    if (j == 0) {
      seen.insert(g.cliques[0].begin(), g.cliques[0].end());
      continue;
    }
    std::vector<int> sep;
    for (int v : g.cliques[j])
      if (seen.count(v)) sep.push_back(v);
    int parent = -1;
    for (std::size_t i = 0; i < j && parent < 0; ++i)
      if (std::includes(g.cliques[i].begin(), g.cliques[i].end(), sep.begin(), sep.end()))
        parent = static_cast<int>(i);
    if (parent < 0) parent = 0;  // only possible for an empty separator
    g.separators.push_back(sep);
    g.tree_edges.emplace_back(parent, static_cast<int>(j));
    seen.insert(g.cliques[j].begin(), g.cliques[j].end());
  }
  return g;
}

// ---------------------------------------------------------------------------
// Clique-factorized censored tail model: a decomposable graph, one
// homogeneous density per clique, derived separator models, and exceedance
// weights p_S propagated along the junction tree.
struct FactorizedTailModel {
  DecomposableGraph graph;
  std::vector<models::ModelPtr> clique_models;
  std::vector<models::ModelPtr> separator_models;
  std::vector<double> p_cliques;
  std::vector<double> p_separators;
  double p = 0.0;  // global exceedance probability (derived from the weights)
  double alpha = 1.0;

  // local indices of y-pattern coordinates within the sorted set S
  static std::vector<int> local_indices(const std::vector<int>& S, const std::vector<int>& sub) {
    std::vector<int> loc;
    for (int v : sub) {
      auto it = std::lower_bound(S.begin(), S.end(), v);
      if (it != S.end() && *it == v) loc.push_back(static_cast<int>(it - S.begin()));
    }
    return loc;
  }
};

namespace graph_detail {

inline std::vector<int> intersect_sorted(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// deterministic probe points used to compare separator marginals
inline std::vector<Eigen::VectorXd> probe_points(int dim, bool positive) {
  std::vector<Eigen::VectorXd> pts;
  Eigen::VectorXd p = Eigen::VectorXd::Constant(dim, 1.5);
  pts.push_back(p);
  for (int i = 0; i < dim; ++i) {
    Eigen::VectorXd q = Eigen::VectorXd::Constant(dim, 1.25);
    q(i) = 2.5;
    pts.push_back(q);
  }
  if (!positive && dim >= 1) {
    Eigen::VectorXd q = Eigen::VectorXd::Constant(dim, 1.5);
    q(0) = -1.5;
    pts.push_back(q);
  }
  return pts;
}

}  // namespace graph_detail

// Builds the factorized model. p_root is the exceedance weight assigned to
// the first clique; separator and remaining clique weights follow from the
// marginal-consistency identity p_D = p_C Pr_C(||y_D||_inf >= 1); the global
// exceedance probability is recovered from the atom identity. Separator
// models are marginals of their earlier adjacent clique. Clique models whose
// separator marginals disagree beyond `tol` are rejected.
inline FactorizedTailModel assemble(const DecomposableGraph& graph,
                                    const std::vector<models::ModelPtr>& clique_models,
                                    double p_root, double tol = 1e-4) {
  if (clique_models.size() != graph.cliques.size())
    throw AssemblyError("assemble: one model per clique required");
  if (!(p_root > 0.0) || !(p_root < 1.0))
    throw AssemblyError("assemble: p must lie in (0,1)");
  FactorizedTailModel M;
  M.graph = graph;
  M.clique_models = clique_models;
  for (std::size_t i = 0; i < clique_models.size(); ++i) {
    if (!clique_models[i]) throw AssemblyError("assemble: null clique model");
    if (clique_models[i]->dim() != static_cast<int>(graph.cliques[i].size()))
      throw AssemblyError("assemble: clique model dimension mismatch at clique " +
                          std::to_string(i));
  }
  M.alpha = clique_models.front()->alpha();
  for (const auto& m : clique_models)
    if (std::abs(m->alpha() - M.alpha) > 1e-9)
      throw AssemblyError("assemble: clique tail indices alpha are inconsistent");

  // separator models from the earlier clique; consistency against the later
  for (std::size_t e = 0; e < graph.tree_edges.size(); ++e) {
    auto [ia, ib] = graph.tree_edges[e];
    const auto& D = graph.separators[e];
    if (D.empty()) {
      M.separator_models.push_back(nullptr);
      continue;
    }
    auto loc_a = FactorizedTailModel::local_indices(graph.cliques[ia], D);
    auto loc_b = FactorizedTailModel::local_indices(graph.cliques[ib], D);
    auto ma = clique_models[ia]->marginal(loc_a);
    auto mb = clique_models[ib]->marginal(loc_b);
    for (const auto& pt : graph_detail::probe_points(static_cast<int>(D.size()),
                                                     ma->positive_cone())) {
      double va = ma->density(pt), vb = mb->density(pt);
      if (std::abs(va - vb) > tol * std::max({std::abs(va), std::abs(vb), 1e-12})) {
        std::ostringstream ss;
        ss << "assemble: separator marginals disagree between cliques " << ia << " and " << ib
           << " (relative gap " << std::abs(va - vb) / std::max(std::abs(va), std::abs(vb))
           << ")";
        throw AssemblyError(ss.str());
      }
    }
    M.separator_models.push_back(ma);
  }

  // propagate exceedance weights along the junction tree
  M.p_cliques.assign(graph.cliques.size(), -1.0);
  M.p_separators.assign(graph.separators.size(), 0.0);
  M.p_cliques[0] = p_root;
  for (std::size_t e = 0; e < graph.tree_edges.size(); ++e) {
    auto [ia, ib] = graph.tree_edges[e];
    const auto& D = graph.separators[e];
    if (D.empty()) {
      M.p_separators[e] = 0.0;
      M.p_cliques[ib] = p_root;  // new connected component
      continue;
    }
    if (M.p_cliques[ia] < 0)
      throw AssemblyError("assemble: junction tree edges out of order");
    auto loc_a = FactorizedTailModel::local_indices(graph.cliques[ia], D);
    auto loc_b = FactorizedTailModel::local_indices(graph.cliques[ib], D);
    double ca = clique_models[ia]->exceed_prob(loc_a);
    double cb = clique_models[ib]->exceed_prob(loc_b);
    M.p_separators[e] = M.p_cliques[ia] * ca;
    M.p_cliques[ib] = M.p_separators[e] / cb;
  }
  for (double pc : M.p_cliques)
    if (!(pc > 0.0) || !(pc < 1.0))
      throw AssemblyError("assemble: propagated clique weight left (0,1); "
                          "choose a smaller p");
  double log_atom = 0.0;
  for (double pc : M.p_cliques) log_atom += std::log1p(-pc);
  for (double ps : M.p_separators) log_atom -= std::log1p(-ps);
  M.p = 1.0 - std::exp(log_atom);
  if (!(M.p > 0.0) || !(M.p < 1.0))
    throw AssemblyError("assemble: derived global exceedance probability invalid");
  return M;
}

// Censored density of the factorized model with respect to the mixed base
// measure: clique terms over separator terms, where a block S contributes
// p_S f_S(y_{S cap A}) when it meets the exceedance pattern A and 1 - p_S
// otherwise; the empty pattern returns the atom mass.
inline double factorized_censored_density(const FactorizedTailModel& M, const CensoredPoint& y) {
  if (y.values.size() != M.graph.n_vertices)
    throw std::invalid_argument("factorized_censored_density: dimension mismatch");
  const std::vector<int> A = y.pattern();
  auto term = [&](const std::vector<int>& S, const models::ModelPtr& model, double pS) {
    std::vector<int> SA = graph_detail::intersect_sorted(S, A);
    if (SA.empty()) return 1.0 - pS;
    Eigen::VectorXd vals(SA.size());
    for (std::size_t i = 0; i < SA.size(); ++i) vals(i) = y.values(SA[i]);
    auto loc = FactorizedTailModel::local_indices(S, SA);
    return pS * model->censored_density(vals, loc);
  };
  double num = 1.0, den = 1.0;
  for (std::size_t c = 0; c < M.graph.cliques.size(); ++c)
    num *= term(M.graph.cliques[c], M.clique_models[c], M.p_cliques[c]);
  for (std::size_t s = 0; s < M.graph.separators.size(); ++s) {
    if (M.graph.separators[s].empty()) continue;  // weight one
    den *= term(M.graph.separators[s], M.separator_models[s], M.p_separators[s]);
  }
  return num / den;
}

// log-density split into the clique/separator/weight contributions; the sum
// over observations of the first two plus the weight terms reproduces the
// factorized likelihood identically.
inline double factorized_censored_log_density(const FactorizedTailModel& M,
                                              const CensoredPoint& y) {
  return std::log(factorized_censored_density(M, y));
}

// ---------------------------------------------------------------------------
// Homogeneous extension of a cone density: density(s y) s^{alpha+d} for the
// scaling s that brings y onto the unit sup-norm cone.
inline double extended_density(const models::HomogeneousTailDensity& m, const Eigen::VectorXd& y) {
  double r = y.cwiseAbs().maxCoeff();
  if (!(r > 0)) throw std::domain_error("extended_density: zero vector");
  double s = (r >= 1.0) ? 1.0 : (1.0 + 1e-13) / r;
  return m.density(s * y) * std::pow(s, m.alpha() + m.dim());
}

// Normalized angular density of a homogeneous model in a radial system:
// h(theta) proportional to f(phi^{-1}(1,theta)) |det D phi^{-1}(1,theta)|.
class AngularDensity {
 public:
  AngularDensity(models::ModelPtr model, RadialSystem sys, int n_norm = 1 << 14,
                 std::uint64_t seed = 0)
      : model_(std::move(model)), sys_(std::move(sys)) {
    if (model_->dim() != sys_.dim)
      throw std::invalid_argument("AngularDensity: system dimension mismatch");
    k_ = 1.0;
    auto est = integrate_angular([this](const AngularPoint& ap) { return raw(ap); }, n_norm,
                                 seed);
    if (!(est.value > 0)) throw std::runtime_error("AngularDensity: normalization failed");
    k_ = 1.0 / est.value;
    norm_se_ = est.std_error * k_;
  }

  double operator()(const AngularPoint& ap) const { return k_ * raw(ap); }
  double operator()(const Eigen::VectorXd& theta) const {
    AngularPoint ap;
    ap.theta = theta;
    ap.chart = sys_.dim - 1;
    return (*this)(ap);
  }
  double normalization_std_error() const { return norm_se_; }
  const RadialSystem& system() const { return sys_; }

  // quasi-Monte Carlo integral of a functional over the angular domain
  detail::QmcEstimate integrate_angular(const std::function<double(const AngularPoint&)>& f,
                                        int n_points, std::uint64_t seed) const {
    const int d = sys_.dim;
    if (sys_.name == "l1-simplex") {
      // uniform simplex via sorted-spacings map of the cube
      auto wrapped = [&](const std::vector<double>& u) {
        std::vector<double> s(u.begin(), u.end());
        std::sort(s.begin(), s.end());
        AngularPoint ap;
        ap.chart = d - 1;
        ap.theta.resize(d - 1);
        double prev = 0.0;
        for (int i = 0; i < d - 1; ++i) {
          ap.theta(i) = s[i] - prev;
          prev = s[i];
        }
        return f(ap);
      };
      double volume = 1.0;
      for (int i = 2; i < d; ++i) volume /= i;  // vol of simplex = 1/(d-1)!
      auto est = detail::qmc_mean(wrapped, std::max(d - 1, 1), n_points, seed);
      return {est.value * volume, est.std_error * volume};
    }
    if (sys_.name == "linf") {
      // sum over the 2d faces; positive models use d faces
      bool positive = model_->positive_cone();
      double total = 0.0, var = 0.0;
      for (int face = 0; face < d; ++face) {
        for (int sgn = 0; sgn < (positive ? 1 : 2); ++sgn) {
          auto wrapped = [&](const std::vector<double>& u) {
            AngularPoint ap;
            ap.chart = face;
            ap.theta.resize(d - 1);
            for (int i = 0; i < d - 1; ++i) ap.theta(i) = u[i];
            ap.signs = Eigen::VectorXd::Ones(d);
            if (!positive) {
              // remaining randomness: sign pattern from extra coordinates
              for (int i = 0; i < d; ++i)
                ap.signs(i) = (u[(d - 1 + i) % std::max<std::size_t>(u.size(), 1)] < 0.5 &&
                               i != face)
                                  ? -1.0
                                  : 1.0;
              ap.signs(face) = sgn ? -1.0 : 1.0;
            }
            return f(ap);
          };
          auto est = detail::qmc_mean(wrapped, std::max(d - 1, 1), n_points / d, seed + face);
          double scale = positive ? 1.0 : std::pow(2.0, d - 1);
          total += est.value * scale;
          var += est.std_error * est.std_error * scale * scale;
        }
      }
      return {total, std::sqrt(var)};
    }
    throw std::invalid_argument("AngularDensity: unsupported system " + sys_.name);
  }

 private:
  double raw(const AngularPoint& ap) const {
    Eigen::VectorXd y = sys_.inverse(1.0, ap);
    return extended_density(*model_, y) * sys_.jacobian(1.0, ap);
  }
  models::ModelPtr model_;
  RadialSystem sys_;
  double k_ = 1.0;
  double norm_se_ = 0.0;
};

// Angular density of a factorized model (full exceedance pattern only):
// the clique/separator angular pieces recombined and renormalized.
class AngularFactorizedDensity {
 public:
  AngularFactorizedDensity(const FactorizedTailModel& M, RadialSystem sys, int n_norm = 1 << 14,
                           std::uint64_t seed = 0)
      : M_(&M), sys_(std::move(sys)) {
    if (sys_.dim != M.graph.n_vertices)
      throw std::invalid_argument("AngularFactorizedDensity: dimension mismatch");
    k_ = 1.0;
    auto est = integrate(n_norm, seed);
    if (!(est.value > 0))
      throw std::runtime_error("AngularFactorizedDensity: normalization failed");
    k_ = 1.0 / est.value;
  }

  double operator()(const Eigen::VectorXd& theta) const {
    AngularPoint ap;
    ap.theta = theta;
    ap.chart = sys_.dim - 1;
    return k_ * raw(ap);
  }
  double operator()(const AngularPoint& ap) const { return k_ * raw(ap); }

 private:
  double raw(const AngularPoint& ap) const {
    Eigen::VectorXd y = sys_.inverse(1.0, ap);
    double num = 1.0, den = 1.0;
    for (std::size_t c = 0; c < M_->graph.cliques.size(); ++c) {
      const auto& S = M_->graph.cliques[c];
      Eigen::VectorXd ys(S.size());
      for (std::size_t i = 0; i < S.size(); ++i) ys(i) = y(S[i]);
      num *= extended_density(*M_->clique_models[c], ys);
    }
    for (std::size_t s = 0; s < M_->graph.separators.size(); ++s) {
      const auto& D = M_->graph.separators[s];
      if (D.empty()) continue;
      Eigen::VectorXd ys(D.size());
      for (std::size_t i = 0; i < D.size(); ++i) ys(i) = y(D[i]);
      den *= extended_density(*M_->separator_models[s], ys);
    }
    return num / den * sys_.jacobian(1.0, ap);
  }

  detail::QmcEstimate integrate(int n_points, std::uint64_t seed) const {
    const int d = sys_.dim;
    if (sys_.name != "l1-simplex")
      throw std::invalid_argument("AngularFactorizedDensity: only the l1-simplex system is wired");
    auto wrapped = [&](const std::vector<double>& u) {
      std::vector<double> s(u.begin(), u.end());
      std::sort(s.begin(), s.end());
      AngularPoint ap;
      ap.chart = d - 1;
      ap.theta.resize(d - 1);
      double prev = 0.0;
      for (int i = 0; i < d - 1; ++i) {
        ap.theta(i) = s[i] - prev;
        prev = s[i];
      }
      return raw(ap);
    };
    double volume = 1.0;
    for (int i = 2; i < d; ++i) volume /= i;
    auto est = detail::qmc_mean(wrapped, std::max(d - 1, 1), n_points, seed);
    return {est.value * volume, est.std_error * volume};
  }

  const FactorizedTailModel* M_;
  RadialSystem sys_;
  double k_ = 1.0;
};

inline double angular_factorized_density(const FactorizedTailModel& M,
                                         const Eigen::VectorXd& theta, const RadialSystem& sys) {
  AngularFactorizedDensity h(M, sys);
  return h(theta);
}

// ---------------------------------------------------------------------------
// Consistency of an angular family under adding one coordinate:
//   h_A(theta) = k * int r(u,z)^{-alpha-1} h_{A+i}(theta(u,z)) J-ratio dz.
// For the l1 system the integral reduces to
//   k int_0^1 (1-w)^{alpha+|A|-1} h_{A+i}((1-w) u(theta)) dw.
// Returns the max absolute gap between h_A and the renormalized integral on
// the grid.
inline double consistency_residual(const std::function<double(const Eigen::VectorXd&)>& h_A,
                                   const std::function<double(const Eigen::VectorXd&)>& h_At,
                                   double alpha, const RadialSystem& sys_A,
                                   const RadialSystem& sys_At,
                                   const std::vector<Eigen::VectorXd>& theta_grid) {
  const int m = sys_A.dim;
  if (sys_At.dim != m + 1)
    throw std::invalid_argument("consistency_residual: systems must differ by one dimension");
  std::function<double(const Eigen::VectorXd&)> integral;
  if (sys_A.name == "l1-simplex" && sys_At.name == "l1-simplex") {
    integral = [&, m](const Eigen::VectorXd& theta) {
      AngularPoint ap;
      ap.theta = theta;
      ap.chart = m - 1;
      Eigen::VectorXd u = sys_A.inverse(1.0, ap);  // point on the unit simplex
      auto f = [&](double w) {
        Eigen::VectorXd arg = (1.0 - w) * u;  // first m coordinates of ((1-w)u, w)
        return std::pow(1.0 - w, alpha + m - 1) * h_At(arg);
      };
      return detail::integrate(f, 1e-12, 1.0 - 1e-12, 1e-11).value;
    };
  } else {
    integral = [&, m](const Eigen::VectorXd& theta) {
      AngularPoint ap;
      ap.theta = theta;
      ap.chart = m - 1;
      Eigen::VectorXd yA = sys_A.inverse(1.0, ap);
      auto f = [&](double z) {
        Eigen::VectorXd y(m + 1);
        y.head(m) = yA;
        y(m) = z;
        auto [r, th] = to_radial(y, sys_At);
        return std::pow(r, -alpha - 1.0) * h_At(th.theta) * sys_At.jacobian(1.0, th) /
               sys_At.jacobian(r, th) * std::pow(r, m);  // J(r,th) = r^m J(1,th) for T=id
      };
      return detail::upper_tail_integral(f, 1e-12, 1e-11).value;
    };
  }
  // renormalize the integral over the angular domain so the comparison is
  // between probability densities
  double norm = 0.0;
  if (m == 2) {
    norm = detail::integrate(
               [&](double t) {
                 Eigen::VectorXd th(1);
                 th(0) = t;
                 return integral(th);
               },
               1e-9, 1.0 - 1e-9, 1e-10)
               .value;
  } else {
    auto est = detail::qmc_mean(
        [&](const std::vector<double>& u) {
          std::vector<double> s(u.begin(), u.end());
          std::sort(s.begin(), s.end());
          Eigen::VectorXd th(m - 1);
          double prev = 0.0;
          for (int i = 0; i < m - 1; ++i) {
            th(i) = s[i] - prev;
            prev = s[i];
          }
          return integral(th);
        },
        std::max(m - 1, 1), 1 << 12, 0);
    double volume = 1.0;
    for (int i = 2; i < m; ++i) volume /= i;
    norm = est.value * volume;
  }
  if (!(norm > 0)) throw std::runtime_error("consistency_residual: integral normalization failed");
  double max_gap = 0.0;
  for (const auto& th : theta_grid)
    max_gap = std::max(max_gap, std::abs(h_A(th) - integral(th) / norm));
  return max_gap;
}

}  // namespace tailgraph
