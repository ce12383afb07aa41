#pragma once

#include <json.hpp>

#include <memory>
#include <stdexcept>
#include <string>

#include "tailgraph/censor.hpp"
#include "tailgraph/graph.hpp"
#include "tailgraph/infer.hpp"
#include "tailgraph/models.hpp"
#include "tailgraph/rvcheck.hpp"
#include "tailgraph/version.hpp"

namespace tailgraph {

using json = nlohmann::json;

inline json to_json(const DecayTransform& d) {
  if (d.name == "custom")
    throw std::invalid_argument("to_json: custom decay transforms are not serializable");
  return json{{"name", d.name}, {"parameters", d.parameters}};
}

inline DecayTransform decay_from_json(const json& j) {
  std::map<std::string, double> params;
  if (j.contains("parameters")) params = j.at("parameters").get<std::map<std::string, double>>();
  return decay_by_name(j.at("name").get<std::string>(), params);
}

inline json to_json(const models::HomogeneousTailDensity& m) {
  json j{{"family", m.family()}, {"d", m.dim()}, {"alpha", m.alpha()}};
  if (auto hr = dynamic_cast<const models::HuslerReissPareto*>(&m)) {
    json rows = json::array();
    for (int i = 0; i < hr->dim(); ++i) {
      json row = json::array();
      for (int k = 0; k < hr->dim(); ++k) row.push_back(hr->Gamma()(i, k));
      rows.push_back(row);
    }
    j["parameters"] = json{{"gamma", rows}};
  } else if (auto st = dynamic_cast<const models::StudentLimit*>(&m)) {
    json rows = json::array();
    for (int i = 0; i < st->dim(); ++i) {
      json row = json::array();
      for (int k = 0; k < st->dim(); ++k) row.push_back(st->Q()(i, k));
      rows.push_back(row);
    }
    j["parameters"] = json{{"q", rows}, {"nu", st->dof()}};
  } else if (dynamic_cast<const models::BivariateSumModel*>(&m)) {
    j["parameters"] = json::object();
  } else if (dynamic_cast<const models::UnitPareto*>(&m)) {
    j["parameters"] = json{{"alpha", m.alpha()}};
  } else {
    throw std::invalid_argument("to_json: unknown model family");
  }
  return j;
}

inline Eigen::MatrixXd matrix_from_json(const json& rows) {
  const int n = static_cast<int>(rows.size());
  Eigen::MatrixXd M(n, n == 0 ? 0 : static_cast<int>(rows.at(0).size()));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < M.cols(); ++k) M(i, k) = rows.at(i).at(k).get<double>();
  return M;
}

inline models::ModelPtr model_from_json(const json& j) {
  const std::string family = j.at("family").get<std::string>();
  if (family == "hr")
    return std::make_shared<models::HuslerReissPareto>(
        matrix_from_json(j.at("parameters").at("gamma")));
  if (family == "student")
    return std::make_shared<models::StudentLimit>(matrix_from_json(j.at("parameters").at("q")),
                                                  j.at("parameters").at("nu").get<double>());
  if (family == "bivariate-sum") return std::make_shared<models::BivariateSumModel>();
  if (family == "pareto")
    return std::make_shared<models::UnitPareto>(j.at("parameters").at("alpha").get<double>());
  throw std::invalid_argument("model_from_json: unknown family " + family);
}

inline json to_json(const DecomposableGraph& g) {
  json edges = json::array();
  for (auto [a, b] : g.edges) edges.push_back(json::array({a, b}));
  json cliques = json::array();
  for (const auto& c : g.cliques) cliques.push_back(c);
  json seps = json::array();
  for (const auto& s : g.separators) seps.push_back(s);
  return json{{"n", g.n_vertices},
              {"edges", edges},
              {"cliques", cliques},
              {"separators", seps},
              {"elimination_order", g.elimination_order}};
}

inline DecomposableGraph graph_from_json(const json& j) {
  std::set<std::pair<int, int>> edges;
  for (const auto& e : j.at("edges")) edges.insert({e.at(0).get<int>(), e.at(1).get<int>()});
  return decomposable_check(j.at("n").get<int>(), edges);
}

inline json to_json(const FactorizedTailModel& m) {
  json cliques = json::array();
  for (std::size_t i = 0; i < m.graph.cliques.size(); ++i)
    cliques.push_back(json{{"vertices", m.graph.cliques[i]},
                           {"model", to_json(*m.clique_models[i])},
                           {"p", m.p_cliques[i]}});
  json seps = json::array();
  for (std::size_t i = 0; i < m.graph.separators.size(); ++i)
    seps.push_back(json{{"vertices", m.graph.separators[i]}, {"p", m.p_separators[i]}});
  return json{{"graph", to_json(m.graph)},
              {"cliques", cliques},
              {"separators", seps},
              {"p", m.p_cliques.empty() ? 0.0 : m.p_cliques.front()},
              {"p_global", m.p},
              {"alpha", m.alpha}};
}

inline FactorizedTailModel factorized_from_json(const json& j) {
  DecomposableGraph g = graph_from_json(j.at("graph"));
  std::vector<models::ModelPtr> cms(g.cliques.size());
  for (const auto& c : j.at("cliques")) {
    auto verts = c.at("vertices").get<std::vector<int>>();
    bool placed = false;
    for (std::size_t i = 0; i < g.cliques.size() && !placed; ++i)
      if (g.cliques[i] == verts) {
        cms[i] = model_from_json(c.at("model"));
        placed = true;
      }
    if (!placed) throw std::invalid_argument("factorized_from_json: clique not in graph");
  }
  return assemble(g, cms, j.at("p").get<double>());
}

inline json to_json(const IndexEstimate& e) {
  json path = json::array();
  for (auto [t, a] : e.path) path.push_back(json::array({t, a}));
  return json{{"alpha", e.alpha}, {"converged", e.converged}, {"path", path}};
}

inline json to_json(const KaramataReport& r) {
  json res = json::array();
  for (auto [t, v] : r.residuals) res.push_back(json::array({t, v}));
  return json{{"alpha_hat", r.alpha_hat},
              {"h_hat", r.h_hat},
              {"residuals", res},
              {"quadrature_error", r.quadrature_error}};
}

inline json to_json(const RVProbeReport& r) {
  json ap = json::array(), cp = json::array(), he = json::array();
  for (auto [t, a] : r.alpha_path) ap.push_back(json::array({t, a}));
  for (auto [t, c] : r.c_path) cp.push_back(json::array({t, c}));
  for (const auto& [y, h] : r.h_estimates) {
    json yv = json::array();
    for (Eigen::Index i = 0; i < y.size(); ++i) yv.push_back(y(i));
    he.push_back(json{{"y", yv}, {"h", h}});
  }
  return json{{"alpha_path", ap},
              {"c_path", cp},
              {"h_estimates", he},
              {"converged", r.converged},
              {"alpha_stable", r.alpha_stable},
              {"c_stable", r.c_stable},
              {"stability_tol", r.stability_tol},
              {"quadrature_error", r.quadrature_error},
              {"diagnostics", r.diagnostics}};
}

inline json to_json(const FitResult& f) {
  json params = json::array(), ses = json::array();
  for (Eigen::Index i = 0; i < f.parameters.size(); ++i) params.push_back(f.parameters(i));
  for (Eigen::Index i = 0; i < f.standard_errors.size(); ++i)
    ses.push_back(f.standard_errors(i));
  return json{{"clique", f.clique},
              {"family", f.family},
              {"parameters", params},
              {"standard_errors", ses},
              {"log_likelihood", f.log_likelihood},
              {"n_used", f.n_used},
              {"converged", f.converged},
              {"boundary", f.boundary}};
}

inline json to_json(const CITestResult& r) {
  json strata = json::array();
  for (const auto& s : r.strata)
    strata.push_back(json{{"code", s.code},
                          {"pooled_from", s.pooled_from},
                          {"n11", s.n11},
                          {"n10", s.n10},
                          {"n01", s.n01},
                          {"n00", s.n00}});
  json j{{"pair", json::array({r.pair.first, r.pair.second})},
         {"conditioning", r.conditioning},
         {"statistic", r.statistic},
         {"method", r.method},
         {"inconclusive", r.inconclusive},
         {"strata", strata}};
  if (r.p_value) j["p_value"] = *r.p_value;
  return j;
}

inline json to_json(const GraphSelection& s) {
  json tests = json::array();
  for (const auto& t : s.tests) tests.push_back(to_json(t));
  json removed = json::array(), fill = json::array();
  for (auto [a, b] : s.removed_edges) removed.push_back(json::array({a, b}));
  for (auto [a, b] : s.fill_edges) fill.push_back(json::array({a, b}));
  return json{{"graph", to_json(s.graph)},
              {"tests", tests},
              {"removed_edges", removed},
              {"fill_edges", fill}};
}

inline json transform_summary_json(const TransformResult& t) {
  json thr = json::array();
  for (int i = 0; i < t.thresholds.rows(); ++i) {
    json row;
    row["margin"] = i;
    if (std::isfinite(t.thresholds(i, 0))) row["positive"] = t.thresholds(i, 0);
    if (std::isfinite(t.thresholds(i, 1))) row["negative"] = t.thresholds(i, 1);
    thr.push_back(row);
  }
  return json{{"p_hat", t.p_hat},
              {"tail_fraction", t.tail_fraction},
              {"thresholds", thr},
              {"warnings", t.warnings}};
}

inline json to_json(const PipelineResult& p) {
  json fits = json::array();
  for (const auto& f : p.fits) fits.push_back(to_json(f));
  json pc = json::array(), ps = json::array();
  for (const auto& e : p.p_cliques_empirical)
    pc.push_back(json{{"value", e.value}, {"n_hits", e.n_hits}, {"small_sample", e.small_sample}});
  for (const auto& e : p.p_separators_empirical)
    ps.push_back(json{{"value", e.value}, {"n_hits", e.n_hits}, {"small_sample", e.small_sample}});
  return json{{"transform", transform_summary_json(p.transform)},
              {"selection", to_json(p.selection)},
              {"fits", fits},
              {"p_cliques_empirical", pc},
              {"p_separators_empirical", ps},
              {"model", to_json(p.model)},
              {"log_likelihood", p.log_likelihood}};
}

// every written artifact carries its configuration and the library version
inline json artifact_envelope(json payload, json config) {
  return json{{"artifact", std::move(payload)},
              {"config", std::move(config)},
              {"version", version()}};
}

}  // namespace tailgraph
