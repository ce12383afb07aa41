// Command-line surface for the tail-modeling library: simulation of the
// shipped homogeneous models, rank transform and censoring, graph selection
// by binary conditional-independence tests, clique-wise censored fitting,
// factorized density evaluation, and regular-variation diagnostics.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tailgraph/detail/csv.hpp"
#include "tailgraph/fixtures.hpp"
#include "tailgraph/infer.hpp"
#include "tailgraph/serialize.hpp"

namespace tg = tailgraph;
using tg::json;

namespace {

void write_json_artifact(const std::string& path, const json& payload, const json& config) {
  tg::detail::atomic_write(path, tg::artifact_envelope(payload, config).dump(2) + "\n");
}

void write_csv_with_meta(const std::string& path, const std::vector<std::string>& header,
                         const Eigen::MatrixXd& values, const json& config) {
  tg::detail::write_csv(path, header, values);
  json meta{{"config", config}, {"version", tg::version()}, {"rows", values.rows()}};
  tg::detail::atomic_write(path + ".meta.json", meta.dump(2) + "\n");
}

Eigen::MatrixXd read_matrix(const std::string& path) { return tg::detail::read_csv(path).values; }

void fail_usage(const std::vector<std::string>& errors) {
  for (const auto& e : errors) std::cerr << "config error: " << e << "\n";
  std::exit(2);
}

Eigen::VectorXd margin_thresholds(const Eigen::MatrixXd& data, double tail) {
  const int n = static_cast<int>(data.rows());
  Eigen::VectorXd t(data.cols());
  for (int j = 0; j < data.cols(); ++j) {
    std::vector<double> a(n);
    for (int i = 0; i < n; ++i) a[i] = std::abs(data(i, j));
    std::sort(a.begin(), a.end());
    int k = std::min(n - 1, static_cast<int>(std::floor((1.0 - tail) * n)));
    t(j) = a[k];
  }
  return t;
}

int cmd_simulate(const std::string& family, const std::string& gamma_path,
                 const std::string& q_path, double nu, int n, std::optional<std::uint64_t> seed,
                 const std::string& output) {
  std::vector<std::string> errors;
  if (n < 1) errors.push_back("--n must be >= 1");
  if (!seed) errors.push_back("--seed is required for simulate");
  if ((family == "hr" || family == "hr-raw") && gamma_path.empty())
    errors.push_back("--gamma <csv> is required for the hr families");
  if (family == "student" && q_path.empty()) errors.push_back("--q <csv> is required for student");
  if (!errors.empty()) fail_usage(errors);

  json config{{"command", "simulate"}, {"family", family}, {"n", n}, {"seed", *seed}};
  Eigen::MatrixXd draws;
  if (family == "hr") {
    tg::models::HuslerReissPareto m(read_matrix(gamma_path));
    draws = m.sample(n, *seed);
  } else if (family == "hr-raw") {
    draws = tg::models::sample_hr_spectral(read_matrix(gamma_path), n, *seed);
  } else if (family == "student") {
    tg::models::StudentLimit m(read_matrix(q_path), nu);
    config["nu"] = nu;
    draws = m.sample(n, *seed);
  } else if (family == "bivariate-sum") {
    tg::models::BivariateSumModel m;
    draws = m.sample(n, *seed);
  } else {
    fail_usage({"unknown family " + family});
  }
  std::vector<std::string> header;
  for (int j = 0; j < draws.cols(); ++j) header.push_back("y" + std::to_string(j + 1));
  write_csv_with_meta(output, header, draws, config);
  return 0;
}

int cmd_transform(const std::string& input, double tail, const std::string& output,
                  const std::string& summary) {
  std::vector<std::string> errors;
  if (!(tail > 0.0) || !(tail <= 0.5)) errors.push_back("--tail must lie in (0, 0.5]");
  if (!errors.empty()) fail_usage(errors);
  auto table = tg::detail::read_csv(input);
  auto res = tg::transform_to_pareto(table.values, tail);
  json config{{"command", "transform"}, {"input", input}, {"tail_fraction", tail}};

  Eigen::MatrixXd out(res.transformed.rows(), res.transformed.cols() + 1);
  out.leftCols(res.transformed.cols()) = res.transformed;
  for (int i = 0; i < out.rows(); ++i) {
    auto cp = tg::censor_point(res.transformed.row(i).transpose());
    out(i, res.transformed.cols()) = static_cast<double>(cp.pattern_mask());
  }
  std::vector<std::string> header = table.header;
  header.push_back("pattern");
  write_csv_with_meta(output, header, out, config);
  if (!summary.empty())
    write_json_artifact(summary, tg::transform_summary_json(res), config);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

int cmd_select_graph(const std::string& input, double tail, double threshold, double level,
                     int max_cond, const std::string& output, const std::string& tests_path) {
  std::vector<std::string> errors;
  if (threshold <= 0 && (!(tail > 0.0) || !(tail <= 0.5)))
    errors.push_back("--tail must lie in (0, 0.5] (or give --threshold)");
  if (!(level > 0.0) || !(level < 1.0)) errors.push_back("--level must lie in (0,1)");
  if (max_cond < 0) errors.push_back("--max-cond must be >= 0");
  if (!errors.empty()) fail_usage(errors);
  auto table = tg::detail::read_csv(input);
  Eigen::VectorXd t;
  if (threshold > 0) {
    t = Eigen::VectorXd::Constant(1, threshold);
  } else {
    t = margin_thresholds(table.values, tail);
  }
  auto sel = tg::select_graph_with_tests(table.values, t, level, max_cond);
  json config{{"command", "select-graph"}, {"input", input},      {"tail_fraction", tail},
              {"threshold", threshold},    {"level", level},      {"max_cond", max_cond}};
  write_json_artifact(output, tg::to_json(sel), config);
  if (!tests_path.empty()) {
    Eigen::MatrixXd rows(sel.tests.size(), 5);
    for (std::size_t k = 0; k < sel.tests.size(); ++k) {
      rows(k, 0) = sel.tests[k].pair.first;
      rows(k, 1) = sel.tests[k].pair.second;
      rows(k, 2) = sel.tests[k].statistic;
      rows(k, 3) = sel.tests[k].p_value ? *sel.tests[k].p_value : -1.0;
      rows(k, 4) = sel.tests[k].inconclusive ? 1.0 : 0.0;
    }
    write_csv_with_meta(tests_path, {"i", "j", "statistic", "p_value", "inconclusive"}, rows,
                        config);
  }
  return 0;
}

int cmd_fit(const std::string& input, double tail, const std::string& family,
            std::optional<std::uint64_t> seed, double level, int max_cond,
            const std::string& output, const std::string& report_path) {
  std::vector<std::string> errors;
  if (!(tail > 0.0) || !(tail <= 0.5)) errors.push_back("--tail must lie in (0, 0.5]");
  if (!seed) errors.push_back("--seed is required for fit");
  if (family != "hr") errors.push_back("--family must be hr (clique fitting family)");
  if (!(level > 0.0) || !(level < 1.0)) errors.push_back("--level must lie in (0,1)");
  if (!errors.empty()) fail_usage(errors);
  auto table = tg::detail::read_csv(input);
  tg::PipelineConfig cfg;
  cfg.tail_fraction = tail;
  cfg.family = family;
  cfg.level = level;
  cfg.max_cond = max_cond;
  cfg.seed = *seed;
  auto res = tg::fit_pipeline(table.values, cfg);
  json config{{"command", "fit"},   {"input", input},       {"tail_fraction", tail},
              {"family", family},   {"seed", *seed},        {"level", level},
              {"max_cond", max_cond}};
  write_json_artifact(output, tg::to_json(res.model), config);
  if (!report_path.empty()) write_json_artifact(report_path, tg::to_json(res), config);
  return 0;
}

int cmd_density(const std::string& model_path, const std::string& points_path,
                const std::string& output) {
  std::ifstream in(model_path);
  if (!in) fail_usage({"cannot open model file " + model_path});
  json j = json::parse(in);
  if (j.contains("artifact")) j = j.at("artifact");
  auto model = tg::factorized_from_json(j);
  auto pts = tg::detail::read_csv(points_path);
  if (pts.values.cols() != model.graph.n_vertices)
    fail_usage({"points dimension does not match the model"});
  Eigen::MatrixXd out(pts.values.rows(), pts.values.cols() + 1);
  out.leftCols(pts.values.cols()) = pts.values;
  for (int i = 0; i < pts.values.rows(); ++i) {
    auto cp = tg::CensoredPoint::checked(pts.values.row(i).transpose());
    out(i, pts.values.cols()) = tg::factorized_censored_density(model, cp);
  }
  std::vector<std::string> header = pts.header;
  header.push_back("density");
  json config{{"command", "density"}, {"model", model_path}, {"points", points_path}};
  write_csv_with_meta(output, header, out, config);
  return 0;
}

int cmd_check_rv(const std::string& fixture, const std::string& decay_name,
                 const std::string& output) {
  tg::fixtures::Fixture1D fx = tg::fixtures::fixture_by_name(fixture);
  tg::DecayTransform T = decay_name.empty() ? fx.decay : tg::decay_by_name(decay_name);
  json config{{"command", "check-rv"}, {"fixture", fixture},
              {"decay", decay_name.empty() ? fx.decay.name : decay_name}};

  auto t_grid = tg::default_t_grid(T);
  // keep the grid within the fixture's probe range
  for (auto& t : t_grid) t = std::max(t, fx.probe_left);
  std::sort(t_grid.begin(), t_grid.end());
  t_grid.erase(std::unique(t_grid.begin(), t_grid.end()), t_grid.end());
  if (t_grid.size() < 3) t_grid = {fx.probe_left, 2 * fx.probe_left, 4 * fx.probe_left};

  auto survival_idx = tg::index_estimate(fx.survival, T, t_grid, tg::default_x_ref(T));
  auto karamata = tg::karamata_residual(
      [&](double x, const Eigen::VectorXd&) { return fx.density(x); }, std::nullopt, T, t_grid);
  std::vector<double> x_grid = t_grid;
  auto decomp = tg::representation_decompose(fx.survival, T, x_grid);

  json payload{{"fixture", fixture},
               {"decay", T.name},
               {"survival_index", tg::to_json(survival_idx)},
               {"karamata", tg::to_json(karamata)},
               {"decomposition", tg::to_json(decomp)}};
  if (!output.empty())
    write_json_artifact(output, payload, config);
  else
    std::cout << tg::artifact_envelope(payload, config).dump(2) << "\n";
  return 0;
}

int cmd_report(const std::string& model_path, const std::string& output) {
  std::ifstream in(model_path);
  if (!in) fail_usage({"cannot open model file " + model_path});
  json j = json::parse(in);
  json cfg = j.contains("config") ? j.at("config") : json::object();
  if (j.contains("artifact")) j = j.at("artifact");
  std::ostringstream ss;
  if (j.contains("model")) j = j.at("model");  // accept a pipeline report too
  auto model = tg::factorized_from_json(j);
  ss << "factorized tail model (version " << tg::version() << ")\n";
  ss << "vertices: " << model.graph.n_vertices << ", alpha: " << model.alpha
     << ", global exceedance probability: " << model.p << "\n";
  ss << "cliques:\n";
  for (std::size_t i = 0; i < model.graph.cliques.size(); ++i) {
    ss << "  {";
    for (std::size_t k = 0; k < model.graph.cliques[i].size(); ++k)
      ss << (k ? "," : "") << model.graph.cliques[i][k];
    ss << "}  family " << model.clique_models[i]->family() << "  p_S "
       << model.p_cliques[i] << "\n";
  }
  ss << "separators:\n";
  for (std::size_t i = 0; i < model.graph.separators.size(); ++i) {
    ss << "  {";
    for (std::size_t k = 0; k < model.graph.separators[i].size(); ++k)
      ss << (k ? "," : "") << model.graph.separators[i][k];
    ss << "}  p_S " << model.p_separators[i] << "\n";
  }
  if (!cfg.empty()) ss << "source config: " << cfg.dump() << "\n";
  if (!output.empty())
    tg::detail::atomic_write(output, ss.str());
  else
    std::cout << ss.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tail modeling of multivariate extremes with decomposable graphs"};
  app.require_subcommand(1);

  // simulate
  std::string sim_family = "hr", sim_gamma, sim_q, sim_out = "draws.csv";
  double sim_nu = 2.0;
  int sim_n = 1000;
  std::optional<std::uint64_t> sim_seed;
  auto* sim = app.add_subcommand("simulate", "draw from a shipped tail model");
  sim->add_option("--family", sim_family, "hr | hr-raw | student | bivariate-sum");
  sim->add_option("--gamma", sim_gamma, "variogram matrix csv (hr, hr-raw)");
  sim->add_option("--q", sim_q, "quadratic-form matrix csv (student)");
  sim->add_option("--nu", sim_nu, "tail index (student)");
  sim->add_option("--n", sim_n, "number of draws");
  sim->add_option("--seed", sim_seed, "random seed (required)");
  sim->add_option("--output", sim_out, "output csv");

  // transform
  std::string tr_in, tr_out = "transformed.csv", tr_summary;
  double tr_tail = 0.05;
  auto* tr = app.add_subcommand("transform", "rank transform to the unit Pareto tail scale");
  tr->add_option("--input", tr_in, "input csv")->required();
  tr->add_option("--tail", tr_tail, "tail fraction per sign");
  tr->add_option("--output", tr_out, "output csv (transformed + pattern column)");
  tr->add_option("--summary", tr_summary, "summary json path");

  // select-graph
  std::string sg_in, sg_out = "graph.json", sg_tests;
  double sg_tail = 0.05, sg_threshold = -1.0, sg_level = 0.05;
  int sg_max_cond = 2;
  auto* sg = app.add_subcommand("select-graph",
                                "choose a decomposable graph by exceedance-indicator tests");
  sg->add_option("--input", sg_in, "input csv")->required();
  sg->add_option("--tail", sg_tail, "tail fraction defining per-margin thresholds");
  sg->add_option("--threshold", sg_threshold, "absolute indicator threshold (overrides --tail)");
  sg->add_option("--level", sg_level, "test level");
  sg->add_option("--max-cond", sg_max_cond, "largest conditioning set");
  sg->add_option("--output", sg_out, "graph json");
  sg->add_option("--tests", sg_tests, "per-edge test table csv");

  // fit
  std::string fit_in, fit_family = "hr", fit_out = "model.json", fit_report;
  double fit_tail = 0.05, fit_level = 0.05;
  int fit_max_cond = 2;
  std::optional<std::uint64_t> fit_seed;
  auto* fit = app.add_subcommand("fit", "transform, select a graph, fit cliques, assemble");
  fit->add_option("--input", fit_in, "input csv")->required();
  fit->add_option("--tail", fit_tail, "tail fraction");
  fit->add_option("--family", fit_family, "clique family (hr)");
  fit->add_option("--seed", fit_seed, "random seed (required)");
  fit->add_option("--level", fit_level, "test level for graph selection");
  fit->add_option("--max-cond", fit_max_cond, "largest conditioning set");
  fit->add_option("--output", fit_out, "model json");
  fit->add_option("--report", fit_report, "full pipeline report json");

  // density
  std::string de_model, de_points, de_out = "density.csv";
  auto* de = app.add_subcommand("density", "evaluate the factorized censored density");
  de->add_option("--model", de_model, "model json")->required();
  de->add_option("--points", de_points, "censored points csv")->required();
  de->add_option("--output", de_out, "output csv");

  // check-rv
  std::string rv_fixture = "gaussian", rv_decay, rv_out;
  auto* rv = app.add_subcommand("check-rv", "regular-variation diagnostics on a fixture");
  rv->add_option("--fixture", rv_fixture, "gaussian | log-cauchy | oscillating | pareto");
  rv->add_option("--decay", rv_decay, "id | exp | exp-sq | power-exp | log | finite-endpoint");
  rv->add_option("--output", rv_out, "report json (stdout when omitted)");

  // report
  std::string rp_model, rp_out;
  auto* rp = app.add_subcommand("report", "render a fitted model as text");
  rp->add_option("--model", rp_model, "model or pipeline-report json")->required();
  rp->add_option("--output", rp_out, "text output path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (sim->parsed())
      return cmd_simulate(sim_family, sim_gamma, sim_q, sim_nu, sim_n, sim_seed, sim_out);
    if (tr->parsed()) return cmd_transform(tr_in, tr_tail, tr_out, tr_summary);
    if (sg->parsed())
      return cmd_select_graph(sg_in, sg_tail, sg_threshold, sg_level, sg_max_cond, sg_out,
                              sg_tests);
    if (fit->parsed())
      return cmd_fit(fit_in, fit_tail, fit_family, fit_seed, fit_level, fit_max_cond, fit_out,
                     fit_report);
    if (de->parsed()) return cmd_density(de_model, de_points, de_out);
    if (rv->parsed()) return cmd_check_rv(rv_fixture, rv_decay, rv_out);
    if (rp->parsed()) return cmd_report(rp_model, rp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
