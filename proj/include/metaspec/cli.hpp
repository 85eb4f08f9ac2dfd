#pragma once

// Run configuration, the analyze / validate / matrix / example3 pipelines and
// report output. The command-line front end in tools/ is a thin wrapper.

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "metaspec/asymptotics.hpp"
#include "metaspec/interaction_matrix.hpp"
#include "metaspec/oracle.hpp"
#include "metaspec/potential.hpp"
#include "metaspec/topology.hpp"

namespace metaspec::cli {

using json = nlohmann::json;

inline constexpr const char* kToolName = "metaspec";
inline constexpr const char* kToolVersion = "1.0.0";

// ---------------------------------------------------------------- config

namespace detail {

inline json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  throw Error("cli", "unsupported TOML value (dates and times are not accepted)");
}

inline Error config_error(const std::string& msg) { return Error("cli", "config: " + msg); }

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error(std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw config_error(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace detail

inline json load_config_tree(const std::string& path) {
  const std::filesystem::path p(path);
  if (!std::filesystem::exists(p)) throw Error("cli", "config file not found: " + path);
  if (p.extension() == ".json") {
    std::ifstream in(path);
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      throw Error("cli", std::string("config: invalid JSON: ") + e.what());
    }
  }
  try {
    return detail::toml_to_json(toml::parse_file(path));
  } catch (const toml::parse_error& e) {
    throw Error("cli", std::string("config: invalid TOML: ") + std::string(e.description()));
  }
}

/// Potential from its config record: polynomial (terms or 1D coefficients),
/// gaussian_wells, or tabulated.
inline ScalarField make_potential(const json& p) {
  using detail::require;
  const auto family = require<std::string>(p, "family");
  if (family == "polynomial") {
    const int dim = detail::get_or<int>(p, "dimension", 1);
    std::vector<Monomial> terms;
    if (p.contains("coefficients")) {
      if (dim != 1) throw detail::config_error("'coefficients' is for one-dimensional polynomials");
      const auto c = require<std::vector<double>>(p, "coefficients");
      for (std::size_t k = 0; k < c.size(); ++k) {
        if (c[k] != 0.0) terms.push_back({c[k], {static_cast<int>(k), 0}});
      }
    } else {
      for (const auto& t : require<std::vector<std::vector<double>>>(p, "terms")) {
        if (t.size() != static_cast<std::size_t>(dim) + 1) throw detail::config_error("polynomial term needs coefficient plus one power per axis");
        terms.push_back({t[0], {static_cast<int>(t[1]), dim == 2 ? static_cast<int>(t[2]) : 0}});
      }
    }
    return ScalarField(Polynomial(dim, terms));
  }
  if (family == "gaussian_wells") {
    std::vector<Vec> centers;
    for (const auto& c : require<std::vector<std::vector<double>>>(p, "centers")) {
      centers.push_back(Eigen::Map<const Vec>(c.data(), static_cast<Eigen::Index>(c.size())));
    }
    return ScalarField(GaussianWells(centers, require<std::vector<double>>(p, "depths"),
                                     require<std::vector<double>>(p, "widths"), require<double>(p, "confinement")));
  }
  if (family == "tabulated") {
    return ScalarField(Tabulated1d(require<std::vector<double>>(p, "knots"), require<std::vector<double>>(p, "values")));
  }
  throw detail::config_error("unknown potential family '" + family + "'");
}

struct GridLevel {
  double h = 0.0;
  std::vector<int> points;
};

struct RunConfig {
  std::string name = "run";
  json potential_spec;
  ScalarField field{Polynomial(1, {{1.0, {2, 0}}})};
  Box box;
  std::optional<OperatorKind> op;
  std::optional<double> gamma;
  std::vector<double> h_list;
  unsigned seed = 0;

  // topology
  int topology_points = 0;  // 0: 801 in 1D, 201 in 2D
  double genericity_tol = 1e-8;

  // oracle
  std::vector<int> points;
  std::vector<GridLevel> levels;
  std::optional<std::vector<double>> extent;
  bool richardson = true;
  SolveMode mode = SolveMode::shift_invert;
  int how_many = 0;  // 0: n0 + 2
  Transport transport = Transport::upwind2;
  WittenForm witten_form = WittenForm::factorized;
  double boundary_margin = 2.0;
  Eigen::Index sparse_ceiling = 600000;

  // checks
  double ratio_tolerance = 0.15;
  std::optional<double> barrier_tolerance;
  double bracket_tolerance = 0.1;
  bool require_monotone = false;
  bool compare_checks = true;  // false: comparison tables are reported but not checked

  // matrix diagnostics
  std::vector<double> matrix_h;
  double alpha = 0.5;
  double coefficient = 1.0;
  int random_draws = 1000;
  std::optional<ThreeWellSystem> three_well;

  // run options
  int threads = 1;
  Eigen::Index dense_ceiling = 5000;
  bool dump_operators = false;
  json raw;

  [[nodiscard]] int dimension() const { return field.dimension(); }
  [[nodiscard]] std::vector<int> points_for(double h) const {
    for (const auto& l : levels) {
      if (std::abs(l.h - h) <= 1e-12 * h) return l.points;
    }
    return points;
  }
};

inline RunConfig parse_config(const json& j) {
  using detail::config_error;
  using detail::get_or;
  if (!j.is_object()) throw config_error("top level must be a table");
  RunConfig c;
  c.raw = j;
  c.name = get_or<std::string>(j, "name", "run");
  c.potential_spec = detail::require<json>(j, "potential");
  c.field = make_potential(c.potential_spec);
  const json box = detail::require<json>(j, "box");
  const auto lo = detail::require<std::vector<double>>(box, "lower");
  const auto hi = detail::require<std::vector<double>>(box, "upper");
  if (lo.size() != hi.size() || static_cast<int>(lo.size()) != c.field.dimension()) throw config_error("box dimension does not match the potential");
  c.box = {Eigen::Map<const Vec>(lo.data(), static_cast<Eigen::Index>(lo.size())),
           Eigen::Map<const Vec>(hi.data(), static_cast<Eigen::Index>(hi.size()))};
  for (int a = 0; a < c.box.dimension(); ++a) {
    if (!(c.box.lower[a] < c.box.upper[a])) throw config_error("box lower must be below upper");
  }

  if (j.contains("operator")) {
    const auto op = detail::require<std::string>(j, "operator");
    if (op == "kfp") {
      c.op = OperatorKind::kfp;
    } else if (op == "witten") {
      c.op = OperatorKind::witten;
    } else {
      throw config_error("operator must be 'kfp' or 'witten'");
    }
  }
  if (j.contains("gamma")) c.gamma = detail::require<double>(j, "gamma");
  if (c.op == OperatorKind::kfp && !c.gamma) throw config_error("gamma is required for operator = kfp");
  if (c.op != OperatorKind::kfp && c.gamma) throw config_error("gamma is only allowed with operator = kfp");
  if (c.gamma && !(*c.gamma > 0.0)) throw config_error("gamma must be positive");
  if (c.op == OperatorKind::kfp && c.field.dimension() != 1) throw config_error("operator = kfp needs a one-dimensional potential");

  c.h_list = get_or<std::vector<double>>(j, "h", {});
  for (std::size_t i = 0; i < c.h_list.size(); ++i) {
    if (!(c.h_list[i] > 0.0)) throw config_error("h values must be positive");
    if (i > 0 && !(c.h_list[i] < c.h_list[i - 1])) throw config_error("h values must be strictly descending");
  }
  c.seed = get_or<unsigned>(j, "seed", 0u);

  const json topo = get_or<json>(j, "topology", json::object());
  c.topology_points = get_or<int>(topo, "points", 0);
  c.genericity_tol = get_or<double>(topo, "genericity_tol", 1e-8);

  const json grid = get_or<json>(j, "grid", json::object());
  c.points = get_or<std::vector<int>>(grid, "points", std::vector<int>(c.field.dimension() == 1 && c.op == OperatorKind::kfp ? 2 : c.field.dimension(), 241));
  for (const auto& l : get_or<json>(grid, "level", json::array())) {
    c.levels.push_back({detail::require<double>(l, "h"), detail::require<std::vector<int>>(l, "points")});
  }
  if (grid.contains("extent")) c.extent = detail::require<std::vector<double>>(grid, "extent");
  c.richardson = get_or<bool>(grid, "richardson", true);
  const auto mode = get_or<std::string>(grid, "mode", "shift_invert");
  if (mode == "dense") {
    c.mode = SolveMode::dense;
  } else if (mode != "shift_invert") {
    throw config_error("grid.mode must be 'dense' or 'shift_invert'");
  }
  c.how_many = get_or<int>(grid, "how_many", 0);
  const auto transport = get_or<std::string>(grid, "transport", "upwind2");
  if (transport == "central") {
    c.transport = Transport::central;
  } else if (transport != "upwind2") {
    throw config_error("grid.transport must be 'upwind2' or 'central'");
  }
  const auto form = get_or<std::string>(grid, "witten_form", "factorized");
  if (form == "central") {
    c.witten_form = WittenForm::central;
  } else if (form != "factorized") {
    throw config_error("grid.witten_form must be 'factorized' or 'central'");
  }
  c.boundary_margin = get_or<double>(grid, "boundary_margin", 2.0);
  c.sparse_ceiling = get_or<Eigen::Index>(grid, "sparse_ceiling", 600000);

  const json checks = get_or<json>(j, "checks", json::object());
  c.ratio_tolerance = get_or<double>(checks, "ratio_tolerance", 0.15);
  if (checks.contains("barrier_tolerance")) c.barrier_tolerance = detail::require<double>(checks, "barrier_tolerance");
  c.bracket_tolerance = get_or<double>(checks, "bracket_tolerance", 0.1);
  c.require_monotone = get_or<bool>(checks, "require_monotone", false);
  c.compare_checks = get_or<bool>(checks, "compare", true);

  const json m = get_or<json>(j, "matrix", json::object());
  c.matrix_h = get_or<std::vector<double>>(m, "h", c.h_list);
  c.alpha = get_or<double>(m, "alpha", 0.5);
  c.coefficient = get_or<double>(m, "coefficient", 1.0);
  c.random_draws = get_or<int>(m, "random_draws", 1000);
  if (m.contains("three_well")) {
    ThreeWellSystem s;
    const auto sg = detail::require<std::vector<double>>(m["three_well"], "sigma");
    const auto mu = detail::require<std::vector<double>>(m["three_well"], "mu");
    if (sg.size() != 3 || mu.size() != 3) throw config_error("three_well sigma and mu need three entries");
    std::copy(sg.begin(), sg.end(), s.sigma.begin());
    std::copy(mu.begin(), mu.end(), s.mu.begin());
    c.three_well = s;
  }
  return c;
}

inline RunConfig load_config(const std::string& path) { return parse_config(load_config_tree(path)); }

// ---------------------------------------------------------------- report helpers

namespace detail {

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json complex_json(Cplx z) { return json::array({z.real(), z.imag()}); }

inline json merge_subtree(const MergeTree& t, int id) {
  json node;
  for (const auto& n : t.nodes) {
    if (n.minimum_id == id) {
      node["minimum_id"] = id;
      node["death_value"] = number_or_null(n.death_value);
      node["death_saddle_id"] = n.death_saddle_id;
    }
  }
  node["children"] = json::array();
  for (const auto& n : t.nodes) {
    if (n.parent_minimum_id == id) node["children"].push_back(merge_subtree(t, n.minimum_id));
  }
  return node;
}

inline json merge_tree_json(const MergeTree& t) {
  json roots = json::array();
  for (const auto& n : t.nodes) {
    if (n.parent_minimum_id < 0) roots.push_back(merge_subtree(t, n.minimum_id));
  }
  json levels = json::array();
  for (double s : t.sigma_levels) levels.push_back(number_or_null(s));
  return {{"roots", roots}, {"sigma_levels", levels}};
}

}  // namespace detail

/// Unit annotation for every numeric field name that appears in a report.
inline json units_table() {
  const std::string energy = "potential units";
  const std::string rate = "potential units (operator eigenvalue)";
  return {
      {"h", "dimensionless (semiclassical parameter)"},
      {"gamma", "dimensionless (friction)"},
      {"seed", "integer"},
      {"id", "index"},
      {"minimum_id", "index"},
      {"saddle_id", "index"},
      {"death_saddle_id", "index"},
      {"assigned_saddle_id", "index"},
      {"boundary_saddle_ids", "index"},
      {"component_member_min_ids", "index"},
      {"label", "index pair (k_sigma, k_cc)"},
      {"location", "position units"},
      {"lower", "position units"},
      {"upper", "position units"},
      {"extent", "position units"},
      {"spacing", "position units"},
      {"value", energy},
      {"minimum_value", energy},
      {"sigma", energy},
      {"sigma_levels", energy},
      {"death_value", energy},
      {"barrier", energy},
      {"S_gap", energy},
      {"S_hat", energy},
      {"boundary_level", energy},
      {"hessian_eigenvalues", "potential units / position units^2"},
      {"morse_index", "count"},
      {"n0", "count"},
      {"n1", "count"},
      {"n_higher", "count"},
      {"min_shell_outward_slope", "potential units / position units"},
      {"prefactor_l0", "dimensionless"},
      {"b0_magnitude", "dimensionless"},
      {"lambda_hat", "dimensionless (rate per unit h)"},
      {"mu", rate},
      {"mu_asym", rate},
      {"mu_num", rate},
      {"mu_fine", rate},
      {"mu_coarse", rate},
      {"eigenvalues", rate + ", [real, imag]"},
      {"kernel_eigenvalue", rate},
      {"kernel_residual", rate},
      {"threshold", rate},
      {"residuals", "dimensionless (relative to |A| |u|)"},
      {"count_below_threshold", "count"},
      {"points", "count"},
      {"unknowns", "count"},
      {"restarts", "count"},
      {"lu_attempts", "count"},
      {"shift", rate},
      {"cell_peclet", "dimensionless"},
      {"ratio", "dimensionless"},
      {"rescaled", "dimensionless"},
      {"grid_gap", "dimensionless (relative)"},
      {"exponent_ratio", "dimensionless"},
      {"extrapolated_ratio", "dimensionless"},
      {"convention_scale", "dimensionless"},
      {"l_hat", "dimensionless"},
      {"fit_residual", "dimensionless (rms of log residuals)"},
      {"alpha", energy},
      {"coefficient", "dimensionless"},
      {"max_relative_deviation", "dimensionless"},
      {"relative_deviation", "dimensionless"},
      {"log_singular_value", "natural log of potential-free matrix units"},
      {"log_dominant", "natural log of potential-free matrix units"},
      {"decay_rate", energy},
      {"smallest_singular_value", "dimensionless"},
      {"largest_singular_value", "dimensionless"},
      {"pivot", "dimensionless"},
      {"level", energy},
      {"ky_fan_ratios", "dimensionless"},
      {"ky_fan_lower", "dimensionless"},
      {"ky_fan_upper", "dimensionless"},
      {"three_well_sigma", "dimensionless"},
      {"three_well_mu", "dimensionless"},
      {"closed_form", "dimensionless"},
      {"dense", "dimensionless"},
      {"max_relative_error", "dimensionless"},
      {"D", "dimensionless"},
      {"gamma_sum", "dimensionless"},
      {"kernel_residual_R0", "dimensionless"},
      {"alpha_symmetric", "dimensionless"},
      {"draws", "count"},
      {"passed", "count"},
      {"discriminant", "dimensionless"},
      {"delta", "dimensionless"},
      {"threads", "count"},
      {"coefficients", "potential units / position units^k for the x^k coefficient"},
      {"terms", "[potential units / position units^(p1+p2), power, power]"},
      {"centers", "position units"},
      {"depths", energy},
      {"widths", "position units"},
      {"confinement", "potential units / position units^2"},
      {"knots", "position units"},
      {"values", energy},
      {"how_many", "count"},
      {"random_draws", "count"},
      {"ratio_tolerance", "dimensionless (relative)"},
      {"barrier_tolerance", "dimensionless (relative)"},
      {"bracket_tolerance", "dimensionless"},
      {"boundary_margin", energy},
      {"sparse_ceiling", "count"},
      {"dense_ceiling", "count"},
      {"genericity_tol", energy},
      {"dimension", "count"},
      {"seconds", "s"},
  };
}

struct Outcome {
  json report;
  std::map<std::string, bool> checks;
  std::map<std::string, std::string> tables;  // file name -> contents
  std::vector<std::pair<std::string, SpMat>> operators;

  [[nodiscard]] bool passed() const {
    for (const auto& [k, v] : checks) {
      if (!v) return false;
    }
    return true;
  }
};

// ---------------------------------------------------------------- analyze

struct LandscapeAnalysis {
  std::vector<CriticalPoint> points;
  MorseReport morse;
  std::vector<SaddleInfo> saddles;
  Labelling labelling;
  GenericityReport genericity;
  GapConditions gap;
  double sigma_max = 0.0;
};

inline LandscapeAnalysis analyze_landscape(const RunConfig& cfg) {
  LandscapeAnalysis a;
  a.points = find_critical_points(cfg.field, cfg.box).points;
  a.morse = verify_morse_and_confinement(cfg.field, a.points, cfg.box);
  const int n = cfg.topology_points > 0 ? cfg.topology_points : (cfg.dimension() == 1 ? 801 : 201);
  const SamplingGrid grid(cfg.field, cfg.box, n);
  a.saddles = detect_separating_saddles(cfg.field, a.points, grid);
  a.labelling = label_minima(a.points, a.saddles, grid);
  a.genericity = is_generic(a.labelling, a.points, cfg.genericity_tol);
  a.gap = gap_conditions(a.labelling);
  a.sigma_max = -kInfinity;
  for (const auto& m : a.labelling.minima) {
    a.sigma_max = std::max(a.sigma_max, std::isfinite(m.sigma) ? m.sigma : m.minimum_value);
  }
  return a;
}

inline OperatorKind kind_of(const RunConfig& cfg) { return cfg.op.value_or(OperatorKind::witten); }

inline std::vector<AsymptoticEigenvalue> asymptotics_of(const RunConfig& cfg, const LandscapeAnalysis& a) {
  return asymptotic_spectrum(a.labelling, a.points, kind_of(cfg), cfg.gamma.value_or(0.0), cfg.h_list, a.genericity.generic);
}

inline json asymptotics_json(const std::vector<AsymptoticEigenvalue>& asym) {
  json out = json::array();
  for (const auto& r : asym) {
    json j{{"label", {r.label.first, r.label.second}},
           {"minimum_id", r.minimum_id},
           {"saddle_id", r.saddle_id},
           {"barrier", detail::number_or_null(r.barrier)},
           {"h", r.h},
           {"mu", r.mu}};
    j["prefactor_l0"] = r.prefactor_l0 ? json(*r.prefactor_l0) : json(nullptr);
    j["b0_magnitude"] = r.b0_magnitude ? json(*r.b0_magnitude) : json(nullptr);
    j["lambda_hat"] = r.lambda_hat ? json(*r.lambda_hat) : json(nullptr);
    out.push_back(j);
  }
  return out;
}

inline Outcome analyze(const RunConfig& cfg) {
  Outcome o;
  const auto a = analyze_landscape(cfg);
  json& r = o.report;
  r["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  r["subcommand"] = "analyze";
  r["config"] = cfg.raw;
  r["seed"] = cfg.seed;
  r["units"] = units_table();

  json pts = json::array();
  std::ostringstream csv;
  csv << std::setprecision(17) << "id,morse_index,value";
  for (int d = 0; d < cfg.dimension(); ++d) csv << ",x" << d;
  csv << '\n';
  for (const auto& p : a.points) {
    pts.push_back({{"id", p.id},
                   {"location", detail::vec_json(p.location)},
                   {"value", p.value},
                   {"morse_index", p.morse_index},
                   {"hessian_eigenvalues", detail::vec_json(p.hessian_eigenvalues)}});
    csv << p.id << ',' << p.morse_index << ',' << p.value;
    for (Eigen::Index d = 0; d < p.location.size(); ++d) csv << ',' << p.location[d];
    csv << '\n';
  }
  o.tables["critical_points.csv"] = csv.str();
  r["critical_points"] = pts;
  r["morse"] = {{"all_nondegenerate", a.morse.all_nondegenerate},
                {"n0", a.morse.n0},
                {"n1", a.morse.n1},
                {"n_higher", a.morse.n_higher},
                {"min_shell_outward_slope", a.morse.min_shell_outward_slope},
                {"confined", a.morse.confined()}};

  json minima = json::array();
  for (const auto& m : a.labelling.minima) {
    minima.push_back({{"label", {m.label.first, m.label.second}},
                      {"minimum_id", m.minimum_id},
                      {"minimum_value", m.minimum_value},
                      {"sigma", detail::number_or_null(m.sigma)},
                      {"barrier", detail::number_or_null(m.barrier)},
                      {"assigned_saddle_id", m.assigned_saddle_id},
                      {"component_member_min_ids", m.component_member_min_ids},
                      {"boundary_saddle_ids", m.boundary_saddle_ids}});
  }
  r["labelling"] = {{"minima", minima},
                    {"merge_tree", detail::merge_tree_json(a.labelling.tree)},
                    {"generic", a.genericity.generic},
                    {"violations", a.genericity.violations},
                    {"fa1", a.gap.fa1_holds},
                    {"fa2", a.gap.fa2_holds},
                    {"S_gap", detail::number_or_null(a.gap.S_gap)}};

  if (!cfg.h_list.empty()) {
    const auto asym = asymptotics_of(cfg, a);
    r["asymptotics"] = {{"operator", kind_of(cfg) == OperatorKind::kfp ? "kfp" : "witten"},
                        {"generic", a.genericity.generic},
                        {"records", asymptotics_json(asym)}};
    if (cfg.gamma) r["asymptotics"]["gamma"] = *cfg.gamma;
    std::ostringstream s;
    s << std::setprecision(17) << "label,minimum_id,saddle_id,barrier,h,mu\n";
    for (const auto& rec : asym) {
      for (std::size_t i = 0; i < rec.h.size(); ++i) {
        s << '"' << rec.label.first << ',' << rec.label.second << "\"," << rec.minimum_id << ',' << rec.saddle_id << ','
          << rec.barrier << ',' << rec.h[i] << ',' << rec.mu[i] << '\n';
      }
    }
    o.tables["asymptotics.csv"] = s.str();
  }
  o.checks["morse_nondegenerate"] = a.morse.all_nondegenerate;
  o.checks["confined"] = a.morse.confined();
  return o;
}

// ---------------------------------------------------------------- validate

struct LevelResult {
  double h = 0.0;
  std::vector<double> extent;
  std::vector<int> points;
  double kernel_residual = 0.0;
  double cell_peclet = 0.0;
  SpectralResult fine;
  std::optional<SpectralResult> coarse;
  std::optional<SpMat> matrix;
};

inline DiscreteOperator build_operator(const RunConfig& cfg, double h, const Grid& grid, double boundary_level) {
  if (kind_of(cfg) == OperatorKind::kfp) {
    KfpOptions k;
    k.transport = cfg.transport;
    k.boundary_level = boundary_level;
    return discretize_kfp(cfg.field, *cfg.gamma, h, grid, k);
  }
  WittenOptions w;
  w.form = cfg.witten_form;
  w.boundary_level = boundary_level;
  return discretize_witten0(cfg.field, h, grid, w);
}

inline LevelResult solve_level(const RunConfig& cfg, double h, double sigma_max, int how_many) {
  LevelResult lr;
  lr.h = h;
  const OperatorKind kind = kind_of(cfg);
  DomainRule rule;
  rule.margin = cfg.boundary_margin;
  lr.extent = cfg.extent ? *cfg.extent : domain_extent(cfg.field, sigma_max, h, kind, rule);
  lr.points = cfg.points_for(h);
  const std::size_t axes = kind == OperatorKind::kfp ? 2 : static_cast<std::size_t>(cfg.dimension());
  if (lr.extent.size() != axes || lr.points.size() != axes) throw Error("cli", "grid extent/points need one entry per axis");
  const Grid fine(lr.extent, lr.points);
  if (fine.size() > cfg.sparse_ceiling) throw Error("cli", "grid exceeds the configured sparse ceiling");
  EigenOptions eo;
  eo.mode = cfg.mode;
  eo.how_many = how_many;
  eo.dense_ceiling = cfg.dense_ceiling;
  const double level = sigma_max + cfg.boundary_margin;
  const auto op = build_operator(cfg, h, fine, level);
  lr.kernel_residual = op.kernel_residual();
  lr.cell_peclet = op.cell_peclet;
  lr.fine = small_eigenvalues(op, eo);
  if (cfg.dump_operators) lr.matrix = op.matrix;
  if (cfg.richardson) {
    std::vector<int> cp;
    for (int n : lr.points) cp.push_back((n + 1) / 2);
    const auto cop = build_operator(cfg, h, Grid(lr.extent, cp), level);
    lr.coarse = small_eigenvalues(cop, eo);
  }
  return lr;
}

inline json spectral_json(const SpectralResult& s) {
  json ev = json::array();
  for (auto z : s.eigenvalues) ev.push_back(detail::complex_json(z));
  return {{"eigenvalues", ev},
          {"residuals", s.residuals},
          {"count_below_threshold", s.count_below_threshold},
          {"threshold", s.threshold},
          {"count_complete", s.count_complete},
          {"mode", s.mode == SolveMode::dense ? "dense" : "shift_invert"},
          {"shift", s.shift},
          {"lu_attempts", s.lu_attempts},
          {"restarts", s.restarts}};
}

inline Outcome validate(const RunConfig& cfg) {
  if (!cfg.op) throw Error("cli", "config: validate needs an operator");
  if (cfg.h_list.size() < 3) throw Error("cli", "config: validate needs at least 3 values of h");
  const auto start = std::chrono::steady_clock::now();
  Outcome o = analyze(cfg);
  o.report["subcommand"] = "validate";
  const auto a = analyze_landscape(cfg);
  const auto asym = asymptotics_of(cfg, a);
  const int n0 = static_cast<int>(a.labelling.minima.size());
  const int how_many = cfg.how_many > 0 ? cfg.how_many : n0 + 2;
  if (cfg.mode == SolveMode::dense) {
    for (double h : cfg.h_list) {
      Eigen::Index n = 1;
      for (int p : cfg.points_for(h)) n *= p;
      if (n > cfg.dense_ceiling) throw Error("cli", "dense problem size " + std::to_string(n) + " exceeds the dense ceiling");
    }
  }

  std::vector<LevelResult> levels(cfg.h_list.size());
  parallel_for(levels.size(), cfg.threads,
               [&](std::size_t i) { levels[i] = solve_level(cfg, cfg.h_list[i], a.sigma_max, how_many); });

  json per_h = json::array();
  std::vector<NumericSample> samples;
  bool count_ok = true, stable_ok = true, reality_ok = true, residual_ok = true;
  for (const auto& lr : levels) {
    json j{{"h", lr.h},
           {"extent", lr.extent},
           {"points", lr.points},
           {"kernel_residual", lr.kernel_residual},
           {"cell_peclet", lr.cell_peclet},
           {"boundary_level", a.sigma_max + cfg.boundary_margin},
           {"fine", spectral_json(lr.fine)}};
    if (lr.coarse) j["coarse"] = spectral_json(*lr.coarse);
    per_h.push_back(j);
    count_ok = count_ok && lr.fine.count_complete && lr.fine.count_below_threshold == n0;
    if (lr.coarse) stable_ok = stable_ok && lr.coarse->count_below_threshold == lr.fine.count_below_threshold;
    for (std::size_t k = 0; k < std::min<std::size_t>(static_cast<std::size_t>(n0), lr.fine.eigenvalues.size()); ++k) {
      const Cplx mu = lr.fine.eigenvalues[k];
      reality_ok = reality_ok && std::abs(mu.imag()) <= std::max(0.01 * std::abs(mu.real()), lr.kernel_residual);
    }
    for (double res : lr.fine.residuals) residual_ok = residual_ok && res <= 1e-9;
    samples.push_back({lr.h, lr.fine, lr.coarse});
    if (lr.matrix) {
      std::ostringstream name;
      name << "operator_h" << lr.h << ".mtx";
      o.operators.emplace_back(name.str(), *lr.matrix);
    }
  }
  o.checks["count_n0"] = count_ok;
  o.checks["count_stable_across_grids"] = stable_ok;
  o.checks["reality"] = reality_ok;
  o.checks["residuals"] = residual_ok;

  json tables = json::array();
  std::optional<double> convention;
  if (n0 > 1) {
    const auto cmp = compare(samples, asym);
    std::ostringstream csv;
    csv << std::setprecision(17) << "label,h,mu_num,mu_asym,ratio,rescaled,grid_gap\n";
    for (const auto& t : cmp) {
      const auto& rec = *std::find_if(asym.begin(), asym.end(), [&](const auto& s) { return s.minimum_id == t.minimum_id; });
      json rows = json::array();
      std::ostringstream dat;
      dat << std::setprecision(17) << "# h mu_num mu_asym ratio\n";
      for (const auto& row : t.rows) {
        const double expo = row.mu_num > 0.0 ? row.h * std::log(row.mu_num) / (-2.0 * rec.barrier) : kInfinity;
        json rj{{"h", row.h},
                {"mu_fine", detail::complex_json(row.mu_fine)},
                {"mu_num", row.mu_num},
                {"mu_asym", row.mu_asym},
                {"ratio", row.ratio},
                {"rescaled", row.rescaled},
                {"grid_gap", row.grid_gap},
                {"kernel_eigenvalue", row.kernel_eigenvalue},
                {"exponent_ratio", detail::number_or_null(expo)}};
        if (row.mu_coarse) rj["mu_coarse"] = detail::complex_json(*row.mu_coarse);
        rows.push_back(rj);
        dat << row.h << ' ' << row.mu_num << ' ' << row.mu_asym << ' ' << row.ratio << '\n';
        csv << '"' << t.label.first << ',' << t.label.second << "\"," << row.h << ',' << row.mu_num << ',' << row.mu_asym << ','
            << row.ratio << ',' << row.rescaled << ',' << row.grid_gap << '\n';
      }
      const std::string tag = std::to_string(t.label.first) + "_" + std::to_string(t.label.second);
      o.tables["ratio_" + tag + ".dat"] = dat.str();
      json tj{{"label", {t.label.first, t.label.second}},
              {"minimum_id", t.minimum_id},
              {"barrier", rec.barrier},
              {"rows", rows},
              {"grid_converged", t.grid_converged},
              {"monotone", t.monotone},
              {"warnings", t.warnings}};
      if (t.fit) tj["fit"] = {{"S_hat", t.fit->S_hat}, {"l_hat", t.fit->l_hat}, {"fit_residual", t.fit->fit_residual}, {"poor_fit", t.fit->poor_fit}};
      const auto& last = t.rows.back();
      if (a.genericity.generic) {
        if (!convention) convention = t.convention_scale;
        tj["extrapolated_ratio"] = t.extrapolated_ratio;
        tj["convention_scale"] = t.convention_scale;
      }
      if (cfg.compare_checks) o.checks["grid_converged_" + tag] = t.grid_converged;
      if (cfg.compare_checks && a.genericity.generic) {
        o.checks["ratio_" + tag] = std::abs(last.rescaled - 1.0) <= cfg.ratio_tolerance;
        if (cfg.require_monotone) o.checks["monotone_" + tag] = t.monotone;
        if (cfg.barrier_tolerance) {
          o.checks["barrier_" + tag] = t.fit && std::abs(t.fit->S_hat / rec.barrier - 1.0) <= *cfg.barrier_tolerance;
        }
      } else if (cfg.compare_checks) {
        const double expo = last.mu_num > 0.0 ? last.h * std::log(last.mu_num) / (-2.0 * rec.barrier) : kInfinity;
        o.checks["bracket_" + tag] = std::abs(expo - 1.0) <= cfg.bracket_tolerance;
      }
      tables.push_back(tj);
    }
    o.tables["comparison.csv"] = csv.str();
  }
  o.report["oracle"] = {{"operator", kind_of(cfg) == OperatorKind::kfp ? "kfp" : "witten"},
                        {"levels", per_h},
                        {"tables", tables},
                        {"richardson", cfg.richardson}};
  o.report["convention_scale"] = convention ? json(*convention) : json(nullptr);
  o.report["timing"] = {{"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
                        {"threads", cfg.threads}};
  return o;
}

// ---------------------------------------------------------------- matrix

inline std::map<std::pair<int, int>, double> b_values(const RunConfig& cfg, const LandscapeAnalysis& a) {
  std::map<std::pair<int, int>, double> b;
  for (const auto& m : a.labelling.minima) {
    for (int s : m.boundary_saddle_ids) {
      const Mat& hm = point_by_id(a.points, m.minimum_id).hessian;
      const Mat& hs = point_by_id(a.points, s).hessian;
      b[{s, m.minimum_id}] = kind_of(cfg) == OperatorKind::kfp ? interaction_b0(hm, hs, *cfg.gamma)
                                                                : std::sqrt(witten_prefactor(hm, hs));
    }
  }
  return b;
}

inline json three_well_json(const ThreeWellSystem& sys, double& max_err) {
  const auto s = three_well_spectrum(sys);
  const Mat r0 = three_well_R0(sys.a(), sys.b());
  Eigen::SelfAdjointEigenSolver<Mat> dense(r0.transpose() * r0);
  max_err = 0.0;
  for (int i = 1; i < 3; ++i) {
    max_err = std::max(max_err, std::abs(s.eigenvalues[static_cast<std::size_t>(i)] - dense.eigenvalues()[i]) / dense.eigenvalues()[2]);
  }
  return {{"three_well_sigma", sys.sigma},
          {"three_well_mu", sys.mu},
          {"closed_form", s.eigenvalues},
          {"dense", detail::vec_json(dense.eigenvalues())},
          {"D", s.D},
          {"gamma_sum", s.gamma_sum},
          {"kernel_residual_R0", s.kernel_residual},
          {"max_relative_error", max_err},
          {"all_checks", s.all_checks()}};
}

inline json random_sweep(unsigned seed, int draws, bool& ok) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  int passed = 0;
  for (int t = 0; t < draws; ++t) {
    ThreeWellSystem r{{u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)}};
    double err = 0.0;
    const auto j = three_well_json(r, err);
    if (j["all_checks"].get<bool>() && err <= 1e-10 && j["kernel_residual_R0"].get<double>() <= 1e-12) ++passed;
  }
  ok = passed == draws;
  return {{"draws", draws}, {"passed", passed}, {"seed", seed}};
}

inline json counterexample(bool& ok) {
  json out = json::array();
  ok = true;
  for (double delta : {0.1, 0.5, 2.0}) {
    const std::array<double, 3> beta{0.3, 0.9, 1.4};
    const std::array<double, 3> alpha{beta[2] + delta, beta[0] + delta, beta[1] + delta};
    const double d = three_well_discriminant(alpha, beta);
    ok = ok && d < 0.0 && std::abs(d + 3 * delta * delta) <= 1e-12 * (1 + 3 * delta * delta);
    out.push_back({{"delta", delta}, {"discriminant", d}});
  }
  return out;
}

inline Outcome matrix_diagnostics(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o = analyze(cfg);
  o.report["subcommand"] = "matrix";
  const auto a = analyze_landscape(cfg);
  const auto b = b_values(cfg, a);
  json per_h = json::array();
  std::vector<double> hs, devs;
  bool kf_ok = true, floor_ok = true;
  for (double h : cfg.matrix_h) {
    SyntheticEntries syn;
    syn.alpha = cfg.alpha;
    syn.coefficient = cfg.coefficient;
    syn.seed = cfg.seed;
    const auto R = build_R(a.labelling, a.points, b, h, syn);
    json j{{"h", h}};
    json tags = json::array();
    for (const auto& row : R.tags) {
      json t = json::array();
      for (auto c : row) t.push_back(to_string(c));
      tags.push_back(t);
    }
    j["tags"] = tags;
    const auto li = indicator_left_inverse(R);
    json elim = json::array();
    for (const auto& e : li.elimination) {
      elim.push_back({{"minimum_id", e.minimum_id}, {"saddle_id", e.pivot_saddle_id}, {"pivot", e.pivot}, {"level", e.level}});
    }
    j["smallest_singular_value"] = li.smallest_singular_value;
    j["largest_singular_value"] = li.largest_singular_value;
    j["above_floor"] = li.above_floor;
    j["elimination"] = elim;
    floor_ok = floor_ok && li.above_floor;
    const auto kf = ky_fan_sandwich(R);
    j["ky_fan_ratios"] = kf.ratios;
    j["ky_fan_lower"] = kf.lower;
    j["ky_fan_upper"] = kf.upper;
    j["ky_fan_holds"] = kf.holds;
    kf_ok = kf_ok && kf.holds;
    if (a.genericity.generic && R.active_columns().size() > 0) {
      const auto cmp = generic_singular_estimate(R);
      json rows = json::array();
      for (const auto& r : cmp.rows) {
        rows.push_back({{"minimum_id", r.minimum_id},
                        {"saddle_id", r.saddle_id},
                        {"log_singular_value", r.log_singular_value},
                        {"log_dominant", r.log_dominant},
                        {"relative_deviation", r.relative_deviation}});
      }
      j["dominant"] = rows;
      j["max_relative_deviation"] = cmp.max_relative_deviation;
      hs.push_back(h);
      devs.push_back(cmp.max_relative_deviation);
    }
    per_h.push_back(j);
  }
  o.checks["ky_fan"] = kf_ok;
  o.checks["sigma_min_above_floor"] = floor_ok;
  json m{{"alpha", cfg.alpha}, {"coefficient", cfg.coefficient}, {"levels", per_h}};
  if (hs.size() >= 2) {
    bool decreasing = true;
    for (std::size_t i = 1; i < devs.size(); ++i) decreasing = decreasing && (devs[i] < devs[i - 1] || devs[i] == 0.0);
    o.checks["deviation_decreasing"] = decreasing;
    if (std::all_of(devs.begin(), devs.end(), [](double d) { return d > 0.0; })) m["decay_rate"] = fit_decay_rate(hs, devs);
  }
  if (cfg.three_well) {
    double err = 0.0;
    m["three_well"] = three_well_json(*cfg.three_well, err);
    o.checks["three_well_closed_form"] = err <= 1e-10 && m["three_well"]["all_checks"].get<bool>();
  }
  bool sweep_ok = true;
  m["random_sweep"] = random_sweep(cfg.seed, cfg.random_draws, sweep_ok);
  o.checks["random_sweep"] = sweep_ok;
  o.report["matrix"] = m;
  o.report["timing"] = {{"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
                        {"threads", cfg.threads}};
  return o;
}

// ---------------------------------------------------------------- example3

/// Symmetric three-well configuration: Gaussian wells on the unit circle.
inline json example3_config() {
  json centers = json::array();
  for (double deg : {90.0, 210.0, 330.0}) {
    centers.push_back({std::cos(deg * std::numbers::pi / 180), std::sin(deg * std::numbers::pi / 180)});
  }
  return {{"name", "example3"},
          {"potential", {{"family", "gaussian_wells"}, {"centers", centers}, {"depths", {2.0, 2.0, 2.0}}, {"widths", {0.4, 0.4, 0.4}}, {"confinement", 0.5}}},
          {"box", {{"lower", {-2.5, -2.5}}, {"upper", {2.5, 2.5}}}},
          {"operator", "witten"},
          {"h", {0.3, 0.2, 0.15, 0.12}},
          {"matrix", {{"three_well", {{"sigma", {1.0, 1.0, 1.0}}, {"mu", {1.0, 1.0, 1.0}}}}}}};
}

inline Outcome example3(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o = analyze(cfg);
  o.report["subcommand"] = "example3";
  const auto& lab = o.report["labelling"];
  bool equal_saddles = false;
  for (const auto& v : lab["violations"]) equal_saddles = equal_saddles || v.get<std::string>().find("equal-value separating saddles") != std::string::npos;
  o.checks["non_generic"] = !lab["generic"].get<bool>();
  o.checks["equal_saddle_violation"] = equal_saddles;

  const ThreeWellSystem sys = cfg.three_well.value_or(ThreeWellSystem{});
  double err = 0.0;
  json tw = three_well_json(sys, err);
  const auto s = three_well_spectrum(sys);
  const double alpha = std::pow(sys.a()[0], 2);
  bool symmetric = sys.a() == sys.b() && sys.a()[0] == sys.a()[1] && sys.a()[1] == sys.a()[2];
  tw["alpha_symmetric"] = alpha;
  if (symmetric) {
    o.checks["symmetric_spectrum"] = s.eigenvalues[0] == 0.0 && std::abs(s.eigenvalues[1] - 3 * alpha) <= 1e-12 * alpha &&
                                     std::abs(s.eigenvalues[2] - 3 * alpha) <= 1e-12 * alpha;
  }
  o.checks["kernel_identity"] = s.kernel_residual <= 1e-12;
  bool ce = true;
  tw["counterexample"] = counterexample(ce);
  o.checks["counterexample_negative"] = ce;
  o.report["three_well"] = tw;
  o.report["timing"] = {{"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
                        {"threads", cfg.threads}};
  return o;
}

// ---------------------------------------------------------------- output

inline void write_outputs(Outcome& o, const std::string& dir) {
  std::filesystem::create_directories(dir);
  json checks = json::object();
  for (const auto& [k, v] : o.checks) checks[k] = v;
  o.report["checks"] = checks;
  o.report["passed"] = o.passed();
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(std::filesystem::path(dir) / name);
    if (!out) throw Error("cli", "cannot write " + name);
    out << body;
  };
  write("report.json", o.report.dump(2) + "\n");
  for (const auto& [name, body] : o.tables) write(name, body);
  for (const auto& [name, m] : o.operators) write_matrix_market(m, (std::filesystem::path(dir) / name).string());
}

}  // namespace metaspec::cli
