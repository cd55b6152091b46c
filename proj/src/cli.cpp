#include "wgdiff/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "wgdiff/config.hpp"
#include "wgdiff/diffusion.hpp"
#include "wgdiff/energy.hpp"
#include "wgdiff/recovery.hpp"

#ifndef WGDIFF_VERSION
#define WGDIFF_VERSION "0.0.0"
#endif

namespace wgdiff {

std::string version() { return WGDIFF_VERSION; }

namespace {

namespace fs = std::filesystem;

/// Output directory, manifest and log for one subcommand invocation.
class Session {
 public:
  Session(std::string subcommand, Json& config, const RunRequest& request, std::ostream& err)
      : subcommand_(std::move(subcommand)), config_(config), root_(config), request_(request), err_(err) {
    if (request.seed) config_["seed"] = *request.seed;
    if (request.threads) config_["threads"] = *request.threads;
    seed_ = root_.get_u64("seed", 1);
    threads_ = root_.get_int("threads", 1);
    if (threads_ < 1) throw ConfigError("config /threads: must be >= 1");
    dir_ = root_.get_string("output_dir", "out/" + subcommand_);
    if (request.out) {
      dir_ = *request.out;
      config_["output_dir"] = dir_;
    }
  }

  ConfigNode& root() { return root_; }
  std::uint64_t seed() const { return seed_; }
  int threads() const { return threads_; }

  /// Validates that every config key was used, then creates the output
  /// directory and writes the manifest.
  void begin(const std::vector<std::uint64_t>& seeds) {
    root_.check_consumed();
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
    log_.open(dir_ / "log.txt", std::ios::trunc);
    if (!log_) throw IoError("cannot open " + (dir_ / "log.txt").string());
    Json manifest;
    manifest["version"] = version();
    manifest["subcommand"] = subcommand_;
    manifest["seeds"] = seeds;
    manifest["threads"] = threads_;
    manifest["config"] = config_;
    write_text("manifest.json", manifest.dump(2) + "\n");
    started_ = std::chrono::steady_clock::now();
    log(subcommand_ + " started, output in " + dir_.string());
  }

  void log(const std::string& line) {
    if (log_) log_ << line << '\n' << std::flush;
    if (!request_.quiet) err_ << line << '\n';
  }

  std::ofstream open(const std::string& name, bool binary = false) {
    std::ofstream out(dir_ / name, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw IoError("cannot open " + (dir_ / name).string() + " for writing");
    return out;
  }

  template <typename Writer>
  void write(const std::string& name, Writer&& writer, bool binary = false) {
    auto out = open(name, binary);
    writer(out);
    out.close();
    if (!out) throw IoError("write failed: " + (dir_ / name).string());
  }

  void write_text(const std::string& name, const std::string& text) {
    write(name, [&](std::ostream& o) { o << text; });
  }

  void finish(Json summary) {
    write_text("summary.json", summary.dump(2) + "\n");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    std::ostringstream s;
    s.precision(3);
    s << std::fixed << subcommand_ << " finished in " << secs << " s";
    log(s.str());
  }

  bool started() const { return log_.is_open(); }

 private:
  std::string subcommand_;
  Json& config_;
  ConfigNode root_;
  const RunRequest& request_;
  std::ostream& err_;
  std::uint64_t seed_ = 1;
  int threads_ = 1;
  fs::path dir_;
  std::ofstream log_;
  std::chrono::steady_clock::time_point started_;
};

Json sigmoid_default() { return {{"kind", "sigmoid-radial"}, {"a", 2.0}, {"b", 1.0}, {"c", 0.5}}; }
Json unit_box_default(int dim) {
  return {{"kind", "box"}, {"dim", dim}, {"lower", std::vector<double>(dim, 0.0)}, {"upper", std::vector<double>(dim, 1.0)}};
}
Json constant_default(double v) { return {{"kind", "constant"}, {"value", v}}; }
Json ball_mask_default() {
  return {{"kind", "ellipsoid-mask"}, {"dim", 3}, {"shape", {22, 22, 22}}, {"spacing", {0.1, 0.1, 0.1}},
          {"semi_axes", {1.0, 1.0, 1.0}}};
}
Json recovery_domain_default() {
  return {{"kind", "ellipsoid-mask"}, {"dim", 3}, {"shape", {56, 44, 36}}, {"spacing", {0.05, 0.05, 0.05}},
          {"semi_axes", {1.4, 1.1, 0.9}}};
}

std::vector<double> geometric(double lo, double hi, int count) {
  std::vector<double> v;
  for (int i = 0; i < count; ++i) v.push_back(lo * std::pow(hi / lo, count > 1 ? double(i) / (count - 1) : 0.0));
  return v;
}

std::vector<std::uint64_t> seed_range(std::uint64_t base, int count) {
  std::vector<std::uint64_t> v;
  for (int s = 0; s < count; ++s) v.push_back(base + static_cast<std::uint64_t>(s));
  return v;
}

int positive_int(ConfigNode& node, const std::string& key, int def) {
  const int v = node.get_int(key, def);
  if (v < 1) throw ConfigError("config " + node.path() + "/" + key + ": must be >= 1");
  return v;
}

double positive_double(ConfigNode& node, const std::string& key, double def) {
  const double v = node.get_double(key, def);
  if (!(v > 0.0)) throw ConfigError("config " + node.path() + "/" + key + ": must be > 0");
  return v;
}

Json fit_json(const RateReport& r) {
  return {{"slope", r.fit.slope}, {"slope_stderr", r.fit.slope_stderr}, {"intercept", r.fit.intercept},
          {"fit_points", r.fit_points}, {"fit_valid", r.fit_valid}};
}

void write_points_csv(std::ostream& out, const PointCloud& cloud) {
  out.precision(17);
  for (int a = 0; a < cloud.dim; ++a) out << (a ? "," : "") << 'x' << a;
  out << ",rho\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < cloud.dim; ++a) out << (a ? "," : "") << cloud.points[i][a];
    out << ',' << (cloud.density.empty() ? 1.0 : cloud.density[i]) << '\n';
  }
}

Json stats_json(const NormalizationStats& s, int dim) {
  return {{"mean", std::vector<double>(s.mu.begin(), s.mu.begin() + dim)},
          {"sd", std::vector<double>(s.sd.begin(), s.sd.begin() + dim)}};
}

EnergyProblem parse_problem(ConfigNode& node, int default_dim) {
  EnergyProblem p{.domain = parse_domain(node.child_or("domain", unit_box_default(default_dim)))};
  p.rho = parse_field(node.child_or("rho", constant_default(1.0)));
  p.g = parse_field(node.child_or("g", sigmoid_default()));
  p.u = parse_field(node.child_or("u", Json{{"kind", "sine"}, {"axis", 0}, {"amplitude", 1.0}, {"frequency", 2.0}, {"phase", 0.0}}));
  p.kernel = Kernel::parse(node.get_string("kernel", "indicator"));
  p.g_lo = node.get_double("g_lo", 0.0);
  return p;
}

NonlocalQuadratureOptions parse_nonlocal_options(ConfigNode node) {
  NonlocalQuadratureOptions o;
  o.outer_panels = positive_int(node, "outer_panels", o.outer_panels);
  o.outer_order = positive_int(node, "outer_order", o.outer_order);
  o.inner_order = positive_int(node, "inner_order", o.inner_order);
  o.angles = positive_int(node, "angles", o.angles);
  return o;
}

LocalEnergyOptions parse_local_options(ConfigNode node) {
  LocalEnergyOptions o;
  o.rel_tol = positive_double(node, "rel_tol", o.rel_tol);
  o.initial_cells = positive_int(node, "initial_cells", o.initial_cells);
  o.max_levels = positive_int(node, "max_levels", o.max_levels);
  return o;
}

std::vector<double> parse_eps_values(ConfigNode& node) {
  const auto v = node.get_doubles("eps_values", geometric(0.005, 0.05, 6));
  for (double e : v)
    if (!(e > 0.0)) throw ConfigError("config " + node.path() + "/eps_values: entries must be > 0");
  return v;
}

CgOptions parse_cg(ConfigNode node) {
  CgOptions o;
  o.rel_tol = positive_double(node, "rel_tol", o.rel_tol);
  o.max_iterations = static_cast<std::size_t>(positive_int(node, "max_iterations", static_cast<int>(o.max_iterations)));
  return o;
}

// ---------------------------------------------------------------------------

void cmd_sample(Session& s) {
  auto& root = s.root();
  const Domain domain = parse_domain(root.child_or("domain", unit_box_default(2)));
  const ScalarField rho = parse_field(root.child_or("rho", constant_default(1.0)));
  const auto n = static_cast<std::size_t>(positive_int(root, "n", 1000));
  const bool normalized = root.get_bool("normalize", false);
  s.begin({s.seed()});

  const auto cloud = sample_points(domain, rho, n, s.seed());
  s.write("points.csv", [&](std::ostream& o) { write_points_csv(o, cloud); });
  Json summary{{"n", n}, {"dim", domain.dim()}, {"seed", s.seed()}};
  if (normalized) {
    const auto [norm, stats] = normalize(cloud);
    s.write("points_normalized.csv", [&](std::ostream& o) { write_points_csv(o, norm); });
    summary["normalization"] = stats_json(stats, domain.dim());
  }
  s.log("sampled " + std::to_string(n) + " points");
  s.finish(summary);
}

struct GraphSetup {
  double eps_fixed = 0.0;
  EpsRule eps_rule = EpsRule::PerDPlus2;
  double eps_scale = 1.0;
  Kernel kernel;
  GraphOptions options;
  double oracle_h = 0.0;
  int oracle_stencil = 2;
};

GraphSetup parse_graph_setup(ConfigNode& root) {
  GraphSetup g;
  g.eps_fixed = root.get_double("eps", 0.0);
  g.eps_rule = parse_eps_rule(root.get_string("eps_rule", "per-d-plus-2"));
  g.eps_scale = positive_double(root, "eps_scale", 1.0);
  g.kernel = Kernel::parse(root.get_string("kernel", "indicator"));
  g.options.backend = parse_metric_backend(root.get_string("backend", "segment"));
  g.options.quadrature = parse_quadrature(root.child("quadrature"), 16);
  g.options.segment_checks = positive_int(root, "segment_checks", 32);
  if (g.options.backend == MetricBackend::GridOracle) {
    auto oracle = root.child("oracle");
    g.oracle_h = positive_double(oracle, "h", 0.01);
    g.oracle_stencil = oracle.get_int("stencil_order", 2);
  }
  return g;
}

void cmd_build_graph(Session& s) {
  auto& root = s.root();
  const Domain domain = parse_domain(root.child_or("domain", unit_box_default(2)));
  const ScalarField rho = parse_field(root.child_or("rho", constant_default(1.0)));
  const ScalarField g = parse_field(root.child_or("g", sigmoid_default()));
  const auto n = static_cast<std::size_t>(positive_int(root, "n", 1000));
  auto setup = parse_graph_setup(root);
  std::optional<ScalarField> u;
  if (root.has("u")) u = parse_field(root.child("u"));
  s.begin({s.seed()});

  const auto cloud = sample_points(domain, rho, n, s.seed());
  const double eps = setup.eps_fixed > 0.0 ? setup.eps_fixed
                                           : eps_scaling(static_cast<double>(n), domain.dim(), setup.eps_scale, setup.eps_rule);
  std::optional<GridMetricOracle> oracle;
  if (setup.options.backend == MetricBackend::GridOracle) {
    oracle.emplace(domain, g, setup.oracle_h, setup.oracle_stencil);
    setup.options.oracle = &*oracle;
  }
  if (domain.kind() == DomainKind::VoxelMask) setup.options.domain = &domain;
  const auto graph = build_graph(cloud, eps, setup.kernel, g, setup.options);
  s.log("eps = " + std::to_string(eps) + ", edges = " + std::to_string(graph.edges.size()));

  s.write("points.csv", [&](std::ostream& o) { write_points_csv(o, cloud); });
  s.write("edges.txt", [&](std::ostream& o) { write_edge_list(o, graph); });
  std::vector<double> degree(n, 0.0);
  for (const auto& e : graph.edges) {
    degree[e.i] += 1.0;
    degree[e.j] += 1.0;
  }
  Json summary{{"n", n},
               {"eps", eps},
               {"edges", graph.edges.size()},
               {"mean_degree", pairwise_sum(degree) / static_cast<double>(n)},
               {"sigma_eta", graph.sigma_eta},
               {"backend", to_string(graph.backend)}};
  if (u) {
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = (*u)(cloud.points[i]);
    summary["dirichlet_energy"] = dirichlet_energy(graph, values);
  }
  s.finish(summary);
}

void cmd_energy_compare(Session& s) {
  auto& root = s.root();
  EnergyProblem problem = parse_problem(root, 2);
  const double eps = positive_double(root, "eps", 0.1);
  const auto n_values = root.get_sizes("n_values", {500, 1000});
  const int seeds = positive_int(root, "seeds", 5);
  const std::string method = root.get_string("method", "auto");
  if (method != "auto" && method != "quadrature" && method != "monte-carlo")
    throw ConfigError("config /method: expected auto, quadrature or monte-carlo");
  const auto mc_pairs = root.get_u64("mc_pairs", 200'000);
  const auto quadrature = parse_quadrature(root.child("quadrature"), 16);
  const auto nonlocal_options = parse_nonlocal_options(root.child("nonlocal"));
  const auto local_options = parse_local_options(root.child("local"));
  if (n_values.empty()) throw ConfigError("config /n_values: must not be empty");
  const auto seed_list = seed_range(s.seed(), seeds);
  s.begin(seed_list);

  const int d = problem.domain.dim();
  const bool use_quadrature =
      method == "quadrature" || (method == "auto" && problem.domain.kind() == DomainKind::Box && d <= 2);
  EnergyEstimate nonlocal;
  if (use_quadrature) {
    nonlocal.value = nonlocal_energy_quadrature(problem, eps, nonlocal_options);
  } else {
    nonlocal = nonlocal_energy_mc(problem, eps, mc_pairs, s.seed(), quadrature);
  }
  s.log("nonlocal energy " + std::to_string(nonlocal.value));
  const auto local = local_energy(problem, local_options);
  s.log("local energy " + std::to_string(local.value));

  GraphOptions options;
  options.quadrature = quadrature;
  options.g_lo = resolve_g_lo(problem);
  if (problem.domain.kind() == DomainKind::VoxelMask) options.domain = &problem.domain;
  std::vector<double> discrete(n_values.size() * seed_list.size());
  for (std::size_t ni = 0; ni < n_values.size(); ++ni)
    for (std::size_t k = 0; k < seed_list.size(); ++k) {
      const auto cloud = sample_points(problem.domain, problem.rho, n_values[ni], seed_list[k]);
      const auto graph = build_graph(cloud, eps, problem.kernel, problem.g, options);
      std::vector<double> u(cloud.size());
      for (std::size_t i = 0; i < cloud.size(); ++i) u[i] = problem.u(cloud.points[i]);
      discrete[ni * seed_list.size() + k] = dirichlet_energy(graph, u);
    }

  s.write("energies.csv", [&](std::ostream& o) {
    o.precision(17);
    o << "n,seed,discrete,nonlocal,local\n";
    for (std::size_t ni = 0; ni < n_values.size(); ++ni)
      for (std::size_t k = 0; k < seed_list.size(); ++k)
        o << n_values[ni] << ',' << seed_list[k] << ',' << discrete[ni * seed_list.size() + k] << ','
          << nonlocal.value << ',' << local.value << '\n';
  });
  Json per_n = Json::array();
  for (std::size_t ni = 0; ni < n_values.size(); ++ni) {
    std::vector<double> v(discrete.begin() + ni * seed_list.size(), discrete.begin() + (ni + 1) * seed_list.size());
    per_n.push_back({{"n", n_values[ni]}, {"mean", pairwise_sum(v) / static_cast<double>(v.size())}, {"median", median(v)}});
  }
  s.finish({{"eps", eps},
            {"nonlocal", nonlocal.value},
            {"nonlocal_stderr", nonlocal.std_error},
            {"nonlocal_method", use_quadrature ? "quadrature" : "monte-carlo"},
            {"local", local.value},
            {"local_converged", local.converged},
            {"discrete", per_n}});
}

void rates_nonlocal_vs_local(Session& s) {
  auto& root = s.root();
  NonlocalVsLocalConfig c{.problem = parse_problem(root, 1)};
  c.eps_values = parse_eps_values(root);
  c.nonlocal_quadrature = parse_nonlocal_options(root.child("nonlocal"));
  c.local = parse_local_options(root.child("local"));
  c.exclude_boundary_band = root.get_bool("exclude_boundary_band", false);
  c.drop_largest = root.get_bool("drop_largest", false);
  c.threads = s.threads();
  s.begin({});
  const auto report = rate_experiment_nonlocal_vs_local(c);
  s.write("rates.csv", [&](std::ostream& o) { write_rate_csv(o, report); });
  s.log("slope " + std::to_string(report.fit.slope));
  s.finish({{"kind", "nonlocal-vs-local"}, {"fit", fit_json(report)}});
}

void rates_discrete_vs_nonlocal(Session& s) {
  auto& root = s.root();
  DiscreteVsNonlocalConfig c{.problem = parse_problem(root, 2)};
  c.n_values = root.get_sizes("n_values", {250, 500, 1000, 2000});
  c.eps_rule = parse_eps_rule(root.get_string("eps_rule", "per-d-plus-2"));
  c.eps_scale = positive_double(root, "eps_scale", 1.0);
  c.fixed_eps = root.get_double("fixed_eps", 0.0);
  c.seeds = positive_int(root, "seeds", 20);
  c.quadrature = parse_quadrature(root.child("quadrature"), 16);
  c.nonlocal_quadrature = parse_nonlocal_options(root.child("nonlocal"));
  c.mc_pairs = root.get_u64("mc_pairs", c.mc_pairs);
  c.base_seed = s.seed();
  c.threads = s.threads();
  if (c.n_values.size() < 2) throw ConfigError("config /n_values: needs at least two entries");
  std::vector<std::uint64_t> seeds;
  for (std::size_t ni = 0; ni < c.n_values.size(); ++ni)
    for (int k = 0; k < c.seeds; ++k) seeds.push_back(c.base_seed + 100003 * ni + static_cast<std::uint64_t>(k));
  s.begin(seeds);
  const auto report = rate_experiment_discrete_vs_nonlocal(c);
  s.write("rates.csv", [&](std::ostream& o) {
    o.precision(17);
    o << "sweep_value,gap,stderr,q25,q75\n";
    for (std::size_t i = 0; i < report.sweep.size(); ++i)
      o << report.sweep[i] << ',' << report.gap[i] << ',' << report.std_error[i] << ',' << report.q25[i] << ','
        << report.q75[i] << '\n';
  });
  bool decreasing = true;
  for (std::size_t i = 1; i < report.gap.size(); ++i) decreasing = decreasing && report.gap[i] < report.gap[i - 1];
  s.finish({{"kind", "discrete-vs-nonlocal"}, {"fit", fit_json(report)}, {"strictly_decreasing", decreasing}});
}

void rates_straight_line(Session& s) {
  auto& root = s.root();
  StraightLineSweepConfig c;
  c.domain = parse_domain(root.child_or("domain", unit_box_default(2)));
  c.g = parse_field(root.child_or("g", sigmoid_default()));
  c.h = positive_double(root, "h", 1e-3);
  c.stencil_order = root.get_int("stencil_order", 3);
  c.directions = positive_int(root, "directions", 8);
  c.distances = root.get_doubles("distances", geometric(0.02, 0.2, 6));
  const Json* origins = root.raw("origins");
  if (!origins) {
    root.set("origins", Json{{0.5, 0.5}, {0.3, 0.6}, {0.65, 0.35}});
    origins = root.raw("origins");
  }
  if (!origins->is_array() || origins->empty()) throw ConfigError("config /origins: expected a list of points");
  for (const auto& o : *origins) {
    if (!o.is_array() || o.size() != 2) throw ConfigError("config /origins: each origin needs two coordinates");
    c.origins.push_back({o[0].get<double>(), o[1].get<double>(), 0.0});
  }
  s.begin({});
  const auto sweep = straight_line_sweep(c);
  s.write("rates.csv", [&](std::ostream& o) { write_rate_csv(o, sweep.corrected); });
  s.write("rates_raw.csv", [&](std::ostream& o) { write_rate_csv(o, sweep.raw); });
  s.log("corrected slope " + std::to_string(sweep.corrected.fit.slope));
  s.finish({{"kind", "straight-line"}, {"pairs", sweep.pairs}, {"fit", fit_json(sweep.corrected)}, {"fit_raw", fit_json(sweep.raw)}});
}

void rates_w11(Session& s) {
  auto& root = s.root();
  const Domain domain = parse_domain(root.child_or("domain", unit_box_default(2)));
  const ScalarField g = parse_field(root.child_or("g", sigmoid_default()));
  const ScalarField rho = parse_field(root.child_or("rho", constant_default(1.0)));
  const auto eps = parse_eps_values(root);
  W11Options options;
  options.cells_per_axis = positive_int(root, "cells_per_axis", options.cells_per_axis);
  s.begin({});
  const auto report = w11_limit_check(g, rho, domain, eps, options);
  s.write("w11.csv", [&](std::ostream& o) {
    o.precision(17);
    o << "eps,smoothed\n";
    for (std::size_t i = 0; i < report.eps.size(); ++i) o << report.eps[i] << ',' << report.smoothed[i] << '\n';
  });
  s.finish({{"kind", "w11"}, {"limit", report.limit}, {"monotone", report.monotone}, {"final_gap", report.final_gap}});
}

void cmd_rates(Session& s) {
  const std::string kind = s.root().require_string("kind");
  if (kind == "nonlocal-vs-local") return rates_nonlocal_vs_local(s);
  if (kind == "discrete-vs-nonlocal") return rates_discrete_vs_nonlocal(s);
  if (kind == "straight-line") return rates_straight_line(s);
  if (kind == "w11") return rates_w11(s);
  throw ConfigError("config /kind: unknown rates kind '" + kind + "'");
}

RecoveryRunConfig parse_recovery(ConfigNode& root) {
  RecoveryRunConfig c;
  c.domain = parse_domain(root.child_or("domain", recovery_domain_default()));
  c.g_true = parse_field(root.child_or("g_true", Json{{"kind", "sigmoid-radial"}, {"a", 2.0}, {"b", 1.0}, {"c", 0.5}}));
  c.n = static_cast<std::size_t>(positive_int(root, "n", static_cast<int>(c.n)));
  c.test_points = static_cast<std::size_t>(positive_int(root, "test_points", static_cast<int>(c.test_points)));
  c.eps_rule = parse_eps_rule(root.get_string("eps_rule", to_string(c.eps_rule)));
  c.eps_scale = positive_double(root, "eps_scale", c.eps_scale);
  c.quadrature = parse_quadrature(root.child("quadrature"), c.quadrature.steps);
  c.segment_checks = positive_int(root, "segment_checks", c.segment_checks);
  auto t = root.child("train");
  c.train.learning_rate = positive_double(t, "learning_rate", c.train.learning_rate);
  c.train.beta1 = t.get_double("beta1", c.train.beta1);
  c.train.beta2 = t.get_double("beta2", c.train.beta2);
  c.train.adam_eps = positive_double(t, "adam_eps", c.train.adam_eps);
  c.train.max_iterations = t.get_u64("max_iterations", c.train.max_iterations);
  c.train.loss_threshold = t.get_double("loss_threshold", c.train.loss_threshold);
  c.train.patience = t.get_u64("patience", c.train.patience);
  c.train.min_improvement = t.get_double("min_improvement", c.train.min_improvement);
  validate(c.train);
  return c;
}

Json metrics_json(const RecoveryMetrics& m) {
  return {{"mae", m.mae}, {"rmse", m.rmse}, {"rel_mae", m.rmae}, {"rel_rmse", m.rrmse},
          {"final_loss", m.final_loss}, {"val_loss", m.val_loss}};
}

void cmd_recover(Session& s) {
  auto& root = s.root();
  const auto config = parse_recovery(root);
  const int folds = root.get_int("cv_folds", 0);
  if (folds == 1 || folds < 0) throw ConfigError("config /cv_folds: 0 (off) or >= 2");
  s.begin({s.seed()});

  RecoveryArtifacts art;
  const auto run = run_recovery(config, s.seed(), &art);
  s.log("pairs " + std::to_string(run.pairs) + ", iterations " + std::to_string(run.iterations) + ", stop " +
        to_string(run.reason));
  const int d = config.domain.dim();
  s.write("dataset.csv", [&](std::ostream& o) { write_dataset_csv(o, art.train_pairs); });
  s.write("model.ckpt", [&](std::ostream& o) { write_checkpoint(o, art.fit.model); }, true);
  s.write("loss_trace.csv", [&](std::ostream& o) {
    o.precision(17);
    o << "iteration,loss\n";
    for (std::size_t i = 0; i < art.fit.trace.size(); ++i) o << i << ',' << art.fit.trace[i] << '\n';
  });
  s.write("test_predictions.csv", [&](std::ostream& o) {
    o.precision(17);
    for (int a = 0; a < d; ++a) o << 'x' << a << ',';
    o << "g_true,g_model\n";
    for (const auto& p : art.test_points) {
      for (int a = 0; a < d; ++a) o << p[a] << ',';
      o << config.g_true(p) << ',' << art.fit.model(p) << '\n';
    }
  });
  Json summary{{"seed", s.seed()},
               {"n", run.n},
               {"eps", run.eps},
               {"pairs", run.pairs},
               {"val_pairs", run.val_pairs},
               {"iterations", run.iterations},
               {"best_iteration", art.fit.best_iteration},
               {"stop_reason", to_string(run.reason)},
               {"normalization", stats_json(art.stats, d)},
               {"metrics", metrics_json(run.metrics)}};
  if (folds > 0) {
    TrainConfig tc = config.train;
    tc.seed = s.seed();
    const auto cv = kfold_cv(art.train_pairs, tc, folds);
    s.write("cv.csv", [&](std::ostream& o) {
      o.precision(17);
      o << "fold,train_loss,val_loss\n";
      for (std::size_t f = 0; f < cv.size(); ++f) o << f << ',' << cv[f].train_loss << ',' << cv[f].val_loss << '\n';
    });
    double mean = 0.0;
    for (const auto& f : cv) mean += f.val_loss / static_cast<double>(cv.size());
    summary["cv_mean_val_loss"] = mean;
  }
  s.finish(summary);
}

Json log_stats_json(const LogStats& l) {
  return {{"geometric_mean", l.geometric_mean}, {"multiplicative_std", l.multiplicative_std}};
}

void cmd_recover_sweep(Session& s) {
  auto& root = s.root();
  const auto config = parse_recovery(root);
  const auto n_values = root.get_sizes("n_values", {100, 200, 400});
  const int seeds = positive_int(root, "seeds", 10);
  const double threshold = positive_double(root, "converged_threshold", 1e-6);
  if (n_values.empty()) throw ConfigError("config /n_values: must not be empty");
  s.begin(seed_range(s.seed(), seeds));

  const auto sweep = recovery_sweep(config, n_values, seeds, s.seed(), s.threads(), threshold);
  s.write("runs.csv", [&](std::ostream& o) {
    o.precision(17);
    o << "n,seed,eps,pairs,iterations,stop_reason,final_loss,val_loss,mae,rmse,rel_mae,rel_rmse\n";
    for (const auto& r : sweep.runs)
      o << r.n << ',' << r.seed << ',' << r.eps << ',' << r.pairs << ',' << r.iterations << ',' << to_string(r.reason)
        << ',' << r.metrics.final_loss << ',' << r.metrics.val_loss << ',' << r.metrics.mae << ',' << r.metrics.rmse
        << ',' << r.metrics.rmae << ',' << r.metrics.rrmse << '\n';
  });
  s.write("aggregate.csv", [&](std::ostream& o) {
    o.precision(17);
    o << "n,runs,converged";
    for (const char* m : {"final_loss", "val_loss", "mae", "rmse", "rel_mae", "rel_rmse"}) o << ",gm_" << m << ",ms_" << m;
    o << '\n';
    for (const auto& r : sweep.rows) {
      o << r.n << ',' << r.runs << ',' << r.converged;
      for (const LogStats* l : {&r.final_loss, &r.val_loss, &r.mae, &r.rmse, &r.rmae, &r.rrmse})
        o << ',' << l->geometric_mean << ',' << l->multiplicative_std;
      o << '\n';
    }
  });
  Json rows = Json::array();
  for (const auto& r : sweep.rows) {
    rows.push_back({{"n", r.n},
                    {"runs", r.runs},
                    {"converged", r.converged},
                    {"final_loss", log_stats_json(r.final_loss)},
                    {"val_loss", log_stats_json(r.val_loss)},
                    {"mae", log_stats_json(r.mae)},
                    {"rmse", log_stats_json(r.rmse)},
                    {"rel_mae", log_stats_json(r.rmae)},
                    {"rel_rmse", log_stats_json(r.rrmse)}});
    s.log("n = " + std::to_string(r.n) + ": converged " + std::to_string(r.converged) + "/" + std::to_string(r.runs) +
          ", geometric-mean rel. MAE " + std::to_string(r.rmae.geometric_mean));
  }
  s.finish({{"converged_threshold", threshold}, {"rows", rows}});
}

void cmd_pde_run(Session& s) {
  auto& root = s.root();
  const CellGrid grid(parse_mask(root.child_or("domain", ball_mask_default())));
  const ScalarField g = parse_field(root.child_or("g", sigmoid_default()));
  const ScalarField u0 = parse_field(
      root.child_or("u0", Json{{"kind", "gaussian"}, {"center", {0.0, 0.0, 0.0}}, {"amplitude", 1.0}, {"width", 0.3}, {"offset", 0.0}}));
  DiffusionProblem problem;
  problem.reaction = root.get_double("reaction", 0.0);
  problem.dt = positive_double(root, "dt", 1e-3);
  problem.horizon = positive_double(root, "horizon", 1.0);
  RunOptions options;
  options.snapshot_times = root.get_doubles("snapshot_times", {});
  options.cg = parse_cg(root.child("cg"));
  s.begin({});

  problem.diffusivity = diffusivity_from_g(grid, g);
  problem.u0 = sample_cells(grid, u0);
  s.log("cells " + std::to_string(grid.size()));
  SolveTrace trace;
  try {
    trace = run_diffusion(grid, problem, options);
  } catch (const SolveAborted& e) {
    s.write("aborted_state.bin", [&](std::ostream& o) { write_snapshot(o, grid, {e.time, e.last_good}); }, true);
    throw;
  }
  s.write("trace.csv", [&](std::ostream& o) { write_trace_csv(o, trace); });
  for (std::size_t k = 0; k < trace.snapshots.size(); ++k)
    s.write("snapshot_" + std::to_string(k) + ".bin", [&](std::ostream& o) { write_snapshot(o, grid, trace.snapshots[k]); },
            true);
  s.write("final.bin", [&](std::ostream& o) { write_snapshot(o, grid, {trace.time.back(), trace.final_state}); }, true);

  const double m0 = trace.mass.front();
  double drift = 0.0;
  for (double m : trace.mass) drift = std::max(drift, std::abs(m - m0) / std::abs(m0));
  s.finish({{"cells", grid.size()},
            {"steps", trace.time.size() - 1},
            {"cg_iterations", trace.cg_iterations},
            {"mass_initial", m0},
            {"mass_final", trace.mass.back()},
            {"max_relative_mass_drift", drift},
            {"min", *std::min_element(trace.min.begin(), trace.min.end())},
            {"max", *std::max_element(trace.max.begin(), trace.max.end())},
            {"snapshots", trace.snapshots.size()}});
}

void cmd_boundary_gap(Session& s) {
  auto& root = s.root();
  const CellGrid grid(parse_mask(root.child_or("domain", ball_mask_default())));
  const ScalarField g = parse_field(root.child_or("g", sigmoid_default()));
  const ScalarField u0 = parse_field(
      root.child_or("u0", Json{{"kind", "gaussian"}, {"center", {0.0, 0.0, 0.0}}, {"amplitude", 1.0}, {"width", 0.3}, {"offset", 0.0}}));
  const double reaction = root.get_double("reaction", 0.0);
  const double dt = positive_double(root, "dt", 1e-2);
  const double horizon = positive_double(root, "horizon", 20.0);
  const auto cg = parse_cg(root.child("cg"));
  s.begin({});

  const auto report = boundary_gap_experiment(grid, g, reaction, u0, dt, horizon, cg);
  s.write("gap.csv", [&](std::ostream& o) { write_gap_csv(o, report); });
  s.log("peak gap " + std::to_string(report.peak) + " at t = " + std::to_string(report.peak_time));
  s.finish({{"cells", grid.size()},
            {"d_bar", report.d_bar},
            {"initial_gap", report.gap.front()},
            {"peak_gap", report.peak},
            {"peak_time", report.peak_time},
            {"peak_step", report.peak_step},
            {"final_gap", report.gap.back()}});
}

const std::map<std::string, std::function<void(Session&)>>& handlers() {
  static const std::map<std::string, std::function<void(Session&)>> table{
      {"sample", cmd_sample},
      {"build-graph", cmd_build_graph},
      {"energy-compare", cmd_energy_compare},
      {"rates", cmd_rates},
      {"recover", cmd_recover},
      {"recover-sweep", cmd_recover_sweep},
      {"pde-run", cmd_pde_run},
      {"boundary-gap", cmd_boundary_gap},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{"sample",  "build-graph",   "energy-compare", "rates",
                                              "recover", "recover-sweep", "pde-run",        "boundary-gap"};
  return names;
}

int run_subcommand(const RunRequest& request, std::ostream& err) {
  const auto it = handlers().find(request.subcommand);
  if (it == handlers().end()) {
    err << "error: unknown subcommand '" << request.subcommand << "'\n";
    return kExitConfig;
  }
  std::unique_ptr<Session> session;
  auto fail = [&](const char* kind, const std::exception& e, int code) {
    const std::string msg = std::string(kind) + " error: " + e.what();
    if (session && session->started()) session->log(msg);
    if (!session || !session->started() || request.quiet) err << msg << '\n';
    return code;
  };
  try {
    Json config = load_config_file(request.config_path);
    session = std::make_unique<Session>(request.subcommand, config, request, err);
    it->second(*session);
    return kExitOk;
  } catch (const ConfigError& e) {
    return fail("config", e, kExitConfig);
  } catch (const NumericalError& e) {
    return fail("numerical", e, kExitNumerical);
  } catch (const IoError& e) {
    return fail("io", e, kExitIo);
  } catch (const nlohmann::json::exception& e) {
    return fail("config", e, kExitConfig);
  } catch (const std::bad_alloc& e) {
    return fail("numerical", e, kExitNumerical);
  }
}

}  // namespace wgdiff
