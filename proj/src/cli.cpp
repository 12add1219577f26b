#include "beliefdyn/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <omp.h>

#include "beliefdyn/config.hpp"
#include "beliefdyn/errors.hpp"
#include "beliefdyn/mcsim.hpp"
#include "beliefdyn/model.hpp"
#include "beliefdyn/stationary.hpp"
#include "beliefdyn/transient.hpp"
#include "beliefdyn/validation.hpp"

#ifndef BELIEFDYN_VERSION
#define BELIEFDYN_VERSION "0.0.0"
#endif

namespace beliefdyn {

namespace fs = std::filesystem;
using nlohmann::json;

std::string tool_version() { return BELIEFDYN_VERSION; }

namespace {

/// Options shared by every scenario-driven subcommand.
struct ScenarioArgs {
  std::string config_path;
  std::string preset;
  std::vector<std::string> params;
  std::optional<double> alpha;
  std::optional<double> sigma2;
  std::string grid = "201,401";
  std::string out = "out";
  std::optional<int> threads;
};

struct StationaryArgs {
  double tol = kFixedPointTol;
  std::size_t max_iter = kFixedPointMaxIter;
};

struct TransientArgs {
  double t_final = 0.0;
  double dt = 0.0;
  std::string snapshot_times;
  std::string laplace_check;
  std::size_t record_every = 0;
};

struct McArgs {
  std::size_t agents = 1000;
  std::uint64_t seed = 1;
  double dt = 0.0;
  double t_final = 0.0;
  std::size_t record_every = 100;
  std::size_t p_bins = 10;
  std::size_t x_bins = 40;
  std::string personalities = "iid";
  std::string snapshot_times;
  std::string validate_against;
};

struct ValidateArgs {
  std::string only;
  bool full = false;
  std::string out;
};

/// Runtime context: replaying a manifest substitutes the recorded config text
/// for the config file.
struct Context {
  std::vector<std::string> argv;
  std::optional<std::string> config_text;
};

class ConfigFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string g17(double v) { return fmt::format("{:.17g}", v); }

std::vector<double> parse_doubles(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigFailure(fmt::format("{}: '{}' is not a number", flag, item));
    }
  }
  return out;
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& text) {
  const auto values = parse_doubles(text, "--grid");
  if (values.size() != 2 || values[0] < 3 || values[1] < 3 || values[0] != std::floor(values[0]) ||
      values[1] != std::floor(values[1])) {
    throw ConfigFailure(fmt::format("--grid expects np,nx with integers >= 3, got '{}'", text));
  }
  return {static_cast<std::size_t>(values[0]), static_cast<std::size_t>(values[1])};
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigFailure(fmt::format("cannot read config file '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Resolved {
  BuiltScenario scenario;
  std::string source;
  std::string config_text;
};

/// Precedence: command-line flags > config file > preset defaults.
Resolved resolve_scenario(const ScenarioArgs& a, const Context& ctx) {
  Resolved r;
  ScenarioConfig raw;
  if (!a.config_path.empty() || ctx.config_text) {
    r.config_text = ctx.config_text ? *ctx.config_text : read_text(a.config_path);
    raw = parse_config(r.config_text);
    r.source = fmt::format("config:{}", a.config_path);
  }
  if (!a.preset.empty()) {
    if (raw.preset && *raw.preset != a.preset) raw.preset_params.clear();
    raw.preset = a.preset;
    r.source = r.source.empty() ? fmt::format("preset:{}", a.preset) : r.source + fmt::format(" preset:{}", a.preset);
  }
  if (r.source.empty()) throw ConfigFailure("no scenario given: pass --config <path> or --preset <name>");
  for (const auto& kv : a.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigFailure(fmt::format("--param expects key=value, got '{}'", kv));
    if (!raw.preset) throw ConfigFailure("--param requires a preset");
    raw.preset_params[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (a.alpha) raw.alpha = Coefficient::constant(*a.alpha);
  if (a.sigma2) raw.sigma2 = *a.sigma2;
  r.scenario = build_scenario(raw);
  return r;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigFailure(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  return out;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const fs::path& dir, const std::string& subcommand, const Context& ctx, const Resolved* scenario,
                    json parameters) {
  json m;
  m["tool"] = "beliefdyn";
  m["version"] = tool_version();
  m["subcommand"] = subcommand;
  m["argv"] = ctx.argv;
  m["output_dir"] = dir.string();
  m["started_at"] = utc_now();
  m["parameters"] = std::move(parameters);
  if (scenario) {
    m["scenario"] = {{"source", scenario->source}, {"name", scenario->scenario.spec.name}};
    if (!scenario->config_text.empty()) m["scenario"]["config_text"] = scenario->config_text;
  }
  auto out = open_out(dir / "manifest.json");
  out << m.dump(2) << '\n';
}

void write_report(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& entries) {
  auto out = open_out(path);
  for (const auto& [k, v] : entries) out << k << '=' << v << '\n';
}

void apply_threads(const ScenarioArgs& a) {
  if (a.threads) {
    if (*a.threads < 1) throw ConfigFailure("--threads must be at least 1");
    omp_set_num_threads(*a.threads);
  }
}

std::string join_modes(const std::vector<std::size_t>& modes, const Axis& x) {
  std::string out;
  for (const auto k : modes) out += (out.empty() ? "" : ",") + fmt::format("{:.6g}", x.nodes[k]);
  return out;
}

void write_marginal(const fs::path& path, const Axis& x, const std::vector<double>& rho) {
  auto out = open_out(path);
  out << "x,rho\n";
  for (std::size_t j = 0; j < x.size(); ++j) out << g17(x.nodes[j]) << ',' << g17(rho[j]) << '\n';
}

// ---------------------------------------------------------------------------

int cmd_stationary(const ScenarioArgs& a, const StationaryArgs& s, const Context& ctx) {
  const Resolved res = resolve_scenario(a, ctx);
  const ScenarioSpec& spec = res.scenario.spec;
  const auto [np, nx] = parse_grid(a.grid);
  const fs::path dir(a.out);
  ensure_dir(dir);
  write_manifest(dir, "stationary", ctx, &res,
                 {{"grid", {np, nx}}, {"tol", s.tol}, {"max_iter", s.max_iter}, {"threads", a.threads.value_or(0)}});
  apply_threads(a);

  const Grid grid = make_grid(spec, np, nx);
  DensityField rho;
  std::vector<double> marginal;
  std::string method;
  FixedPointReport report;
  bool converged = true;
  if (spec.zeta.product_form() || spec.zeta.belief_independent()) {
    const bool product = spec.zeta.product_form();
    method = product ? "closed_form_product" : "fredholm_nystrom";
    const GaussianFamilySolution sol =
        product ? closed_form_product(spec, grid) : gaussian_family(spec, grid.p, fredholm_phi(spec, grid));
    rho = gaussian_density(sol, grid);
    marginal = gaussian_marginal(spec, sol, grid.x);
    report.final_residual = l1_distance(apply_operator_A(spec, rho), rho);
    report.tolerance = s.tol;
    report.converged = true;
  } else {
    method = "successive_approximation";
    FixedPointResult fp = successive_approximation(spec, grid, s.tol, s.max_iter);
    rho = std::move(fp.rho);
    report = std::move(fp.report);
    marginal = marginal_x(rho);
    converged = report.converged;
    auto conv = open_out(dir / "convergence.csv");
    conv << "iteration,l1_delta\n";
    for (std::size_t k = 0; k < report.l1_deltas.size(); ++k) conv << k + 1 << ',' << g17(report.l1_deltas[k]) << '\n';
  }

  {
    auto out = open_out(dir / "density.csv");
    write_density_csv(out, rho);
  }
  write_marginal(dir / "marginal.csv", grid.x, marginal);

  const ContractionDiagnosis cd = contraction_bound_check(spec, grid);
  const auto modes = find_modes(marginal);
  write_report(dir / "report.txt",
               {{"subcommand", "stationary"},
                {"scenario", spec.name},
                {"method", method},
                {"np", std::to_string(np)},
                {"nx", std::to_string(nx)},
                {"x_lo", g17(grid.x.lo())},
                {"x_hi", g17(grid.x.hi())},
                {"iterations", std::to_string(report.iterations)},
                {"residual", g17(report.final_residual)},
                {"tolerance", g17(report.tolerance)},
                {"converged", converged ? "true" : "false"},
                {"contraction_applicable", cd.applicable ? "true" : "false"},
                {"contraction_global", cd.global ? "true" : "false"},
                {"contraction_local", cd.local ? "true" : "false"},
                {"contraction_lhs", g17(cd.lhs)},
                {"contraction_global_bound", g17(cd.global_bound)},
                {"contraction_local_bound", g17(cd.local_bound)},
                {"s_zeta", g17(cd.s_zeta)},
                {"s_x", g17(cd.s_x)},
                {"x0", g17(cd.x0)},
                {"convergence_guarantee", cd.applicable && cd.global ? "global" : "unguaranteed"},
                {"total_mass", g17(total_mass(rho))},
                {"mode_count", std::to_string(modes.size())},
                {"modes", join_modes(modes, grid.x)},
                {"cluster_count", std::to_string(count_clusters(marginal))}});

  std::cout << fmt::format("method: {}\n", method);
  std::cout << fmt::format("contraction: applicable={} lhs={:.6g} global_bound={:.6g} ({}) local_bound={:.6g} ({})\n",
                           cd.applicable, cd.lhs, cd.global_bound, cd.global ? "holds" : "fails", cd.local_bound,
                           cd.local ? "holds" : "fails");
  if (!(cd.applicable && cd.global)) std::cout << "convergence unguaranteed; certified by the residual check\n";
  std::cout << fmt::format("iterations={} residual={:.3e} converged={}\n", report.iterations, report.final_residual,
                           converged);
  std::cout << fmt::format("marginal modes: {}\n", modes.empty() ? "none" : join_modes(modes, grid.x));
  if (!converged) {
    std::cerr << "error: successive approximation did not converge; results written and flagged\n";
    return exit_code::kNotConverged;
  }
  return exit_code::kOk;
}

std::string time_tag(double t) { return fmt::format("{:g}", t); }

int cmd_transient(const ScenarioArgs& a, const TransientArgs& o, const Context& ctx) {
  const Resolved res = resolve_scenario(a, ctx);
  const ScenarioSpec& spec = res.scenario.spec;
  if (!spec.zeta.belief_independent()) {
    std::cerr << "error: the transient solver requires belief-independent influence; "
                 "this scenario uses a bounded-confidence distance kernel\n";
    return exit_code::kUnsupported;
  }
  const auto [np, nx] = parse_grid(a.grid);
  const auto snapshots = parse_doubles(o.snapshot_times, "--snapshot-times");
  const auto s_samples = parse_doubles(o.laplace_check, "--laplace-check");
  for (const double t : snapshots) {
    if (t < 0.0) throw ConfigFailure("--snapshot-times must be non-negative");
  }
  for (const double s : s_samples) {
    if (!(s > 0.0)) throw ConfigFailure("--laplace-check samples must be positive");
  }

  const Grid grid = make_grid(spec, np, nx);
  double t_final = o.t_final > 0.0 ? o.t_final : default_transient_t_final(spec, grid.p);
  for (const double t : snapshots) t_final = std::max(t_final, t);
  if (!s_samples.empty()) {
    // The truncated transform needs exp(-s T) below 1e-10 for the smallest sample.
    const double s_min = *std::min_element(s_samples.begin(), s_samples.end());
    t_final = std::max(t_final, 24.0 / s_min);
  }
  const double dt = o.dt > 0.0 ? o.dt : default_transient_dt(spec, grid.p);

  const fs::path dir(a.out);
  ensure_dir(dir);
  write_manifest(dir, "transient", ctx, &res,
                 {{"grid", {np, nx}},
                  {"t_final", t_final},
                  {"dt", dt},
                  {"snapshot_times", snapshots},
                  {"laplace_check", s_samples},
                  {"record_every", o.record_every},
                  {"threads", a.threads.value_or(0)}});
  apply_threads(a);

  const TransientSolution sol = solve_transient(spec, grid, res.scenario.initial, {t_final, dt});
  const auto& t = sol.path.t;
  const std::size_t steps = t.size() - 1;
  const std::size_t stride = o.record_every > 0 ? o.record_every : std::max<std::size_t>(1, (steps + 199) / 200);
  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k <= steps; k += stride) kept.push_back(k);
  if (kept.back() != steps) kept.push_back(steps);

  {
    auto out = open_out(dir / "phi.csv");
    out << "t,p,phi\n";
    for (const auto k : kept) {
      for (std::size_t i = 0; i < grid.p.size(); ++i) {
        out << g17(t[k]) << ',' << g17(grid.p.nodes[i]) << ','
            << g17(sol.path.phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))) << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "marginal_t.csv");
    out << "t,x,rho_marginal\n";
    for (const auto k : kept) {
      const auto marg = marginal_x(density_at(sol, t[k], grid));
      for (std::size_t j = 0; j < grid.x.size(); ++j) {
        out << g17(t[k]) << ',' << g17(grid.x.nodes[j]) << ',' << g17(marg[j]) << '\n';
      }
    }
  }
  const GaussianFamilySolution stationary = spec.zeta.product_form()
                                                ? closed_form_product(spec, grid)
                                                : gaussian_family(spec, grid.p, fredholm_phi(spec, grid));
  const DensityField stationary_rho = gaussian_density(stationary, grid);
  std::vector<std::pair<std::string, std::string>> report = {
      {"subcommand", "transient"},
      {"scenario", spec.name},
      {"np", std::to_string(np)},
      {"nx", std::to_string(nx)},
      {"t_final", g17(sol.path.t_final())},
      {"dt", g17(steps > 0 ? t[1] - t[0] : 0.0)},
      {"steps", std::to_string(steps)},
      {"phi_final_max_abs", g17(sol.path.phi.col(static_cast<Eigen::Index>(steps)).cwiseAbs().maxCoeff())},
      {"l1_to_stationary_at_t_final", g17(l1_distance(density_at(sol, sol.path.t_final(), grid), stationary_rho))},
  };
  for (const double ts : snapshots) {
    const DensityField snap = density_at(sol, ts, grid);
    auto out = open_out(dir / fmt::format("snapshot_t{}.csv", time_tag(ts)));
    write_density_csv(out, snap);
    const double l1 = l1_distance(snap, stationary_rho);
    report.emplace_back(fmt::format("l1_to_stationary_at_t{}", time_tag(ts)), g17(l1));
    std::cout << fmt::format("snapshot t={}: L1 to stationary = {:.4e}\n", time_tag(ts), l1);
  }
  if (!s_samples.empty()) {
    const auto residuals = laplace_consistency_check(spec, sol, s_samples);
    auto out = open_out(dir / "laplace.csv");
    out << "s,numeric,predicted,relative_residual\n";
    double worst = 0.0;
    for (const auto& r : residuals) {
      out << g17(r.s) << ',' << g17(r.numeric) << ',' << g17(r.predicted) << ',' << g17(r.relative) << '\n';
      worst = std::max(worst, r.relative);
      std::cout << fmt::format("laplace s={:g}: relative residual = {:.4e}\n", r.s, r.relative);
    }
    report.emplace_back("laplace_max_relative_residual", g17(worst));
  }
  write_report(dir / "report.txt", report);
  return exit_code::kOk;
}

void write_histogram_rows(std::ostream& out, double t, const EmpiricalHistogram& h) {
  const auto& b = h.bins;
  for (std::size_t pb = 0; pb < b.p_bins(); ++pb) {
    const double pc = 0.5 * (b.p_edges[pb] + b.p_edges[pb + 1]);
    for (std::size_t xb = 0; xb < b.x_bins(); ++xb) {
      const double xc = 0.5 * (b.x_edges[xb] + b.x_edges[xb + 1]);
      out << g17(t) << ',' << g17(pc) << ',' << g17(xc) << ',' << g17(h.at(pb, xb)) << '\n';
    }
  }
}

int cmd_mc(const ScenarioArgs& a, const McArgs& o, const Context& ctx) {
  const Resolved res = resolve_scenario(a, ctx);
  const ScenarioSpec& spec = res.scenario.spec;
  if (o.agents < 1) throw ConfigFailure("--U must be at least 1");
  if (o.p_bins < 1 || o.x_bins < 1) throw ConfigFailure("--p-bins and --x-bins must be at least 1");
  PersonalitySampling sampling = PersonalitySampling::Iid;
  if (o.personalities == "stratified") {
    sampling = PersonalitySampling::Stratified;
  } else if (o.personalities != "iid") {
    throw ConfigFailure(fmt::format("--personalities expects iid or stratified, got '{}'", o.personalities));
  }
  const auto snapshots = parse_doubles(o.snapshot_times, "--snapshot-times");
  const Axis axis = Axis::uniform(spec.personality.lo, spec.personality.hi, kValidationNodes);
  double t_final = o.t_final;
  if (!(t_final > 0.0)) {
    double alpha_inf = 1.0;
    for (const double p : axis.nodes) alpha_inf = std::min(alpha_inf, spec.alpha(p));
    t_final = 20.0 / alpha_inf;
  }
  for (const double t : snapshots) t_final = std::max(t_final, t);
  const double dt = o.dt > 0.0 ? o.dt : default_mc_dt(spec);
  std::optional<DensityField> reference;
  if (!o.validate_against.empty()) {
    std::ifstream in(o.validate_against, std::ios::binary);
    if (!in) throw ConfigFailure(fmt::format("cannot read density file '{}'", o.validate_against));
    try {
      reference = read_density_csv(in);
    } catch (const Error& e) {
      throw ConfigFailure(fmt::format("'{}': {}", o.validate_against, e.what()));
    }
  }

  const fs::path dir(a.out);
  ensure_dir(dir);
  write_manifest(dir, "mc", ctx, &res,
                 {{"U", o.agents},
                  {"seed", o.seed},
                  {"dt", dt},
                  {"t_final", t_final},
                  {"record_every", o.record_every},
                  {"bins", {o.p_bins, o.x_bins}},
                  {"personalities", o.personalities},
                  {"snapshot_times", snapshots},
                  {"validate_against", o.validate_against},
                  {"threads", a.threads.value_or(0)}});
  apply_threads(a);

  AgentEnsemble ens = init_ensemble(spec, o.agents, o.seed, res.scenario.initial, sampling);
  McRunOptions opts;
  opts.t_final = t_final;
  opts.dt = dt;
  opts.record_every = o.record_every;
  opts.bins = HistogramSpec::uniform(spec.personality, o.p_bins, belief_range(spec, axis), o.x_bins);
  const McRunResult run = mc_run(ens, opts);

  {
    auto out = open_out(dir / "trajectory.csv");
    out << "t,stat_name,value\n";
    for (const auto& s : run.summary) {
      out << g17(s.t) << ",mean," << g17(s.mean) << '\n';
      out << g17(s.t) << ",variance," << g17(s.variance) << '\n';
      out << g17(s.t) << ",max_abs," << g17(s.max_abs) << '\n';
    }
  }
  {
    auto out = open_out(dir / "histogram.csv");
    out << "t,p_bin_center,x_bin_center,mass\n";
    write_histogram_rows(out, ens.time, run.final_histogram);
  }
  {
    auto out = open_out(dir / "histogram_time_averaged.csv");
    out << "t,p_bin_center,x_bin_center,mass\n";
    write_histogram_rows(out, ens.time, run.time_averaged);
  }
  if (!snapshots.empty()) {
    auto out = open_out(dir / "histograms.csv");
    out << "t,p_bin_center,x_bin_center,mass\n";
    for (const double ts : snapshots) {
      const auto it = std::min_element(run.snapshots.begin(), run.snapshots.end(), [ts](const auto& x, const auto& y) {
        return std::abs(x.first - ts) < std::abs(y.first - ts);
      });
      write_histogram_rows(out, it->first, it->second);
    }
  }

  const DriftDiagnostic dd = drift_diagnostic(ens);
  const SummarySample& last = run.summary.back();
  std::vector<std::pair<std::string, std::string>> report = {
      {"subcommand", "mc"},
      {"scenario", spec.name},
      {"U", std::to_string(o.agents)},
      {"seed", std::to_string(o.seed)},
      {"dt", g17(dt)},
      {"t_final", g17(ens.time)},
      {"steps", std::to_string(ens.steps)},
      {"personalities", o.personalities},
      {"final_mean", g17(last.mean)},
      {"final_variance", g17(last.variance)},
      {"max_abs_belief", g17(dd.max_abs_belief)},
      {"drift_at_max_belief", g17(dd.drift_at_max)},
      {"drift_at_min_belief", g17(dd.drift_at_min)},
  };
  if (reference) {
    const Grid& rg = reference->grid();
    const auto bins = HistogramSpec::uniform({rg.p.lo(), rg.p.hi()}, 1, {rg.x.lo(), rg.x.hi()}, 20);
    const double l1 = histogram_l1(empirical_density(ens, bins), histogram_of_density(*reference, bins));
    report.emplace_back("validate_l1", g17(l1));
    std::cout << fmt::format("L1 distance to {} = {:.6f}\n", o.validate_against, l1);
  }
  write_report(dir / "report.txt", report);
  std::cout << fmt::format("t={:g} mean={:.6g} variance={:.6g}\n", ens.time, last.mean, last.variance);
  return exit_code::kOk;
}

int cmd_validate(const ValidateArgs& v, const Context& ctx) {
  ValidationOptions opts;
  opts.scale = v.full ? ValidationScale::Full : ValidationScale::Reduced;
  std::set<std::string> groups;
  for (const auto& c : validation_checks()) groups.insert(c.group);
  std::stringstream ss(v.only);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (groups.contains(item)) {
      opts.groups.insert(item);
    } else if (std::any_of(validation_checks().begin(), validation_checks().end(),
                           [&](const CheckInfo& c) { return c.id == item; })) {
      opts.ids.insert(item);
    } else {
      throw ConfigFailure(fmt::format("--only: unknown group or check '{}'", item));
    }
  }
  std::optional<std::ofstream> log;
  if (!v.out.empty()) {
    const fs::path dir(v.out);
    ensure_dir(dir);
    write_manifest(dir, "validate", ctx, nullptr, {{"only", v.only}, {"full", v.full}});
    log = open_out(dir / "validation.txt");
  }
  const auto results = run_validation(opts, [&](const CheckResult& r) {
    std::cout << format_result(r) << std::endl;
    if (log) *log << format_result(r) << '\n';
  });
  const auto failed = std::count_if(results.begin(), results.end(), [](const CheckResult& r) { return !r.passed; });
  const std::string summary = fmt::format("{} checks, {} passed, {} failed", results.size(),
                                          results.size() - static_cast<std::size_t>(failed), failed);
  std::cout << summary << '\n';
  if (log) *log << summary << '\n';
  return failed == 0 ? exit_code::kOk : exit_code::kFailure;
}

int cmd_scenarios() {
  for (const auto& info : preset_catalog()) {
    std::cout << info.name << ": " << info.summary << '\n';
    for (const auto& [k, v] : info.defaults) std::cout << "    " << k << " = " << v << '\n';
  }
  return exit_code::kOk;
}

void add_scenario_options(CLI::App* cmd, ScenarioArgs& a) {
  cmd->add_option("--config", a.config_path, "YAML scenario file");
  cmd->add_option("--preset", a.preset, "Named scenario preset (see `scenarios`)");
  cmd->add_option("--param", a.params, "Preset parameter override key=value (repeatable)");
  cmd->add_option("--alpha", a.alpha, "Constant stubbornness, overriding file and preset");
  cmd->add_option("--sigma2", a.sigma2, "Noise variance, overriding file and preset");
  cmd->add_option("--grid", a.grid, "Grid size np,nx")->capture_default_str();
  cmd->add_option("--out", a.out, "Output directory")->capture_default_str();
  cmd->add_option("--threads", a.threads, "Worker thread cap");
}

int dispatch(const Context& ctx);

int cmd_replay(const std::string& manifest_path, const std::string& out_override) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw ConfigFailure(fmt::format("cannot read manifest '{}'", manifest_path));
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw ConfigFailure(fmt::format("manifest '{}': {}", manifest_path, e.what()));
  }
  Context ctx;
  ctx.argv = m.at("argv").get<std::vector<std::string>>();
  if (!ctx.argv.empty() && ctx.argv.front() == "replay") throw ConfigFailure("manifest records a replay");
  if (m.contains("scenario") && m["scenario"].contains("config_text")) {
    ctx.config_text = m["scenario"]["config_text"].get<std::string>();
  }
  if (!out_override.empty()) {
    bool replaced = false;
    for (std::size_t i = 0; i + 1 < ctx.argv.size(); ++i) {
      if (ctx.argv[i] == "--out") {
        ctx.argv[i + 1] = out_override;
        replaced = true;
      } else if (ctx.argv[i].rfind("--out=", 0) == 0) {
        ctx.argv[i] = "--out=" + out_override;
        replaced = true;
      }
    }
    if (!replaced) {
      ctx.argv.push_back("--out");
      ctx.argv.push_back(out_override);
    }
  }
  return dispatch(ctx);
}

int dispatch(const Context& ctx) {
  CLI::App app{"Mean-field belief dynamics: stationary and transient solvers, agent simulation"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);

  ScenarioArgs stat_scn, tr_scn, mc_scn;
  StationaryArgs stat;
  TransientArgs tr;
  McArgs mc;
  ValidateArgs val;
  std::string replay_manifest, replay_out;

  auto* c_stat = app.add_subcommand("stationary", "Stationary density of a scenario");
  add_scenario_options(c_stat, stat_scn);
  c_stat->add_option("--tol", stat.tol, "Fixed-point L1 tolerance")->capture_default_str();
  c_stat->add_option("--max-iter", stat.max_iter, "Fixed-point iteration cap")->capture_default_str();

  auto* c_tr = app.add_subcommand("transient", "Time-dependent density under belief-independent influence");
  add_scenario_options(c_tr, tr_scn);
  c_tr->add_option("--t-final", tr.t_final, "Final time (default 20 / min w)");
  c_tr->add_option("--dt", tr.dt, "Time step (default 0.01 / max w)");
  c_tr->add_option("--snapshot-times", tr.snapshot_times, "Comma-separated density snapshot times");
  c_tr->add_option("--laplace-check", tr.laplace_check, "Comma-separated Laplace samples s");
  c_tr->add_option("--record-every", tr.record_every, "Time-step stride of the CSV output (default: about 200 rows)");

  auto* c_mc = app.add_subcommand("mc", "Monte Carlo agent simulation");
  add_scenario_options(c_mc, mc_scn);
  c_mc->add_option("--U", mc.agents, "Number of agents")->capture_default_str();
  c_mc->add_option("--seed", mc.seed, "Master seed")->capture_default_str();
  c_mc->add_option("--dt", mc.dt, "Time step (default 1e-3 / max(1, S_zeta))");
  c_mc->add_option("--t-final", mc.t_final, "Final time (default 20 / inf alpha)");
  c_mc->add_option("--record-every", mc.record_every, "Steps between recorded summaries")->capture_default_str();
  c_mc->add_option("--p-bins", mc.p_bins, "Histogram personality bins")->capture_default_str();
  c_mc->add_option("--x-bins", mc.x_bins, "Histogram belief bins")->capture_default_str();
  c_mc->add_option("--personalities", mc.personalities, "Personality sampling: iid or stratified")
      ->capture_default_str();
  c_mc->add_option("--snapshot-times", mc.snapshot_times, "Comma-separated histogram snapshot times");
  c_mc->add_option("--validate-against", mc.validate_against, "Density CSV to compare the final ensemble against");

  auto* c_val = app.add_subcommand("validate", "Run the cross-validation battery");
  c_val->add_option("--only", val.only, "Comma-separated groups or check ids");
  c_val->add_flag("--full", val.full, "Run at full acceptance scale");
  c_val->add_option("--out", val.out, "Directory for manifest and validation log");

  auto* c_list = app.add_subcommand("scenarios", "List scenario presets and their parameters");

  auto* c_replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  c_replay->add_option("manifest", replay_manifest, "manifest.json of an earlier run")->required();
  c_replay->add_option("--out", replay_out, "Output directory (default: the recorded one)");

  std::vector<const char*> argv;
  argv.push_back("beliefdyn");
  for (const auto& s : ctx.argv) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_code::kOk : exit_code::kConfigError;
  }

  try {
    if (c_stat->parsed()) return cmd_stationary(stat_scn, stat, ctx);
    if (c_tr->parsed()) return cmd_transient(tr_scn, tr, ctx);
    if (c_mc->parsed()) return cmd_mc(mc_scn, mc, ctx);
    if (c_val->parsed()) return cmd_validate(val, ctx);
    if (c_list->parsed()) return cmd_scenarios();
    if (c_replay->parsed()) return cmd_replay(replay_manifest, replay_out);
  } catch (const ConfigFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::kConfigError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case Errc::StepTooLarge:
        return exit_code::kStepTooLarge;
      case Errc::InvalidStubbornness:
      case Errc::NonPositiveNoise:
      case Errc::UnnormalizedRho0:
      case Errc::ProductFormMismatch:
      case Errc::NonPositiveInfluenceMass:
      case Errc::UnknownPreset:
      case Errc::InvalidConfig:
      case Errc::DomainEmpty:
      case Errc::GridMismatch:
      case Errc::TimeOutOfRange:
        return exit_code::kConfigError;
      case Errc::BeliefDependentZeta:
      case Errc::Unsupported:
        return exit_code::kUnsupported;
      default:
        return exit_code::kFailure;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::kFailure;
  }
  return exit_code::kFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  Context ctx;
  ctx.argv = args;
  return dispatch(ctx);
}

}  // namespace beliefdyn
