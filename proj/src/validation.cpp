#include "beliefdyn/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <omp.h>

#include "beliefdyn/errors.hpp"
#include "beliefdyn/mcsim.hpp"
#include "beliefdyn/model.hpp"
#include "beliefdyn/stationary.hpp"
#include "beliefdyn/transient.hpp"

namespace beliefdyn {

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

using CheckFn = Outcome (*)(ValidationScale);

bool full(ValidationScale s) { return s == ValidationScale::Full; }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ScenarioSpec preset(const std::string& name, const std::map<std::string, std::string>& params = {}) {
  return make_preset(name, params).spec;
}

std::string fmt_alpha(double a) { return fmt::format("{}", a); }

// ---------------------------------------------------------------------------

Outcome check_reject_zero_noise(ValidationScale) {
  ScenarioConfig raw;
  raw.preset = "homogeneous";
  raw.sigma2 = 0.0;
  try {
    build_scenario(raw);
  } catch (const Error& e) {
    if (e.code() == Errc::NonPositiveNoise) return {true, "sigma2 = 0 rejected with NonPositiveNoise"};
    return {false, fmt::format("rejected with unexpected error {}", e.what())};
  }
  return {false, "sigma2 = 0 was accepted"};
}

Outcome check_homogeneous_closed_form(ValidationScale) {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const double a : {0.1, 0.5, 1.0}) {
    const ScenarioSpec spec = preset("homogeneous", {{"alpha", fmt_alpha(a)}, {"sigma2", "0.01"}});
    const Grid grid = make_grid(spec, 201, 801);
    const auto sol = closed_form_product(spec, grid);
    const auto marginal = gaussian_marginal(spec, sol, grid.x);
    for (std::size_t j = 0; j < grid.x.size(); ++j) {
      worst = std::max(worst, std::abs(marginal[j] - homogeneous_closed_form(a, 0.01, grid.x.nodes[j])));
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-5 && secs <= 10.0,
          fmt::format("max |rho - closed form| = {:.3e} (tol 1e-5) over alpha in {{0.1, 0.5, 1}}, {:.2f} s (limit 10 s)",
                      worst, secs)};
}

Outcome check_three_way(ValidationScale) {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string where;
  for (const std::string shape : {"one-minus-abs", "abs"}) {
    for (const std::string n : {"0", "8"}) {
      const ScenarioSpec spec = preset("inhomogeneous", {{"shape", shape}, {"n", n}});
      const Grid grid = make_grid(spec, 201, 401);
      const auto fp = successive_approximation(spec, grid);
      const DensityField nystrom = gaussian_density(gaussian_family(spec, grid.p, fredholm_phi(spec, grid)), grid);
      double local = l1_distance(fp.rho, nystrom);
      if (spec.zeta.product_form()) {
        const DensityField closed = gaussian_density(closed_form_product(spec, grid), grid);
        local = std::max({local, l1_distance(fp.rho, closed), l1_distance(nystrom, closed)});
      }
      if (!fp.report.converged) local = std::numeric_limits<double>::infinity();
      if (local >= worst) {
        worst = local;
        where = fmt::format("{} n={}", shape, n);
      }
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-4 && secs <= 60.0,
          fmt::format("worst pairwise L1 = {:.3e} (tol 1e-4, at {}), {:.2f} s (limit 60 s)", worst, where, secs)};
}

Outcome check_symmetry(ValidationScale) {
  struct Case {
    std::string name;
    std::map<std::string, std::string> params;
  };
  const std::vector<Case> cases = {
      {"homogeneous", {}},
      {"inhomogeneous", {{"shape", "one-minus-abs"}, {"n", "0"}}},
      {"inhomogeneous", {{"shape", "one-minus-abs"}, {"n", "8"}}},
      {"inhomogeneous", {{"shape", "abs"}, {"n", "0"}}},
      {"inhomogeneous", {{"shape", "abs"}, {"n", "8"}}},
      {"event-driven", {{"influence", "constant"}}},
  };
  double worst = 0.0;
  for (const auto& c : cases) {
    const ScenarioSpec spec = preset(c.name, c.params);
    const Grid grid = make_grid(spec, 201, 401);
    for (const double v : fredholm_phi(spec, grid)) worst = std::max(worst, std::abs(v));
    worst = std::max(worst, std::abs(product_phi_star(spec, grid.p)));
  }
  return {worst <= 1e-8, fmt::format("max |phi*| = {:.3e} (tol 1e-8) over {} even-alpha / odd-u presets", worst,
                                     cases.size())};
}

Outcome check_clusterization(ValidationScale) {
  const auto start = std::chrono::steady_clock::now();
  auto marginal_of = [](double alpha, double sigma2, Grid& grid) {
    const ScenarioSpec spec =
        preset("bounded-rect", {{"alpha", fmt_alpha(alpha)}, {"sigma2", fmt::format("{}", sigma2)}});
    grid = make_grid(spec, 201, 401);
    const auto fp = successive_approximation(spec, grid);
    return std::pair{marginal_x(fp.rho), fp.report.converged};
  };
  Grid g1, g2, g3;
  const auto [m1, c1] = marginal_of(0.1, 1e-3, g1);
  const auto [m2, c2] = marginal_of(0.1, 0.1, g2);
  const auto [m3, c3] = marginal_of(0.3, 1e-3, g3);
  const auto modes1 = find_modes(m1);
  bool two = modes1.size() == 2;
  std::string locs;
  for (const auto k : modes1) locs += fmt::format(" {:+.4f}", g1.x.nodes[k]);
  if (two) {
    two = std::abs(g1.x.nodes[modes1[0]] + 0.5) <= 0.05 && std::abs(g1.x.nodes[modes1[1]] - 0.5) <= 0.05;
  }
  const std::size_t modes2 = find_modes(m2).size();
  const std::size_t modes3 = find_modes(m3).size();
  const std::size_t clusters3 = count_clusters(m3);
  const double secs = seconds_since(start);
  const bool ok = c1 && c2 && c3 && two && modes2 == 1 && clusters3 == 1 && secs <= 300.0;
  return {ok, fmt::format("alpha=0.1 s2=1e-3 modes at{}; s2=0.1 modes = {}; alpha=0.3 clusters = {} "
                          "({} shallow local maxima); {:.2f} s (limit 300 s)",
                          locs, modes2, clusters3, modes3, secs)};
}

Outcome check_mc_validation(ValidationScale scale) {
  const auto start = std::chrono::steady_clock::now();
  const ScenarioSpec spec = preset("bounded-rect", {{"alpha", "0.3"}, {"sigma2", "0.001"}});
  const Grid grid = make_grid(spec, 201, 401);
  const auto fp = successive_approximation(spec, grid);
  const auto bins = HistogramSpec::uniform(spec.personality, 1, {grid.x.lo(), grid.x.hi()}, 20);
  const auto reference = histogram_of_density(fp.rho, bins);
  const int seeds = full(scale) ? 5 : 3;
  const double t_final = full(scale) ? 200.0 : 100.0;
  std::vector<double> l1;
  for (int seed = 1; seed <= seeds; ++seed) {
    AgentEnsemble ens = init_ensemble(spec, 1000, static_cast<std::uint64_t>(seed), InitialCondition::prejudice(),
                                      PersonalitySampling::Stratified);
    McRunOptions opts;
    opts.t_final = t_final;
    opts.dt = 0.02;
    opts.record_every = 1000;
    opts.bins = bins;
    const auto run = mc_run(ens, opts);
    l1.push_back(histogram_l1(run.final_histogram, reference));
  }
  std::vector<double> sorted = l1;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double secs = seconds_since(start);
  std::string each;
  for (const double v : l1) each += fmt::format(" {:.3f}", v);
  return {median <= 0.1 && secs <= 600.0,
          fmt::format("median L1 = {:.4f} (tol 0.1) over seeds:{} (U=1000, t={}, stratified personalities, 20 belief "
                      "bins); {:.1f} s (limit 600 s)",
                      median, each, t_final, secs)};
}

Outcome check_mc_variance(ValidationScale scale) {
  const ScenarioSpec spec = preset("independent", {{"alpha", "0.5"}, {"sigma2", "0.01"}});
  const std::size_t agents = full(scale) ? 10000 : 4000;
  AgentEnsemble ens = init_ensemble(spec, agents, 11, InitialCondition::prejudice());
  const double dt = default_mc_dt(spec);
  const double w = 0.5;
  double worst = 0.0;
  std::string detail;
  double t = 0.0;
  for (const double target : {0.5, 1.0, 5.0}) {
    const auto steps = static_cast<std::size_t>(std::llround((target - t) / dt));
    for (std::size_t k = 0; k < steps; ++k) mc_step(ens, dt);
    t = target;
    double var = 0.0;
    for (std::size_t i = 0; i < ens.size(); ++i) {
      const double d = ens.belief[i] - ens.prejudice[i];
      var += d * d;
    }
    var /= static_cast<double>(ens.size());
    const double exact = spec.sigma2 * -std::expm1(-2.0 * w * t) / (2.0 * w);
    const double rel = std::abs(var / exact - 1.0);
    worst = std::max(worst, rel);
    detail += fmt::format(" t={}: {:.4e} vs {:.4e}", t, var, exact);
  }
  return {worst <= 0.1, fmt::format("max relative deviation {:.3f} (tol 0.10), U={};{}", worst, agents, detail)};
}

Outcome check_mean_conservation(ValidationScale) {
  double worst = 0.0;
  for (const double a : {0.1, 0.5}) {
    const ScenarioSpec spec = preset("homogeneous", {{"alpha", fmt_alpha(a)}});
    const Grid grid = make_grid(spec, 201, 401);
    const auto sol = solve_transient(spec, grid, InitialCondition::prejudice(), {20.0, 0.01});
    double ubar = 0.0;
    for (std::size_t i = 0; i < grid.p.size(); ++i) ubar += grid.p.weights[i] * sol.rho0[i] * sol.u[i];
    for (Eigen::Index k = 0; k < sol.m.cols(); ++k) {
      double mbar = 0.0;
      for (std::size_t i = 0; i < grid.p.size(); ++i) {
        mbar += grid.p.weights[i] * sol.rho0[i] * sol.m(static_cast<Eigen::Index>(i), k);
      }
      worst = std::max(worst, std::abs(mbar - ubar));
    }
  }
  return {worst <= 1e-6, fmt::format("max |mbar(t) - ubar| = {:.3e} (tol 1e-6), alpha in {{0.1, 0.5}}", worst)};
}

Outcome check_phi_half(ValidationScale) {
  const ScenarioSpec spec = preset("proximity", {{"n", "0"}});
  const Grid grid = make_grid(spec, 201, 401);
  const auto sol = solve_transient(spec, grid, InitialCondition::prejudice(), {20.0, 0.01});
  double worst = 0.0;
  double worst_t = 0.0;
  for (Eigen::Index k = 1; k < sol.path.phi.cols(); ++k) {
    const double dev = (sol.path.phi.col(k).array() - 0.5).abs().maxCoeff();
    if (dev > worst) {
      worst = dev;
      worst_t = sol.path.t[static_cast<std::size_t>(k)];
    }
  }
  const double phi1 = sol.path.at(grid.p.size() / 2, 1.0);
  return {worst <= 1e-6,
          fmt::format("max |phi(p,t) - 1/2| over t > 0 = {:.3e} (tol 1e-6) at t = {:.2f}; phi(0,1) = {:.6f}, "
                      "self-consistent solution is 1/2 (1 - exp(-t/3)) = {:.6f}",
                      worst, worst_t, phi1, 0.5 * -std::expm1(-1.0 / 3.0))};
}

Outcome check_laplace(ValidationScale) {
  struct Case {
    std::string label;
    ScenarioPreset preset;
  };
  std::vector<Case> cases;
  cases.push_back({"alpha=(p+1)^2/4", make_preset("proximity", {{"n", "0"}})});
  cases.push_back({"event-driven constant", make_preset("event-driven", {{"influence", "constant"}})});
  double worst = 0.0;
  std::string detail;
  for (const auto& c : cases) {
    const Grid grid = make_grid(c.preset.spec, 201, 401);
    const auto sol = solve_transient(c.preset.spec, grid, c.preset.initial, {60.0, 0.01});
    const auto res = laplace_consistency_check(c.preset.spec, sol, {0.5, 1.0, 2.0});
    double local = 0.0;
    for (const auto& r : res) local = std::max(local, r.relative);
    worst = std::max(worst, local);
    detail += fmt::format(" {}: {:.2e};", c.label, local);
  }
  return {worst <= 1e-4, fmt::format("max relative residual {:.3e} (tol 1e-4) at s in {{0.5, 1, 2}};{}", worst, detail)};
}

Outcome check_relaxation(ValidationScale) {
  struct Case {
    std::string label;
    ScenarioSpec spec;
  };
  const std::vector<Case> cases = {
      {"alpha=|p|", preset("inhomogeneous", {{"shape", "abs"}, {"n", "0"}})},
      {"alpha=(p+1)^2/4", preset("proximity", {{"n", "0"}})},
  };
  double worst = 0.0;
  std::string detail;
  for (const auto& c : cases) {
    const Grid grid = make_grid(c.spec, 201, 401);
    const auto w = w_profile(c.spec, grid.p);
    const double t = 10.0 / *std::min_element(w.begin(), w.end());
    const auto sol = solve_transient(c.spec, grid, InitialCondition::prejudice(), {t, 0.01});
    const DensityField stationary = gaussian_density(closed_form_product(c.spec, grid), grid);
    const double l1 = l1_distance(density_at(sol, t, grid), stationary);
    worst = std::max(worst, l1);
    detail += fmt::format(" {}: {:.3e} at t={:.1f};", c.label, l1, t);
  }
  return {worst <= 1e-2, fmt::format("max L1(transient, stationary) = {:.3e} (tol 1e-2);{}", worst, detail)};
}

Outcome check_marginal_preservation(ValidationScale) {
  double worst = 0.0;
  const std::vector<ScenarioSpec> specs = {
      preset("bounded-rect", {{"alpha", "0.1"}}),
      preset("bounded-rect", {{"domain", "compact"}, {"sigma2", "0.01"}}),
      preset("community", {{"kappa", "0.5"}}),
      preset("proximity", {{"n", "4"}}),
  };
  for (const auto& spec : specs) {
    const Grid grid = make_grid(spec, 101, 201);
    const StationaryOperator op(spec, grid);
    DensityField rho = op.prejudice_iterate();
    for (int it = 0; it < 3; ++it) {
      rho = op.apply(rho);
      for (std::size_t i = 0; i < rho.np(); ++i) {
        worst = std::max(worst, std::abs(integrate_x(rho, i) - spec.rho0(grid.p.nodes[i])));
      }
    }
  }
  return {worst <= 1e-10, fmt::format("max |int rho dx - rho0| = {:.3e} (tol 1e-10) over {} scenarios", worst, specs.size())};
}

Outcome check_fixed_point_residual(ValidationScale) {
  const std::vector<ScenarioSpec> specs = {
      preset("bounded-rect", {{"alpha", "0.1"}}),
      preset("bounded-rect", {{"alpha", "0.3"}}),
      preset("community", {{"kappa", "0.5"}, {"variant", "one-sided"}}),
  };
  double worst_ratio = 0.0;
  bool all_converged = true;
  for (const auto& spec : specs) {
    const Grid grid = make_grid(spec, 101, 201);
    const auto fp = successive_approximation(spec, grid);
    all_converged = all_converged && fp.report.converged;
    const double residual = l1_distance(apply_operator_A(spec, fp.rho), fp.rho);
    worst_ratio = std::max(worst_ratio, residual / fp.report.tolerance);
  }
  return {all_converged && worst_ratio <= 2.0,
          fmt::format("max residual / tol = {:.3f} (limit 2), converged = {}", worst_ratio, all_converged)};
}

Outcome check_fast_path(ValidationScale) {
  double worst = 0.0;
  const std::vector<ScenarioSpec> specs = {
      preset("inhomogeneous", {{"shape", "abs"}, {"n", "8"}}),
      preset("homogeneous"),
      preset("event-driven", {{"influence", "similarity"}}),
  };
  for (const auto& spec : specs) {
    AgentEnsemble fast = init_ensemble(spec, 200, 3, InitialCondition::gaussian(0.2, 0.3));
    AgentEnsemble slow = fast;
    for (int step = 0; step < 50; ++step) {
      const auto a = agent_drift(fast, InteractionPath::Auto);
      const auto b = agent_drift(slow, InteractionPath::Pairwise);
      for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]) * 0.01);
      mc_step(fast, 0.01, InteractionPath::Auto);
      mc_step(slow, 0.01, InteractionPath::Pairwise);
      for (std::size_t i = 0; i < fast.size(); ++i) worst = std::max(worst, std::abs(fast.belief[i] - slow.belief[i]));
    }
  }
  return {worst <= 1e-12, fmt::format("max per-agent per-step difference = {:.3e} (tol 1e-12), U=200, 50 steps", worst)};
}

Outcome check_determinism(ValidationScale) {
  const ScenarioSpec spec = preset("bounded-rect", {{"alpha", "0.3"}});
  auto run = [&spec](int threads) {
    const int saved = omp_get_max_threads();
    omp_set_num_threads(threads);
    AgentEnsemble ens = init_ensemble(spec, 300, 7, InitialCondition::prejudice());
    McRunOptions opts;
    opts.t_final = 5.0;
    opts.dt = 0.01;
    opts.record_every = 50;
    const auto result = mc_run(ens, opts);
    omp_set_num_threads(saved);
    std::ostringstream out;
    for (const auto& s : result.summary) out << fmt::format("{:.17g},{:.17g},{:.17g}\n", s.t, s.mean, s.variance);
    for (const double x : ens.belief) out << fmt::format("{:.17g}\n", x);
    return out.str();
  };
  const std::string a = run(1);
  const std::string b = run(1);
  const std::string c = run(3);
  const bool same = a == b && a == c;
  return {same, fmt::format("repeat run {} and 3-thread run {} (byte comparison of {} bytes)",
                            a == b ? "identical" : "DIFFERS", a == c ? "identical" : "DIFFERS", a.size())};
}

Outcome check_ergodicity(ValidationScale scale) {
  const ScenarioPreset pr = make_preset("event-driven", {{"influence", "similarity"}});
  const Axis axis = Axis::uniform(pr.spec.personality.lo, pr.spec.personality.hi, kValidationNodes);
  const auto bins = HistogramSpec::uniform(pr.spec.personality, 1, belief_range(pr.spec, axis), 20);
  const std::size_t agents = full(scale) ? 1000 : 500;
  const double t_final = full(scale) ? 100.0 : 60.0;
  // Distinct seeds: shared noise would couple the two runs pathwise and hide the law.
  auto final_hist = [&](const InitialCondition& init, std::uint64_t seed) {
    AgentEnsemble ens = init_ensemble(pr.spec, agents, seed, init, PersonalitySampling::Stratified);
    McRunOptions opts;
    opts.t_final = t_final;
    opts.dt = 0.02;
    opts.record_every = 1000;
    opts.bins = bins;
    return mc_run(ens, opts).final_histogram;
  };
  const double l1 = histogram_l1(final_hist(InitialCondition::prejudice(), 5), final_hist(pr.initial, 6));
  return {l1 <= 0.15, fmt::format("L1(prejudice start seed 5, Gaussian start seed 6) = {:.3e} (tol 0.15), U={}, t={}", l1, agents,
                                  t_final)};
}

struct Entry {
  CheckInfo info;
  CheckFn fn;
};

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = {
      {{"config.zero-noise", "model", "zero noise rejected upstream"}, &check_reject_zero_noise},
      {{"1", "stationary", "homogeneous closed form"}, &check_homogeneous_closed_form},
      {{"2", "stationary", "three-way solver agreement"}, &check_three_way},
      {{"3", "stationary", "symmetric presets have zero interaction mean"}, &check_symmetry},
      {{"4", "stationary", "bounded-confidence clusterization"}, &check_clusterization},
      {{"5", "mcsim", "Monte Carlo matches the mean-field fixed point"}, &check_mc_validation},
      {{"6a", "mcsim", "Monte Carlo variance follows the Green-function variance"}, &check_mc_variance},
      {{"6b", "transient", "mean belief conserved for constant stubbornness"}, &check_mean_conservation},
      {{"6c", "transient", "phi(p,t) = 1/2 for t > 0 with alpha = (p+1)^2/4"}, &check_phi_half},
      {{"7", "transient", "Laplace self-consistency"}, &check_laplace},
      {{"8", "transient", "relaxation to stationarity at t = 10/w"}, &check_relaxation},
      {{"9a", "stationary", "operator preserves the personality marginal"}, &check_marginal_preservation},
      {{"9b", "stationary", "fixed-point residual within twice the tolerance"}, &check_fixed_point_residual},
      {{"9c", "mcsim", "O(U) interaction path equals the pairwise sum"}, &check_fast_path},
      {{"9d", "mcsim", "simulation output is deterministic"}, &check_determinism},
      {{"9e", "mcsim", "long-run law independent of the initial condition"}, &check_ergodicity},
  };
  return entries;
}

}  // namespace

const std::vector<CheckInfo>& validation_checks() {
  static const std::vector<CheckInfo> infos = [] {
    std::vector<CheckInfo> out;
    for (const auto& e : registry()) out.push_back(e.info);
    return out;
  }();
  return infos;
}

std::vector<CheckResult> run_validation(const ValidationOptions& options,
                                        const std::function<void(const CheckResult&)>& on_result) {
  std::vector<CheckResult> results;
  for (const auto& entry : registry()) {
    const bool filtered = !options.groups.empty() || !options.ids.empty();
    if (filtered && !options.groups.contains(entry.info.group) && !options.ids.contains(entry.info.id)) continue;
    CheckResult r;
    r.id = entry.info.id;
    r.group = entry.info.group;
    r.title = entry.info.title;
    const auto start = std::chrono::steady_clock::now();
    try {
      const Outcome o = entry.fn(options.scale);
      r.passed = o.passed;
      r.detail = o.detail;
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = fmt::format("threw: {}", e.what());
    }
    r.seconds = seconds_since(start);
    if (on_result) on_result(r);
    results.push_back(std::move(r));
  }
  return results;
}

std::string format_result(const CheckResult& r) {
  return fmt::format("{}  {:<17} {}: {} [{:.2f} s]", r.passed ? "PASS" : "FAIL", r.id, r.title, r.detail, r.seconds);
}

}  // namespace beliefdyn
