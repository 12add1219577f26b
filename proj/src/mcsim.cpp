#include "beliefdyn/mcsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "beliefdyn/errors.hpp"

namespace beliefdyn {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30U)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27U)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31U);
}

// Counters at and above this offset are reserved for initialization draws.
constexpr std::uint64_t kInitCounter = 1ULL << 63U;

double reflect(double x, double lo, double hi) {
  const double len = hi - lo;
  double y = std::fmod(x - lo, 2.0 * len);
  if (y < 0.0) y += 2.0 * len;
  if (y > len) y = 2.0 * len - y;
  return std::clamp(lo + y, lo, hi);
}

std::size_t bin_index(const std::vector<double>& edges, double v) {
  const std::size_t bins = edges.size() - 1;
  if (v <= edges.front()) return 0;
  if (v >= edges.back()) return bins - 1;
  const auto it = std::upper_bound(edges.begin(), edges.end(), v);
  return std::min(static_cast<std::size_t>(it - edges.begin()) - 1, bins - 1);
}

double sup_alpha(const AgentEnsemble& ens) {
  return ens.alpha.empty() ? 0.0 : *std::max_element(ens.alpha.begin(), ens.alpha.end());
}

// 1 / (1 + (d / r)^64) with six squarings; |d| is implied by the even power.
inline double rect64(double d, double inv_r) {
  double y = d * inv_r;
  y *= y;
  y *= y;
  y *= y;
  y *= y;
  y *= y;
  y *= y;
  return 1.0 / (1.0 + y);
}

}  // namespace

double CounterRng::uniform(std::uint64_t stream, std::uint64_t counter) const {
  const std::uint64_t z = splitmix64(splitmix64(seed_ ^ splitmix64(stream)) ^ counter);
  return (static_cast<double>(z >> 11U) + 1.0) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t stream, std::uint64_t counter) const {
  const double u1 = uniform(stream, 2 * counter);
  const double u2 = uniform(stream, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

AgentEnsemble init_ensemble(const ScenarioSpec& spec, std::size_t agents, std::uint64_t seed,
                            const InitialCondition& init, PersonalitySampling sampling) {
  if (agents < 2) throw Error(Errc::InvalidConfig, "an ensemble needs at least two agents");
  AgentEnsemble ens;
  ens.spec = std::make_shared<const ScenarioSpec>(spec);
  ens.seed = seed;
  const CounterRng rng(seed);

  // Inverse CDF of rho0 on a fine personality grid.
  const Axis fine = Axis::uniform(spec.personality.lo, spec.personality.hi, 4001);
  std::vector<double> cdf(fine.size(), 0.0);
  for (std::size_t k = 1; k < fine.size(); ++k) {
    const double h = fine.nodes[k] - fine.nodes[k - 1];
    cdf[k] = cdf[k - 1] + 0.5 * h * (spec.rho0(fine.nodes[k - 1]) + spec.rho0(fine.nodes[k]));
  }
  const double total = cdf.back();
  for (double& c : cdf) c /= total;

  ens.personality.resize(agents);
  ens.belief.resize(agents);
  for (std::size_t i = 0; i < agents; ++i) {
    double v = rng.uniform(i, kInitCounter);
    if (sampling == PersonalitySampling::Stratified) {
      v = (static_cast<double>(i) + v) / static_cast<double>(agents);
    }
    auto it = std::lower_bound(cdf.begin(), cdf.end(), v);
    std::size_t hi = std::clamp<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), 1, cdf.size() - 1);
    const double span = cdf[hi] - cdf[hi - 1];
    const double frac = span > 0.0 ? (v - cdf[hi - 1]) / span : 0.5;
    const double p = fine.nodes[hi - 1] + frac * (fine.nodes[hi] - fine.nodes[hi - 1]);
    ens.personality[i] = p;
    if (init.kind == InitialCondition::Kind::Prejudice) {
      ens.belief[i] = spec.prejudice(p);
    } else {
      ens.belief[i] = init.mean + std::sqrt(init.variance) * rng.normal(i, kInitCounter / 2 + 1);
    }
    if (const auto* c = std::get_if<CompactInterval>(&spec.belief)) {
      ens.belief[i] = reflect(ens.belief[i], c->lo, c->hi);
    }
  }

  ens.alpha.resize(agents);
  ens.prejudice.resize(agents);
  for (std::size_t i = 0; i < agents; ++i) {
    ens.alpha[i] = spec.alpha(ens.personality[i]);
    ens.prejudice[i] = spec.prejudice(ens.personality[i]);
  }
  if (const auto factors = spec.zeta.factors(); factors && spec.zeta.belief_independent()) {
    ens.factor1.resize(agents);
    ens.factor2.resize(agents);
    for (std::size_t i = 0; i < agents; ++i) {
      ens.factor1[i] = factors->first(ens.personality[i]);
      ens.factor2[i] = factors->second(ens.personality[i]);
    }
  }
  if (!spec.zeta.personal_is_constant() && agents <= kPersonalMatrixLimit) {
    auto m = std::make_shared<Eigen::MatrixXd>(agents, agents);
    for (std::size_t i = 0; i < agents; ++i) {
      for (std::size_t j = 0; j < agents; ++j) {
        (*m)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            spec.zeta.personal_value(ens.personality[i], ens.personality[j]);
      }
    }
    ens.personal = std::move(m);
  }
  return ens;
}

double default_mc_dt(const ScenarioSpec& spec) { return 1e-3 / std::max(1.0, spec.zeta.bound); }

std::vector<double> agent_drift(const AgentEnsemble& ens, InteractionPath path) {
  const ScenarioSpec& spec = *ens.spec;
  const std::size_t n = ens.size();
  const auto& x = ens.belief;
  std::vector<double> social(n, 0.0);
  const Influence& zeta = spec.zeta;

  if (zeta.vanishes()) {
    // No interaction term.
  } else if (path == InteractionPath::Auto && zeta.belief_independent() && !ens.factor1.empty()) {
    double s0 = 0.0;
    double s1 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      s0 += ens.factor2[j];
      s1 += ens.factor2[j] * x[j];
    }
    for (std::size_t i = 0; i < n; ++i) social[i] = ens.factor1[i] * (s1 - s0 * x[i]);
  } else if (path == InteractionPath::Auto && zeta.belief_independent() && ens.personal) {
    const Eigen::MatrixXd& m = *ens.personal;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      double mass = 0.0;
      double moment = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double z = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        mass += z;
        moment += z * x[j];
      }
      social[i] = moment - mass * x[i];
    }
  } else {
    const auto* rect = zeta.distance ? std::get_if<SmoothRectKernel>(&*zeta.distance) : nullptr;
    const bool fast_rect = rect != nullptr && rect->exponent == 64.0 && zeta.personal_is_constant();
    const double scale = zeta.personal_is_constant() ? zeta.personal_value(0.0, 0.0) : 1.0;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      const double xi = x[i];
      if (fast_rect) {
        const double inv_r = 1.0 / rect->radius;
        for (std::size_t j = 0; j < n; ++j) {
          const double d = x[j] - xi;
          sum += rect64(d, inv_r) * d;
        }
        sum *= scale;
      } else if (ens.personal) {
        const Eigen::MatrixXd& m = *ens.personal;
        for (std::size_t j = 0; j < n; ++j) {
          const double d = x[j] - xi;
          sum += zeta.distance_value(std::abs(d)) * m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * d;
        }
      } else {
        const double pi = ens.personality[i];
        for (std::size_t j = 0; j < n; ++j) {
          const double d = x[j] - xi;
          sum += zeta(std::abs(d), pi, ens.personality[j]) * d;
        }
      }
      social[i] = sum;
    }
  }

  std::vector<double> drift(n);
  const double inv_u = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    drift[i] = (1.0 - ens.alpha[i]) * inv_u * social[i] + ens.alpha[i] * (ens.prejudice[i] - x[i]);
  }
  return drift;
}

void mc_step(AgentEnsemble& ens, double dt, InteractionPath path) {
  if (!(dt > 0.0)) throw Error(Errc::InvalidConfig, "time step must be positive");
  const double rate = dt * (sup_alpha(ens) + ens.spec->zeta.bound);
  if (rate >= kMcStabilityLimit) {
    throw Error(Errc::StepTooLarge,
                fmt::format("dt * (sup alpha + S_zeta) = {:.4g} must stay below {}", rate, kMcStabilityLimit));
  }
  const std::vector<double> drift = agent_drift(ens, path);
  const CounterRng rng(ens.seed);
  const double noise = std::sqrt(ens.spec->sigma2 * dt);
  const auto* compact = std::get_if<CompactInterval>(&ens.spec->belief);
  const std::size_t n = ens.size();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    double next = ens.belief[i] + drift[i] * dt + noise * rng.normal(i, ens.steps);
    if (compact != nullptr) next = reflect(next, compact->lo, compact->hi);
    ens.belief[i] = next;
  }
  ++ens.steps;
  ens.time = static_cast<double>(ens.steps) * dt;
}

AgentEnsemble mc_stepped(const AgentEnsemble& ens, double dt, InteractionPath path) {
  AgentEnsemble out = ens;
  mc_step(out, dt, path);
  return out;
}

HistogramSpec HistogramSpec::uniform(Interval p, std::size_t p_bins, Interval x, std::size_t x_bins) {
  if (p_bins < 1 || x_bins < 1) throw Error(Errc::InvalidConfig, "histograms need at least one bin per axis");
  HistogramSpec spec;
  for (std::size_t k = 0; k <= p_bins; ++k) {
    spec.p_edges.push_back(p.lo + p.length() * static_cast<double>(k) / static_cast<double>(p_bins));
  }
  for (std::size_t k = 0; k <= x_bins; ++k) {
    spec.x_edges.push_back(x.lo + x.length() * static_cast<double>(k) / static_cast<double>(x_bins));
  }
  return spec;
}

std::vector<double> EmpiricalHistogram::x_marginal() const {
  std::vector<double> out(bins.x_bins(), 0.0);
  for (std::size_t pb = 0; pb < bins.p_bins(); ++pb) {
    for (std::size_t xb = 0; xb < bins.x_bins(); ++xb) out[xb] += at(pb, xb);
  }
  return out;
}

EmpiricalHistogram empirical_density(const AgentEnsemble& ens, const HistogramSpec& bins) {
  EmpiricalHistogram h;
  h.bins = bins;
  h.mass.assign(bins.p_bins() * bins.x_bins(), 0.0);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const std::size_t pb = bin_index(bins.p_edges, ens.personality[i]);
    const std::size_t xb = bin_index(bins.x_edges, ens.belief[i]);
    h.mass[pb * bins.x_bins() + xb] += 1.0;
  }
  for (double& m : h.mass) m /= static_cast<double>(ens.size());
  return h;
}

EmpiricalHistogram empirical_density(const AgentEnsemble& ens, std::size_t p_bins, std::size_t x_bins) {
  const ScenarioSpec& spec = *ens.spec;
  const Axis axis = Axis::uniform(spec.personality.lo, spec.personality.hi, kValidationNodes);
  return empirical_density(ens, HistogramSpec::uniform(spec.personality, p_bins, belief_range(spec, axis), x_bins));
}

EmpiricalHistogram histogram_of_density(const DensityField& field, const HistogramSpec& bins) {
  EmpiricalHistogram h;
  h.bins = bins;
  h.mass.assign(bins.p_bins() * bins.x_bins(), 0.0);
  const Grid& g = field.grid();
  const auto& xs = g.x.nodes;
  const auto& edges = bins.x_edges;
  for (std::size_t i = 0; i < field.np(); ++i) {
    const auto row = field.row(i);
    const std::size_t pb = bin_index(bins.p_edges, g.p.nodes[i]);
    double* out = &h.mass[pb * bins.x_bins()];
    for (std::size_t j = 0; j + 1 < field.nx(); ++j) {
      const double a = xs[j];
      const double b = xs[j + 1];
      const double slope = (row[j + 1] - row[j]) / (b - a);
      for (std::size_t xb = 0; xb < bins.x_bins(); ++xb) {
        const double lo = std::max(a, edges[xb]);
        const double hi = std::min(b, edges[xb + 1]);
        if (!(hi > lo)) continue;
        const double f_lo = row[j] + slope * (lo - a);
        const double f_hi = row[j] + slope * (hi - a);
        out[xb] += g.p.weights[i] * 0.5 * (f_lo + f_hi) * (hi - lo);
      }
    }
  }
  double total = 0.0;
  for (const double m : h.mass) total += m;
  if (total > 0.0) {
    for (double& m : h.mass) m /= total;
  }
  return h;
}

double histogram_l1(const EmpiricalHistogram& a, const EmpiricalHistogram& b) {
  if (a.mass.size() != b.mass.size()) throw Error(Errc::GridMismatch, "histograms use different bins");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.mass.size(); ++k) sum += std::abs(a.mass[k] - b.mass[k]);
  return sum;
}

namespace {

SummarySample summarize(const AgentEnsemble& ens) {
  SummarySample s;
  s.t = ens.time;
  const auto n = static_cast<double>(ens.size());
  for (const double x : ens.belief) {
    s.mean += x;
    s.max_abs = std::max(s.max_abs, std::abs(x));
  }
  s.mean /= n;
  for (const double x : ens.belief) s.variance += (x - s.mean) * (x - s.mean);
  s.variance /= n;
  return s;
}

}  // namespace

McRunResult mc_run(AgentEnsemble& ens, const McRunOptions& options) {
  if (!(options.t_final > 0.0)) throw Error(Errc::InvalidConfig, "t_final must be positive");
  const double dt = options.dt > 0.0 ? options.dt : default_mc_dt(*ens.spec);
  const std::size_t record_every = std::max<std::size_t>(options.record_every, 1);
  HistogramSpec bins = options.bins;
  if (bins.p_edges.size() < 2 || bins.x_edges.size() < 2) {
    const ScenarioSpec& spec = *ens.spec;
    const Axis axis = Axis::uniform(spec.personality.lo, spec.personality.hi, kValidationNodes);
    bins = HistogramSpec::uniform(spec.personality, 10, belief_range(spec, axis), 40);
  }
  const auto steps = static_cast<std::size_t>(std::llround(options.t_final / dt));

  McRunResult result;
  result.time_averaged.bins = bins;
  result.time_averaged.mass.assign(bins.p_bins() * bins.x_bins(), 0.0);
  std::size_t averaged = 0;
  const double average_from = options.average_from * options.t_final;
  auto record = [&] {
    result.summary.push_back(summarize(ens));
    EmpiricalHistogram h = empirical_density(ens, bins);
    if (ens.time >= average_from - 1e-9 * options.t_final) {
      for (std::size_t k = 0; k < h.mass.size(); ++k) result.time_averaged.mass[k] += h.mass[k];
      ++averaged;
    }
    result.snapshots.emplace_back(ens.time, std::move(h));
  };

  record();
  for (std::size_t k = 1; k <= steps; ++k) {
    mc_step(ens, dt, options.path);
    if (k % record_every == 0 || k == steps) record();
  }
  result.final_histogram = result.snapshots.back().second;
  if (averaged == 0) {
    result.time_averaged = result.final_histogram;
  } else {
    for (double& m : result.time_averaged.mass) m /= static_cast<double>(averaged);
  }
  return result;
}

DriftDiagnostic drift_diagnostic(const AgentEnsemble& ens) {
  DriftDiagnostic d;
  const auto [lo, hi] = std::minmax_element(ens.belief.begin(), ens.belief.end());
  const auto drift = agent_drift(ens);
  d.max_belief = *hi;
  d.min_belief = *lo;
  d.max_abs_belief = std::max(std::abs(*lo), std::abs(*hi));
  d.drift_at_max = drift[static_cast<std::size_t>(hi - ens.belief.begin())];
  d.drift_at_min = drift[static_cast<std::size_t>(lo - ens.belief.begin())];
  return d;
}

}  // namespace beliefdyn
