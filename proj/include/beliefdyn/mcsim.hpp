#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "beliefdyn/model.hpp"
#include "beliefdyn/numerics.hpp"

namespace beliefdyn {

/// Stateless counter-based generator: every draw is a pure function of
/// (seed, stream, counter), so agents can be stepped in any order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}
  /// Uniform on (0, 1].
  double uniform(std::uint64_t stream, std::uint64_t counter) const;
  double normal(std::uint64_t stream, std::uint64_t counter) const;

 private:
  std::uint64_t seed_;
};

enum class InteractionPath {
  Auto,      // O(U) for product form, kernel matrix when belief-independent
  Pairwise,  // literal sum over agent pairs
};

struct AgentEnsemble {
  std::shared_ptr<const ScenarioSpec> spec;
  std::vector<double> personality;
  std::vector<double> belief;
  double time = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t steps = 0;

  // Per-agent coefficients cached at initialization.
  std::vector<double> alpha;
  std::vector<double> prejudice;
  std::vector<double> factor1;
  std::vector<double> factor2;
  std::shared_ptr<const Eigen::MatrixXd> personal;  // zeta(P_i, P_j), when cached

  std::size_t size() const { return belief.size(); }
};

/// Agents whose personal-kernel matrix is cached up front.
inline constexpr std::size_t kPersonalMatrixLimit = 2000;
/// mc_step rejects dt * (sup alpha + S_zeta) at or above this.
inline constexpr double kMcStabilityLimit = 0.5;

enum class PersonalitySampling {
  Iid,         // independent inverse-CDF draws
  Stratified,  // one draw per equal-mass stratum of rho0
};

AgentEnsemble init_ensemble(const ScenarioSpec& spec, std::size_t agents, std::uint64_t seed,
                            const InitialCondition& init,
                            PersonalitySampling sampling = PersonalitySampling::Iid);

double default_mc_dt(const ScenarioSpec& spec);

/// Noise-free increment rate for every agent at the current state.
std::vector<double> agent_drift(const AgentEnsemble& ens, InteractionPath path = InteractionPath::Auto);

void mc_step(AgentEnsemble& ens, double dt, InteractionPath path = InteractionPath::Auto);
AgentEnsemble mc_stepped(const AgentEnsemble& ens, double dt, InteractionPath path = InteractionPath::Auto);

struct HistogramSpec {
  std::vector<double> p_edges;
  std::vector<double> x_edges;

  static HistogramSpec uniform(Interval p, std::size_t p_bins, Interval x, std::size_t x_bins);
  std::size_t p_bins() const { return p_edges.size() - 1; }
  std::size_t x_bins() const { return x_edges.size() - 1; }
};

/// Normalized 2-D histogram over (p, x); mass is row-major in p bins.
struct EmpiricalHistogram {
  HistogramSpec bins;
  std::vector<double> mass;

  double at(std::size_t pb, std::size_t xb) const { return mass[pb * bins.x_bins() + xb]; }
  std::vector<double> x_marginal() const;
};

/// Agents outside the edges are counted in the nearest edge bin.
EmpiricalHistogram empirical_density(const AgentEnsemble& ens, const HistogramSpec& bins);
EmpiricalHistogram empirical_density(const AgentEnsemble& ens, std::size_t p_bins, std::size_t x_bins);

/// Bin masses of a density field, integrating the piecewise-linear
/// interpolant in x and assigning p nodes to bins by quadrature weight.
EmpiricalHistogram histogram_of_density(const DensityField& field, const HistogramSpec& bins);

/// Sum of absolute bin-mass differences.
double histogram_l1(const EmpiricalHistogram& a, const EmpiricalHistogram& b);

struct SummarySample {
  double t = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double max_abs = 0.0;
};

struct McRunOptions {
  double t_final = 0.0;
  double dt = 0.0;
  std::size_t record_every = 100;
  HistogramSpec bins;
  InteractionPath path = InteractionPath::Auto;
  /// Start of the window averaged into `time_averaged`, as a fraction of t_final.
  double average_from = 0.5;
};

struct McRunResult {
  std::vector<SummarySample> summary;
  std::vector<std::pair<double, EmpiricalHistogram>> snapshots;
  EmpiricalHistogram final_histogram;
  EmpiricalHistogram time_averaged;
};

McRunResult mc_run(AgentEnsemble& ens, const McRunOptions& options);

struct DriftDiagnostic {
  double max_abs_belief = 0.0;
  double max_belief = 0.0;
  double min_belief = 0.0;
  double drift_at_max = 0.0;
  double drift_at_min = 0.0;
};

DriftDiagnostic drift_diagnostic(const AgentEnsemble& ens);

}  // namespace beliefdyn
