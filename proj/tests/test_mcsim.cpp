#include <cmath>
#include <numeric>

#include <gtest/gtest.h>
#include <omp.h>

#include "beliefdyn/errors.hpp"
#include "beliefdyn/mcsim.hpp"
#include "beliefdyn/model.hpp"
#include "beliefdyn/stationary.hpp"

using namespace beliefdyn;

namespace {

ScenarioSpec preset(const std::string& name, const std::map<std::string, std::string>& params = {}) {
  return make_preset(name, params).spec;
}

}  // namespace

TEST(CounterRng, PureFunctionOfSeedStreamCounter) {
  const CounterRng a(5), b(5), c(6);
  EXPECT_EQ(a.uniform(3, 17), b.uniform(3, 17));
  EXPECT_NE(a.uniform(3, 17), c.uniform(3, 17));
  EXPECT_NE(a.uniform(3, 17), a.uniform(4, 17));
  EXPECT_NE(a.uniform(3, 17), a.uniform(3, 18));
}

TEST(CounterRng, UniformAndNormalMoments) {
  const CounterRng rng(11);
  const int n = 200000;
  double su = 0.0, sn = 0.0, sn2 = 0.0;
  double umin = 1.0;
  for (int k = 0; k < n; ++k) {
    const double u = rng.uniform(1, static_cast<std::uint64_t>(k));
    umin = std::min(umin, u);
    su += u;
    const double z = rng.normal(2, static_cast<std::uint64_t>(k));
    sn += z;
    sn2 += z * z;
  }
  EXPECT_GT(umin, 0.0);
  EXPECT_NEAR(su / n, 0.5, 5.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sn / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(sn2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Ensemble, PrejudiceStartAndPersonalitiesInDomain) {
  const ScenarioSpec s = preset("homogeneous");
  const AgentEnsemble e = init_ensemble(s, 500, 3, InitialCondition::prejudice());
  ASSERT_EQ(e.size(), 500u);
  for (std::size_t i = 0; i < e.size(); ++i) {
    EXPECT_TRUE(s.personality.contains(e.personality[i]));
    EXPECT_DOUBLE_EQ(e.belief[i], e.personality[i]);
  }
}

TEST(Ensemble, StratifiedSamplingPlacesOneAgentPerStratum) {
  const ScenarioSpec s = preset("homogeneous");
  const AgentEnsemble e = init_ensemble(s, 100, 3, InitialCondition::prejudice(), PersonalitySampling::Stratified);
  std::vector<int> count(100, 0);
  for (const double p : e.personality) ++count[std::min<std::size_t>(99, static_cast<std::size_t>((p + 1.0) * 50.0))];
  for (const int c : count) EXPECT_EQ(c, 1);
}

TEST(Ensemble, GaussianStartMoments) {
  const ScenarioSpec s = preset("homogeneous");
  const AgentEnsemble e = init_ensemble(s, 20000, 9, InitialCondition::gaussian(1.0, 1e-4));
  const double mean = std::accumulate(e.belief.begin(), e.belief.end(), 0.0) / 20000.0;
  double var = 0.0;
  for (const double x : e.belief) var += (x - mean) * (x - mean);
  var /= 20000.0;
  EXPECT_NEAR(mean, 1.0, 5e-4);
  EXPECT_NEAR(var, 1e-4, 5e-6);
}

TEST(Drift, ConstantKernelMatchesMeanFieldFormula) {
  const ScenarioSpec s = preset("homogeneous", {{"alpha", "0.3"}});
  const AgentEnsemble e = init_ensemble(s, 50, 1, InitialCondition::gaussian(0.2, 0.1));
  const double mean = std::accumulate(e.belief.begin(), e.belief.end(), 0.0) / 50.0;
  const auto d = agent_drift(e);
  for (std::size_t i = 0; i < e.size(); ++i) {
    EXPECT_NEAR(d[i], 0.7 * (mean - e.belief[i]) + 0.3 * (e.personality[i] - e.belief[i]), 1e-13);
  }
}

TEST(Drift, FastPathsMatchPairwiseSum) {
  for (const ScenarioSpec& s : {preset("inhomogeneous", {{"shape", "abs"}, {"n", "8"}}),
                                preset("community", {{"kappa", "0.5"}}), preset("bounded-rect", {{"alpha", "0.3"}}),
                                preset("proximity", {{"n", "4"}})}) {
    const AgentEnsemble e = init_ensemble(s, 200, 4, InitialCondition::gaussian(0.0, 0.3));
    const auto a = agent_drift(e, InteractionPath::Auto);
    const auto b = agent_drift(e, InteractionPath::Pairwise);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12) << s.name;
  }
}

TEST(Step, DeterministicAcrossThreadCounts) {
  const ScenarioSpec s = preset("bounded-rect", {{"alpha", "0.3"}});
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    AgentEnsemble e = init_ensemble(s, 150, 21, InitialCondition::prejudice());
    for (int k = 0; k < 40; ++k) mc_step(e, 0.01);
    return e.belief;
  };
  const auto one = run(1);
  const auto four = run(4);
  omp_set_num_threads(1);
  EXPECT_EQ(one, four);
}

TEST(Step, SteppedCopyLeavesInputUntouched) {
  const ScenarioSpec s = preset("homogeneous");
  const AgentEnsemble e = init_ensemble(s, 20, 2, InitialCondition::prejudice());
  const AgentEnsemble f = mc_stepped(e, 0.01);
  EXPECT_EQ(e.steps, 0u);
  EXPECT_EQ(f.steps, 1u);
  EXPECT_DOUBLE_EQ(f.time, 0.01);
  EXPECT_NE(e.belief, f.belief);
}

TEST(Step, RejectsUnstableStep) {
  const ScenarioSpec s = preset("homogeneous");
  AgentEnsemble e = init_ensemble(s, 10, 2, InitialCondition::prejudice());
  try {
    mc_step(e, 0.4);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), Errc::StepTooLarge);
  }
}

TEST(Step, ReflectingBoundariesKeepCompactDomain) {
  const ScenarioSpec s = preset("bounded-rect", {{"domain", "compact"}, {"sigma2", "0.5"}, {"alpha", "0.1"}});
  AgentEnsemble e = init_ensemble(s, 300, 8, InitialCondition::prejudice());
  for (int k = 0; k < 500; ++k) {
    mc_step(e, 0.01);
    for (const double x : e.belief) ASSERT_TRUE(x >= -1.0 && x <= 1.0) << x;
  }
}

TEST(Step, IndependentAgentsMatchOrnsteinUhlenbeckVariance) {
  const ScenarioSpec s = preset("independent", {{"alpha", "0.5"}, {"sigma2", "0.01"}});
  AgentEnsemble e = init_ensemble(s, 5000, 13, InitialCondition::prejudice());
  for (int k = 0; k < 1000; ++k) mc_step(e, 1e-3);
  double var = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) var += std::pow(e.belief[i] - e.prejudice[i], 2);
  var /= static_cast<double>(e.size());
  EXPECT_NEAR(var / (0.01 * -std::expm1(-1.0)), 1.0, 0.1);
}

TEST(Histogram, SingleBinAndUniformSpread) {
  const ScenarioSpec s = preset("homogeneous");
  AgentEnsemble e = init_ensemble(s, 1000, 1, InitialCondition::prejudice(), PersonalitySampling::Stratified);
  std::fill(e.belief.begin(), e.belief.end(), 0.01);
  const auto one = empirical_density(e, HistogramSpec::uniform({-1, 1}, 1, {-1, 1}, 4));
  EXPECT_DOUBLE_EQ(one.at(0, 2), 1.0);
  e.belief = e.personality;
  const auto spread = empirical_density(e, HistogramSpec::uniform({-1, 1}, 1, {-1, 1}, 4));
  for (const double m : spread.mass) EXPECT_NEAR(m, 0.25, 1e-12);
}

TEST(Histogram, OutliersClampedIntoEdgeBins) {
  const ScenarioSpec s = preset("homogeneous");
  AgentEnsemble e = init_ensemble(s, 4, 1, InitialCondition::prejudice());
  e.belief = {-9.0, 9.0, 9.0, 0.1};
  const auto h = empirical_density(e, HistogramSpec::uniform({-1, 1}, 1, {-1, 1}, 2));
  EXPECT_DOUBLE_EQ(h.at(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(h.at(0, 1), 0.75);
}

TEST(Histogram, OfDensityIntegratesInterpolantExactly) {
  // rho = 1/4 on [-1,1]^2 except a linear ramp in x: bin masses are exact.
  Grid g{Axis::uniform(-1, 1, 5), Axis::uniform(-1, 1, 9)};
  DensityField f(g);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 9; ++j) f.at(i, j) = 0.25 * (1.0 + 0.5 * g.x.nodes[j]);
  }
  const auto h = histogram_of_density(f, HistogramSpec::uniform({-1, 1}, 1, {-1, 1}, 3));
  // int over p (length 2) of 0.25 (1 + x/2) on each third of [-1,1].
  auto exact = [](double a, double b) { return 0.5 * ((b - a) + 0.25 * (b * b - a * a)); };
  EXPECT_NEAR(h.at(0, 0), exact(-1, -1.0 / 3.0), 1e-14);
  EXPECT_NEAR(h.at(0, 1), exact(-1.0 / 3.0, 1.0 / 3.0), 1e-14);
  EXPECT_NEAR(h.at(0, 2), exact(1.0 / 3.0, 1.0), 1e-14);
  EXPECT_NEAR(std::accumulate(h.mass.begin(), h.mass.end(), 0.0), 1.0, 1e-14);
}

TEST(Histogram, L1RequiresMatchingBins) {
  EmpiricalHistogram a{HistogramSpec::uniform({0, 1}, 1, {0, 1}, 2), {0.5, 0.5}};
  EmpiricalHistogram b{HistogramSpec::uniform({0, 1}, 1, {0, 1}, 2), {1.0, 0.0}};
  EXPECT_DOUBLE_EQ(histogram_l1(a, b), 1.0);
  EmpiricalHistogram c{HistogramSpec::uniform({0, 1}, 1, {0, 1}, 3), {1.0, 0.0, 0.0}};
  EXPECT_THROW(histogram_l1(a, c), Error);
}

TEST(Run, RecordsSummariesAndFinalHistogram) {
  const ScenarioSpec s = preset("homogeneous");
  AgentEnsemble e = init_ensemble(s, 100, 5, InitialCondition::prejudice());
  McRunOptions o;
  o.t_final = 1.0;
  o.dt = 0.01;
  o.record_every = 10;
  const auto r = mc_run(e, o);
  EXPECT_EQ(r.summary.size(), 11u);
  EXPECT_NEAR(r.summary.back().t, 1.0, 1e-12);
  EXPECT_NEAR(std::accumulate(r.final_histogram.mass.begin(), r.final_histogram.mass.end(), 0.0), 1.0, 1e-12);
  EXPECT_NEAR(std::accumulate(r.time_averaged.mass.begin(), r.time_averaged.mass.end(), 0.0), 1.0, 1e-12);
  EXPECT_EQ(e.steps, 100u);
}

TEST(DriftDiagnostic, ExtremeAgentsPulledInward) {
  const ScenarioSpec s = preset("homogeneous");
  AgentEnsemble e = init_ensemble(s, 20, 5, InitialCondition::prejudice());
  e.belief.assign(20, 0.0);
  e.belief[3] = 5.0;
  e.belief[7] = -5.0;
  const DriftDiagnostic d = drift_diagnostic(e);
  EXPECT_DOUBLE_EQ(d.max_abs_belief, 5.0);
  EXPECT_LT(d.drift_at_max, 0.0);
  EXPECT_GT(d.drift_at_min, 0.0);
}

TEST(DriftDiagnostic, SymmetricEnsembleGivesAntisymmetricDrift) {
  const ScenarioSpec s = preset("homogeneous");
  AgentEnsemble e = init_ensemble(s, 2, 5, InitialCondition::prejudice());
  e.personality = {-0.5, 0.5};
  e.prejudice = {-0.5, 0.5};
  e.belief = {-0.8, 0.8};
  const auto d = agent_drift(e);
  EXPECT_NEAR(d[0], -d[1], 1e-15);
}
