#include <cmath>

#include <gtest/gtest.h>

#include "beliefdyn/errors.hpp"
#include "beliefdyn/model.hpp"
#include "beliefdyn/stationary.hpp"
#include "beliefdyn/transient.hpp"

using namespace beliefdyn;

namespace {

ScenarioSpec preset(const std::string& name, const std::map<std::string, std::string>& params = {}) {
  return make_preset(name, params).spec;
}

Errc error_code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Unsupported;
}

}  // namespace

// alpha = (p+1)^2/4, zeta = 1, u = p, rho0 = 1/2 from a point mass at u:
// averaging the slice-mean equation over rho0 gives phi' = -int rho0 alpha (phi - u) dp,
// whose solution from phi(0) = 0 is phi(t) = (1 - exp(-t/3)) / 2.
TEST(Volterra, ProximityConstantKernelMatchesAnalyticPath) {
  const ScenarioSpec s = preset("proximity", {{"n", "0"}});
  const Grid g = make_grid(s, 201, 101);
  const auto sol = solve_transient(s, g, InitialCondition::prejudice(), {6.0, 0.01});
  for (const double t : {0.5, 1.0, 3.0, 6.0}) {
    for (const std::size_t i : {0ul, 100ul, 200ul}) {
      EXPECT_NEAR(sol.path.at(i, t), 0.5 * -std::expm1(-t / 3.0), 1e-4) << t;
    }
  }
}

// Event-driven constant kernel: averaging over rho0 gives phi' = -alpha phi, phi(0) = 1.
// Tolerance covers the O(dt^2) trapezoid error of the march.
TEST(Volterra, EventDrivenMeanDecaysAtStubbornnessRate) {
  const ScenarioPreset pr = make_preset("event-driven", {{"influence", "constant"}});
  const Grid g = make_grid(pr.spec, 101, 101);
  const auto sol = solve_transient(pr.spec, g, pr.initial, {20.0, 0.01});
  EXPECT_NEAR(sol.path.at(50, 0.0), 1.0, 1e-12);
  for (const double t : {1.0, 10.0, 20.0}) EXPECT_NEAR(sol.path.at(50, t), std::exp(-0.1 * t), 1e-4);
}

TEST(Volterra, MeanBeliefConservedForConstantStubbornness) {
  const ScenarioSpec s = preset("homogeneous", {{"alpha", "0.2"}});
  const Grid g = make_grid(s, 101, 101);
  const auto sol = solve_transient(s, g, InitialCondition::gaussian(0.3, 0.01), {10.0, 0.02});
  double ubar = 0.0;
  for (std::size_t i = 0; i < g.p.size(); ++i) ubar += g.p.weights[i] * sol.rho0[i] * sol.u[i];
  // Mean belief relaxes from 0.3 toward ubar = 0 at the stubbornness rate, up to
  // the O(dt^2) trapezoid error.
  for (Eigen::Index k = 0; k < sol.m.cols(); k += 50) {
    double mbar = 0.0;
    for (std::size_t i = 0; i < g.p.size(); ++i) mbar += g.p.weights[i] * sol.rho0[i] * sol.m(static_cast<Eigen::Index>(i), k);
    const double t = sol.path.t[static_cast<std::size_t>(k)];
    EXPECT_NEAR(mbar, ubar + (0.3 - ubar) * std::exp(-0.2 * t), 5e-5);
  }
}

TEST(Volterra, StepHalvingShowsSecondOrder) {
  const ScenarioSpec s = preset("proximity", {{"n", "2"}});
  const Grid g = make_grid(s, 41, 31);
  auto phi_end = [&](double dt) {
    const auto sol = solve_transient(s, g, InitialCondition::prejudice(), {2.0, dt});
    return sol.path.phi.col(sol.path.phi.cols() - 1).eval();
  };
  const auto a = phi_end(0.04), b = phi_end(0.02), c = phi_end(0.01);
  const double ratio = (a - b).cwiseAbs().maxCoeff() / (b - c).cwiseAbs().maxCoeff();
  EXPECT_NEAR(ratio, 4.0, 0.5);
}

TEST(Volterra, StepAdjustedToDivideHorizon) {
  const ScenarioSpec s = preset("homogeneous");
  const Grid g = make_grid(s, 11, 11);
  const auto sol = solve_transient(s, g, InitialCondition::prejudice(), {1.0, 0.3});
  ASSERT_EQ(sol.path.t.size(), 5u);
  EXPECT_DOUBLE_EQ(sol.path.t_final(), 1.0);
  EXPECT_NEAR(sol.path.t[1], 0.25, 1e-15);
}

TEST(Volterra, RejectsLargeStepAndBeliefDependentInfluence) {
  const ScenarioSpec s = preset("homogeneous");
  const Grid g = make_grid(s, 11, 11);
  EXPECT_EQ(error_code_of([&] { solve_transient(s, g, InitialCondition::prejudice(), {10.0, 0.6}); }),
            Errc::StepTooLarge);
  const ScenarioSpec r = preset("bounded-rect");
  const Grid gr = make_grid(r, 11, 11);
  EXPECT_EQ(error_code_of([&] { solve_transient(r, gr, InitialCondition::prejudice(), {1.0, 0.01}); }),
            Errc::BeliefDependentZeta);
}

TEST(Volterra, DefaultsFromRates) {
  const ScenarioSpec s = preset("independent", {{"alpha", "0.25"}});
  const Axis p = Axis::uniform(-1.0, 1.0, 11);
  EXPECT_DOUBLE_EQ(default_transient_t_final(s, p), 80.0);
  EXPECT_DOUBLE_EQ(default_transient_dt(s, p), 0.04);
}

TEST(Green, ZeroInteractionMeanGivesOrnsteinUhlenbeckMoments) {
  const ScenarioSpec s = preset("independent", {{"alpha", "0.5"}, {"sigma2", "0.02"}});
  PhiPath path;
  path.p = Axis::uniform(-1.0, 1.0, 5);
  for (int k = 0; k <= 100; ++k) path.t.push_back(0.05 * k);
  path.phi = Eigen::MatrixXd::Zero(5, 101);
  for (const double t : {0.0, 0.73, 5.0}) {
    const MeanVar mv = green_mean_var(s, 0.4, 1.0, path, t);
    EXPECT_NEAR(mv.mean, 1.0 * std::exp(-0.5 * t) + 0.4 * -std::expm1(-0.5 * t), 1e-14);
    EXPECT_NEAR(mv.variance, 0.02 * -std::expm1(-t) / 1.0, 1e-14);
  }
  EXPECT_EQ(error_code_of([&] { green_mean_var(s, 0.4, 1.0, path, 5.5); }), Errc::TimeOutOfRange);
}

TEST(Density, PointMassStartIsCellAveragedWithUnitMass) {
  const ScenarioSpec s = preset("homogeneous");
  const Grid g = make_grid(s, 21, 201);
  const auto sol = solve_transient(s, g, InitialCondition::prejudice(), {1.0, 0.01});
  for (const double t : {0.0, 1e-4, 0.5}) EXPECT_NEAR(total_mass(density_at(sol, t, g)), 1.0, 1e-6) << t;
}

TEST(Density, RelaxesToStationaryForAbsStubbornness) {
  const ScenarioSpec s = preset("inhomogeneous", {{"shape", "abs"}, {"n", "0"}});
  const Grid g = make_grid(s, 101, 201);
  const auto sol = solve_transient(s, g, InitialCondition::prejudice(), {10.0, 0.01});
  const DensityField stat = gaussian_density(closed_form_product(s, g), g);
  EXPECT_LT(l1_distance(density_at(sol, 10.0, g), stat), 1e-2);
}

TEST(Laplace, PiecewiseLinearTransformIsExactForLinearFunctions) {
  std::vector<double> t, f;
  for (int k = 0; k <= 37; ++k) {
    t.push_back(0.1 * k + 0.001 * k * k);
    f.push_back(2.0 * t.back() + 1.0);
  }
  const double T = t.back();
  for (const double s : {0.3, 1.0, 4.0}) {
    const double exact = 2.0 * (1.0 - std::exp(-s * T) * (1.0 + s * T)) / (s * s) + (1.0 - std::exp(-s * T)) / s;
    EXPECT_NEAR(laplace_piecewise_linear(t, f, s), exact, 1e-13);
  }
}

TEST(Laplace, I2ForConstantKernel) {
  const ScenarioSpec s = preset("homogeneous", {{"alpha", "0.3"}});
  const Axis p = Axis::uniform(-1.0, 1.0, 101);
  for (const double sv : {0.5, 2.0}) EXPECT_NEAR(laplace_I2(s, sv, p), 0.7 / (sv + 1.0), 1e-13);
  EXPECT_EQ(error_code_of([&] { laplace_I2(s, -1.0, p); }), Errc::PoleOnPath);
}

TEST(Laplace, SelfConsistencyResidualSmall) {
  const ScenarioSpec s = preset("proximity", {{"n", "0"}});
  const Grid g = make_grid(s, 101, 51);
  const auto sol = solve_transient(s, g, InitialCondition::prejudice(), {60.0, 0.01});
  for (const auto& r : laplace_consistency_check(s, sol, {0.5, 1.0})) EXPECT_LT(r.relative, 1e-4) << r.s;
}

TEST(Laplace, SymmetricPresetReportsZeroResidual) {
  const ScenarioSpec s = preset("homogeneous");
  const Grid g = make_grid(s, 41, 51);
  const auto sol = solve_transient(s, g, InitialCondition::prejudice(), {30.0, 0.01});
  for (const auto& r : laplace_consistency_check(s, sol, {1.0})) EXPECT_EQ(r.relative, 0.0);
}

TEST(Laplace, ShortPathRejected) {
  const ScenarioSpec s = preset("homogeneous");
  const Grid g = make_grid(s, 11, 11);
  const auto sol = solve_transient(s, g, InitialCondition::prejudice(), {2.0, 0.01});
  EXPECT_EQ(error_code_of([&] { laplace_consistency_check(s, sol, {1.0}); }), Errc::PathTooShort);
}
