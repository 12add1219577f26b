#include <cmath>

#include <gtest/gtest.h>

#include "beliefdyn/errors.hpp"
#include "beliefdyn/model.hpp"

using namespace beliefdyn;

namespace {

Errc error_code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Unsupported;
}

ScenarioSpec homogeneous(double alpha = 0.5) {
  return make_preset("homogeneous", {{"alpha", std::to_string(alpha)}}).spec;
}

}  // namespace

TEST(Error, MessageCarriesCodeName) {
  const Error e(Errc::StepTooLarge, "dt too big");
  EXPECT_EQ(e.code(), Errc::StepTooLarge);
  EXPECT_EQ(std::string(e.what()), "StepTooLarge: dt too big");
}

TEST(Coefficient, TabulatedIsPiecewiseLinearAndClamped) {
  const Coefficient c = Coefficient::tabulated({-1.0, 0.0, 1.0}, {1.0, 0.0, 2.0});
  EXPECT_DOUBLE_EQ(c(-0.5), 0.5);
  EXPECT_DOUBLE_EQ(c(0.25), 0.5);
  EXPECT_DOUBLE_EQ(c(-3.0), 1.0);
  EXPECT_DOUBLE_EQ(c(3.0), 2.0);
}

TEST(SmoothRect, HalfAtRadiusAndVanishesBeyond) {
  const SmoothRectKernel k{1.0 / 3.0, 64.0};
  EXPECT_DOUBLE_EQ(k(1.0 / 3.0), 0.5);
  EXPECT_NEAR(k(0.0), 1.0, 1e-15);
  EXPECT_LT(k(0.45), 1e-8);
  EXPECT_GT(k(0.25), 1.0 - 1e-7);
}

TEST(Influence, ProductFactorsOfKernelForms) {
  Influence z;
  z.personal = ConstantPersonal{2.0};
  auto f = z.factors();
  ASSERT_TRUE(f);
  EXPECT_DOUBLE_EQ(f->first(0.3) * f->second(-0.7), 2.0);

  z.personal = ProductPersonal{Coefficient::constant(3.0), Coefficient({[](double q) { return q * q; }, "q^2"})};
  f = z.factors();
  ASSERT_TRUE(f);
  EXPECT_DOUBLE_EQ(f->first(0.1) * f->second(0.5), 0.75);

  z.personal = SimilarityPersonal{};
  EXPECT_FALSE(z.factors());
  z.distance = SmoothRectKernel{};
  z.personal = ConstantPersonal{1.0};
  EXPECT_FALSE(z.belief_independent());
  EXPECT_FALSE(z.product_form());
}

TEST(Influence, KernelValues) {
  Influence z;
  z.personal = ProximityPersonal{2.0, 5.0, 2.0};
  EXPECT_DOUBLE_EQ(z.personal_value(0.1, 0.1), 2.0);
  EXPECT_DOUBLE_EQ(z.personal_value(0.0, 0.2), 1.0);
  z.personal = CommunityPersonal{1.0};
  EXPECT_DOUBLE_EQ(z.personal_value(0.0, 0.9), 0.5);
  EXPECT_NEAR(z.personal_value(1.0, 1.0), 0.5 + 0.5 * std::erf(1.0), 1e-15);
  z.personal = SimilarityPersonal{};
  EXPECT_DOUBLE_EQ(z.personal_value(0.5, -0.5), 0.5);
  z.personal = TabulatedPersonal{{-1.0, 1.0}, {0.0, 1.0, 1.0, 2.0}};
  EXPECT_DOUBLE_EQ(z.personal_value(0.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(z.personal_value(-1.0, 1.0), 1.0);
}

TEST(Presets, CatalogBuildsEveryPresetWithDefaults) {
  for (const auto& info : preset_catalog()) {
    const ScenarioPreset p = make_preset(info.name);
    EXPECT_NO_THROW(validate_scenario(p.spec)) << info.name;
    EXPECT_FALSE(info.summary.empty());
  }
}

TEST(Presets, UnknownNameAndParameter) {
  EXPECT_EQ(error_code_of([] { make_preset("no-such"); }), Errc::UnknownPreset);
  EXPECT_EQ(error_code_of([] { make_preset("homogeneous", {{"bogus", "1"}}); }), Errc::InvalidConfig);
  EXPECT_EQ(error_code_of([] { make_preset("homogeneous", {{"alpha", "x"}}); }), Errc::InvalidConfig);
}

TEST(Presets, ProximityStubbornnessIsFlooredAtLeftEnd) {
  const ScenarioSpec s = make_preset("proximity").spec;
  EXPECT_DOUBLE_EQ(s.alpha(-1.0), kPresetAlphaFloor);
  EXPECT_DOUBLE_EQ(s.alpha(1.0), 1.0);
  EXPECT_DOUBLE_EQ(s.alpha(0.0), 0.25);
}

TEST(Presets, EventDrivenCarriesGaussianStart) {
  const ScenarioPreset p = make_preset("event-driven");
  EXPECT_EQ(p.initial.kind, InitialCondition::Kind::Gaussian);
  EXPECT_DOUBLE_EQ(p.initial.mean, 1.0);
  EXPECT_DOUBLE_EQ(p.initial.variance, 1e-4);
}

TEST(Validate, RejectsEachInvariant) {
  EXPECT_EQ(error_code_of([] {
              ScenarioSpec s = homogeneous();
              s.sigma2 = 0.0;
              validate_scenario(s);
            }),
            Errc::NonPositiveNoise);
  EXPECT_EQ(error_code_of([] {
              ScenarioSpec s = homogeneous();
              s.alpha = Coefficient::constant(1.5);
              validate_scenario(s);
            }),
            Errc::InvalidStubbornness);
  EXPECT_EQ(error_code_of([] {
              ScenarioSpec s = homogeneous();
              s.alpha = Coefficient({[](double p) { return std::abs(p); }, "|p|"});
              validate_scenario(s);
            }),
            Errc::InvalidStubbornness);
  EXPECT_EQ(error_code_of([] {
              ScenarioSpec s = homogeneous();
              s.rho0 = Coefficient::constant(1.0);
              validate_scenario(s);
            }),
            Errc::UnnormalizedRho0);
  EXPECT_EQ(error_code_of([] {
              ScenarioSpec s = homogeneous();
              s.personality = {1.0, 1.0};
              validate_scenario(s);
            }),
            Errc::DomainEmpty);
  EXPECT_EQ(error_code_of([] {
              ScenarioSpec s = homogeneous();
              s.zeta.personal = SimilarityPersonal{};
              s.zeta.declared_factors = ProductFactors{Coefficient::constant(1.0), Coefficient::constant(1.0)};
              validate_scenario(s);
            }),
            Errc::ProductFormMismatch);
  EXPECT_EQ(error_code_of([] {
              ScenarioSpec s = homogeneous();
              s.zeta.personal = ConstantPersonal{2.0};
              s.zeta.bound = 1.0;
              validate_scenario(s);
            }),
            Errc::InvalidConfig);
}

TEST(Validate, DeclaredFactorsMatchingKernelAccepted) {
  ScenarioSpec s = homogeneous();
  s.zeta.personal = ProximityPersonal{0.0, 5.0, 2.0};
  s.zeta.bound = 1.0;
  s.zeta.declared_factors = ProductFactors{Coefficient::constant(1.0), Coefficient::constant(1.0)};
  EXPECT_NO_THROW(validate_scenario(s));
}

TEST(Eta, ConstantKernelUniformRhoGivesKernelValue) {
  const ScenarioSpec s = homogeneous();
  const Axis p = Axis::uniform(-1.0, 1.0, 101);
  EXPECT_NEAR(eval_eta(s, 0.3, p), 1.0, 1e-14);
  EXPECT_NEAR(eval_w(s, 0.3, p), 1.0, 1e-14);
}

TEST(Eta, ThrowsForBeliefDependentInfluence) {
  const ScenarioSpec s = make_preset("bounded-rect").spec;
  const Axis p = Axis::uniform(-1.0, 1.0, 11);
  EXPECT_EQ(error_code_of([&] { eval_eta(s, 0.0, p); }), Errc::BeliefDependentZeta);
}

TEST(Eta, IndependentPresetHasRateAlpha) {
  const ScenarioSpec s = make_preset("independent", {{"alpha", "0.25"}}).spec;
  const Axis p = Axis::uniform(-1.0, 1.0, 11);
  EXPECT_DOUBLE_EQ(eval_eta(s, 0.5, p), 0.0);
  EXPECT_DOUBLE_EQ(eval_w(s, 0.5, p), 0.25);
}

TEST(Truncation, HalfWidthFormula) {
  const ScenarioSpec s = homogeneous(0.5);
  const Axis p = Axis::uniform(-1.0, 1.0, 11);
  // w = 1 everywhere, so the width is max|u| + 6 sigma / sqrt(2).
  EXPECT_NEAR(belief_half_width(s, p), 1.0 + 6.0 * 0.1 / std::sqrt(2.0), 1e-12);
  const ScenarioSpec r = make_preset("bounded-rect", {{"alpha", "0.1"}, {"sigma2", "0.001"}}).spec;
  EXPECT_NEAR(belief_half_width(r, p), 1.0 + 6.0 * std::sqrt(0.001) / std::sqrt(0.2), 1e-12);
  const ScenarioSpec c = make_preset("bounded-rect", {{"domain", "compact"}}).spec;
  const Interval range = belief_range(c, p);
  EXPECT_DOUBLE_EQ(range.lo, -1.0);
  EXPECT_DOUBLE_EQ(range.hi, 1.0);
}

TEST(Grid, RequiresThreeNodesPerAxis) {
  const ScenarioSpec s = homogeneous();
  EXPECT_EQ(error_code_of([&] { make_grid(s, 2, 10); }), Errc::DomainEmpty);
  const Grid g = make_grid(s, 5, 7);
  EXPECT_EQ(g.p.size(), 5u);
  EXPECT_EQ(g.x.size(), 7u);
  EXPECT_DOUBLE_EQ(g.x.lo(), -g.x.hi());
}

TEST(BuildScenario, ExplicitFieldsOverridePreset) {
  ScenarioConfig raw;
  raw.preset = "homogeneous";
  raw.preset_params = {{"alpha", "0.2"}};
  raw.sigma2 = 0.04;
  BuiltScenario b = build_scenario(raw);
  EXPECT_DOUBLE_EQ(b.spec.alpha(0.0), 0.2);
  EXPECT_DOUBLE_EQ(b.spec.sigma2, 0.04);
  raw.alpha = Coefficient::constant(0.7);
  b = build_scenario(raw);
  EXPECT_DOUBLE_EQ(b.spec.alpha(0.0), 0.7);
}

TEST(BuildScenario, WithoutPresetNeedsEveryField) {
  ScenarioConfig raw;
  raw.sigma2 = 0.01;
  EXPECT_EQ(error_code_of([&] { build_scenario(raw); }), Errc::InvalidConfig);
}

TEST(InitialCondition, MeanAtPrejudiceOrCommonMean) {
  const ScenarioSpec s = homogeneous();
  EXPECT_DOUBLE_EQ(InitialCondition::prejudice().mean_at(s, 0.4), 0.4);
  EXPECT_DOUBLE_EQ(InitialCondition::gaussian(1.0, 0.1).mean_at(s, 0.4), 1.0);
  EXPECT_DOUBLE_EQ(InitialCondition::gaussian(1.0, 0.1).variance_at(), 0.1);
}
