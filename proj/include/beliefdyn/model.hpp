#pragma once

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "beliefdyn/numerics.hpp"

namespace beliefdyn {

/// Scalar coefficient of personality: alpha(p), u(p), rho0(p), factor kernels.
class Coefficient {
 public:
  using Fn = std::function<double(double)>;

  Coefficient();
  Coefficient(Fn fn, std::string description);

  static Coefficient constant(double value);
  /// Piecewise-linear through (p_k, v_k); clamped outside the table.
  static Coefficient tabulated(std::vector<double> p, std::vector<double> values);

  double operator()(double p) const { return fn_(p); }
  const std::string& description() const { return description_; }

 private:
  Fn fn_;
  std::string description_;
};

/// 1 / (1 + (d / radius)^exponent): smooth step that vanishes past `radius`.
struct SmoothRectKernel {
  double radius = 1.0 / 3.0;
  double exponent = 64.0;

  double operator()(double d) const;
};

/// Piecewise linear in d, zero past the last abscissa.
struct TabulatedDistanceKernel {
  std::vector<double> d;
  std::vector<double> values;

  double operator()(double dist) const;
};

using DistanceKernel = std::variant<SmoothRectKernel, TabulatedDistanceKernel>;

struct ConstantPersonal {
  double value = 1.0;
};
/// zeta1(p) * zeta2(q)
struct ProductPersonal {
  Coefficient first;
  Coefficient second;
};
/// amplitude / (1 + (scale |p - q|)^n)
struct ProximityPersonal {
  double n = 0.0;
  double scale = 5.0;
  double amplitude = 2.0;
};
/// 1/2 + 1/2 erf(p q / kappa)
struct CommunityPersonal {
  double kappa = 1.0;
};
/// 1 / (1 + (p - q)^2)
struct SimilarityPersonal {};
/// Bilinear interpolation on a personality lattice (values row-major in p).
struct TabulatedPersonal {
  std::vector<double> nodes;
  std::vector<double> values;
};

using PersonalKernel = std::variant<ConstantPersonal, ProductPersonal, ProximityPersonal,
                                    CommunityPersonal, SimilarityPersonal, TabulatedPersonal>;

struct ProductFactors {
  Coefficient first;   // zeta1, felt by the receiving agent
  Coefficient second;  // zeta2, exerted by the influencing agent
};

/// Influence strength zeta(d, p, q) = distance(d) * personal(p, q), where
/// d = |x' - x|. Without a distance factor the influence is belief-independent.
struct Influence {
  std::optional<DistanceKernel> distance;
  PersonalKernel personal = ConstantPersonal{1.0};
  /// Factorization asserted by a configuration for kernels that are not
  /// product-form by construction; validated against `personal`.
  std::optional<ProductFactors> declared_factors;
  /// S_zeta: upper bound of zeta.
  double bound = 1.0;
  /// X0: zeta vanishes for d > support_radius (infinity allowed).
  double support_radius = std::numeric_limits<double>::infinity();
  std::string description;

  double operator()(double d, double p, double q) const;
  double personal_value(double p, double q) const;
  double distance_value(double d) const;

  bool belief_independent() const { return !distance.has_value(); }
  bool personal_is_constant() const;
  /// Factors when zeta(d,p,q) = zeta1(p) zeta2(q); nullopt otherwise.
  std::optional<ProductFactors> factors() const;
  bool product_form() const { return factors().has_value(); }
  /// zeta identically zero (agents do not interact).
  bool vanishes() const;
};

/// Belief line R, truncated at +-half_width for numerics (computed when unset).
struct UnboundedLine {
  std::optional<double> half_width;
};
/// Compact belief interval with reflecting boundaries.
struct CompactInterval {
  double lo = -1.0;
  double hi = 1.0;
};
using BeliefDomain = std::variant<UnboundedLine, CompactInterval>;

struct ScenarioSpec {
  std::string name = "custom";
  Interval personality{-1.0, 1.0};
  BeliefDomain belief = UnboundedLine{};
  Coefficient alpha;
  Coefficient prejudice;
  Coefficient rho0;
  Influence zeta;
  double sigma2 = 0.01;

  bool compact_beliefs() const { return std::holds_alternative<CompactInterval>(belief); }
  double alpha_bar(double p) const { return 1.0 - alpha(p); }
};

/// Initial belief law per personality: a point mass at u(p), or a Gaussian
/// with common mean and variance.
struct InitialCondition {
  enum class Kind { Prejudice, Gaussian };
  Kind kind = Kind::Prejudice;
  double mean = 0.0;
  double variance = 0.0;

  static InitialCondition prejudice() { return {}; }
  static InitialCondition gaussian(double mean, double variance) {
    return {Kind::Gaussian, mean, variance};
  }
  double mean_at(const ScenarioSpec& spec, double p) const;
  double variance_at() const { return kind == Kind::Gaussian ? variance : 0.0; }
};

struct ScenarioPreset {
  std::string name;
  ScenarioSpec spec;
  std::string anchor;
  InitialCondition initial;
};

struct PresetInfo {
  std::string name;
  std::string summary;
  std::map<std::string, std::string> defaults;
};

const std::vector<PresetInfo>& preset_catalog();

/// Builds a preset from its name and string-valued parameter overrides.
/// Throws UnknownPreset / InvalidConfig.
ScenarioPreset make_preset(const std::string& name,
                           const std::map<std::string, std::string>& params = {});

/// Raw configuration record: a preset reference with overrides, explicit
/// fields, or both (explicit fields win).
struct ScenarioConfig {
  std::optional<std::string> preset;
  std::map<std::string, std::string> preset_params;
  std::optional<std::string> name;
  std::optional<double> sigma2;
  std::optional<Interval> personality;
  std::optional<BeliefDomain> belief;
  std::optional<Coefficient> alpha;
  std::optional<Coefficient> prejudice;
  std::optional<Coefficient> rho0;
  std::optional<Influence> zeta;
  std::optional<InitialCondition> initial;
};

struct BuiltScenario {
  ScenarioSpec spec;
  InitialCondition initial;
};

BuiltScenario build_scenario(const ScenarioConfig& raw);

inline constexpr std::size_t kValidationNodes = 201;
inline constexpr double kAlphaInfThreshold = 1e-6;
/// Floor applied by presets whose stubbornness profile touches zero.
inline constexpr double kPresetAlphaFloor = 1e-5;

/// Checks every ScenarioSpec invariant on a validation grid; throws Error.
void validate_scenario(const ScenarioSpec& spec);

/// eta(p) = int zeta(p,q) rho0(q) dq. Throws BeliefDependentZeta.
double eval_eta(const ScenarioSpec& spec, double p, const Axis& p_axis);
/// w(p) = alpha(p) + (1 - alpha(p)) eta(p).
double eval_w(const ScenarioSpec& spec, double p, const Axis& p_axis);

std::vector<double> eta_profile(const ScenarioSpec& spec, const Axis& p_axis);
std::vector<double> w_profile(const ScenarioSpec& spec, const Axis& p_axis);

/// Numerical truncation half-width of the belief line:
/// max|u| + 6 sigma / sqrt(2 inf w) (inf alpha when zeta depends on beliefs).
double belief_half_width(const ScenarioSpec& spec, const Axis& p_axis);
/// Belief interval used for numerics (compact bounds or truncated line).
Interval belief_range(const ScenarioSpec& spec, const Axis& p_axis);

}  // namespace beliefdyn
