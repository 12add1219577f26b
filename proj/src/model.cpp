#include "beliefdyn/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "beliefdyn/errors.hpp"

namespace beliefdyn {

namespace {

// x^n by repeated squaring when n is a small non-negative integer.
double power(double x, double n) {
  if (n >= 0.0 && n <= 1024.0 && n == std::floor(n)) {
    auto k = static_cast<unsigned>(n);
    double result = 1.0;
    double base = x;
    while (k != 0U) {
      if ((k & 1U) != 0U) result *= base;
      base *= base;
      k >>= 1U;
    }
    return result;
  }
  return std::pow(x, n);
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

Coefficient::Coefficient() : Coefficient([](double) { return 0.0; }, "0") {}

Coefficient::Coefficient(Fn fn, std::string description)
    : fn_(std::move(fn)), description_(std::move(description)) {}

Coefficient Coefficient::constant(double value) {
  return {[value](double) { return value; }, fmt::format("{}", value)};
}

Coefficient Coefficient::tabulated(std::vector<double> p, std::vector<double> values) {
  if (p.size() < 2 || p.size() != values.size()) {
    throw Error(Errc::InvalidConfig, "tabulated coefficient needs matching p/values with >= 2 entries");
  }
  for (std::size_t k = 1; k < p.size(); ++k) {
    if (!(p[k] > p[k - 1])) throw Error(Errc::InvalidConfig, "tabulated p must be increasing");
  }
  auto desc = fmt::format("table[{} nodes]", p.size());
  return {[p = std::move(p), v = std::move(values)](double x) { return interpolate(p, v, x); },
          std::move(desc)};
}

double SmoothRectKernel::operator()(double d) const {
  return 1.0 / (1.0 + power(std::abs(d) / radius, exponent));
}

double TabulatedDistanceKernel::operator()(double dist) const {
  dist = std::abs(dist);
  if (dist > d.back()) return 0.0;
  return interpolate(d, values, dist);
}

double Influence::distance_value(double d) const {
  if (!distance) return 1.0;
  return std::visit([d](const auto& k) { return k(d); }, *distance);
}

double Influence::personal_value(double p, double q) const {
  return std::visit(
      Overloaded{
          [](const ConstantPersonal& k) { return k.value; },
          [p, q](const ProductPersonal& k) { return k.first(p) * k.second(q); },
          [p, q](const ProximityPersonal& k) {
            return k.amplitude / (1.0 + power(k.scale * std::abs(p - q), k.n));
          },
          [p, q](const CommunityPersonal& k) { return 0.5 + 0.5 * std::erf(p * q / k.kappa); },
          [p, q](const SimilarityPersonal&) { return 1.0 / (1.0 + (p - q) * (p - q)); },
          [p, q](const TabulatedPersonal& k) {
            const auto& n = k.nodes;
            const std::size_t m = n.size();
            auto locate = [&n, m](double v) {
              v = std::clamp(v, n.front(), n.back());
              auto it = std::upper_bound(n.begin(), n.end(), v);
              std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - n.begin()), m - 1);
              std::size_t lo = hi - 1;
              return std::pair{lo, (v - n[lo]) / (n[hi] - n[lo])};
            };
            const auto [i, s] = locate(p);
            const auto [j, t] = locate(q);
            auto v = [&k, m](std::size_t a, std::size_t b) { return k.values[a * m + b]; };
            return (1 - s) * (1 - t) * v(i, j) + s * (1 - t) * v(i + 1, j) +
                   (1 - s) * t * v(i, j + 1) + s * t * v(i + 1, j + 1);
          },
      },
      personal);
}

double Influence::operator()(double d, double p, double q) const {
  return distance_value(d) * personal_value(p, q);
}

bool Influence::personal_is_constant() const {
  return std::holds_alternative<ConstantPersonal>(personal);
}

std::optional<ProductFactors> Influence::factors() const {
  if (distance) {
    // A declared factorization over a belief-dependent kernel is a mismatch
    // that validation reports; it is not product form.
    return declared_factors;
  }
  if (const auto* c = std::get_if<ConstantPersonal>(&personal)) {
    return ProductFactors{Coefficient::constant(c->value), Coefficient::constant(1.0)};
  }
  if (const auto* prod = std::get_if<ProductPersonal>(&personal)) {
    return ProductFactors{prod->first, prod->second};
  }
  return declared_factors;
}

bool Influence::vanishes() const {
  const auto* c = std::get_if<ConstantPersonal>(&personal);
  return (c != nullptr && c->value == 0.0) || bound == 0.0;
}

double InitialCondition::mean_at(const ScenarioSpec& spec, double p) const {
  return kind == Kind::Prejudice ? spec.prejudice(p) : mean;
}

// ---------------------------------------------------------------------------
// Presets

namespace {

using Params = std::map<std::string, std::string>;

Coefficient identity() {
  return {[](double p) { return p; }, "p"};
}

Coefficient floored(std::function<double(double)> shape, std::string desc) {
  return {[shape = std::move(shape)](double p) { return std::max(shape(p), kPresetAlphaFloor); },
          std::move(desc)};
}

double number(const Params& params, const std::string& key) {
  const auto it = params.find(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::InvalidConfig, fmt::format("parameter '{}' is not a number: '{}'", key, it->second));
  }
}

const std::string& word(const Params& params, const std::string& key,
                        std::initializer_list<const char*> allowed) {
  const auto& v = params.at(key);
  for (const char* a : allowed) {
    if (v == a) return v;
  }
  throw Error(Errc::InvalidConfig, fmt::format("parameter '{}' has unsupported value '{}'", key, v));
}

ScenarioSpec base_uniform(const std::string& name, const Params& params) {
  ScenarioSpec spec;
  spec.name = name;
  spec.personality = {-1.0, 1.0};
  spec.belief = UnboundedLine{};
  spec.prejudice = identity();
  spec.rho0 = Coefficient::constant(0.5);
  spec.sigma2 = number(params, "sigma2");
  return spec;
}

Influence constant_influence(double value) {
  Influence z;
  z.personal = ConstantPersonal{value};
  z.bound = value;
  z.support_radius = value == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  z.description = fmt::format("{}", value);
  return z;
}

ScenarioPreset build_homogeneous(const Params& p) {
  ScenarioSpec s = base_uniform("homogeneous", p);
  s.alpha = Coefficient::constant(number(p, "alpha"));
  s.zeta = constant_influence(1.0);
  return {"homogeneous", std::move(s), "unbounded confidence, constant stubbornness and influence", {}};
}

ScenarioPreset build_inhomogeneous(const Params& p) {
  ScenarioSpec s = base_uniform("inhomogeneous", p);
  const std::string& shape = word(p, "shape", {"one-minus-abs", "abs"});
  const double n = number(p, "n");
  if (shape == "abs") {
    s.alpha = floored([](double x) { return std::abs(x); }, "|p|");
  } else {
    s.alpha = floored([](double x) { return 1.0 - std::abs(x); }, "1-|p|");
  }
  if (n == 0.0) {
    s.zeta = constant_influence(1.0);
  } else {
    Influence z;
    Coefficient a = s.alpha;
    z.personal = ProductPersonal{Coefficient::constant(1.0),
                                 Coefficient([a, n](double q) { return power(a(q), n); },
                                             fmt::format("alpha^{}", n))};
    z.bound = 1.0;
    z.description = fmt::format("alpha(q)^{}", n);
    s.zeta = std::move(z);
  }
  return {"inhomogeneous", std::move(s),
          "unbounded confidence, personality-dependent stubbornness, influence alpha(q)^n", {}};
}

ScenarioPreset build_proximity(const Params& p) {
  ScenarioSpec s = base_uniform("proximity", p);
  s.alpha = floored([](double x) { return 0.25 * (x + 1.0) * (x + 1.0); }, "(p+1)^2/4");
  const double n = number(p, "n");
  if (n == 0.0) {
    s.zeta = constant_influence(1.0);
  } else {
    Influence z;
    z.personal = ProximityPersonal{n, 5.0, 2.0};
    z.bound = 2.0;
    z.description = fmt::format("2/(1+(5|p-q|)^{})", n);
    s.zeta = std::move(z);
  }
  return {"proximity", std::move(s), "unbounded confidence, proximity-based influence", {}};
}

ScenarioPreset build_community(const Params& p) {
  ScenarioSpec s = base_uniform("community", p);
  const double kappa = number(p, "kappa");
  if (!(kappa > 0.0)) throw Error(Errc::InvalidConfig, "community kappa must be positive");
  const std::string& variant = word(p, "variant", {"symmetric", "one-sided"});
  if (variant == "symmetric") {
    s.alpha = floored([](double x) { return std::abs(x); }, "|p|");
  } else {
    s.alpha = floored([](double x) { return std::max(x, 0.0); }, "max(p,0)");
  }
  Influence z;
  z.personal = CommunityPersonal{kappa};
  z.bound = 1.0;
  z.description = fmt::format("1/2+1/2 erf(pq/{})", kappa);
  s.zeta = std::move(z);
  return {"community", std::move(s), "unbounded confidence, two interacting communities", {}};
}

ScenarioPreset build_bounded_rect(const Params& p) {
  ScenarioSpec s = base_uniform("bounded-rect", p);
  s.alpha = Coefficient::constant(number(p, "alpha"));
  if (word(p, "domain", {"line", "compact"}) == "compact") s.belief = CompactInterval{-1.0, 1.0};
  Influence z;
  z.distance = SmoothRectKernel{1.0 / 3.0, 64.0};
  z.personal = ConstantPersonal{1.0};
  z.bound = 1.0;
  z.support_radius = 1.0 / 3.0;
  z.description = "1/(1+(3d)^64)";
  s.zeta = std::move(z);
  return {"bounded-rect", std::move(s), "bounded confidence, smooth rectangular influence of width 1/3", {}};
}

ScenarioPreset build_event_driven(const Params& p) {
  ScenarioSpec s = base_uniform("event-driven", p);
  s.alpha = Coefficient::constant(number(p, "alpha"));
  if (word(p, "influence", {"similarity", "constant"}) == "constant") {
    s.zeta = constant_influence(1.0);
  } else {
    Influence z;
    z.personal = SimilarityPersonal{};
    z.bound = 1.0;
    z.description = "1/(1+(p-q)^2)";
    s.zeta = std::move(z);
  }
  const double var = number(p, "init_var");
  if (!(var >= 0.0)) throw Error(Errc::InvalidConfig, "init_var must be non-negative");
  return {"event-driven", std::move(s), "relaxation after a shared shock to all beliefs",
          InitialCondition::gaussian(number(p, "init_mean"), var)};
}

ScenarioPreset build_independent(const Params& p) {
  ScenarioSpec s = base_uniform("independent", p);
  s.alpha = Coefficient::constant(number(p, "alpha"));
  s.zeta = constant_influence(0.0);
  return {"independent", std::move(s), "non-interacting agents (Ornstein-Uhlenbeck per agent)", {}};
}

struct PresetEntry {
  PresetInfo info;
  ScenarioPreset (*build)(const Params&);
};

const std::vector<PresetEntry>& registry() {
  static const std::vector<PresetEntry> entries = {
      {{"homogeneous", "constant alpha, zeta = 1, u(p) = p, uniform personalities",
        {{"alpha", "0.5"}, {"sigma2", "0.01"}}},
       &build_homogeneous},
      {{"inhomogeneous", "alpha = 1-|p| or |p|, zeta = alpha(q)^n",
        {{"shape", "one-minus-abs"}, {"n", "0"}, {"sigma2", "0.01"}}},
       &build_inhomogeneous},
      {{"proximity", "alpha = (p+1)^2/4, zeta = 2/(1+(5|p-q|)^n)", {{"n", "0"}, {"sigma2", "0.01"}}},
       &build_proximity},
      {{"community", "zeta = 1/2 + 1/2 erf(pq/kappa), stubborn agents in both or one community",
        {{"kappa", "1"}, {"variant", "symmetric"}, {"sigma2", "0.01"}}},
       &build_community},
      {{"bounded-rect", "bounded confidence, zeta(d) = 1/(1+(3d)^64), constant alpha",
        {{"alpha", "0.1"}, {"sigma2", "0.001"}, {"domain", "line"}}},
       &build_bounded_rect},
      {{"event-driven", "constant alpha, zeta = 1/(1+(p-q)^2), Gaussian initial beliefs",
        {{"alpha", "0.1"},
         {"sigma2", "0.01"},
         {"influence", "similarity"},
         {"init_mean", "1"},
         {"init_var", "0.0001"}}},
       &build_event_driven},
      {{"independent", "zeta = 0: every agent is an Ornstein-Uhlenbeck process around u(p)",
        {{"alpha", "0.5"}, {"sigma2", "0.01"}}},
       &build_independent},
  };
  return entries;
}

}  // namespace

const std::vector<PresetInfo>& preset_catalog() {
  static const std::vector<PresetInfo> infos = [] {
    std::vector<PresetInfo> out;
    for (const auto& e : registry()) out.push_back(e.info);
    return out;
  }();
  return infos;
}

ScenarioPreset make_preset(const std::string& name, const std::map<std::string, std::string>& params) {
  for (const auto& entry : registry()) {
    if (entry.info.name != name) continue;
    Params merged = entry.info.defaults;
    for (const auto& [key, value] : params) {
      if (!merged.contains(key)) {
        throw Error(Errc::InvalidConfig, fmt::format("preset '{}' has no parameter '{}'", name, key));
      }
      merged[key] = value;
    }
    ScenarioPreset preset = entry.build(merged);
    validate_scenario(preset.spec);
    return preset;
  }
  throw Error(Errc::UnknownPreset, name);
}

BuiltScenario build_scenario(const ScenarioConfig& raw) {
  BuiltScenario out;
  if (raw.preset) {
    ScenarioPreset preset = [&] {
      // Preset validation is deferred until explicit overrides are applied.
      for (const auto& entry : registry()) {
        if (entry.info.name != *raw.preset) continue;
        Params merged = entry.info.defaults;
        for (const auto& [key, value] : raw.preset_params) {
          if (!merged.contains(key)) {
            throw Error(Errc::InvalidConfig,
                        fmt::format("preset '{}' has no parameter '{}'", *raw.preset, key));
          }
          merged[key] = value;
        }
        return entry.build(merged);
      }
      throw Error(Errc::UnknownPreset, *raw.preset);
    }();
    out.spec = std::move(preset.spec);
    out.initial = preset.initial;
  } else {
    const bool complete = raw.alpha && raw.prejudice && raw.rho0 && raw.zeta && raw.sigma2;
    if (!complete) {
      throw Error(Errc::InvalidConfig,
                  "a scenario without a preset must supply alpha, prejudice, rho0, influence and sigma2");
    }
  }
  if (raw.name) out.spec.name = *raw.name;
  if (raw.sigma2) out.spec.sigma2 = *raw.sigma2;
  if (raw.personality) out.spec.personality = *raw.personality;
  if (raw.belief) out.spec.belief = *raw.belief;
  if (raw.alpha) out.spec.alpha = *raw.alpha;
  if (raw.prejudice) out.spec.prejudice = *raw.prejudice;
  if (raw.rho0) out.spec.rho0 = *raw.rho0;
  if (raw.zeta) out.spec.zeta = *raw.zeta;
  if (raw.initial) out.initial = *raw.initial;
  if (std::isnan(out.spec.zeta.bound)) {
    const Axis axis = Axis::uniform(out.spec.personality.lo, out.spec.personality.hi, kValidationNodes);
    double sup = 0.0;
    for (const double p : axis.nodes) {
      for (const double q : axis.nodes) sup = std::max(sup, out.spec.zeta(0.0, p, q));
    }
    out.spec.zeta.bound = sup;
  }
  validate_scenario(out.spec);
  return out;
}

// ---------------------------------------------------------------------------
// Validation and derived quantities

void validate_scenario(const ScenarioSpec& spec) {
  if (!(spec.sigma2 > 0.0) || !std::isfinite(spec.sigma2)) {
    throw Error(Errc::NonPositiveNoise, fmt::format("sigma2 = {}", spec.sigma2));
  }
  if (!(spec.personality.hi > spec.personality.lo)) {
    throw Error(Errc::DomainEmpty, "personality domain is empty");
  }
  if (const auto* c = std::get_if<CompactInterval>(&spec.belief); c != nullptr && !(c->hi > c->lo)) {
    throw Error(Errc::DomainEmpty, "belief interval is empty");
  }
  if (const auto* l = std::get_if<UnboundedLine>(&spec.belief);
      l != nullptr && l->half_width && !(*l->half_width > 0.0)) {
    throw Error(Errc::DomainEmpty, "belief truncation half-width must be positive");
  }

  const Axis axis = Axis::uniform(spec.personality.lo, spec.personality.hi, kValidationNodes);
  double alpha_min = std::numeric_limits<double>::infinity();
  for (const double p : axis.nodes) {
    const double a = spec.alpha(p);
    if (!(a >= 0.0 && a <= 1.0)) {
      throw Error(Errc::InvalidStubbornness, fmt::format("alpha({}) = {} outside [0, 1]", p, a));
    }
    alpha_min = std::min(alpha_min, a);
  }
  if (alpha_min < kAlphaInfThreshold) {
    throw Error(Errc::InvalidStubbornness, fmt::format("inf alpha = {} (must be > 0)", alpha_min));
  }

  std::vector<double> rho0(axis.size());
  for (std::size_t k = 0; k < axis.size(); ++k) {
    rho0[k] = spec.rho0(axis.nodes[k]);
    if (!(rho0[k] >= 0.0)) {
      throw Error(Errc::UnnormalizedRho0, fmt::format("rho0({}) = {} is negative", axis.nodes[k], rho0[k]));
    }
  }
  const double mass = trapezoid(rho0, axis.weights);
  if (std::abs(mass - 1.0) > 1e-6) {
    throw Error(Errc::UnnormalizedRho0, fmt::format("integral of rho0 = {:.12g}", mass));
  }

  // Influence samples: non-negativity, bound, and declared factorization.
  const std::vector<double> distances = {0.0, 0.05, 0.2, 1.0 / 3.0, 0.5, 1.0, 3.0};
  const auto factors = spec.zeta.factors();
  for (std::size_t a = 0; a < axis.size(); a += 10) {
    for (std::size_t b = 0; b < axis.size(); b += 10) {
      const double p = axis.nodes[a];
      const double q = axis.nodes[b];
      for (const double d : distances) {
        const double z = spec.zeta(d, p, q);
        if (!(z >= 0.0)) {
          throw Error(Errc::InvalidConfig, fmt::format("zeta({}, {}, {}) = {} is negative", d, p, q, z));
        }
        if (z > spec.zeta.bound * (1.0 + 1e-12)) {
          throw Error(Errc::InvalidConfig,
                      fmt::format("zeta({}, {}, {}) = {} exceeds declared bound {}", d, p, q, z, spec.zeta.bound));
        }
        if (factors && std::abs(z - factors->first(p) * factors->second(q)) > 1e-12) {
          throw Error(Errc::ProductFormMismatch,
                      fmt::format("zeta({}, {}, {}) = {} but zeta1*zeta2 = {}", d, p, q, z,
                                  factors->first(p) * factors->second(q)));
        }
      }
    }
  }

  if (spec.zeta.belief_independent() && !spec.zeta.vanishes()) {
    for (const double p : axis.nodes) {
      const double eta = eval_eta(spec, p, axis);
      if (!(eta > 0.0)) {
        throw Error(Errc::NonPositiveInfluenceMass, fmt::format("eta({}) = {}", p, eta));
      }
    }
  }
}

double eval_eta(const ScenarioSpec& spec, double p, const Axis& p_axis) {
  if (!spec.zeta.belief_independent()) {
    throw Error(Errc::BeliefDependentZeta, "eta(p) requires a belief-independent influence");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < p_axis.size(); ++k) {
    const double q = p_axis.nodes[k];
    sum += p_axis.weights[k] * spec.zeta.personal_value(p, q) * spec.rho0(q);
  }
  return sum;
}

double eval_w(const ScenarioSpec& spec, double p, const Axis& p_axis) {
  const double a = spec.alpha(p);
  return a + (1.0 - a) * eval_eta(spec, p, p_axis);
}

std::vector<double> eta_profile(const ScenarioSpec& spec, const Axis& p_axis) {
  std::vector<double> out(p_axis.size());
  for (std::size_t i = 0; i < p_axis.size(); ++i) out[i] = eval_eta(spec, p_axis.nodes[i], p_axis);
  return out;
}

std::vector<double> w_profile(const ScenarioSpec& spec, const Axis& p_axis) {
  const auto eta = eta_profile(spec, p_axis);
  std::vector<double> out(p_axis.size());
  for (std::size_t i = 0; i < p_axis.size(); ++i) {
    const double a = spec.alpha(p_axis.nodes[i]);
    out[i] = a + (1.0 - a) * eta[i];
  }
  return out;
}

double belief_half_width(const ScenarioSpec& spec, const Axis& p_axis) {
  if (const auto* line = std::get_if<UnboundedLine>(&spec.belief); line != nullptr && line->half_width) {
    return *line->half_width;
  }
  double u_max = 0.0;
  double rate_min = std::numeric_limits<double>::infinity();
  const bool independent = spec.zeta.belief_independent();
  for (const double p : p_axis.nodes) {
    u_max = std::max(u_max, std::abs(spec.prejudice(p)));
    rate_min = std::min(rate_min, independent ? eval_w(spec, p, p_axis) : spec.alpha(p));
  }
  return u_max + 6.0 * std::sqrt(spec.sigma2) / std::sqrt(2.0 * rate_min);
}

Interval belief_range(const ScenarioSpec& spec, const Axis& p_axis) {
  if (const auto* c = std::get_if<CompactInterval>(&spec.belief)) return {c->lo, c->hi};
  const double h = belief_half_width(spec, p_axis);
  return {-h, h};
}

Grid make_grid(const ScenarioSpec& spec, std::size_t np, std::size_t nx) {
  if (np < 3 || nx < 3) {
    throw Error(Errc::DomainEmpty, fmt::format("grid needs at least 3x3 nodes, got {}x{}", np, nx));
  }
  Grid grid;
  grid.p = Axis::uniform(spec.personality.lo, spec.personality.hi, np);
  const Interval xr = belief_range(spec, grid.p);
  grid.x = Axis::uniform(xr.lo, xr.hi, nx);
  return grid;
}

}  // namespace beliefdyn
