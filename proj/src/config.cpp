#include "beliefdyn/config.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "beliefdyn/errors.hpp"

namespace beliefdyn {

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& what) {
  const auto mark = node.Mark();
  if (mark.line >= 0) throw Error(Errc::InvalidConfig, fmt::format("line {}: {}", mark.line + 1, what));
  throw Error(Errc::InvalidConfig, what);
}

double as_number(const YAML::Node& node, const std::string& key) {
  if (!node || !node.IsScalar()) fail(node, fmt::format("'{}' must be a number", key));
  const auto text = node.as<std::string>();
  if (text == "inf" || text == ".inf") return std::numeric_limits<double>::infinity();
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    fail(node, fmt::format("'{}' must be a number, got '{}'", key, text));
  }
}

std::vector<double> as_vector(const YAML::Node& node, const std::string& key) {
  if (!node || !node.IsSequence()) fail(node, fmt::format("'{}' must be a list of numbers", key));
  std::vector<double> out;
  out.reserve(node.size());
  for (const auto& item : node) out.push_back(as_number(item, key));
  return out;
}

Coefficient as_coefficient(const YAML::Node& node, const std::string& key) {
  if (!node) fail(node, fmt::format("'{}' is missing", key));
  if (node.IsScalar()) {
    if (node.as<std::string>() == "identity") return {[](double p) { return p; }, "p"};
    return Coefficient::constant(as_number(node, key));
  }
  if (!node.IsMap()) fail(node, fmt::format("'{}' must be a number, 'identity', or a table", key));
  if (node["constant"]) return Coefficient::constant(as_number(node["constant"], key));
  if (const auto table = node["table"]) {
    return Coefficient::tabulated(as_vector(table["p"], key + ".table.p"),
                                  as_vector(table["values"], key + ".table.values"));
  }
  fail(node, fmt::format("'{}' needs 'constant' or 'table'", key));
}

PersonalKernel as_personal(const YAML::Node& node) {
  if (!node) return ConstantPersonal{1.0};
  if (node.IsScalar()) {
    if (node.as<std::string>() == "similarity") return SimilarityPersonal{};
    return ConstantPersonal{as_number(node, "influence.personal")};
  }
  if (node["constant"]) return ConstantPersonal{as_number(node["constant"], "influence.personal.constant")};
  if (const auto prod = node["product"]) {
    return ProductPersonal{as_coefficient(prod["first"], "influence.personal.product.first"),
                           as_coefficient(prod["second"], "influence.personal.product.second")};
  }
  if (const auto prox = node["proximity"]) {
    ProximityPersonal k;
    k.n = as_number(prox["n"], "proximity.n");
    if (prox["scale"]) k.scale = as_number(prox["scale"], "proximity.scale");
    if (prox["amplitude"]) k.amplitude = as_number(prox["amplitude"], "proximity.amplitude");
    return k;
  }
  if (const auto com = node["community"]) {
    const double kappa = as_number(com["kappa"], "community.kappa");
    if (!(kappa > 0.0)) fail(com, "community.kappa must be positive");
    return CommunityPersonal{kappa};
  }
  if (node["similarity"]) return SimilarityPersonal{};
  if (const auto table = node["table"]) {
    TabulatedPersonal k;
    k.nodes = as_vector(table["nodes"], "influence.personal.table.nodes");
    const auto rows = table["values"];
    if (!rows || !rows.IsSequence() || rows.size() != k.nodes.size()) {
      fail(table, "influence.personal.table.values must be a square list of rows matching nodes");
    }
    for (const auto& row : rows) {
      const auto r = as_vector(row, "influence.personal.table.values");
      if (r.size() != k.nodes.size()) fail(row, "influence table row has the wrong length");
      k.values.insert(k.values.end(), r.begin(), r.end());
    }
    if (k.nodes.size() < 2) fail(table, "influence table needs at least two nodes");
    for (std::size_t i = 1; i < k.nodes.size(); ++i) {
      if (!(k.nodes[i] > k.nodes[i - 1])) fail(table, "influence table nodes must be increasing");
    }
    return k;
  }
  fail(node, "unknown influence.personal form");
}

Influence as_influence(const YAML::Node& node) {
  if (!node.IsMap()) fail(node, "'influence' must be a table");
  Influence z;
  z.personal = as_personal(node["personal"]);
  double support = std::numeric_limits<double>::infinity();
  if (const auto dist = node["distance"]) {
    if (const auto rect = dist["smooth_rect"]) {
      SmoothRectKernel k;
      if (rect["radius"]) k.radius = as_number(rect["radius"], "smooth_rect.radius");
      if (rect["exponent"]) k.exponent = as_number(rect["exponent"], "smooth_rect.exponent");
      if (!(k.radius > 0.0)) fail(rect, "smooth_rect.radius must be positive");
      support = k.radius;
      z.distance = k;
    } else if (const auto table = dist["table"]) {
      TabulatedDistanceKernel k{as_vector(table["d"], "distance.table.d"),
                                as_vector(table["values"], "distance.table.values")};
      if (k.d.size() < 2 || k.d.size() != k.values.size() || k.d.front() != 0.0) {
        fail(table, "distance table needs matching d/values starting at d = 0");
      }
      support = k.d.back();
      z.distance = std::move(k);
    } else {
      fail(dist, "influence.distance needs 'smooth_rect' or 'table'");
    }
  }
  if (const auto f = node["factors"]) {
    z.declared_factors = ProductFactors{as_coefficient(f["first"], "influence.factors.first"),
                                        as_coefficient(f["second"], "influence.factors.second")};
  }
  z.support_radius = node["support_radius"] ? as_number(node["support_radius"], "support_radius") : support;
  // An unset bound is resolved against the personality domain in build_scenario.
  z.bound = node["bound"] ? as_number(node["bound"], "influence.bound")
                          : std::numeric_limits<double>::quiet_NaN();
  z.description = node["description"] ? node["description"].as<std::string>() : "configured";
  return z;
}

BeliefDomain as_belief(const YAML::Node& node) {
  const std::string kind = node["kind"] ? node["kind"].as<std::string>() : "line";
  if (kind == "line") {
    UnboundedLine line;
    if (node["half_width"]) line.half_width = as_number(node["half_width"], "belief.half_width");
    return line;
  }
  if (kind == "compact") {
    return CompactInterval{as_number(node["lo"], "belief.lo"), as_number(node["hi"], "belief.hi")};
  }
  fail(node, fmt::format("belief.kind must be 'line' or 'compact', got '{}'", kind));
}

InitialCondition as_initial(const YAML::Node& node) {
  const std::string kind = node["kind"] ? node["kind"].as<std::string>() : "prejudice";
  if (kind == "prejudice") return InitialCondition::prejudice();
  if (kind == "gaussian") {
    const double var = as_number(node["variance"], "initial.variance");
    if (!(var >= 0.0)) fail(node, "initial.variance must be non-negative");
    return InitialCondition::gaussian(as_number(node["mean"], "initial.mean"), var);
  }
  fail(node, fmt::format("initial.kind must be 'prejudice' or 'gaussian', got '{}'", kind));
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(Errc::InvalidConfig, e.what());
  }
  if (!root.IsMap()) throw Error(Errc::InvalidConfig, "scenario document must be a mapping");

  static const std::vector<std::string> known = {"preset", "preset_params", "name",  "sigma2",
                                                 "personality", "belief",    "alpha", "prejudice",
                                                 "rho0",   "influence",     "initial"};
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      fail(kv.first, fmt::format("unknown key '{}'", key));
    }
  }

  ScenarioConfig cfg;
  if (root["preset"]) cfg.preset = root["preset"].as<std::string>();
  if (const auto params = root["preset_params"]) {
    if (!params.IsMap()) fail(params, "'preset_params' must be a table");
    for (const auto& kv : params) cfg.preset_params[kv.first.as<std::string>()] = kv.second.as<std::string>();
  }
  if (root["name"]) cfg.name = root["name"].as<std::string>();
  if (root["sigma2"]) cfg.sigma2 = as_number(root["sigma2"], "sigma2");
  if (const auto dom = root["personality"]) {
    const auto v = as_vector(dom, "personality");
    if (v.size() != 2) fail(dom, "'personality' must be [lo, hi]");
    cfg.personality = Interval{v[0], v[1]};
  }
  if (root["belief"]) cfg.belief = as_belief(root["belief"]);
  if (root["alpha"]) cfg.alpha = as_coefficient(root["alpha"], "alpha");
  if (root["prejudice"]) cfg.prejudice = as_coefficient(root["prejudice"], "prejudice");
  if (root["rho0"]) cfg.rho0 = as_coefficient(root["rho0"], "rho0");
  if (root["influence"]) cfg.zeta = as_influence(root["influence"]);
  if (root["initial"]) cfg.initial = as_initial(root["initial"]);
  return cfg;
}

ScenarioConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidConfig, fmt::format("cannot open config file '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace beliefdyn
