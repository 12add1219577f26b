#pragma once

#include <filesystem>
#include <string>

#include "beliefdyn/model.hpp"

namespace beliefdyn {

/// Parses a YAML scenario document (schema in README.md). Throws
/// Error(InvalidConfig) on malformed input; semantic validation happens in
/// build_scenario.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config_file(const std::filesystem::path& path);

}  // namespace beliefdyn
