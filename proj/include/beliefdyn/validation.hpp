#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

namespace beliefdyn {

enum class ValidationScale { Full, Reduced };

struct CheckResult {
  std::string id;
  std::string group;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct CheckInfo {
  std::string id;
  std::string group;
  std::string title;
};

struct ValidationOptions {
  ValidationScale scale = ValidationScale::Full;
  /// A check runs when its group or its id is listed; both empty selects all.
  std::set<std::string> groups;
  std::set<std::string> ids;
};

const std::vector<CheckInfo>& validation_checks();

std::vector<CheckResult> run_validation(const ValidationOptions& options,
                                        const std::function<void(const CheckResult&)>& on_result = {});

/// "PASS  <id>  <title>: <detail> [<seconds> s]"
std::string format_result(const CheckResult& result);

}  // namespace beliefdyn
