#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace beliefdyn {

enum class Errc {
  InvalidStubbornness,
  NonPositiveNoise,
  UnnormalizedRho0,
  ProductFormMismatch,
  NonPositiveInfluenceMass,
  BeliefDependentZeta,
  UnknownPreset,
  InvalidConfig,
  DomainEmpty,
  SingularMatrix,
  OverflowGuard,
  SeriesDiverges,
  DenominatorVanishes,
  TimeOutOfRange,
  StepTooLarge,
  PoleOnPath,
  PathTooShort,
  GridMismatch,
  Unsupported,
};

std::string_view errc_name(Errc code) noexcept;

/// Single exception type for the toolkit; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace beliefdyn
