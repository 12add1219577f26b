#include "beliefdyn/errors.hpp"

namespace beliefdyn {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidStubbornness: return "InvalidStubbornness";
    case Errc::NonPositiveNoise: return "NonPositiveNoise";
    case Errc::UnnormalizedRho0: return "UnnormalizedRho0";
    case Errc::ProductFormMismatch: return "ProductFormMismatch";
    case Errc::NonPositiveInfluenceMass: return "NonPositiveInfluenceMass";
    case Errc::BeliefDependentZeta: return "BeliefDependentZeta";
    case Errc::UnknownPreset: return "UnknownPreset";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::DomainEmpty: return "DomainEmpty";
    case Errc::SingularMatrix: return "SingularMatrix";
    case Errc::OverflowGuard: return "OverflowGuard";
    case Errc::SeriesDiverges: return "SeriesDiverges";
    case Errc::DenominatorVanishes: return "DenominatorVanishes";
    case Errc::TimeOutOfRange: return "TimeOutOfRange";
    case Errc::StepTooLarge: return "StepTooLarge";
    case Errc::PoleOnPath: return "PoleOnPath";
    case Errc::PathTooShort: return "PathTooShort";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::Unsupported: return "Unsupported";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

}  // namespace beliefdyn
