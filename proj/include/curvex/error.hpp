#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace curvex {

enum class ErrorKind {
  DimensionMismatch,
  DimensionTooSmall,
  MissingHessian,
  MissingField,
  InvalidSpec,
  OutOfDomain,
  DifferentiationUnstable,
  GeodesicLeftDomain,
  JacobianSingular,
  SupportTooLarge,
  PositivityViolated,
  TimeTooLarge,
  QuadratureNotConverged,
  IllConditionedFit,
  NoiseDominates,
  VolumeTooLarge,
  NonPositiveVolume,
  LevelSetDegenerate,
  NotConverged,
  GammaOutOfRange,
  ConfigInvalid,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers can
/// branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace curvex
