#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace svda {

/// Failure categories raised by the library. The CLI maps them onto exit codes.
enum class ErrorKind {
  NonConvergence,
  NonPhysical,
  PatchOutsideDomain,
  SingularGram,
  RankDeficient,
  SingularProjectionGram,
  StabilityViolation,
  SingularKKT,
  DimensionMismatch,
  LookbackTooLarge,
  DivergedLoss,
  OutOfOrderRequest,
  BoundViolated,
  Config,
  Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

  /// Same kind, message prefixed with a stage tag such as "offline/pod".
  [[nodiscard]] Error tagged(std::string_view stage) const {
    return Error(kind_, std::string(stage) + ": " + detail_);
  }

 private:
  ErrorKind kind_;
  std::string detail_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::NonPhysical: return "NonPhysical";
    case ErrorKind::PatchOutsideDomain: return "PatchOutsideDomain";
    case ErrorKind::SingularGram: return "SingularGram";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::SingularProjectionGram: return "SingularProjectionGram";
    case ErrorKind::StabilityViolation: return "StabilityViolation";
    case ErrorKind::SingularKKT: return "SingularKKT";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::LookbackTooLarge: return "LookbackTooLarge";
    case ErrorKind::DivergedLoss: return "DivergedLoss";
    case ErrorKind::OutOfOrderRequest: return "OutOfOrderRequest";
    case ErrorKind::BoundViolated: return "BoundViolated";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Io: return "IoError";
  }
  return "Error";
}

}  // namespace svda
