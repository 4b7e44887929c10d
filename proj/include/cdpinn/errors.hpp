#pragma once

#include <stdexcept>
#include <string>

namespace cdpinn {

/// Process exit codes used by the command-line driver.
enum class ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kDivergence = 3,
  kSolver = 4,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::kFailure)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

#define CDPINN_DEFINE_ERROR(Name, Code)                                      \
  class Name : public Error {                                                \
   public:                                                                   \
    explicit Name(const std::string& what) : Error(what, ExitCode::Code) {} \
  };

CDPINN_DEFINE_ERROR(ConfigError, kConfig)
CDPINN_DEFINE_ERROR(UnsupportedOrderError, kConfig)
CDPINN_DEFINE_ERROR(UnsupportedError, kConfig)
CDPINN_DEFINE_ERROR(ShapeError, kFailure)
CDPINN_DEFINE_ERROR(NumericInputError, kFailure)
CDPINN_DEFINE_ERROR(StencilError, kFailure)
CDPINN_DEFINE_ERROR(ProvenanceError, kFailure)
CDPINN_DEFINE_ERROR(CheckpointError, kFailure)
CDPINN_DEFINE_ERROR(DataError, kConfig)
CDPINN_DEFINE_ERROR(DivergenceError, kDivergence)
CDPINN_DEFINE_ERROR(SolverError, kSolver)
CDPINN_DEFINE_ERROR(StabilityError, kSolver)
CDPINN_DEFINE_ERROR(BlowUpError, kSolver)
CDPINN_DEFINE_ERROR(EstimationError, kFailure)
CDPINN_DEFINE_ERROR(MetricError, kFailure)

#undef CDPINN_DEFINE_ERROR

}  // namespace cdpinn
