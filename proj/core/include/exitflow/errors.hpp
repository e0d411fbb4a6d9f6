#pragma once

#include <stdexcept>
#include <string>

namespace exitflow {

/// Base class for all library failures that carry a diagnostic message.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define EXITFLOW_DEFINE_ERROR(Name)              \
  struct Name : Error {                          \
    using Error::Error;                          \
    Name() : Error(#Name) {}                     \
  }

// geometry
EXITFLOW_DEFINE_ERROR(NotOnBoundary);
EXITFLOW_DEFINE_ERROR(OutsideTube);
EXITFLOW_DEFINE_ERROR(CostTooSteep);

// dynamics
EXITFLOW_DEFINE_ERROR(DeltaTooLarge);
EXITFLOW_DEFINE_ERROR(NegativeDensity);
EXITFLOW_DEFINE_ERROR(GridMismatch);
EXITFLOW_DEFINE_ERROR(BadZeta);

// hjb
EXITFLOW_DEFINE_ERROR(CFLViolation);
EXITFLOW_DEFINE_ERROR(NonConvergence);
EXITFLOW_DEFINE_ERROR(DegenerateGradient);

// trajectories
EXITFLOW_DEFINE_ERROR(DegenerateStart);
EXITFLOW_DEFINE_ERROR(StallDetected);
EXITFLOW_DEFINE_ERROR(NoExit);
EXITFLOW_DEFINE_ERROR(ShootingFailed);
EXITFLOW_DEFINE_ERROR(NotExited);

// transport
EXITFLOW_DEFINE_ERROR(EpsilonTooLarge);
EXITFLOW_DEFINE_ERROR(JacobianBlowup);
EXITFLOW_DEFINE_ERROR(BadExponent);

// equilibrium / config
EXITFLOW_DEFINE_ERROR(UnnormalizedDensity);
EXITFLOW_DEFINE_ERROR(ConfigInvalid);

#undef EXITFLOW_DEFINE_ERROR

}  // namespace exitflow
