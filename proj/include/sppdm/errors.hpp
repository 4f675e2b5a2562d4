#ifndef SPPDM_ERRORS_HPP
#define SPPDM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sppdm {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define SPPDM_DEFINE_ERROR(Name)              \
  struct Name : Error {                       \
    using Error::Error;                       \
  }

// graph
SPPDM_DEFINE_ERROR(DisconnectedGraph);
SPPDM_DEFINE_ERROR(SelfLoop);
SPPDM_DEFINE_ERROR(DuplicateEdge);
SPPDM_DEFINE_ERROR(NonFinite);

// oracles
SPPDM_DEFINE_ERROR(DimensionMismatch);
SPPDM_DEFINE_ERROR(EmptyBatch);
SPPDM_DEFINE_ERROR(BadParameters);
SPPDM_DEFINE_ERROR(NotPolyhedral);
SPPDM_DEFINE_ERROR(BadSizes);
SPPDM_DEFINE_ERROR(OracleFailure);

// solver
SPPDM_DEFINE_ERROR(NonFiniteIterate);
SPPDM_DEFINE_ERROR(PreconditionViolated);

// metrics
SPPDM_DEFINE_ERROR(InfeasibleParameters);
SPPDM_DEFINE_ERROR(InnerSolverDiverged);
SPPDM_DEFINE_ERROR(InsufficientData);

// netsim
SPPDM_DEFINE_ERROR(LocalityViolation);
SPPDM_DEFINE_ERROR(MissingPayload);
SPPDM_DEFINE_ERROR(DuplicatePayload);

// harness
SPPDM_DEFINE_ERROR(ParseError);
SPPDM_DEFINE_ERROR(ValidationError);
SPPDM_DEFINE_ERROR(MissingData);

#undef SPPDM_DEFINE_ERROR

}  // namespace sppdm

#endif  // SPPDM_ERRORS_HPP
