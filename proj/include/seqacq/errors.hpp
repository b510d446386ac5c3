#pragma once

#include <stdexcept>
#include <string>

namespace seqacq {

// Root of every error raised by the library. Subclasses name the failing
// contract so callers can branch on category without parsing messages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SEQACQ_DEFINE_ERROR(Name)          \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

SEQACQ_DEFINE_ERROR(ShapeError);
SEQACQ_DEFINE_ERROR(ContractError);
SEQACQ_DEFINE_ERROR(ParameterError);
SEQACQ_DEFINE_ERROR(TrainingError);
SEQACQ_DEFINE_ERROR(CheckpointError);
SEQACQ_DEFINE_ERROR(IngestionError);
SEQACQ_DEFINE_ERROR(SpecError);
SEQACQ_DEFINE_ERROR(StratificationError);
SEQACQ_DEFINE_ERROR(PairingError);
SEQACQ_DEFINE_ERROR(EnvironmentError);
SEQACQ_DEFINE_ERROR(MetricError);
SEQACQ_DEFINE_ERROR(ConfigError);

#undef SEQACQ_DEFINE_ERROR

}  // namespace seqacq
