#pragma once

#include <stdexcept>
#include <string>

namespace qtat {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define QTAT_DECLARE_ERROR(Name) \
  class Name : public Error {    \
   public:                       \
    using Error::Error;          \
  }

QTAT_DECLARE_ERROR(AdmissibilityError);
QTAT_DECLARE_ERROR(ParamError);
QTAT_DECLARE_ERROR(GridMismatch);
QTAT_DECLARE_ERROR(DivisionByZero);
QTAT_DECLARE_ERROR(NoConvergence);
QTAT_DECLARE_ERROR(ResolutionError);
QTAT_DECLARE_ERROR(DegenerateInput);
QTAT_DECLARE_ERROR(OrthogonalityError);
QTAT_DECLARE_ERROR(DimensionError);
QTAT_DECLARE_ERROR(ResonanceError);
QTAT_DECLARE_ERROR(SupportError);
QTAT_DECLARE_ERROR(NoContraction);
QTAT_DECLARE_ERROR(ZeroFieldError);
QTAT_DECLARE_ERROR(DegenerateCase);
QTAT_DECLARE_ERROR(Divergence);
QTAT_DECLARE_ERROR(ConfigError);
QTAT_DECLARE_ERROR(IoError);

#undef QTAT_DECLARE_ERROR

}  // namespace qtat
