#pragma once

#include <stdexcept>
#include <string>

namespace tdfdr {

// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-contract input (bad files, dimensions, flags).
// The CLI maps these to exit code 2.
class InputError : public Error {
public:
  using Error::Error;
};

// Well-formed input that does not carry enough statistical information
// (too few points, no targets, ...). The CLI maps these to exit code 3.
class StatError : public Error {
public:
  using Error::Error;
};

#define TDFDR_DEFINE_ERROR(name, base)                                        \
  class name : public base {                                                  \
  public:                                                                     \
    using base::base;                                                         \
  }

TDFDR_DEFINE_ERROR(NonFiniteInput, InputError);
TDFDR_DEFINE_ERROR(EmptyInput, InputError);
TDFDR_DEFINE_ERROR(DimensionError, InputError);
TDFDR_DEFINE_ERROR(BadScenario, InputError);
TDFDR_DEFINE_ERROR(NonPositiveBandwidth, InputError);
TDFDR_DEFINE_ERROR(AllZeroWeights, InputError);
TDFDR_DEFINE_ERROR(SingularGram, InputError);

TDFDR_DEFINE_ERROR(DegenerateVariance, StatError);
TDFDR_DEFINE_ERROR(TooFewPoints, StatError);
TDFDR_DEFINE_ERROR(NoTargets, StatError);
TDFDR_DEFINE_ERROR(TooFewTargets, StatError);
TDFDR_DEFINE_ERROR(TooFewDecoys, StatError);
TDFDR_DEFINE_ERROR(TooFewInClass, StatError);

TDFDR_DEFINE_ERROR(FactorizationError, Error);
TDFDR_DEFINE_ERROR(NoConvergence, Error);

#undef TDFDR_DEFINE_ERROR

} // namespace tdfdr
