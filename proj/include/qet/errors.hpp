#pragma once

#include <stdexcept>
#include <string>

namespace qet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define QET_DEFINE_ERROR(Name)                      \
    class Name : public Error {                     \
    public:                                         \
        explicit Name(const std::string& what_arg)  \
            : Error(#Name ": " + what_arg) {}       \
    }

QET_DEFINE_ERROR(NotHermitian);
QET_DEFINE_ERROR(ConvergenceFailure);
QET_DEFINE_ERROR(NonFiniteInput);
QET_DEFINE_ERROR(ShapeMismatch);
QET_DEFINE_ERROR(BlockOutOfRange);
QET_DEFINE_ERROR(IndexOutOfRange);
QET_DEFINE_ERROR(InvalidProfile);
QET_DEFINE_ERROR(InvalidDims);
QET_DEFINE_ERROR(InvalidParams);
QET_DEFINE_ERROR(HypothesisViolated);
QET_DEFINE_ERROR(ResonantSpectrum);
QET_DEFINE_ERROR(ExpansionTooLarge);
QET_DEFINE_ERROR(DomainViolation);
QET_DEFINE_ERROR(ConfigError);
QET_DEFINE_ERROR(IoError);

#undef QET_DEFINE_ERROR

}  // namespace qet
