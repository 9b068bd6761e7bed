#pragma once

#include <stdexcept>
#include <string>

namespace semdet {

/// Base of every domain error raised by the library. The CLI maps these to
/// exit code 1; anything else escaping is a bug.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SEMDET_DEFINE_ERROR(Name)                          \
    class Name : public Error {                            \
    public:                                                \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

SEMDET_DEFINE_ERROR(PlacementFailure);
SEMDET_DEFINE_ERROR(IoFailure);
SEMDET_DEFINE_ERROR(ParseFailure);
SEMDET_DEFINE_ERROR(ValidationFailure);
SEMDET_DEFINE_ERROR(EncodeError);
SEMDET_DEFINE_ERROR(ShapeMismatch);
SEMDET_DEFINE_ERROR(NonFiniteLoss);
SEMDET_DEFINE_ERROR(VersionMismatch);
SEMDET_DEFINE_ERROR(CorruptCheckpoint);
SEMDET_DEFINE_ERROR(UnknownImage);
SEMDET_DEFINE_ERROR(InsufficientImages);

#undef SEMDET_DEFINE_ERROR

} // namespace semdet
