#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chainstate {

enum class ErrorKind {
    MissingTaskMarker,
    ParseFailure,
    BackendError,
    ReplayMiss,
    UnknownItem,
    NoItemAtDepth,
    EpisodeFinished,
    TooLongIrreducible,
    EmptyInput,
    NoStateVariant,
    Validation,
    UnrecognizedAction,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Every recoverable failure in the library is reported through this type;
/// callers switch on kind() rather than on the message text.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace chainstate
