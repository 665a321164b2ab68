#ifndef RELPCANET_ERRORS_HPP
#define RELPCANET_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>

namespace relpcanet {

enum class ErrorKind {
    InvalidInput,
    NumericalFailure,
    ParseError,
    ImputationError,
    DegenerateColumn,
    DegenerateScores,
    Io,
};

inline const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "InvalidInput";
        case ErrorKind::NumericalFailure: return "NumericalFailure";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::ImputationError: return "ImputationError";
        case ErrorKind::DegenerateColumn: return "DegenerateColumn";
        case ErrorKind::DegenerateScores: return "DegenerateScores";
        case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
          kind_(kind),
          message_(std::move(message)) {}

    ErrorKind kind() const noexcept { return kind_; }

    // message without the kind prefix, for rewrapping
    const std::string& message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

}  // namespace relpcanet

#endif  // RELPCANET_ERRORS_HPP
