#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sno {

enum class ErrorKind {
    DegenerateGrid,
    DegreeTooHigh,
    Underdetermined,
    IllConditioned,
    ShapeMismatch,
    ExtrapolationOutOfRange,
    NumericalFault,
    ZeroTarget,
    GradientMissing,
    NoTape,
    ConfigError,
    SolverDiverged,
    CFLViolation,
    DegenerateChannel,
    AlreadyNormalized,
    FormatError,
    ChecksumError,
    EmptySplit,
    GridIncompatible,
    LengthNotPow2,
    ClockTooCoarse,
    ParseError,
    IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

    ErrorKind kind() const noexcept { return kind_; }
    // Message without the kind prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

}  // namespace sno
