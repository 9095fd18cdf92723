#include "sno/error.hpp"

namespace sno {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::DegenerateGrid: return "DegenerateGrid";
    case ErrorKind::DegreeTooHigh: return "DegreeTooHigh";
    case ErrorKind::Underdetermined: return "Underdetermined";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::ExtrapolationOutOfRange: return "ExtrapolationOutOfRange";
    case ErrorKind::NumericalFault: return "NumericalFault";
    case ErrorKind::ZeroTarget: return "ZeroTarget";
    case ErrorKind::GradientMissing: return "GradientMissing";
    case ErrorKind::NoTape: return "NoTape";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::SolverDiverged: return "SolverDiverged";
    case ErrorKind::CFLViolation: return "CFLViolation";
    case ErrorKind::DegenerateChannel: return "DegenerateChannel";
    case ErrorKind::AlreadyNormalized: return "AlreadyNormalized";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::ChecksumError: return "ChecksumError";
    case ErrorKind::EmptySplit: return "EmptySplit";
    case ErrorKind::GridIncompatible: return "GridIncompatible";
    case ErrorKind::LengthNotPow2: return "LengthNotPow2";
    case ErrorKind::ClockTooCoarse: return "ClockTooCoarse";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace sno
