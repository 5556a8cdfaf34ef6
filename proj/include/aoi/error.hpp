#pragma once

#include <stdexcept>
#include <string>

namespace aoi {

/// Error categories shared by the C++ core, the C API status codes, and the
/// CLI exit-code contract.
enum class ErrorCode {
    kInvalidArgument,
    kParse,
    kValidation,
    kNotErgodic,
    kUnstable,
    kOutOfRegion,
    kSimGuard,
    kIo,
    kInternal,
};

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::kInvalidArgument: return "invalid_argument";
        case ErrorCode::kParse: return "parse";
        case ErrorCode::kValidation: return "validation";
        case ErrorCode::kNotErgodic: return "not_ergodic";
        case ErrorCode::kUnstable: return "unstable";
        case ErrorCode::kOutOfRegion: return "out_of_region";
        case ErrorCode::kSimGuard: return "sim_guard";
        case ErrorCode::kIo: return "io";
        case ErrorCode::kInternal: return "internal";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace aoi
