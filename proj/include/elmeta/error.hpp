#pragma once

#include <stdexcept>
#include <string>

namespace elmeta {

enum class ErrorCode {
    EmptyDataset,
    TooFewStudies,
    DegenerateInterval,
    MixedLevels,
    BadLevel,
    BadSampleSize,
    BadArgument,
    InfeasibleHull,
    NoConvergence,
    NoFeasibleTheta,
    ParseError,
    IoError,
    BadConfig,
};

const char* to_string(ErrorCode code) noexcept;

/// Input-validation errors are distinguished from numeric failures so callers
/// (the CLI in particular) can map them onto different exit codes.
bool is_input_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace elmeta
