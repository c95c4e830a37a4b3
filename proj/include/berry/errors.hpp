#pragma once

#include <stdexcept>
#include <string>

namespace berry {

// Configuration problems (bad parameters, unparsable files, schema violations).
// The CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures during a run (degeneracies, step caps, undefined phases).
// The CLI maps these to exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ModelDegeneracyError : NumericalError {
    explicit ModelDegeneracyError(const std::string& msg) : NumericalError(msg) {}
};

struct GridTooCoarseError : NumericalError {
    explicit GridTooCoarseError(const std::string& msg) : NumericalError(msg) {}
};

struct RuntimeTooLargeError : NumericalError {
    explicit RuntimeTooLargeError(const std::string& msg) : NumericalError(msg) {}
};

struct PhaseUndefinedError : NumericalError {
    explicit PhaseUndefinedError(const std::string& msg) : NumericalError(msg) {}
};

struct BranchResolutionError : NumericalError {
    explicit BranchResolutionError(const std::string& msg) : NumericalError(msg) {}
};

struct AmbiguousLiftError : NumericalError {
    explicit AmbiguousLiftError(const std::string& msg) : NumericalError(msg) {}
};

} // namespace berry
