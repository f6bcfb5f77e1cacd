#pragma once

#include <stdexcept>
#include <string>

namespace famf {

// Process exit codes used by the CLI.
enum class ExitCode : int {
    success = 0,
    input_error = 1,
    non_convergence = 2,
    degenerate_calibration = 3,
};

class Error : public std::runtime_error {
public:
    Error(const std::string& what, ExitCode code)
        : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

// Malformed, misaligned or unusable input (files, specs, options).
class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(what, ExitCode::input_error) {}
};

// A covariance matrix or linear system that should be positive definite is not.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(what, ExitCode::input_error) {}
};

class ConvergenceError : public Error {
public:
    explicit ConvergenceError(const std::string& what) : Error(what, ExitCode::non_convergence) {}
};

// Metadata cannot produce a usable weight vector.
class DegenerateError : public Error {
public:
    explicit DegenerateError(const std::string& what)
        : Error(what, ExitCode::degenerate_calibration) {}
};

}  // namespace famf
