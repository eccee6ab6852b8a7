#pragma once

#include <stdexcept>
#include <string>

namespace cflow {

enum class ErrorKind {
    invalid_argument,
    geometry_mismatch,
    singular_multiplier,
    singular_operator,
    series_divergence,
    outside_ball,
    log_branch,
    cfl_violation,
    diagnostics_failure,
    non_finite,
    divergence,
    max_iterations,
    config,
    io
};

const char* to_string(ErrorKind k);

// Every failure carries the module it came from so the CLI can report it.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string module, const std::string& what)
        : std::runtime_error(module + ": " + what), kind_(kind), module_(std::move(module)) {}
    ErrorKind kind() const { return kind_; }
    const std::string& module() const { return module_; }

private:
    ErrorKind kind_;
    std::string module_;
};

}  // namespace cflow
