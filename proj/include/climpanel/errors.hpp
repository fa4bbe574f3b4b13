#pragma once

#include <stdexcept>
#include <string>

namespace climpanel {

enum class ErrorKind {
    missing_data,
    invalid_weights,
    invalid_bins,
    invalid_data,
    invalid_argument,
    too_few_observations,
    too_few_groups,
    convergence_failure,
    collinear_design,
    degenerate_clustering,
    numerical_error,
    missing_baseline,
    out_of_range,
    incomplete_region,
    uniqueness_violation,
    schema_violation,
    config_error,
    io_error,
};

const char* to_string(ErrorKind kind);

// Maps an error to the CLI exit code contract: 2 validation, 3 numerical, 4 config.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    // The message without the kind prefix.
    const std::string& detail() const noexcept { return detail_; }

  private:
    ErrorKind kind_;
    std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace climpanel
