#pragma once

#include <stdexcept>
#include <string>

namespace mhla {

/// Caller violated a documented precondition (dimension mismatch, bad range).
struct ContractError : std::invalid_argument {
    explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

/// Input data is malformed (non-finite entries, empty dataset, bad file contents).
struct InputError : std::invalid_argument {
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical routine failed to produce a usable result (non-convergence, divergence).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Argument lies outside the mathematical domain of the operation.
struct DomainError : std::domain_error {
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// A program cannot be lowered to attention heads.
struct CompileError : std::runtime_error {
    explicit CompileError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mhla
