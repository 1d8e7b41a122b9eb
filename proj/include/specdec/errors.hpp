#pragma once

#include <stdexcept>
#include <string>

namespace specdec {

struct MissingContextError : std::runtime_error {
    explicit MissingContextError(const std::string & what) : std::runtime_error(what) {}
};

struct ZeroResidualError : std::runtime_error {
    explicit ZeroResidualError(const std::string & what) : std::runtime_error(what) {}
};

struct BudgetExceededError : std::runtime_error {
    explicit BudgetExceededError(const std::string & what) : std::runtime_error(what) {}
};

struct AllRejectedError : std::runtime_error {
    explicit AllRejectedError(const std::string & what) : std::runtime_error(what) {}
};

struct DegenerateFitError : std::runtime_error {
    explicit DegenerateFitError(const std::string & what) : std::runtime_error(what) {}
};

struct ModelLoadError : std::runtime_error {
    explicit ModelLoadError(const std::string & what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string & what) : std::runtime_error(what) {}
};

} // namespace specdec
