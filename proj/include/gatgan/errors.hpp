#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace gatgan {

// Shapes that cannot compose. Message names the offending shapes.
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& msg) : std::invalid_argument(msg) {}
};

// API misuse: wrong call order, argument outside its documented domain.
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Malformed input file (CSV, config).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unresolvable or invalid run configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Corrupt, truncated or version-incompatible checkpoint file.
class CheckpointError : public std::runtime_error {
public:
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite math was required.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training aborted on a non-finite loss. Carries the most recent checkpoint
// path so a run can be resumed or inspected.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& msg, std::string last_checkpoint)
        : std::runtime_error(msg), last_checkpoint_(std::move(last_checkpoint)) {}

    const std::string& last_checkpoint() const { return last_checkpoint_; }

private:
    std::string last_checkpoint_;
};

}  // namespace gatgan
