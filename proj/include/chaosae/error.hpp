#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chaosae {

/// Failure categories. The harness maps these onto process exit codes.
enum class ErrorKind {
    invalid_input,
    degenerate_input,
    numerical_blowup,
    training_diverged,
    parse_error,
    unsupported_version,
    config_error,
    io_error,
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::degenerate_input: return "degenerate_input";
    case ErrorKind::numerical_blowup: return "numerical_blowup";
    case ErrorKind::training_diverged: return "training_diverged";
    case ErrorKind::parse_error: return "parse_error";
    case ErrorKind::unsupported_version: return "unsupported_version";
    case ErrorKind::config_error: return "config_error";
    case ErrorKind::io_error: return "io_error";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class InvalidInput : public Error {
public:
    explicit InvalidInput(const std::string& what) : Error(ErrorKind::invalid_input, what) {}
};

class DegenerateInput : public Error {
public:
    explicit DegenerateInput(const std::string& what) : Error(ErrorKind::degenerate_input, what) {}
};

/// Raised when integration produces a non-finite component.
class NumericalBlowup : public Error {
public:
    NumericalBlowup(const std::string& what, std::size_t step)
        : Error(ErrorKind::numerical_blowup, what + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class TrainingDiverged : public Error {
public:
    TrainingDiverged(const std::string& what, std::size_t epoch)
        : Error(ErrorKind::training_diverged, what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t byte)
        : Error(ErrorKind::parse_error, what + " (byte " + std::to_string(byte) + ")"), byte_(byte) {}
    std::size_t byte() const noexcept { return byte_; }

private:
    std::size_t byte_;
};

class UnsupportedVersion : public Error {
public:
    explicit UnsupportedVersion(const std::string& what) : Error(ErrorKind::unsupported_version, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config_error, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io_error, what) {}
};

} // namespace chaosae
