#pragma once

#include <stdexcept>
#include <string>

namespace mrisim {

// Exit-code taxonomy used by the CLI: config errors map to 2, missing
// upstream artifacts to 3, numerical divergence to 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DependencyError : std::runtime_error {
    explicit DependencyError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SizingError : std::runtime_error {
    explicit SizingError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor-file load failures, distinguished per failure mode.
struct TensorIoError : std::runtime_error {
    explicit TensorIoError(const std::string& msg) : std::runtime_error(msg) {}
};
struct BadMagicError : TensorIoError {
    explicit BadMagicError(const std::string& msg) : TensorIoError(msg) {}
};
struct VersionError : TensorIoError {
    explicit VersionError(const std::string& msg) : TensorIoError(msg) {}
};
struct TruncatedError : TensorIoError {
    explicit TruncatedError(const std::string& msg) : TensorIoError(msg) {}
};

}  // namespace mrisim
