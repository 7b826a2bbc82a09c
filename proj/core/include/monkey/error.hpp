// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace monkey {

/// Base error type. Every failure carries the name of the module it came
/// from so callers (and the CLI) can report where things went wrong.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& message)
        : std::runtime_error("[" + module + "] " + message), module_(std::move(module)) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

struct ShapeError : Error {
    ShapeError(const std::string& module, const std::string& message) : Error(module, message) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& message) : Error("config", message) {}
};

// Checkpoint loading failures are distinct types so corrupt, stale and
// truncated files can be told apart.
struct BadMagicError : Error {
    explicit BadMagicError(const std::string& message) : Error("io", message) {}
};

struct VersionError : Error {
    explicit VersionError(const std::string& message) : Error("io", message) {}
};

struct CrcError : Error {
    explicit CrcError(const std::string& message) : Error("io", message) {}
};

struct TruncatedFileError : Error {
    explicit TruncatedFileError(const std::string& message) : Error("io", message) {}
};

/// Mask derivation failure (missing records, degenerate map, empty mask).
struct MaskError : Error {
    explicit MaskError(const std::string& message) : Error("mask", message) {}
};

}  // namespace monkey
