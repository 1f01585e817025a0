#pragma once

#include <stdexcept>
#include <string>

namespace saw {

// Exit codes used by the command-line tool. Every exception below maps to one.
enum class ExitCode : int {
    kOk = 0,
    kConfig = 1,
    kIo = 2,
    kNumeric = 3,
};

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, ExitCode code = ExitCode::kConfig)
        : std::runtime_error(what), code_(code) {}

    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

/// Bad argument value or violated precondition (zero quaternion, NaN input...).
class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(what) {}
};

/// Incompatible tensor shapes, joint counts, or window lengths.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(what) {}
};

class BoundsError : public Error {
public:
    explicit BoundsError(const std::string& what) : Error(what) {}
};

/// Malformed serialized record. The message carries the line and/or field path.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what, ExitCode::kConfig) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what, ExitCode::kIo) {}
};

/// Non-finite loss or score during training/evaluation.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(what, ExitCode::kNumeric) {}
};

}  // namespace saw
