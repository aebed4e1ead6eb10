#pragma once

#include <stdexcept>
#include <string>

namespace shiftsr {

/// Invalid configuration (bad field value, unknown key, missing file). CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor shape mismatch between operands.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Index (e.g. timestep) out of range.
class IndexError : public std::runtime_error {
public:
    explicit IndexError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite value during training; carries the name of the offending term.
class TrainingAbort : public std::runtime_error {
public:
    TrainingAbort(const std::string& term, const std::string& msg)
        : std::runtime_error("training aborted on non-finite term '" + term + "': " + msg),
          term_(term) {}
    const std::string& term() const { return term_; }

private:
    std::string term_;
};

/// Non-finite intermediate during sampling; carries the offending timestep.
class SamplingAbort : public std::runtime_error {
public:
    SamplingAbort(int t, const std::string& msg)
        : std::runtime_error("sampling aborted at t=" + std::to_string(t) + ": " + msg), t_(t) {}
    int t() const { return t_; }

private:
    int t_;
};

/// Dataset or file I/O failure.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace shiftsr
