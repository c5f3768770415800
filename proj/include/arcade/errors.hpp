#pragma once

#include <stdexcept>
#include <string>

namespace arcade {

// Bad configuration (invalid GridSpec, malformed env file, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line the parser choked on.
class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& reason)
        : std::runtime_error("line " + std::to_string(line) + ": " + reason), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Linear-algebra failure (factorization did not go positive definite even
// after jitter escalation); message carries condition diagnostics.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainError : public std::runtime_error {
public:
    TrainError(int epoch, const std::string& reason)
        : std::runtime_error("epoch " + std::to_string(epoch) + ": " + reason), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

enum class WireErrorKind {
    LengthOverflow,
    UnknownVersion,
    UnknownKind,
    Truncated,
    MalformedPayload,
};

class WireError : public std::runtime_error {
public:
    WireError(WireErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    WireErrorKind kind() const { return kind_; }

private:
    WireErrorKind kind_;
};

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace arcade
