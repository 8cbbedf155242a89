#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ripple {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Configuration.
class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)) {}

    /// Name of the offending key, without its section prefix.
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Change context.
class NotFound : public Error {
public:
    using Error::Error;
};

class NetworkError : public Error {
public:
    NetworkError(const std::string& message, int attempts)
        : Error(message + " (after " + std::to_string(attempts) + " attempts)"), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

class DetachedPr : public Error {
public:
    using Error::Error;
};

class BlameUnavailable : public Error {
public:
    using Error::Error;
};

// LLM access.
class UnknownRole : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    explicit TransportError(const std::string& message, bool retryable = true)
        : Error(message), retryable_(retryable) {}
    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

class ScriptExhausted : public TransportError {
public:
    explicit ScriptExhausted(const std::string& message) : TransportError(message, false) {}
};

class ProviderRefusal : public Error {
public:
    using Error::Error;
};

class LlmFormatError : public Error {
public:
    using Error::Error;
};

class EmbeddingError : public Error {
public:
    using Error::Error;
};

// Execution.
class BuildFailure : public Error {
public:
    using Error::Error;
};

class DriverError : public Error {
public:
    using Error::Error;
};

/// Raised when a retrieval result violates the creation-time cutoff.
class LeakageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace ripple
