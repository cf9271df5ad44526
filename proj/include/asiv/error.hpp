#pragma once

#include <stdexcept>
#include <string>

namespace asiv {

/// Base for every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on the inputs was violated.
class DomainError : public Error {
public:
    using Error::Error;
};

/// An exact enumeration was requested beyond the player cap.
class CapExceeded : public DomainError {
public:
    using DomainError::DomainError;
};

/// A file or document could not be parsed into the expected schema.
class LoadError : public Error {
public:
    using Error::Error;
};

/// The external endpoint failed or replied with something unusable.
class TransportError : public Error {
public:
    TransportError(const std::string& what, std::string raw_reply = {})
        : Error(what), raw_reply_(std::move(raw_reply)) {}

    const std::string& raw_reply() const noexcept { return raw_reply_; }

private:
    std::string raw_reply_;
};

class ProtocolVersionError : public TransportError {
public:
    using TransportError::TransportError;
};

}  // namespace asiv
