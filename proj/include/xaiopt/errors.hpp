#pragma once

#include <stdexcept>
#include <string>

namespace xaiopt {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range input data (texts, spans, datasets, maps).
class InputError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration document or method parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A method needs model internals the bound model does not expose.
class CapabilityError : public Error {
public:
    using Error::Error;
};

/// Remote model unreachable or misbehaving. Retryable.
class TransportError : public Error {
public:
    using Error::Error;
};

/// The optimization run itself cannot continue.
class StudyError : public Error {
public:
    using Error::Error;
};

} // namespace xaiopt
