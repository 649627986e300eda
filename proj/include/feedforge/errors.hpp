#pragma once

#include <stdexcept>
#include <string>

namespace feedforge {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Unreadable or unwritable file.
class IoError : public Error {
public:
    using Error::Error;
};

// Invalid configuration: unknown source, missing field, impossible quota.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Caller violated an operation's precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

// A value parsed correctly but lies outside its permitted scale.
class RangeError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

} // namespace feedforge
