#pragma once

#include <stdexcept>
#include <string>

namespace sleepgrant {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Invalid experiment configuration. Carries the offending key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string key, const std::string& message)
        : std::invalid_argument(key + ": " + message), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Caller broke an API contract (e.g. updating an arm that was not granted).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Filesystem or stream failure while writing run artifacts.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sleepgrant
