#pragma once

#include <stdexcept>
#include <string>

namespace crowd {

/// Invalid parameter values or scenario contents.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed scenario / log / grid text. `where` names the line or field.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string where, const std::string& what)
        : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
    const std::string& where() const { return where_; }

private:
    std::string where_;
};

/// A behavior command that the current phase does not accept.
class BehaviorBusy : public std::runtime_error {
public:
    BehaviorBusy() : std::runtime_error("behavior busy") {}
};

}  // namespace crowd
