#pragma once

#include <stdexcept>
#include <string>

namespace stel {

// Invalid configuration or misuse of an API contract (bad grid size, unknown
// catalog label, out-of-range index, ...). CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite state encountered during integration or estimation.
class NumericsError : public std::runtime_error {
public:
    explicit NumericsError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace stel
