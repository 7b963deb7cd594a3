#pragma once

#include <stdexcept>
#include <string>

namespace foodaccess {

// Input/file/schema problems (CLI exit code 2).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures such as non-finite likelihoods (CLI exit code 3).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace foodaccess
