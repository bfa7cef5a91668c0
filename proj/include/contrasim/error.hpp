#pragma once

#include <stdexcept>
#include <string>

namespace contrasim {

// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (dataset lines, store files, configs).
class DataError : public Error {
public:
    using Error::Error;
};

// Precondition violated by a caller (bad shapes, out-of-range arguments).
class ArgumentError : public Error {
public:
    using Error::Error;
};

// An external provider (embedding / generation / discriminator) failed.
class ProviderError : public Error {
public:
    using Error::Error;
};

// Numerical breakdown: zero norms, non-finite losses or gradients.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace contrasim
