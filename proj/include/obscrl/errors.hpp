#pragma once

#include <stdexcept>
#include <string>

namespace obscrl {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Graph or model structure is invalid (cycle, bad index, arity mismatch, ...).
class StructuralError : public Error {
public:
    using Error::Error;
};

// Operand shapes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Input is degenerate for the requested statistic (constant column, identical rows).
class DegenerateError : public Error {
public:
    using Error::Error;
};

// A numerical routine failed (factorization, resampling cap).
class NumericError : public Error {
public:
    using Error::Error;
};

// The orthogonality constraints leave no free direction on the sphere.
class NoFreeDirectionError : public Error {
public:
    using Error::Error;
};

// Reading or writing an artifact failed.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace obscrl
