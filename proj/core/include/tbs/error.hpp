#pragma once

#include <stdexcept>
#include <string>

namespace tbs {

// Base for every error thrown by the library. The CLI maps subclasses to
// stable exit codes (see tools/tbs_main.cpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// A zero extent, or an op axis with no elements.
class EmptyAxisError : public DimensionError {
public:
    using DimensionError::DimensionError;
};

class DegenerateInputError : public Error {
public:
    using Error::Error;
};

// Attention with zero context rows.
class EmptyContextError : public Error {
public:
    using Error::Error;
};

// A support mask without foreground at feature resolution.
class DegenerateSupportError : public Error {
public:
    using Error::Error;
};

class GenerationError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class TapeError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace tbs
