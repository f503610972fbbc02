#pragma once

#include <stdexcept>
#include <string>

namespace loadseg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input text lacks a required column or has a malformed header.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// An operation was called with arguments outside its domain (k > n, eps <= 0, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A validity index is mathematically undefined for the given labeling.
class UndefinedIndexError : public Error {
 public:
  using Error::Error;
};

/// Every candidate in a parameter sweep was degenerate.
class SweepFailure : public Error {
 public:
  using Error::Error;
};

/// Feature count or row count does not match what the operation expects.
class DimensionError : public Error {
 public:
  using Error::Error;
};

}  // namespace loadseg
