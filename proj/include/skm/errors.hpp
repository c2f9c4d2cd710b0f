#pragma once

#include <stdexcept>
#include <string>

namespace skm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

class DuplicateEntryError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Malformed or version-mismatched input file / stream.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Internal numerical corruption (non-finite scores, stalled iterations).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A resource guard tripped (planner visited-set cap, iteration caps).
class ResourceError : public Error {
 public:
  using Error::Error;
};

}  // namespace skm
