// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace rssnet {

// Every error raised by the library derives from Error. The CLI maps the
// concrete type to a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// File with no data lines.
class EmptyInputError : public ParseError {
 public:
  using ParseError::ParseError;
};

// Stored digest disagrees with the bytes read.
class ChecksumError : public ParseError {
 public:
  using ParseError::ParseError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, failed probes, undefined ratios.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Config-hash / format-version mismatches and integrity failures.
// Quantity undefined for the given input (zero-power reference, silent signal).
class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Config-hash / format-version mismatches and integrity failures.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

// Violated call contracts (e.g. backward from a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace rssnet
