#pragma once

#include <stdexcept>
#include <string>

namespace goalkp {

// Base class for every error the library throws.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad input: config fields, dataset schema, CLI arguments, missing files.
class ValidationError : public Error {
public:
  using Error::Error;
};

// Model output (or a wire payload) that does not match its contract.
class ParseError : public Error {
public:
  explicit ParseError(const std::string& what, std::string raw = "")
      : Error(what), raw_text(std::move(raw)) {}

  // Raw text that failed to parse, kept for diagnostics.
  std::string raw_text;
};

// Transport gave up: retries exhausted or a non-retryable status.
class TransportError : public Error {
public:
  explicit TransportError(const std::string& what, int status = 0)
      : Error(what), last_status(status) {}

  int last_status;
};

}  // namespace goalkp
