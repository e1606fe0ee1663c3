#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ftg {

// Base of every error thrown by the library. Callers that only need a
// diagnostic can catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& what);

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::string stage, long step);

  long step() const noexcept { return step_; }

 private:
  long step_;
};

class CheckpointError : public Error {
 public:
  enum class Kind { Io, MagicMismatch, Truncated, DimensionMismatch, BadMetadata };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Thrown by generators when the transport (network, process, file) fails.
// The pipeline retries these; everything else propagates.
class TransportError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ftg
