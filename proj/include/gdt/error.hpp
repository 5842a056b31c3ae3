#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gdt {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or shape disagreement between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration value (dims, lambda, step sizes, config keys).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input outside an operation's domain (negative distance, single-class pair list).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A vector whose norm is too small for a cosine to be defined.
class DegenerateVector : public Error {
 public:
  explicit DegenerateVector(std::size_t index)
      : Error("degenerate (near-zero norm) vector at index " + std::to_string(index)),
        index_(index) {}
  explicit DegenerateVector(const std::string& what) : Error(what) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_ = static_cast<std::size_t>(-1);
};

/// Malformed text input; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Rows that parse but disagree with the file's schema.
class SchemaError : public ParseError {
 public:
  using ParseError::ParseError;
};

/// Malformed or truncated binary (IDX) file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Gradient descent produced a non-finite objective or a collapsed output.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, std::size_t epoch)
      : Error("training diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace gdt
