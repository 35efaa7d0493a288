#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wsnip {

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class InvalidCellError : public Error {
 public:
  using Error::Error;
};

class CoincidentAtomsError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class DataIntegrityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SamplerError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// A checkpoint array that does not fit the model it is loaded into.
class IncompatibleCheckpointError : public Error {
 public:
  IncompatibleCheckpointError(std::string array, const std::string& what)
      : Error("incompatible checkpoint array '" + array + "': " + what), array_(std::move(array)) {}
  const std::string& array() const noexcept { return array_; }

 private:
  std::string array_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace wsnip
