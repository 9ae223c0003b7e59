#pragma once

#include <stdexcept>
#include <string>

namespace headlens {

// Broad failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kShape,         // dimension disagreement between operands
  kValidation,    // value outside its domain (NaN, out-of-range index, ...)
  kCompleteness,  // required heads/records missing
  kFormat,        // malformed file contents
  kIo,            // file could not be opened/written
  kEmptyInput,    // nothing to process
  kConfig,        // bad configuration or unknown name
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kCompleteness: return "completeness error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kEmptyInput: return "empty input";
    case ErrorKind::kConfig: return "configuration error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::kShape, what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::kValidation, what) {}
};

class CompletenessError : public Error {
 public:
  explicit CompletenessError(const std::string& what) : Error(ErrorKind::kCompleteness, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::kFormat, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

class EmptyInputError : public Error {
 public:
  explicit EmptyInputError(const std::string& what) : Error(ErrorKind::kEmptyInput, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

}  // namespace headlens
