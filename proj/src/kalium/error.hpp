#pragma once

#include <stdexcept>
#include <string>

namespace kalium {

// Numeric values are part of the C API and the CLI exit-code contract.
enum class ErrorKind : int {
  Validation = 1,
  Io = 2,
  Internal = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace kalium
