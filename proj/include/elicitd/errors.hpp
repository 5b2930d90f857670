#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace elicitd {

// Root of every error the library raises. Each subclass maps onto one CLI
// exit code (see cli::exit_code_for).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Missing column or field in an input schema.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& what, std::string column)
      : Error(what), column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

// Q has mass where P has none.
class SupportError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite value in a forward/backward pass. `epoch` is 0 when raised
// outside of training.
class NumericsError : public Error {
 public:
  explicit NumericsError(const std::string& what, std::size_t epoch = 0)
      : Error(what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace elicitd
