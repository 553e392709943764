#ifndef SCASEG_ERROR_HPP_
#define SCASEG_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace scaseg {

// All library errors carry a short category keyword so the CLI can emit a
// machine-parsable "ERROR <category>: <message>" line.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

// Tensor/parameter dimensions do not agree. Messages name both shapes.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error("shape", message) {}
};

// Invalid configuration value. Messages name the offending field.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

// Invalid data content (bad label value, missing file listed in a manifest).
class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error("data", message) {}
};

// Malformed on-disk format (PPM/PGM header, checkpoint magic).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message) : Error("format", message) {}
};

// API misuse (stale cache, index out of range, iter > max_iter).
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message) : Error("usage", message) {}
};

// Numerical failure (training loss diverged).
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message) : Error("numeric", message) {}
};

}  // namespace scaseg

#endif  // SCASEG_ERROR_HPP_
