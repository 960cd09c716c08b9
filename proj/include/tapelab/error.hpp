#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tapelab {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter is outside its admissible range.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input data is malformed (non-finite values, inconsistent lengths, missing records).
class InvalidData : public Error {
 public:
  using Error::Error;
};

/// The input is well-formed but makes the operation undefined (flat profile, zero-norm target).
class DegenerateInput : public InvalidData {
 public:
  using InvalidData::InvalidData;
};

/// CSV/JSON/checkpoint parse failure. Row and column are 1-based; 0 means "not applicable".
class ParseError : public InvalidData {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : InvalidData(format(what, row, column)), row_(row), column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t row, std::size_t column) {
    std::string out = what;
    if (row > 0) out += " (row " + std::to_string(row);
    if (column > 0) out += (row > 0 ? ", column " : " (column ") + std::to_string(column);
    if (row > 0 || column > 0) out += ")";
    return out;
  }

  std::size_t row_;
  std::size_t column_;
};

/// A configured resource limit would be exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes do not chain.
class ShapeError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Training produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace tapelab
