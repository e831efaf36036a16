#pragma once

#include <stdexcept>
#include <string>

namespace quantlearn {

/// Bad input data or configuration (malformed files, inconsistent suites).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownQuantifier : public DataError {
 public:
  explicit UnknownQuantifier(const std::string& word)
      : DataError("unknown quantifier '" + word + "'"), word_(word) {}
  const std::string& word() const noexcept { return word_; }

 private:
  std::string word_;
};

/// Ordering comparison applied to a categorical value.
class TypeMismatch : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& message, std::size_t position)
      : DataError(message + " at offset " + std::to_string(position)), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

}  // namespace quantlearn
