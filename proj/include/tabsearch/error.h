#pragma once

#include <stdexcept>
#include <string>

namespace tabsearch {

// Base for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input file could not be opened or read.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed content in an input file or wire record.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A semantic constraint on loaded data was violated (duplicate ids,
// negative grades, missing special tokens, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

}  // namespace tabsearch
