#pragma once

#include <stdexcept>
#include <string>

namespace pqe {

enum class ErrorKind {
  Parse,      // SQL / pipeline / key-expression syntax
  Path,       // malformed document path
  Coercion,   // value does not fit the declared type
  Catalog,    // DDL and name-resolution failures
  Plan,       // binding and planning failures
  Execution,  // runtime operator failures
  Store,      // store-level I/O and data failures
  Io,         // file and persistence failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Parse errors carry the source position of the offending token.
class ParseError : public Error {
 public:
  ParseError(std::string message, int line, int column)
      : Error(ErrorKind::Parse, std::move(message)), line_(line), column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace pqe
