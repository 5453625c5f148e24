#pragma once

#include <string>
#include <vector>

#include "polyqe/error.hpp"

namespace pqe::sql {

enum class TokenKind {
  Ident,        // lowercase-folded bare identifier
  QuotedIdent,  // "..." identifier, case preserved
  Number,
  String,       // '...' literal, quotes stripped, '' unescaped
  Symbol,       // punctuation / operators
  End,
};

struct Token {
  TokenKind kind = TokenKind::End;
  std::string text;
  int line = 1;
  int column = 1;

  bool is_symbol(std::string_view s) const { return kind == TokenKind::Symbol && text == s; }
};

// Tokenizes a full statement script. Keywords are not distinguished here;
// the parser matches Ident tokens case-insensitively.
std::vector<Token> lex(const std::string& input);

}  // namespace pqe::sql
