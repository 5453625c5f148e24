#include "polyqe/sql/lexer.hpp"

#include <cctype>

namespace pqe::sql {

namespace {

bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

std::vector<Token> lex(const std::string& input) {
  std::vector<Token> out;
  size_t i = 0;
  int line = 1, col = 1;

  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (i < input.size() && input[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };

  while (i < input.size()) {
    char c = input[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    // -- line comment
    if (c == '-' && i + 1 < input.size() && input[i + 1] == '-') {
      while (i < input.size() && input[i] != '\n') advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.column = col;
    if (ident_start(c)) {
      size_t start = i;
      while (i < input.size() && ident_char(input[i])) advance(1);
      t.kind = TokenKind::Ident;
      t.text = input.substr(start, i - start);
      for (auto& ch : t.text) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      out.push_back(std::move(t));
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < input.size() && std::isdigit(static_cast<unsigned char>(input[i + 1])))) {
      size_t start = i;
      bool saw_dot = false, saw_exp = false;
      while (i < input.size()) {
        char d = input[i];
        if (std::isdigit(static_cast<unsigned char>(d))) {
          advance(1);
        } else if (d == '.' && !saw_dot && !saw_exp) {
          // Don't swallow a qualified-name dot: 1.foo is not a number.
          if (i + 1 < input.size() && ident_start(input[i + 1])) break;
          saw_dot = true;
          advance(1);
        } else if ((d == 'e' || d == 'E') && !saw_exp && i + 1 < input.size() &&
                   (std::isdigit(static_cast<unsigned char>(input[i + 1])) ||
                    ((input[i + 1] == '+' || input[i + 1] == '-') && i + 2 < input.size() &&
                     std::isdigit(static_cast<unsigned char>(input[i + 2]))))) {
          saw_exp = true;
          advance(1);
          if (input[i] == '+' || input[i] == '-') advance(1);
        } else {
          break;
        }
      }
      t.kind = TokenKind::Number;
      t.text = input.substr(start, i - start);
      out.push_back(std::move(t));
      continue;
    }
    if (c == '\'') {
      advance(1);
      std::string s;
      bool closed = false;
      while (i < input.size()) {
        if (input[i] == '\'') {
          if (i + 1 < input.size() && input[i + 1] == '\'') {
            s.push_back('\'');
            advance(2);
          } else {
            advance(1);
            closed = true;
            break;
          }
        } else {
          s.push_back(input[i]);
          advance(1);
        }
      }
      if (!closed) throw ParseError("unterminated string literal", t.line, t.column);
      t.kind = TokenKind::String;
      t.text = std::move(s);
      out.push_back(std::move(t));
      continue;
    }
    if (c == '"') {
      advance(1);
      std::string s;
      bool closed = false;
      while (i < input.size()) {
        if (input[i] == '"') {
          if (i + 1 < input.size() && input[i + 1] == '"') {
            s.push_back('"');
            advance(2);
          } else {
            advance(1);
            closed = true;
            break;
          }
        } else {
          s.push_back(input[i]);
          advance(1);
        }
      }
      if (!closed) throw ParseError("unterminated quoted identifier", t.line, t.column);
      if (s.empty()) throw ParseError("empty quoted identifier", t.line, t.column);
      t.kind = TokenKind::QuotedIdent;
      t.text = std::move(s);
      out.push_back(std::move(t));
      continue;
    }
    // multi-char operators
    if ((c == '<' && i + 1 < input.size() && (input[i + 1] == '=' || input[i + 1] == '>')) ||
        (c == '>' && i + 1 < input.size() && input[i + 1] == '=') ||
        (c == '!' && i + 1 < input.size() && input[i + 1] == '=')) {
      t.kind = TokenKind::Symbol;
      t.text = input.substr(i, 2);
      advance(2);
      if (t.text == "!=") t.text = "<>";
      out.push_back(std::move(t));
      continue;
    }
    static const std::string singles = "(),.;*+-/<>=";
    if (singles.find(c) != std::string::npos) {
      t.kind = TokenKind::Symbol;
      t.text = std::string(1, c);
      advance(1);
      out.push_back(std::move(t));
      continue;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", line, col);
  }

  Token end;
  end.kind = TokenKind::End;
  end.line = line;
  end.column = col;
  out.push_back(end);
  return out;
}

}  // namespace pqe::sql
