#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "polyqe/value.hpp"

namespace pqe {

// Mini-language for computing composite row keys from column values:
//   expr  := term ('+' term)*
//   term  := textLiteral | chain
//   chain := (ident | 'str(' ident ')') ('.zfill(' posint ')')*
// '+' is text concatenation; zfill left-pads with '0' to the given width.
struct KeyTerm {
  enum class Kind { Literal, Column };
  Kind kind = Kind::Column;
  std::string text;            // literal text, or column name
  std::vector<int> zfills;     // applied in order
};

struct CompositeKeySpec {
  std::vector<std::string> columns;  // declared before ':'
  std::vector<KeyTerm> terms;
  std::string source;                // original option value, for re-rendering
};

// Parses `col1,col2,...:expr`; every identifier in the expression must appear
// in the column list.
CompositeKeySpec parse_key_spec(const std::string& option_value);

// Evaluates the key. All spec columns must be bound to non-Null values.
std::string eval_key(const CompositeKeySpec& spec, const std::map<std::string, Value>& bindings);

// Returns the key when the equality bindings cover every spec column,
// otherwise nullopt (caller falls back to a scan).
std::optional<std::string> key_from_equalities(const CompositeKeySpec& spec,
                                               const std::map<std::string, Value>& eq_filters);

}  // namespace pqe
