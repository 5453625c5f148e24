#include "polyqe/keyexpr.hpp"

#include <algorithm>
#include <cctype>

namespace pqe {

namespace {

struct KeyExprCursor {
  const std::string& s;
  size_t pos = 0;

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  bool eof() {
    skip_ws();
    return pos >= s.size();
  }
  char peek() {
    skip_ws();
    return pos < s.size() ? s[pos] : '\0';
  }
  bool consume(char c) {
    skip_ws();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  bool consume_word(std::string_view w) {
    skip_ws();
    if (s.compare(pos, w.size(), w) == 0) {
      pos += w.size();
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) {
    throw Error(ErrorKind::Parse, "composite key spec: " + what + " at offset " +
                                      std::to_string(pos) + " in '" + s + "'");
  }
};

std::string parse_identifier(KeyExprCursor& c) {
  c.skip_ws();
  size_t start = c.pos;
  while (c.pos < c.s.size() &&
         (std::isalnum(static_cast<unsigned char>(c.s[c.pos])) || c.s[c.pos] == '_'))
    ++c.pos;
  if (c.pos == start) c.fail("expected identifier");
  return c.s.substr(start, c.pos - start);
}

int parse_posint(KeyExprCursor& c) {
  c.skip_ws();
  size_t start = c.pos;
  while (c.pos < c.s.size() && std::isdigit(static_cast<unsigned char>(c.s[c.pos]))) ++c.pos;
  if (c.pos == start) c.fail("expected integer");
  int v = std::stoi(c.s.substr(start, c.pos - start));
  if (v < 1) c.fail("zfill width must be >= 1");
  return v;
}

KeyTerm parse_term(KeyExprCursor& c) {
  KeyTerm term;
  if (c.peek() == '\'') {
    c.consume('\'');
    size_t start = c.pos;
    while (c.pos < c.s.size() && c.s[c.pos] != '\'') ++c.pos;
    if (c.pos >= c.s.size()) c.fail("unterminated text literal");
    term.kind = KeyTerm::Kind::Literal;
    term.text = c.s.substr(start, c.pos - start);
    ++c.pos;
    return term;
  }
  term.kind = KeyTerm::Kind::Column;
  if (c.consume_word("str(")) {
    term.text = parse_identifier(c);
    if (!c.consume(')')) c.fail("expected ')'");
  } else {
    term.text = parse_identifier(c);
  }
  while (c.consume_word(".zfill(")) {
    term.zfills.push_back(parse_posint(c));
    if (!c.consume(')')) c.fail("expected ')'");
  }
  return term;
}

std::string render_scalar(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Int64: return render_int64(v.as_int64());
    case Value::Kind::Float64: return render_double(v.as_float64());
    case Value::Kind::Text: return v.as_text();
    case Value::Kind::Bool: return v.as_bool() ? "true" : "false";
    case Value::Kind::Timestamp: return format_timestamp_micros(v.timestamp_micros());
    default:
      throw Error(ErrorKind::Execution, "composite key column bound to a non-scalar value");
  }
}

// Python-style zfill: pads after a leading sign.
std::string zfill(std::string s, int width) {
  if (static_cast<int>(s.size()) >= width) return s;
  size_t sign = (!s.empty() && (s[0] == '-' || s[0] == '+')) ? 1 : 0;
  s.insert(sign, static_cast<size_t>(width) - s.size(), '0');
  return s;
}

}  // namespace

CompositeKeySpec parse_key_spec(const std::string& option_value) {
  size_t colon = option_value.find(':');
  if (colon == std::string::npos)
    throw Error(ErrorKind::Parse, "composite key spec: expected 'col1,col2,...:expr' in '" +
                                      option_value + "'");
  CompositeKeySpec spec;
  spec.source = option_value;

  std::string cols = option_value.substr(0, colon);
  size_t start = 0;
  while (start <= cols.size()) {
    size_t comma = cols.find(',', start);
    std::string col = cols.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    col.erase(std::remove_if(col.begin(), col.end(),
                             [](unsigned char ch) { return std::isspace(ch); }),
              col.end());
    if (col.empty())
      throw Error(ErrorKind::Parse, "composite key spec: empty column name in '" + cols + "'");
    spec.columns.push_back(col);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }

  std::string expr = option_value.substr(colon + 1);
  KeyExprCursor c{expr};
  spec.terms.push_back(parse_term(c));
  while (c.consume('+')) spec.terms.push_back(parse_term(c));
  if (!c.eof()) c.fail("unexpected trailing input");

  for (const auto& term : spec.terms) {
    if (term.kind != KeyTerm::Kind::Column) continue;
    if (std::find(spec.columns.begin(), spec.columns.end(), term.text) == spec.columns.end())
      throw Error(ErrorKind::Parse,
                  "composite key spec: unknown identifier '" + term.text + "'");
  }
  return spec;
}

std::string eval_key(const CompositeKeySpec& spec, const std::map<std::string, Value>& bindings) {
  for (const auto& col : spec.columns) {
    auto it = bindings.find(col);
    if (it == bindings.end())
      throw Error(ErrorKind::Execution, "composite key: missing binding for '" + col + "'");
    if (it->second.is_null())
      throw Error(ErrorKind::Execution, "composite key: Null binding for '" + col + "'");
  }
  std::string out;
  for (const auto& term : spec.terms) {
    std::string piece;
    if (term.kind == KeyTerm::Kind::Literal) {
      piece = term.text;
    } else {
      piece = render_scalar(bindings.at(term.text));
    }
    for (int w : term.zfills) piece = zfill(std::move(piece), w);
    out += piece;
  }
  return out;
}

std::optional<std::string> key_from_equalities(const CompositeKeySpec& spec,
                                               const std::map<std::string, Value>& eq_filters) {
  for (const auto& col : spec.columns) {
    auto it = eq_filters.find(col);
    if (it == eq_filters.end() || it->second.is_null()) return std::nullopt;
  }
  return eval_key(spec, eq_filters);
}

}  // namespace pqe
