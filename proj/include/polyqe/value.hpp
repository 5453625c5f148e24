#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "polyqe/error.hpp"

namespace pqe {

// Declared column types. NUMERIC is backed by double, a documented narrowing
// that holds at desk scale.
enum class ScalarType { Bool, SmallInt, Int, BigInt, Double, Numeric, Text, Timestamp };

// Canonical SQL spelling, e.g. "smallint", "timestamp".
std::string_view scalar_type_name(ScalarType t);
std::optional<ScalarType> scalar_type_from_name(std::string_view name);

// Microseconds since the Unix epoch, UTC.
struct TimestampValue {
  int64_t micros = 0;
  auto operator<=>(const TimestampValue&) const = default;
};

class Value;
struct DocField;
using Array = std::vector<Value>;
using Document = std::vector<DocField>;  // preserves insertion order

// Extended relational value: scalars plus nested arrays and documents.
class Value {
 public:
  enum class Kind { Null, Bool, Int64, Float64, Text, Timestamp, Array, Document };

  Value() : v_(std::monostate{}) {}

  static Value null() { return Value(); }
  static Value boolean(bool b) { return Value(Repr(b)); }
  static Value int64(int64_t i) { return Value(Repr(i)); }
  static Value float64(double d) { return Value(Repr(d)); }
  static Value text(std::string s) { return Value(Repr(std::move(s))); }
  static Value timestamp(int64_t micros) { return Value(Repr(TimestampValue{micros})); }
  static Value array(Array elems);
  static Value document(Document fields);

  Kind kind() const { return static_cast<Kind>(v_.index()); }
  bool is_null() const { return kind() == Kind::Null; }
  bool is_numeric() const { return kind() == Kind::Int64 || kind() == Kind::Float64; }

  bool as_bool() const { return std::get<bool>(v_); }
  int64_t as_int64() const { return std::get<int64_t>(v_); }
  double as_float64() const { return std::get<double>(v_); }
  const std::string& as_text() const { return std::get<std::string>(v_); }
  int64_t timestamp_micros() const { return std::get<TimestampValue>(v_).micros; }
  const Array& elements() const;
  const Document& fields() const;

  // Numeric value regardless of Int64/Float64 representation.
  double numeric_value() const {
    return kind() == Kind::Int64 ? static_cast<double>(as_int64()) : as_float64();
  }

  // Document field lookup; nullptr when absent.
  const Value* field(std::string_view name) const;

  // Structural equality. Int64 and Float64 never compare equal implicitly;
  // document equality ignores field order.
  bool operator==(const Value& other) const;

  // Canonical text rendering: scalars as SQL literals, arrays as [v1, v2],
  // documents as {k: v}.
  std::string to_sql_text() const;

  // Rendering without quoting for text (used in store cells and CLI cells).
  std::string to_plain_text() const;

 private:
  using Repr = std::variant<std::monostate, bool, int64_t, double, std::string,
                            TimestampValue, Array, Document>;
  explicit Value(Repr v) : v_(std::move(v)) {}
  Repr v_;
};

struct DocField {
  std::string name;
  Value value;
};

enum class Ordering { Less, Equal, Greater, Unknown };

// SQL comparison semantics: total order within a scalar type, Int64/Float64
// compared numerically, anything involving Null is Unknown.
Ordering compare(const Value& a, const Value& b);

// Dot-separated path access. Absent segments yield Null; an Array at an
// intermediate segment yields Null (arrays are traversed only by explicit
// unwind). Malformed paths (empty segments) raise a Path error.
Value get_path(const Value& doc, std::string_view path);

// Type coercion with SQL-ish rules; throws a Coercion error when the value
// cannot be represented, with `context` appended to the message when given.
Value coerce(const Value& v, ScalarType t, std::string_view context = {});

// `YYYY-MM-DD HH:MM:SS[.ffffff]`, UTC; other formats rejected.
std::optional<int64_t> parse_timestamp_micros(std::string_view text);
std::string format_timestamp_micros(int64_t micros);

// Canonical decimal rendering for numbers (shortest round-trip for doubles).
std::string render_int64(int64_t v);
std::string render_double(double v);

struct ColumnDef {
  std::string name;
  ScalarType type = ScalarType::Text;
  // Recognized options: `mname` source path, `composite` key spec.
  std::vector<std::pair<std::string, std::string>> options;

  const std::string* option(std::string_view key) const;
  void set_option(std::string_view key, std::string value);
};

struct RelSchema {
  std::vector<ColumnDef> columns;

  int index_of(std::string_view name) const;  // -1 when absent
  const ColumnDef* column(std::string_view name) const;
};

using Row = std::vector<Value>;

// Stable encoding of a value for hashing / grouping; numerics encode by
// numeric value so 2 and 2.0 land in the same group.
void encode_group_key(const Value& v, std::string& out);
std::string encode_group_key(const Row& row);

}  // namespace pqe
