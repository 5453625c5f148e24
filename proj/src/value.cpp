#include "polyqe/value.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace pqe {

std::string_view scalar_type_name(ScalarType t) {
  switch (t) {
    case ScalarType::Bool: return "boolean";
    case ScalarType::SmallInt: return "smallint";
    case ScalarType::Int: return "int";
    case ScalarType::BigInt: return "bigint";
    case ScalarType::Double: return "double precision";
    case ScalarType::Numeric: return "numeric";
    case ScalarType::Text: return "text";
    case ScalarType::Timestamp: return "timestamp";
  }
  return "?";
}

static std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::optional<ScalarType> scalar_type_from_name(std::string_view name) {
  std::string n = lower(name);
  if (n == "bool" || n == "boolean") return ScalarType::Bool;
  if (n == "smallint") return ScalarType::SmallInt;
  if (n == "int" || n == "integer") return ScalarType::Int;
  if (n == "bigint") return ScalarType::BigInt;
  if (n == "double" || n == "double precision" || n == "float8") return ScalarType::Double;
  if (n == "numeric" || n == "decimal") return ScalarType::Numeric;
  if (n == "text" || n == "varchar") return ScalarType::Text;
  if (n == "timestamp" || n == "timestamp without time zone") return ScalarType::Timestamp;
  return std::nullopt;
}

Value Value::array(Array elems) { return Value(Repr(std::move(elems))); }
Value Value::document(Document fields) { return Value(Repr(std::move(fields))); }

const Array& Value::elements() const { return std::get<Array>(v_); }
const Document& Value::fields() const { return std::get<Document>(v_); }

const Value* Value::field(std::string_view name) const {
  for (const auto& f : fields()) {
    if (f.name == name) return &f.value;
  }
  return nullptr;
}

bool Value::operator==(const Value& other) const {
  if (kind() != other.kind()) return false;
  switch (kind()) {
    case Kind::Null: return true;
    case Kind::Bool: return as_bool() == other.as_bool();
    case Kind::Int64: return as_int64() == other.as_int64();
    case Kind::Float64: return as_float64() == other.as_float64();
    case Kind::Text: return as_text() == other.as_text();
    case Kind::Timestamp: return timestamp_micros() == other.timestamp_micros();
    case Kind::Array: {
      const auto& a = elements();
      const auto& b = other.elements();
      if (a.size() != b.size()) return false;
      for (size_t i = 0; i < a.size(); ++i)
        if (!(a[i] == b[i])) return false;
      return true;
    }
    case Kind::Document: {
      const auto& a = fields();
      const auto& b = other.fields();
      if (a.size() != b.size()) return false;
      for (const auto& f : a) {
        const Value* v = other.field(f.name);
        if (v == nullptr || !(f.value == *v)) return false;
      }
      return true;
    }
  }
  return false;
}

std::string render_int64(int64_t v) {
  char buf[24];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string render_double(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

static void quote_sql_string(const std::string& s, std::string& out) {
  out.push_back('\'');
  for (char c : s) {
    if (c == '\'') out.push_back('\'');
    out.push_back(c);
  }
  out.push_back('\'');
}

static void render_value(const Value& v, bool quote_text, std::string& out) {
  switch (v.kind()) {
    case Value::Kind::Null: out += "NULL"; break;
    case Value::Kind::Bool: out += v.as_bool() ? "TRUE" : "FALSE"; break;
    case Value::Kind::Int64: out += render_int64(v.as_int64()); break;
    case Value::Kind::Float64: out += render_double(v.as_float64()); break;
    case Value::Kind::Text:
      if (quote_text) {
        quote_sql_string(v.as_text(), out);
      } else {
        out += v.as_text();
      }
      break;
    case Value::Kind::Timestamp: {
      std::string t = format_timestamp_micros(v.timestamp_micros());
      if (quote_text) {
        out.push_back('\'');
        out += t;
        out.push_back('\'');
      } else {
        out += t;
      }
      break;
    }
    case Value::Kind::Array: {
      out.push_back('[');
      bool first = true;
      for (const auto& e : v.elements()) {
        if (!first) out += ", ";
        first = false;
        render_value(e, true, out);
      }
      out.push_back(']');
      break;
    }
    case Value::Kind::Document: {
      out.push_back('{');
      bool first = true;
      for (const auto& f : v.fields()) {
        if (!first) out += ", ";
        first = false;
        out += f.name;
        out += ": ";
        render_value(f.value, true, out);
      }
      out.push_back('}');
      break;
    }
  }
}

std::string Value::to_sql_text() const {
  std::string out;
  render_value(*this, true, out);
  return out;
}

std::string Value::to_plain_text() const {
  std::string out;
  render_value(*this, false, out);
  return out;
}

Ordering compare(const Value& a, const Value& b) {
  if (a.is_null() || b.is_null()) return Ordering::Unknown;
  if (a.is_numeric() && b.is_numeric()) {
    if (a.kind() == Value::Kind::Int64 && b.kind() == Value::Kind::Int64) {
      int64_t x = a.as_int64(), y = b.as_int64();
      if (x < y) return Ordering::Less;
      if (x > y) return Ordering::Greater;
      return Ordering::Equal;
    }
    double x = a.numeric_value(), y = b.numeric_value();
    if (x < y) return Ordering::Less;
    if (x > y) return Ordering::Greater;
    if (x == y) return Ordering::Equal;
    return Ordering::Unknown;  // NaN involved
  }
  if (a.kind() != b.kind()) return Ordering::Unknown;
  switch (a.kind()) {
    case Value::Kind::Bool: {
      int x = a.as_bool() ? 1 : 0, y = b.as_bool() ? 1 : 0;
      return x < y ? Ordering::Less : (x > y ? Ordering::Greater : Ordering::Equal);
    }
    case Value::Kind::Text: {
      int c = a.as_text().compare(b.as_text());
      return c < 0 ? Ordering::Less : (c > 0 ? Ordering::Greater : Ordering::Equal);
    }
    case Value::Kind::Timestamp: {
      int64_t x = a.timestamp_micros(), y = b.timestamp_micros();
      return x < y ? Ordering::Less : (x > y ? Ordering::Greater : Ordering::Equal);
    }
    default:
      // Arrays and documents have no SQL ordering; equality only.
      return a == b ? Ordering::Equal : Ordering::Unknown;
  }
}

Value get_path(const Value& doc, std::string_view path) {
  if (path.empty()) throw Error(ErrorKind::Path, "empty document path");
  // Validate the whole path before walking: malformed paths are errors even
  // when an early segment is already absent.
  for (size_t start = 0;;) {
    size_t dot = path.find('.', start);
    size_t len = (dot == std::string_view::npos ? path.size() : dot) - start;
    if (len == 0)
      throw Error(ErrorKind::Path, "empty segment in path '" + std::string(path) + "'");
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  const Value* cur = &doc;
  size_t start = 0;
  while (true) {
    size_t dot = path.find('.', start);
    std::string_view seg =
        dot == std::string_view::npos ? path.substr(start) : path.substr(start, dot - start);
    if (cur->kind() != Value::Kind::Document) return Value::null();
    const Value* next = cur->field(seg);
    if (next == nullptr) return Value::null();
    cur = next;
    if (dot == std::string_view::npos) return *cur;
    start = dot + 1;
  }
}

namespace {

[[noreturn]] void coercion_error(const Value& v, ScalarType t, std::string_view context) {
  std::string msg = "cannot coerce " + v.to_sql_text() + " to " + std::string(scalar_type_name(t));
  if (!context.empty()) {
    msg += " (";
    msg += context;
    msg += ")";
  }
  throw Error(ErrorKind::Coercion, std::move(msg));
}

std::optional<int64_t> parse_int_strict(std::string_view s) {
  size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  size_t end = s.size();
  while (end > i && (s[end - 1] == ' ' || s[end - 1] == '\t')) --end;
  if (i >= end) return std::nullopt;
  int64_t out = 0;
  auto r = std::from_chars(s.data() + i, s.data() + end, out);
  if (r.ec != std::errc() || r.ptr != s.data() + end) return std::nullopt;
  return out;
}

std::optional<double> parse_double_strict(std::string_view s) {
  size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  size_t end = s.size();
  while (end > i && (s[end - 1] == ' ' || s[end - 1] == '\t')) --end;
  if (i >= end) return std::nullopt;
  double out = 0;
  auto r = std::from_chars(s.data() + i, s.data() + end, out);
  if (r.ec != std::errc() || r.ptr != s.data() + end) return std::nullopt;
  return out;
}

bool int_in_range(int64_t v, ScalarType t) {
  switch (t) {
    case ScalarType::SmallInt: return v >= -32768 && v <= 32767;
    case ScalarType::Int: return v >= INT32_MIN && v <= INT32_MAX;
    default: return true;
  }
}

}  // namespace

Value coerce(const Value& v, ScalarType t, std::string_view context) {
  if (v.is_null()) return Value::null();
  switch (t) {
    case ScalarType::Bool: {
      if (v.kind() == Value::Kind::Bool) return v;
      if (v.kind() == Value::Kind::Text) {
        std::string s = lower(v.as_text());
        if (s == "true" || s == "t") return Value::boolean(true);
        if (s == "false" || s == "f") return Value::boolean(false);
      }
      coercion_error(v, t, context);
    }
    case ScalarType::SmallInt:
    case ScalarType::Int:
    case ScalarType::BigInt: {
      int64_t out = 0;
      switch (v.kind()) {
        case Value::Kind::Int64: out = v.as_int64(); break;
        case Value::Kind::Float64: {
          double d = v.as_float64();
          if (!std::isfinite(d) || d != std::floor(d)) coercion_error(v, t, context);
          out = static_cast<int64_t>(d);
          break;
        }
        case Value::Kind::Text: {
          auto i = parse_int_strict(v.as_text());
          if (!i) {
            auto d = parse_double_strict(v.as_text());
            if (!d || *d != std::floor(*d)) coercion_error(v, t, context);
            out = static_cast<int64_t>(*d);
          } else {
            out = *i;
          }
          break;
        }
        default: coercion_error(v, t, context);
      }
      if (!int_in_range(out, t)) coercion_error(v, t, context);
      return Value::int64(out);
    }
    case ScalarType::Double:
    case ScalarType::Numeric: {
      switch (v.kind()) {
        case Value::Kind::Float64: return v;
        case Value::Kind::Int64: return Value::float64(static_cast<double>(v.as_int64()));
        case Value::Kind::Text: {
          auto d = parse_double_strict(v.as_text());
          if (!d) coercion_error(v, t, context);
          return Value::float64(*d);
        }
        default: coercion_error(v, t, context);
      }
    }
    case ScalarType::Text: {
      if (v.kind() == Value::Kind::Text) return v;
      return Value::text(v.to_plain_text());
    }
    case ScalarType::Timestamp: {
      if (v.kind() == Value::Kind::Timestamp) return v;
      if (v.kind() == Value::Kind::Text) {
        auto m = parse_timestamp_micros(v.as_text());
        if (!m) coercion_error(v, t, context);
        return Value::timestamp(*m);
      }
      coercion_error(v, t, context);
    }
  }
  coercion_error(v, t, context);
}

namespace {

// Days since 1970-01-01 for a civil date (proleptic Gregorian).
int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<int64_t>(era) * 146097 + static_cast<int64_t>(doe) - 719468;
}

void civil_from_days(int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int yr = static_cast<int>(yoe) + static_cast<int>(era) * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = yr + (m <= 2);
}

bool read_digits(std::string_view s, size_t& i, int n, int& out) {
  out = 0;
  for (int k = 0; k < n; ++k) {
    if (i >= s.size() || s[i] < '0' || s[i] > '9') return false;
    out = out * 10 + (s[i] - '0');
    ++i;
  }
  return true;
}

}  // namespace

std::optional<int64_t> parse_timestamp_micros(std::string_view s) {
  size_t i = 0;
  int y, mo, d, h, mi, se;
  if (!read_digits(s, i, 4, y)) return std::nullopt;
  if (i >= s.size() || s[i] != '-') return std::nullopt;
  ++i;
  if (!read_digits(s, i, 2, mo)) return std::nullopt;
  if (i >= s.size() || s[i] != '-') return std::nullopt;
  ++i;
  if (!read_digits(s, i, 2, d)) return std::nullopt;
  if (i >= s.size() || s[i] != ' ') return std::nullopt;
  ++i;
  if (!read_digits(s, i, 2, h)) return std::nullopt;
  if (i >= s.size() || s[i] != ':') return std::nullopt;
  ++i;
  if (!read_digits(s, i, 2, mi)) return std::nullopt;
  if (i >= s.size() || s[i] != ':') return std::nullopt;
  ++i;
  if (!read_digits(s, i, 2, se)) return std::nullopt;
  int64_t frac = 0;
  if (i < s.size() && s[i] == '.') {
    ++i;
    int n = 0;
    int64_t scale = 100000;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9' && n < 6) {
      frac += (s[i] - '0') * scale;
      scale /= 10;
      ++i;
      ++n;
    }
    if (n == 0) return std::nullopt;
  }
  if (i != s.size()) return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
  if (h > 23 || mi > 59 || se > 60) return std::nullopt;
  int64_t days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  int64_t secs = days * 86400 + h * 3600 + mi * 60 + se;
  return secs * 1000000 + frac;
}

std::string format_timestamp_micros(int64_t micros) {
  int64_t secs = micros / 1000000;
  int64_t frac = micros % 1000000;
  if (frac < 0) {
    frac += 1000000;
    secs -= 1;
  }
  int64_t days = secs / 86400;
  int64_t rem = secs % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  int y;
  unsigned mo, d;
  civil_from_days(days, y, mo, d);
  int h = static_cast<int>(rem / 3600);
  int mi = static_cast<int>((rem / 60) % 60);
  int se = static_cast<int>(rem % 60);
  char buf[40];
  if (frac != 0) {
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02d:%02d:%02d.%06lld", y, mo, d, h, mi, se,
                  static_cast<long long>(frac));
  } else {
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02d:%02d:%02d", y, mo, d, h, mi, se);
  }
  return buf;
}

const std::string* ColumnDef::option(std::string_view key) const {
  for (const auto& [k, v] : options) {
    if (k == key) return &v;
  }
  return nullptr;
}

void ColumnDef::set_option(std::string_view key, std::string value) {
  for (auto& [k, v] : options) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  options.emplace_back(std::string(key), std::move(value));
}

int RelSchema::index_of(std::string_view name) const {
  for (size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

const ColumnDef* RelSchema::column(std::string_view name) const {
  int i = index_of(name);
  return i < 0 ? nullptr : &columns[i];
}

void encode_group_key(const Value& v, std::string& out) {
  switch (v.kind()) {
    case Value::Kind::Null: out += "N;"; break;
    case Value::Kind::Bool: out += v.as_bool() ? "b1;" : "b0;"; break;
    case Value::Kind::Int64:
    case Value::Kind::Float64:
      out += "n";
      out += render_double(v.numeric_value());
      out += ";";
      break;
    case Value::Kind::Text:
      out += "t";
      out += render_int64(static_cast<int64_t>(v.as_text().size()));
      out += ":";
      out += v.as_text();
      out += ";";
      break;
    case Value::Kind::Timestamp:
      out += "s";
      out += render_int64(v.timestamp_micros());
      out += ";";
      break;
    case Value::Kind::Array:
      out += "a[";
      for (const auto& e : v.elements()) encode_group_key(e, out);
      out += "];";
      break;
    case Value::Kind::Document:
      out += "d{";
      for (const auto& f : v.fields()) {
        out += f.name;
        out += "=";
        encode_group_key(f.value, out);
      }
      out += "};";
      break;
  }
}

std::string encode_group_key(const Row& row) {
  std::string out;
  for (const auto& v : row) encode_group_key(v, out);
  return out;
}

}  // namespace pqe
