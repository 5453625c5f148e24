#include "polyqe/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

#include "polyqe/error.hpp"

namespace pqe {

// ---- relaxed object notation ----

namespace {

class JsonReader {
 public:
  explicit JsonReader(const std::string& text) : s_(text) {}

  Value parse() {
    Value v = value();
    skip_ws();
    if (i_ < s_.size()) fail("trailing characters after value");
    return v;
  }

 private:
  const std::string& s_;
  size_t i_ = 0;
  int line_ = 1, col_ = 1;

  [[noreturn]] void fail(const std::string& what) {
    throw ParseError(what, line_, col_);
  }

  void advance() {
    if (s_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  void skip_ws() {
    while (i_ < s_.size() &&
           (s_[i_] == ' ' || s_[i_] == '\t' || s_[i_] == '\n' || s_[i_] == '\r'))
      advance();
  }

  char peek() {
    if (i_ >= s_.size()) fail("unexpected end of input");
    return s_[i_];
  }

  void expect(char c) {
    if (i_ >= s_.size() || s_[i_] != c) fail(std::string("expected '") + c + "'");
    advance();
  }

  static bool bare_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$';
  }
  static bool bare_char(char c) {
    return bare_start(c) || (c >= '0' && c <= '9') || c == '.';
  }

  std::string quoted_string() {
    expect('"');
    std::string out;
    while (true) {
      if (i_ >= s_.size()) fail("unterminated string");
      char c = s_[i_];
      if (c == '"') {
        advance();
        return out;
      }
      if (c == '\\') {
        advance();
        if (i_ >= s_.size()) fail("unterminated escape");
        char e = s_[i_];
        advance();
        switch (e) {
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          case '/': out.push_back('/'); break;
          case 'b': out.push_back('\b'); break;
          case 'f': out.push_back('\f'); break;
          case 'n': out.push_back('\n'); break;
          case 'r': out.push_back('\r'); break;
          case 't': out.push_back('\t'); break;
          case 'u': {
            unsigned code = 0;
            for (int k = 0; k < 4; ++k) {
              if (i_ >= s_.size()) fail("truncated \\u escape");
              char h = s_[i_];
              advance();
              code <<= 4;
              if (h >= '0' && h <= '9') code |= static_cast<unsigned>(h - '0');
              else if (h >= 'a' && h <= 'f') code |= static_cast<unsigned>(h - 'a' + 10);
              else if (h >= 'A' && h <= 'F') code |= static_cast<unsigned>(h - 'A' + 10);
              else fail("bad \\u escape");
            }
            // UTF-8 encode (BMP only; surrogate pairs unsupported).
            if (code < 0x80) {
              out.push_back(static_cast<char>(code));
            } else if (code < 0x800) {
              out.push_back(static_cast<char>(0xC0 | (code >> 6)));
              out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
            } else {
              out.push_back(static_cast<char>(0xE0 | (code >> 12)));
              out.push_back(static_cast<char>(0x80 | ((code >> 6) & 0x3F)));
              out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
            }
            break;
          }
          default: fail("unknown escape");
        }
        continue;
      }
      out.push_back(c);
      advance();
    }
  }

  std::string key() {
    skip_ws();
    if (peek() == '"') return quoted_string();
    if (!bare_start(peek())) fail("expected a field name");
    std::string out;
    while (i_ < s_.size() && bare_char(s_[i_])) {
      out.push_back(s_[i_]);
      advance();
    }
    return out;
  }

  bool at_digit() const { return i_ < s_.size() && s_[i_] >= '0' && s_[i_] <= '9'; }
  void digits() {
    if (!at_digit()) fail("malformed number");
    while (at_digit()) advance();
  }

  Value number() {
    size_t start = i_;
    bool is_float = false;
    if (peek() == '-') advance();
    digits();
    if (i_ < s_.size() && s_[i_] == '.') {
      is_float = true;
      advance();
      digits();
    }
    if (i_ < s_.size() && (s_[i_] == 'e' || s_[i_] == 'E')) {
      is_float = true;
      advance();
      if (i_ < s_.size() && (s_[i_] == '+' || s_[i_] == '-')) advance();
      digits();
    }
    std::string text = s_.substr(start, i_ - start);
    if (!is_float) {
      try {
        return Value::int64(std::stoll(text));
      } catch (const std::out_of_range&) {
        // Integers beyond 64 bits widen to floating point.
      }
    }
    try {
      return Value::float64(std::stod(text));
    } catch (const std::out_of_range&) {
      fail("number out of range");
    }
  }

  Value value() {
    skip_ws();
    char c = peek();
    if (c == '{') {
      advance();
      Document fields;
      skip_ws();
      if (peek() == '}') {
        advance();
        return Value::document(std::move(fields));
      }
      while (true) {
        std::string k = key();
        skip_ws();
        expect(':');
        fields.push_back({std::move(k), value()});
        skip_ws();
        if (peek() == ',') {
          advance();
          continue;
        }
        expect('}');
        return Value::document(std::move(fields));
      }
    }
    if (c == '[') {
      advance();
      Array elems;
      skip_ws();
      if (peek() == ']') {
        advance();
        return Value::array(std::move(elems));
      }
      while (true) {
        elems.push_back(value());
        skip_ws();
        if (peek() == ',') {
          advance();
          continue;
        }
        expect(']');
        return Value::array(std::move(elems));
      }
    }
    if (c == '"') return Value::text(quoted_string());
    if (c == '-' || (c >= '0' && c <= '9')) return number();
    if (bare_start(c)) {
      std::string word;
      while (i_ < s_.size() && bare_char(s_[i_])) {
        word.push_back(s_[i_]);
        advance();
      }
      if (word == "true") return Value::boolean(true);
      if (word == "false") return Value::boolean(false);
      if (word == "null") return Value::null();
      fail("unexpected token '" + word + "'");
    }
    fail("unexpected character");
  }
};

bool bare_key_ok(const std::string& k) {
  if (k.empty()) return false;
  char c0 = k[0];
  if (!((c0 >= 'a' && c0 <= 'z') || (c0 >= 'A' && c0 <= 'Z') || c0 == '_' || c0 == '$'))
    return false;
  for (char c : k) {
    if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
          c == '_' || c == '$' || c == '.'))
      return false;
  }
  return true;
}

void render_json_string(const std::string& s, std::string& out) {
  out.push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(c);
        }
    }
  }
  out.push_back('"');
}

void render_json(const Value& v, std::string& out) {
  switch (v.kind()) {
    case Value::Kind::Null: out += "null"; break;
    case Value::Kind::Bool: out += v.as_bool() ? "true" : "false"; break;
    case Value::Kind::Int64: out += render_int64(v.as_int64()); break;
    case Value::Kind::Float64: out += render_double(v.as_float64()); break;
    case Value::Kind::Text: render_json_string(v.as_text(), out); break;
    case Value::Kind::Timestamp: render_json_string(format_timestamp_micros(v.timestamp_micros()), out); break;
    case Value::Kind::Array: {
      out.push_back('[');
      bool first = true;
      for (const auto& e : v.elements()) {
        if (!first) out += ", ";
        first = false;
        render_json(e, out);
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
        if (bare_key_ok(f.name)) {
          out += f.name;
        } else {
          render_json_string(f.name, out);
        }
        out += ": ";
        render_json(f.value, out);
      }
      out.push_back('}');
      break;
    }
  }
}

}  // namespace

Value parse_relaxed_json(const std::string& text) { return JsonReader(text).parse(); }

std::string render_relaxed_json(const Value& v) {
  std::string out;
  render_json(v, out);
  return out;
}

// ---- stage parsing ----

namespace {

[[noreturn]] void stage_fail(const std::string& what) {
  throw Error(ErrorKind::Parse, "pipeline: " + what);
}

bool is_path_ref(const Value& v) {
  return v.kind() == Value::Kind::Text && !v.as_text().empty() && v.as_text()[0] == '$';
}

std::string path_of(const Value& v) { return v.as_text().substr(1); }

bool is_one(const Value& v) {
  return (v.kind() == Value::Kind::Int64 && v.as_int64() == 1) ||
         (v.kind() == Value::Kind::Float64 && v.as_float64() == 1.0) ||
         (v.kind() == Value::Kind::Bool && v.as_bool());
}

bool is_zero(const Value& v) {
  return (v.kind() == Value::Kind::Int64 && v.as_int64() == 0) ||
         (v.kind() == Value::Kind::Float64 && v.as_float64() == 0.0) ||
         (v.kind() == Value::Kind::Bool && !v.as_bool());
}

MatchCond::Op match_op_from_name(const std::string& name) {
  if (name == "$eq") return MatchCond::Op::Eq;
  if (name == "$ne") return MatchCond::Op::Ne;
  if (name == "$gt") return MatchCond::Op::Gt;
  if (name == "$gte") return MatchCond::Op::Gte;
  if (name == "$lt") return MatchCond::Op::Lt;
  if (name == "$lte") return MatchCond::Op::Lte;
  if (name == "$in") return MatchCond::Op::In;
  stage_fail("unknown match operator '" + name + "'");
}

const char* match_op_name(MatchCond::Op op) {
  switch (op) {
    case MatchCond::Op::Eq: return "$eq";
    case MatchCond::Op::Ne: return "$ne";
    case MatchCond::Op::Gt: return "$gt";
    case MatchCond::Op::Gte: return "$gte";
    case MatchCond::Op::Lt: return "$lt";
    case MatchCond::Op::Lte: return "$lte";
    case MatchCond::Op::In: return "$in";
  }
  return "?";
}

MatchStage parse_match(const Value& spec) {
  if (spec.kind() != Value::Kind::Document) stage_fail("$match expects a document");
  MatchStage stage;
  for (const auto& f : spec.fields()) {
    const Value& v = f.value;
    bool operator_doc = v.kind() == Value::Kind::Document && !v.fields().empty() &&
                        !v.fields()[0].name.empty() && v.fields()[0].name[0] == '$';
    if (operator_doc) {
      for (const auto& opf : v.fields()) {
        MatchCond cond;
        cond.path = f.name;
        cond.op = match_op_from_name(opf.name);
        if (cond.op == MatchCond::Op::In && opf.value.kind() != Value::Kind::Array)
          stage_fail("$in expects an array");
        cond.literal = opf.value;
        stage.conds.push_back(std::move(cond));
      }
    } else {
      MatchCond cond;
      cond.path = f.name;
      cond.op = MatchCond::Op::Eq;
      cond.literal = v;
      stage.conds.push_back(std::move(cond));
    }
  }
  return stage;
}

ProjectStage parse_project(const Value& spec) {
  if (spec.kind() != Value::Kind::Document || spec.fields().empty())
    stage_fail("$project expects a non-empty document");
  ProjectStage stage;
  for (const auto& f : spec.fields()) {
    ProjectStage::Entry e;
    if (f.name == "_id" && is_zero(f.value)) {
      e.kind = ProjectStage::Entry::Kind::ExcludeId;
    } else if (is_one(f.value)) {
      e.kind = ProjectStage::Entry::Kind::Include;
      e.name = f.name;
    } else if (is_path_ref(f.value)) {
      e.kind = ProjectStage::Entry::Kind::Rename;
      e.name = f.name;
      e.path = path_of(f.value);
    } else {
      stage_fail("$project entry '" + f.name + "' must be 1, a \"$path\", or _id: 0");
    }
    stage.entries.push_back(std::move(e));
  }
  return stage;
}

GroupStage parse_group(const Value& spec) {
  if (spec.kind() != Value::Kind::Document) stage_fail("$group expects a document");
  GroupStage stage;
  bool saw_id = false;
  for (const auto& f : spec.fields()) {
    if (f.name == "_id") {
      saw_id = true;
      if (f.value.kind() == Value::Kind::Document) {
        for (const auto& kf : f.value.fields())
          if (!is_path_ref(kf.value))
            stage_fail("$group _id fields must be \"$path\" references");
      }
      stage.id_spec = f.value;
      continue;
    }
    if (f.value.kind() != Value::Kind::Document || f.value.fields().size() != 1)
      stage_fail("$group accumulator '" + f.name + "' must be a single-operator document");
    const auto& acc_f = f.value.fields()[0];
    GroupStage::Acc acc;
    acc.field = f.name;
    if (acc_f.name == "$count") {
      if (!(acc_f.value.kind() == Value::Kind::Document && acc_f.value.fields().empty()))
        stage_fail("$count expects {}");
      acc.fn = GroupStage::Acc::Fn::Count;
    } else {
      if (acc_f.name == "$sum") acc.fn = GroupStage::Acc::Fn::Sum;
      else if (acc_f.name == "$avg") acc.fn = GroupStage::Acc::Fn::Avg;
      else if (acc_f.name == "$min") acc.fn = GroupStage::Acc::Fn::Min;
      else if (acc_f.name == "$max") acc.fn = GroupStage::Acc::Fn::Max;
      else stage_fail("unknown accumulator '" + acc_f.name + "'");
      if (is_path_ref(acc_f.value)) {
        acc.path = path_of(acc_f.value);
      } else if (acc_f.value.is_numeric()) {
        acc.constant = acc_f.value;
      } else {
        stage_fail("accumulator '" + f.name + "' expects a \"$path\" or a numeric constant");
      }
    }
    stage.accs.push_back(std::move(acc));
  }
  if (!saw_id) stage_fail("$group requires an _id field");
  return stage;
}

PipelineStage parse_stage(const Value& v) {
  if (v.kind() != Value::Kind::Document || v.fields().size() != 1)
    stage_fail("each stage must be a single-operator document");
  const auto& f = v.fields()[0];
  if (f.name == "$match") return parse_match(f.value);
  if (f.name == "$project") return parse_project(f.value);
  if (f.name == "$unwind") {
    if (!is_path_ref(f.value)) stage_fail("$unwind expects a \"$path\"");
    return UnwindStage{path_of(f.value)};
  }
  if (f.name == "$sort") {
    if (f.value.kind() != Value::Kind::Document || f.value.fields().empty())
      stage_fail("$sort expects a non-empty document");
    SortStage stage;
    for (const auto& kf : f.value.fields()) {
      if (is_one(kf.value)) stage.keys.push_back({kf.name, true, std::nullopt});
      else if ((kf.value.kind() == Value::Kind::Int64 && kf.value.as_int64() == -1) ||
               (kf.value.kind() == Value::Kind::Float64 && kf.value.as_float64() == -1.0))
        stage.keys.push_back({kf.name, false, std::nullopt});
      else stage_fail("$sort direction must be 1 or -1");
    }
    return stage;
  }
  if (f.name == "$limit") {
    int64_t n = 0;
    if (f.value.kind() == Value::Kind::Int64) n = f.value.as_int64();
    else if (f.value.kind() == Value::Kind::Float64 &&
             f.value.as_float64() == static_cast<int64_t>(f.value.as_float64()))
      n = static_cast<int64_t>(f.value.as_float64());
    else stage_fail("$limit expects an integer");
    if (n < 0) stage_fail("$limit must be non-negative");
    return LimitStage{n};
  }
  if (f.name == "$group") return parse_group(f.value);
  stage_fail("unknown stage '" + f.name + "'");
}

}  // namespace

Pipeline parse_pipeline(const std::string& text) {
  Value v = parse_relaxed_json(text);
  Pipeline p;
  const Value* stages = nullptr;
  if (v.kind() == Value::Kind::Array) {
    stages = &v;
  } else if (v.kind() == Value::Kind::Document) {
    stages = v.field("pipeline");
    if (stages == nullptr || stages->kind() != Value::Kind::Array)
      stage_fail("envelope form requires a pipeline array");
    p.had_envelope = true;
    p.envelope = v.fields();
  } else {
    stage_fail("expected a stage array or an envelope document");
  }
  for (const auto& s : stages->elements()) p.stages.push_back(parse_stage(s));
  return p;
}

// ---- rendering ----

namespace {

Value stage_to_value(const PipelineStage& stage) {
  struct Visitor {
    Value operator()(const MatchStage& s) const {
      // Conditions merge per path, preserving first-appearance order.
      std::vector<std::pair<std::string, Document>> per_path;
      for (const auto& c : s.conds) {
        Document* op_doc = nullptr;
        for (auto& [path, ops] : per_path) {
          if (path == c.path) {
            op_doc = &ops;
            break;
          }
        }
        if (op_doc == nullptr) {
          per_path.emplace_back(c.path, Document{});
          op_doc = &per_path.back().second;
        }
        op_doc->push_back({match_op_name(c.op), c.literal});
      }
      Document spec;
      for (auto& [path, ops] : per_path)
        spec.push_back({path, Value::document(std::move(ops))});
      return Value::document({{"$match", Value::document(std::move(spec))}});
    }
    Value operator()(const ProjectStage& s) const {
      Document spec;
      for (const auto& e : s.entries) {
        switch (e.kind) {
          case ProjectStage::Entry::Kind::Include:
            spec.push_back({e.name, Value::int64(1)});
            break;
          case ProjectStage::Entry::Kind::ExcludeId:
            spec.push_back({"_id", Value::int64(0)});
            break;
          case ProjectStage::Entry::Kind::Rename:
            spec.push_back({e.name, Value::text("$" + e.path)});
            break;
        }
      }
      return Value::document({{"$project", Value::document(std::move(spec))}});
    }
    Value operator()(const UnwindStage& s) const {
      return Value::document({{"$unwind", Value::text("$" + s.path)}});
    }
    Value operator()(const SortStage& s) const {
      Document spec;
      for (const auto& k : s.keys)
        spec.push_back({k.path, Value::int64(k.ascending ? 1 : -1)});
      return Value::document({{"$sort", Value::document(std::move(spec))}});
    }
    Value operator()(const LimitStage& s) const {
      return Value::document({{"$limit", Value::int64(s.n)}});
    }
    Value operator()(const GroupStage& s) const {
      Document spec;
      spec.push_back({"_id", s.id_spec});
      for (const auto& a : s.accs) {
        Value arg;
        const char* fn = nullptr;
        switch (a.fn) {
          case GroupStage::Acc::Fn::Count:
            spec.push_back({a.field, Value::document({{"$count", Value::document({})}})});
            continue;
          case GroupStage::Acc::Fn::Sum: fn = "$sum"; break;
          case GroupStage::Acc::Fn::Avg: fn = "$avg"; break;
          case GroupStage::Acc::Fn::Min: fn = "$min"; break;
          case GroupStage::Acc::Fn::Max: fn = "$max"; break;
        }
        arg = a.path.empty() ? a.constant : Value::text("$" + a.path);
        spec.push_back({a.field, Value::document({{fn, std::move(arg)}})});
      }
      return Value::document({{"$group", Value::document(std::move(spec))}});
    }
  };
  return std::visit(Visitor{}, stage);
}

}  // namespace

Value pipeline_to_value(const Pipeline& p) {
  Array stages;
  for (const auto& s : p.stages) stages.push_back(stage_to_value(s));
  return Value::array(std::move(stages));
}

std::string render_native_query(const Pipeline& p, const std::string& collection) {
  Document envelope;
  if (p.had_envelope) {
    envelope = p.envelope;
    for (auto& f : envelope)
      if (f.name == "pipeline") f.value = pipeline_to_value(p);
  } else {
    envelope.push_back({"aggregate", Value::text(collection)});
    envelope.push_back({"pipeline", pipeline_to_value(p)});
  }
  return render_relaxed_json(Value::document(std::move(envelope)));
}

// ---- execution ----

namespace {

// Path walk over a document without copying it into a Value.
const Value* find_path(const Document& doc, std::string_view path) {
  const Document* cur = &doc;
  size_t start = 0;
  while (true) {
    size_t dot = path.find('.', start);
    std::string_view seg =
        dot == std::string_view::npos ? path.substr(start) : path.substr(start, dot - start);
    const Value* next = nullptr;
    for (const auto& f : *cur) {
      if (f.name == seg) {
        next = &f.value;
        break;
      }
    }
    if (next == nullptr) return nullptr;
    if (dot == std::string_view::npos) return next;
    if (next->kind() != Value::Kind::Document) return nullptr;
    cur = &next->fields();
    start = dot + 1;
  }
}

Value path_value(const Document& doc, std::string_view path) {
  const Value* v = find_path(doc, path);
  return v == nullptr ? Value::null() : *v;
}

std::string doc_id_text(const Document& doc) {
  const Value* id = find_path(doc, "_id");
  return id == nullptr ? "<no _id>" : id->to_plain_text();
}

// Declared types govern scalar cells; arrays and documents pass through
// typed stages untouched (they exist to be unwound / unnested downstream).
bool coercible(const Value& v) {
  return !v.is_null() && v.kind() != Value::Kind::Array && v.kind() != Value::Kind::Document;
}

bool eval_cond(const Document& doc, const MatchCond& c) {
  const Value* pv = find_path(doc, c.path);
  if (pv == nullptr || pv->is_null()) return false;  // absent or null never matches
  Value coerced;
  if (c.coerce_to && coercible(*pv)) {
    try {
      coerced = coerce(*pv, *c.coerce_to);
    } catch (const Error&) {
      return false;  // a cell that does not fit the declared type cannot match
    }
    pv = &coerced;
  }
  const Value& v = *pv;
  switch (c.op) {
    case MatchCond::Op::Eq: return compare(v, c.literal) == Ordering::Equal;
    case MatchCond::Op::Ne: {
      Ordering o = compare(v, c.literal);
      return o == Ordering::Less || o == Ordering::Greater;
    }
    case MatchCond::Op::Gt: return compare(v, c.literal) == Ordering::Greater;
    case MatchCond::Op::Gte: {
      Ordering o = compare(v, c.literal);
      return o == Ordering::Greater || o == Ordering::Equal;
    }
    case MatchCond::Op::Lt: return compare(v, c.literal) == Ordering::Less;
    case MatchCond::Op::Lte: {
      Ordering o = compare(v, c.literal);
      return o == Ordering::Less || o == Ordering::Equal;
    }
    case MatchCond::Op::In: {
      for (const auto& cand : c.literal.elements())
        if (compare(v, cand) == Ordering::Equal) return true;
      return false;
    }
  }
  return false;
}

// Nested inclusion: a tree of path segments, first-appearance order.
struct IncludeNode {
  bool whole = false;  // the full value at this point is included
  std::vector<std::pair<std::string, IncludeNode>> children;

  IncludeNode& child(std::string_view seg) {
    for (auto& [name, node] : children)
      if (name == seg) return node;
    children.emplace_back(std::string(seg), IncludeNode{});
    return children.back().second;
  }

  void add(std::string_view path) {
    size_t dot = path.find('.');
    if (dot == std::string_view::npos) {
      child(path).whole = true;
    } else {
      child(path.substr(0, dot)).add(path.substr(dot + 1));
    }
  }
};

bool project_include(const Value& v, const IncludeNode& node, Value& out) {
  if (node.whole) {
    out = v;
    return true;
  }
  if (v.kind() == Value::Kind::Array) {
    // Subfield inclusion maps over arrays; non-document elements drop out.
    Array elems;
    for (const auto& e : v.elements()) {
      Value picked;
      if (project_include(e, node, picked)) elems.push_back(std::move(picked));
    }
    out = Value::array(std::move(elems));
    return true;
  }
  if (v.kind() != Value::Kind::Document) return false;
  Document fields;
  for (const auto& [name, sub] : node.children) {
    const Value* f = nullptr;
    for (const auto& df : v.fields()) {
      if (df.name == name) {
        f = &df.value;
        break;
      }
    }
    if (f == nullptr) continue;  // absent fields are omitted
    Value picked;
    if (project_include(*f, sub, picked)) fields.push_back({name, std::move(picked)});
  }
  out = Value::document(std::move(fields));
  return true;
}

Document apply_project(const Document& doc, const ProjectStage& stage) {
  Document out;
  bool inclusion = stage.inclusion_form();
  if (inclusion && !stage.excludes_id()) {
    const Value* id = find_path(doc, "_id");
    if (id != nullptr) out.push_back({"_id", *id});
  }
  IncludeNode tree;
  // Build the include tree once so sibling paths merge (a.b plus a.c).
  for (const auto& e : stage.entries)
    if (e.kind == ProjectStage::Entry::Kind::Include && e.name != "_id") tree.add(e.name);
  std::vector<bool> emitted(tree.children.size(), false);
  for (const auto& e : stage.entries) {
    switch (e.kind) {
      case ProjectStage::Entry::Kind::ExcludeId:
        break;
      case ProjectStage::Entry::Kind::Include: {
        if (e.name == "_id") break;  // already handled
        std::string_view top = std::string_view(e.name).substr(0, e.name.find('.'));
        for (size_t i = 0; i < tree.children.size(); ++i) {
          if (tree.children[i].first == top) {
            if (emitted[i]) break;
            emitted[i] = true;
            const Value* f = nullptr;
            for (const auto& df : doc) {
              if (df.name == top) {
                f = &df.value;
                break;
              }
            }
            if (f == nullptr) break;
            Value picked;
            if (project_include(*f, tree.children[i].second, picked))
              out.push_back({tree.children[i].first, std::move(picked)});
            break;
          }
        }
        break;
      }
      case ProjectStage::Entry::Kind::Rename: {
        Value v = path_value(doc, e.path);
        if (e.coerce_to && coercible(v)) {
          try {
            v = coerce(v, *e.coerce_to);
          } catch (const Error& err) {
            throw Error(ErrorKind::Coercion,
                        std::string(err.what()) + " in document " + doc_id_text(doc));
          }
        }
        out.push_back({e.name, std::move(v)});
        break;
      }
    }
  }
  return out;
}

// Replaces the value at a dot path, rebuilding the spine. The caller has
// already resolved the path, so intermediate segments are documents.
Value with_path_set(const Value& v, std::string_view path, const Value& leaf) {
  size_t dot = path.find('.');
  std::string_view seg = dot == std::string_view::npos ? path : path.substr(0, dot);
  Document fields = v.fields();
  for (auto& f : fields) {
    if (f.name == seg) {
      f.value = dot == std::string_view::npos
                    ? leaf
                    : with_path_set(f.value, path.substr(dot + 1), leaf);
      break;
    }
  }
  return Value::document(std::move(fields));
}

int kind_rank(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Bool: return 1;
    case Value::Kind::Int64:
    case Value::Kind::Float64: return 2;
    case Value::Kind::Text: return 3;
    case Value::Kind::Timestamp: return 4;
    case Value::Kind::Array: return 5;
    case Value::Kind::Document: return 6;
    default: return 0;
  }
}

struct GroupAccState {
  int64_t count = 0;        // numeric contributions (or docs for Count)
  int64_t int_sum = 0;
  double dbl_sum = 0;
  bool saw_float = false;
  Value minmax;             // current best; Null when none yet
};

Value group_key(const Document& doc, const Value& id_spec) {
  if (is_path_ref(id_spec)) return path_value(doc, path_of(id_spec));
  if (id_spec.kind() == Value::Kind::Document) {
    Document key;
    for (const auto& f : id_spec.fields())
      key.push_back({f.name, path_value(doc, path_of(f.value))});
    return Value::document(std::move(key));
  }
  return id_spec;  // constant: a single group
}

std::vector<Document> apply_group(const std::vector<Document>& docs, const GroupStage& stage) {
  std::vector<std::pair<Value, std::vector<GroupAccState>>> groups;
  std::unordered_map<std::string, size_t> index;
  for (const auto& doc : docs) {
    Value key = group_key(doc, stage.id_spec);
    std::string enc;
    encode_group_key(key, enc);
    auto [it, inserted] = index.emplace(std::move(enc), groups.size());
    if (inserted) groups.emplace_back(std::move(key), std::vector<GroupAccState>(stage.accs.size()));
    auto& states = groups[it->second].second;
    for (size_t i = 0; i < stage.accs.size(); ++i) {
      const auto& acc = stage.accs[i];
      GroupAccState& st = states[i];
      if (acc.fn == GroupStage::Acc::Fn::Count) {
        ++st.count;
        continue;
      }
      Value v = acc.path.empty() ? acc.constant : path_value(doc, acc.path);
      switch (acc.fn) {
        case GroupStage::Acc::Fn::Sum:
        case GroupStage::Acc::Fn::Avg:
          if (v.is_numeric()) {
            ++st.count;
            if (v.kind() == Value::Kind::Float64) st.saw_float = true;
            else st.int_sum += v.as_int64();
            st.dbl_sum += v.numeric_value();
          }
          break;
        case GroupStage::Acc::Fn::Min:
        case GroupStage::Acc::Fn::Max: {
          if (v.is_null()) break;
          if (st.minmax.is_null()) {
            st.minmax = v;
          } else {
            Ordering o = compare(v, st.minmax);
            bool better = acc.fn == GroupStage::Acc::Fn::Min ? o == Ordering::Less
                                                             : o == Ordering::Greater;
            if (better) st.minmax = v;
          }
          break;
        }
        default: break;
      }
    }
  }
  std::vector<Document> out;
  out.reserve(groups.size());
  for (auto& [key, states] : groups) {
    Document doc;
    doc.push_back({"_id", std::move(key)});
    for (size_t i = 0; i < stage.accs.size(); ++i) {
      const auto& acc = stage.accs[i];
      GroupAccState& st = states[i];
      Value v;
      switch (acc.fn) {
        case GroupStage::Acc::Fn::Count: v = Value::int64(st.count); break;
        case GroupStage::Acc::Fn::Sum:
          // No numeric contributions folds to Null (SQL-style), not 0.
          if (st.count == 0) v = Value::null();
          else if (st.saw_float) v = Value::float64(st.dbl_sum);
          else v = Value::int64(st.int_sum);
          break;
        case GroupStage::Acc::Fn::Avg:
          v = st.count == 0 ? Value::null() : Value::float64(st.dbl_sum / static_cast<double>(st.count));
          break;
        case GroupStage::Acc::Fn::Min:
        case GroupStage::Acc::Fn::Max: v = std::move(st.minmax); break;
      }
      doc.push_back({acc.field, std::move(v)});
    }
    out.push_back(std::move(doc));
  }
  return out;
}

struct StageExecutor {
  std::vector<Document> docs;

  void operator()(const MatchStage& s) {
    std::vector<Document> out;
    out.reserve(docs.size());
    for (auto& doc : docs) {
      bool ok = true;
      for (const auto& c : s.conds) {
        if (!eval_cond(doc, c)) {
          ok = false;
          break;
        }
      }
      if (ok) out.push_back(std::move(doc));
    }
    docs = std::move(out);
  }

  void operator()(const ProjectStage& s) {
    for (auto& doc : docs) doc = apply_project(doc, s);
  }

  void operator()(const UnwindStage& s) {
    std::vector<Document> out;
    for (auto& doc : docs) {
      const Value* v = find_path(doc, s.path);
      if (v == nullptr || v->is_null()) continue;  // drop docs without the path
      if (v->kind() != Value::Kind::Array) {
        out.push_back(std::move(doc));  // a lone value unwinds to itself
        continue;
      }
      if (v->elements().empty()) continue;
      Value whole = Value::document(doc);
      for (const auto& elem : v->elements())
        out.push_back(with_path_set(whole, s.path, elem).fields());
    }
    docs = std::move(out);
  }

  void operator()(const SortStage& s) {
    std::stable_sort(docs.begin(), docs.end(), [&](const Document& a, const Document& b) {
      for (const auto& k : s.keys) {
        Value ka = path_value(a, k.path);
        Value kb = path_value(b, k.path);
        if (k.coerce_to) {
          if (coercible(ka)) {
            try {
              ka = coerce(ka, *k.coerce_to);
            } catch (const Error&) {
              ka = Value::null();
            }
          }
          if (coercible(kb)) {
            try {
              kb = coerce(kb, *k.coerce_to);
            } catch (const Error&) {
              kb = Value::null();
            }
          }
        }
        if (sort_before(ka, kb, k.ascending)) return true;
        if (sort_before(kb, ka, k.ascending)) return false;
      }
      return false;
    });
  }

  void operator()(const LimitStage& s) {
    if (static_cast<int64_t>(docs.size()) > s.n) docs.resize(static_cast<size_t>(s.n));
  }

  void operator()(const GroupStage& s) { docs = apply_group(docs, s); }
};

}  // namespace

bool sort_before(const Value& a, const Value& b, bool ascending) {
  if (a.is_null() || b.is_null()) {
    if (a.is_null() && b.is_null()) return false;
    // Ascending: nulls last. Descending: nulls first.
    return ascending ? b.is_null() : a.is_null();
  }
  int ra = kind_rank(a), rb = kind_rank(b);
  if (ra != rb) return ascending ? ra < rb : ra > rb;
  if (ra >= 5) return false;  // arrays/documents keep their relative order
  Ordering o = compare(a, b);
  if (o == Ordering::Less) return ascending;
  if (o == Ordering::Greater) return !ascending;
  return false;
}

std::vector<Document> pipeline_execute(const std::vector<Document>& docs, const Pipeline& p) {
  StageExecutor exec{docs};
  for (const auto& stage : p.stages) std::visit(exec, stage);
  return std::move(exec.docs);
}

}  // namespace pqe
