#include "polyqe/inference.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "polyqe/error.hpp"

namespace pqe {

std::string_view observed_type_name(ObservedType t) {
  switch (t) {
    case ObservedType::Bool: return "BOOL";
    case ObservedType::Int: return "INT";
    case ObservedType::BigInt: return "BIGINT";
    case ObservedType::Double: return "DOUBLE";
    case ObservedType::Text: return "TEXT";
    case ObservedType::Timestamp: return "TIMESTAMP";
    case ObservedType::Array: return "ARRAY";
    case ObservedType::Document: return "DOCUMENT";
  }
  return "?";
}

double FieldStat::occurrence_prob(int64_t sample_size) const {
  return sample_size <= 0 ? 0.0
                          : static_cast<double>(doc_count) / static_cast<double>(sample_size);
}

namespace {

template <class Map>
ObservedType majority(const Map& hist) {
  int64_t best = 0;
  ObservedType winner = ObservedType::Text;
  bool tie = false;
  for (const auto& [type, count] : hist) {
    if (count > best) {
      best = count;
      winner = type;
      tie = false;
    } else if (count == best) {
      tie = true;
    }
  }
  return (best == 0 || tie) ? ObservedType::Text : winner;
}

ScalarType as_scalar(ObservedType t) {
  switch (t) {
    case ObservedType::Bool: return ScalarType::Bool;
    case ObservedType::Int: return ScalarType::Int;
    case ObservedType::BigInt: return ScalarType::BigInt;
    case ObservedType::Double: return ScalarType::Double;
    case ObservedType::Timestamp: return ScalarType::Timestamp;
    default: return ScalarType::Text;
  }
}

ObservedType observe_scalar(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Bool: return ObservedType::Bool;
    case Value::Kind::Int64: {
      int64_t i = v.as_int64();
      return i >= -2147483648LL && i <= 2147483647LL ? ObservedType::Int
                                                     : ObservedType::BigInt;
    }
    case Value::Kind::Float64: return ObservedType::Double;
    case Value::Kind::Timestamp: return ObservedType::Timestamp;
    default: return ObservedType::Text;
  }
}

}  // namespace

ObservedType FieldStat::resolved() const { return majority(histogram); }

ScalarType FieldStat::column_type() const { return as_scalar(resolved()); }

ScalarType FieldStat::element_type() const {
  std::map<ObservedType, int64_t> scalars;
  for (const auto& [type, count] : element_histogram)
    if (type != ObservedType::Array && type != ObservedType::Document)
      scalars.emplace(type, count);
  return as_scalar(majority(scalars));
}

const FieldStat* ProbabilisticSchema::find(std::string_view path) const {
  for (const auto& [p, stat] : fields)
    if (p == path) return &stat;
  return nullptr;
}

namespace {

class SchemaBuilder {
 public:
  explicit SchemaBuilder(std::string_view collection) { ps_.collection = collection; }

  void add_document(const Document& doc) {
    ++ps_.sample_size;
    counted_.clear();
    for (const auto& f : doc) walk(f.name, f.value);
  }

  ProbabilisticSchema take() && { return std::move(ps_); }

 private:
  FieldStat& stat(const std::string& path) {
    auto it = index_.find(path);
    if (it == index_.end()) {
      ps_.fields.emplace_back(path, FieldStat{});
      it = index_.emplace(path, ps_.fields.size() - 1).first;
    }
    FieldStat& s = ps_.fields[it->second].second;
    if (counted_.insert(path).second) ++s.doc_count;
    return s;
  }

  void walk(const std::string& path, const Value& v) {
    FieldStat& s = stat(path);
    switch (v.kind()) {
      case Value::Kind::Null:
        break;  // presence without type evidence
      case Value::Kind::Document:
        ++s.histogram[ObservedType::Document];
        for (const auto& f : v.fields()) walk(path + "." + f.name, f.value);
        break;
      case Value::Kind::Array:
        ++s.histogram[ObservedType::Array];
        for (const auto& e : v.elements()) {
          if (e.kind() == Value::Kind::Document) {
            // Element fields surface under the array's own path.
            for (const auto& f : e.fields()) walk(path + "." + f.name, f.value);
          } else if (e.kind() == Value::Kind::Array) {
            ++stat(path).element_histogram[ObservedType::Array];
          } else if (e.kind() != Value::Kind::Null) {
            ++stat(path).element_histogram[observe_scalar(e)];
          }
        }
        break;
      default:
        ++s.histogram[observe_scalar(v)];
        break;
    }
  }

  ProbabilisticSchema ps_;
  std::map<std::string, size_t, std::less<>> index_;
  std::set<std::string> counted_;  // paths already tallied for the current doc
};

std::string identifier_of(std::string_view path) {
  std::string out;
  out.reserve(path.size());
  for (char c : path)
    out.push_back(c == '.' ? '_'
                           : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

bool encloses(std::string_view array_path, std::string_view path) {
  return path.size() > array_path.size() &&
         path.substr(0, array_path.size()) == array_path && path[array_path.size()] == '.';
}

std::string unwind_pipe(const std::vector<std::string>& arrays, std::string_view self) {
  std::string out = "[";
  for (const auto& a : arrays) {
    if (a != self && !encloses(a, self)) continue;
    if (out.size() > 1) out += ", ";
    out += "{\"$unwind\": \"$" + a + "\"}";
  }
  return out + "]";
}

}  // namespace

ProbabilisticSchema infer(const std::vector<Document>& docs, int64_t sample_limit,
                          std::string_view collection_name) {
  if (sample_limit < 1) throw Error(ErrorKind::Plan, "sample limit must be at least 1");
  SchemaBuilder b(collection_name);
  int64_t n = std::min<int64_t>(static_cast<int64_t>(docs.size()), sample_limit);
  for (int64_t i = 0; i < n; ++i) b.add_document(docs[static_cast<size_t>(i)]);
  return std::move(b).take();
}

RelationalMapping derive_mapping(
    const ProbabilisticSchema& ps, const std::string& server_name,
    const std::string& into_schema,
    const std::vector<std::pair<std::string, std::string>>& table_options,
    const MappingOptions& opts) {
  // Fields below the probability floor vanish before any structural decisions.
  std::vector<std::pair<std::string, const FieldStat*>> kept;
  for (const auto& [path, stat] : ps.fields)
    if (stat.occurrence_prob(ps.sample_size) >= opts.min_prob) kept.emplace_back(path, &stat);

  std::vector<std::string> arrays;
  for (const auto& [path, stat] : kept)
    if (stat->resolved() == ObservedType::Array) arrays.push_back(path);

  // Innermost enclosing array decides which table a field belongs to.
  auto home_of = [&](std::string_view path) {
    std::string home;
    for (const auto& a : arrays)
      if (encloses(a, path) && a.size() > home.size()) home = a;
    return home;
  };

  std::string outer_name = identifier_of(ps.collection);
  RelationalMapping m;

  sql::CreateForeignTableStmt outer;
  outer.name = {into_schema, outer_name};
  outer.server = server_name;
  outer.options = table_options;
  outer.columns.push_back({"_id", ScalarType::Text, {{"mname", "_id"}}});
  for (const auto& [path, stat] : kept) {
    ObservedType t = stat->resolved();
    if (path == "_id" || t == ObservedType::Array || t == ObservedType::Document) continue;
    if (!home_of(path).empty()) continue;
    outer.columns.push_back({identifier_of(path), stat->column_type(), {{"mname", path}}});
  }
  m.tables.push_back(std::move(outer));

  for (const auto& a : arrays) {
    const FieldStat* astat = ps.find(a);
    sql::CreateForeignTableStmt child;
    child.name = {into_schema, outer_name + "_" + identifier_of(a)};
    child.server = server_name;
    child.options = table_options;
    child.options.emplace_back("pipe", unwind_pipe(arrays, a));
    if (opts.parent_id)
      child.columns.push_back({"_parent_id", ScalarType::Text, {{"mname", "_id"}}});
    if (astat != nullptr && !astat->element_histogram.empty()) {
      // Scalar elements land in a plain `value` column once unwound.
      child.columns.push_back({"value", astat->element_type(), {{"mname", a}}});
    }
    for (const auto& [path, stat] : kept) {
      ObservedType t = stat->resolved();
      if (t == ObservedType::Array || t == ObservedType::Document) continue;
      if (home_of(path) != a) continue;
      child.columns.push_back({identifier_of(path.substr(a.size() + 1)), stat->column_type(),
                               {{"mname", path}}});
    }
    m.tables.push_back(std::move(child));
  }
  return m;
}

ImportResult import_foreign_schema(const ServerDef& server, const StoreBackend& backend,
                                   int64_t sample_limit, std::string_view remote_schema,
                                   std::string_view into_schema,
                                   const MappingOptions& opts) {
  ImportResult out;
  std::string into(into_schema);
  switch (backend.kind) {
    case StoreKind::DocStore: {
      for (const DocCollection* coll : backend.doc->collections()) {
        if (!remote_schema.empty() && coll->db != remote_schema) continue;
        try {
          ProbabilisticSchema ps = infer(coll->docs, sample_limit, coll->name);
          std::vector<std::pair<std::string, std::string>> topts;
          topts.emplace_back("collection", coll->name);
          if (!coll->db.empty()) topts.emplace_back("db", coll->db);
          RelationalMapping m = derive_mapping(ps, server.name, into, topts, opts);
          for (auto& t : m.tables) out.statements.emplace_back(std::move(t));
        } catch (const Error& e) {
          out.warnings.push_back("collection " + coll->name + ": " + e.what());
        }
      }
      break;
    }
    case StoreKind::WideColumn: {
      for (const ColumnFamily* cf : backend.wide->families()) {
        sql::CreateForeignTableStmt t;
        t.name = {into, identifier_of(cf->name)};
        t.server = server.name;
        t.options.emplace_back("cf", cf->name);
        t.columns.push_back({"key", ScalarType::Text, {{"mname", "key"}}});
        for (const auto& q : cf->qualifiers)
          t.columns.push_back({identifier_of(q), ScalarType::Text, {{"mname", q}}});
        out.statements.emplace_back(std::move(t));
      }
      break;
    }
    case StoreKind::Kv: {
      for (const KvNamespace* ns : backend.kv->namespaces()) {
        sql::CreateForeignTableStmt t;
        t.name = {into, identifier_of(ns->name)};
        t.server = server.name;
        t.options.emplace_back("ns", ns->name);
        t.columns.push_back({"key", ScalarType::Text, {{"mname", "key"}}});
        t.columns.push_back({"value", ScalarType::Text, {{"mname", "value"}}});
        out.statements.emplace_back(std::move(t));
      }
      break;
    }
  }
  return out;
}

}  // namespace pqe
