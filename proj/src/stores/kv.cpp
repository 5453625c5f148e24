#include <fstream>

#include "polyqe/error.hpp"
#include "polyqe/stores.hpp"

namespace pqe {

KvNamespace& KvStore::get_or_create(std::string_view name) {
  auto it = namespaces_.find(name);
  if (it == namespaces_.end()) {
    KvNamespace ns;
    ns.name = std::string(name);
    it = namespaces_.emplace(std::string(name), std::move(ns)).first;
  }
  return it->second;
}

const KvNamespace* KvStore::find(std::string_view name) const {
  auto it = namespaces_.find(name);
  return it == namespaces_.end() ? nullptr : &it->second;
}

size_t KvStore::load_tsv(std::string_view name, std::istream& in) {
  KvNamespace& ns = get_or_create(name);
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorKind::Store, "namespace " + std::string(name) + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "key\tvalue")
    throw Error(ErrorKind::Store,
                "namespace " + std::string(name) + ": header must be 'key<TAB>value'");
  size_t count = 0, lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorKind::Store, "namespace " + std::string(name) + " line " +
                                        std::to_string(lineno) + ": missing value field");
    ns.entries[line.substr(0, tab)] = line.substr(tab + 1);
    ++count;
  }
  return count;
}

size_t KvStore::load_tsv_file(std::string_view name, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
  return load_tsv(name, in);
}

std::vector<const KvNamespace*> KvStore::namespaces() const {
  std::vector<const KvNamespace*> out;
  for (const auto& [name, ns] : namespaces_) out.push_back(&ns);
  return out;
}

// ---- wrapper ----

namespace {

struct KvPayload : ScanPlan::Payload {
  std::string ns;
};

struct KvCursor : Cursor {
  std::vector<Row> rows;
  size_t i = 0;
  WrapperStats* stats;

  KvCursor(std::vector<Row> r, WrapperStats* s) : rows(std::move(r)), stats(s) {}

  std::optional<Row> next() override {
    if (i >= rows.size()) return std::nullopt;
    ++stats->rows_emitted;
    return std::move(rows[i++]);
  }
};

}  // namespace

KvWrapper::KvWrapper(const KvStore& store, WrapperCapabilities caps)
    : store_(store), caps_(caps) {}

ScanPlan KvWrapper::plan_scan(const ScanRequest& req) const {
  const ForeignTableDef& table = *req.table;
  ScanPlan plan;
  plan.table = req.table;
  plan.columns = req.required_columns;
  plan.residual = req.filters;  // a pure key-value store evaluates nothing

  const std::string* ns = table.option("ns");
  auto payload = std::make_shared<KvPayload>();
  payload->ns = ns ? *ns : table.name;
  plan.native_text = "SCAN " + payload->ns;
  plan.payload = payload;

  const KvNamespace* n = store_.find(payload->ns);
  plan.est_rows = n ? static_cast<double>(n->entries.size()) : 0.0;
  return plan;
}

std::unique_ptr<Cursor> KvWrapper::open(const ScanPlan& plan) {
  const auto* payload = dynamic_cast<const KvPayload*>(plan.payload.get());
  if (payload == nullptr)
    throw Error(ErrorKind::Execution, "scan plan does not belong to this wrapper");

  ++stats_.scans;
  const ForeignTableDef& table = *plan.table;
  const KvNamespace* ns = store_.find(payload->ns);

  std::vector<Row> rows;
  if (ns != nullptr) {
    for (const auto& [key, value] : ns->entries) {
      Row row;
      row.reserve(plan.columns.size());
      for (const auto& name : plan.columns) {
        const ColumnDef* col = table.rel_schema.column(name);
        std::string_view mapped = table.mapped_name(*col);
        if (mapped == "key") {
          row.push_back(coerce(Value::text(key), col->type, "key '" + key + "'"));
        } else if (mapped == "value") {
          row.push_back(
              coerce(Value::text(value), col->type, "key '" + key + "' value"));
        } else {
          row.push_back(Value::null());
        }
      }
      rows.push_back(std::move(row));
    }
  }
  return std::make_unique<KvCursor>(std::move(rows), &stats_);
}

}  // namespace pqe
