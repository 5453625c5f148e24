#include <fstream>
#include <sstream>

#include "polyqe/error.hpp"
#include "polyqe/stores.hpp"

namespace pqe {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t tab = line.find('\t', start);
    std::string field = tab == std::string::npos ? line.substr(start)
                                                 : line.substr(start, tab - start);
    if (!field.empty() && field.back() == '\r') field.pop_back();
    out.push_back(std::move(field));
    if (tab == std::string::npos) return out;
    start = tab + 1;
  }
}

}  // namespace

// ---- store ----

ColumnFamily& WideColumnStore::get_or_create(std::string_view name) {
  auto it = families_.find(name);
  if (it == families_.end()) {
    ColumnFamily cf;
    cf.name = std::string(name);
    it = families_.emplace(std::string(name), std::move(cf)).first;
  }
  return it->second;
}

const ColumnFamily* WideColumnStore::find(std::string_view name) const {
  auto it = families_.find(name);
  return it == families_.end() ? nullptr : &it->second;
}

void WideColumnStore::put(ColumnFamily& cf, std::string key,
                          std::map<std::string, std::string> cells) {
  for (const auto& [q, cell] : cells) {
    (void)cell;
    if (std::find(cf.qualifiers.begin(), cf.qualifiers.end(), q) == cf.qualifiers.end())
      cf.qualifiers.push_back(q);
  }
  cf.rows[std::move(key)] = std::move(cells);
}

size_t WideColumnStore::load_tsv(std::string_view name, std::istream& in) {
  ColumnFamily& cf = get_or_create(name);
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorKind::Store, "column family " + std::string(name) + ": empty file");
  std::vector<std::string> header = split_tabs(line);
  int key_idx = -1;
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == "key") key_idx = static_cast<int>(i);
  if (key_idx < 0)
    throw Error(ErrorKind::Store,
                "column family " + std::string(name) + ": header has no 'key' column");
  for (const auto& h : header) {
    if (h == "key") continue;
    if (std::find(cf.qualifiers.begin(), cf.qualifiers.end(), h) == cf.qualifiers.end())
      cf.qualifiers.push_back(h);
  }
  size_t count = 0, lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != header.size())
      throw Error(ErrorKind::Store, "column family " + std::string(name) + " line " +
                                        std::to_string(lineno) + ": expected " +
                                        std::to_string(header.size()) + " fields, got " +
                                        std::to_string(fields.size()));
    std::map<std::string, std::string> cells;
    for (size_t i = 0; i < header.size(); ++i) {
      if (static_cast<int>(i) == key_idx) continue;
      cells[header[i]] = fields[i];
    }
    cf.rows[fields[static_cast<size_t>(key_idx)]] = std::move(cells);
    ++count;
  }
  return count;
}

size_t WideColumnStore::load_tsv_file(std::string_view name, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
  return load_tsv(name, in);
}

std::vector<const ColumnFamily*> WideColumnStore::families() const {
  std::vector<const ColumnFamily*> out;
  for (const auto& [name, cf] : families_) out.push_back(&cf);
  return out;
}

// ---- wrapper ----

namespace {

struct WcPayload : ScanPlan::Payload {
  std::string cf;
  std::optional<std::string> key;  // point-get route
  std::optional<int64_t> limit;    // only when accepted
  bool has_params = false;
};

struct WcCursor : Cursor {
  std::vector<Row> rows;
  size_t i = 0;
  WrapperStats* stats;

  WcCursor(std::vector<Row> r, WrapperStats* s) : rows(std::move(r)), stats(s) {}

  std::optional<Row> next() override {
    if (i >= rows.size()) return std::nullopt;
    ++stats->rows_emitted;
    return std::move(rows[i++]);
  }
};

std::string wc_family(const ForeignTableDef& table) {
  const std::string* cf = table.option("cf");
  return cf ? *cf : table.name;
}

bool is_plain_eq(const Conjunct& c) {
  return c.atoms.size() == 1 && c.atoms[0].op == FilterOp::Eq;
}

}  // namespace

WideColumnWrapper::WideColumnWrapper(const WideColumnStore& store, WrapperCapabilities caps)
    : store_(store), caps_(caps) {}

WrapperCapabilities WideColumnWrapper::default_capabilities() {
  WrapperCapabilities c;
  c.filter_eq_on_key = true;
  c.filter_general = false;
  c.projection = true;
  c.sort = false;
  c.group_aggregate = false;
  c.limit = true;
  c.native_fragment = false;
  return c;
}

ScanPlan WideColumnWrapper::plan_scan(const ScanRequest& req) const {
  const ForeignTableDef& table = *req.table;
  ScanPlan plan;
  plan.table = req.table;
  plan.columns = req.required_columns;

  auto payload = std::make_shared<WcPayload>();
  payload->cf = wc_family(table);

  // Key routing: either a direct equality on the row-key column, or
  // equalities completing the composite key expression.
  std::vector<bool> used(req.filters.size(), false);
  if (caps_.filter_eq_on_key) {
    int direct = -1;
    for (size_t i = 0; i < req.filters.size() && direct < 0; ++i) {
      const Conjunct& c = req.filters[i];
      if (!is_plain_eq(c)) continue;
      const ColumnDef* col = table.rel_schema.column(c.atoms[0].column);
      if (col != nullptr && table.mapped_name(*col) == "key") direct = static_cast<int>(i);
    }
    if (direct >= 0) {
      const FilterAtom& a = req.filters[static_cast<size_t>(direct)].atoms[0];
      used[static_cast<size_t>(direct)] = true;
      if (a.param >= 0) {
        payload->has_params = true;
        payload->key = "?";
      } else {
        payload->key = a.literal.to_plain_text();
      }
    } else if (table.composite) {
      std::map<std::string, Value> eqs;
      std::map<std::string, size_t> sources;
      bool params = false;
      for (size_t i = 0; i < req.filters.size(); ++i) {
        const Conjunct& c = req.filters[i];
        if (!is_plain_eq(c)) continue;
        const FilterAtom& a = c.atoms[0];
        bool is_key_col = std::find(table.composite->columns.begin(),
                                    table.composite->columns.end(),
                                    a.column) != table.composite->columns.end();
        if (!is_key_col || eqs.count(a.column) != 0) continue;
        eqs.emplace(a.column, a.literal);
        sources.emplace(a.column, i);
        if (a.param >= 0) params = true;
      }
      if (eqs.size() == table.composite->columns.size()) {
        for (const auto& [col, idx] : sources) {
          (void)col;
          used[idx] = true;
        }
        if (params) {
          payload->has_params = true;
          payload->key = "?";
        } else {
          payload->key = key_from_equalities(*table.composite, eqs);
        }
      }
    }
  }

  for (size_t i = 0; i < req.filters.size(); ++i)
    (used[i] ? plan.accepted : plan.residual).push_back(req.filters[i]);

  plan.limit_accepted = req.limit.has_value() && caps_.limit && plan.residual.empty() &&
                        req.sort.empty() && req.group_by.empty();
  if (plan.limit_accepted) payload->limit = req.limit;

  std::string cols;
  if (caps_.projection && !plan.columns.empty()) {
    for (const auto& c : plan.columns) {
      if (!cols.empty()) cols += ", ";
      cols += c;
    }
  } else {
    cols = "*";
  }
  plan.native_text = "SELECT " + cols + " FROM " + payload->cf;
  if (payload->key) plan.native_text += " WHERE key = '" + *payload->key + "'";
  if (plan.limit_accepted) plan.native_text += " LIMIT " + render_int64(*req.limit);
  plan.payload = payload;

  const ColumnFamily* cf = store_.find(payload->cf);
  double est = payload->key ? 1.0 : (cf ? static_cast<double>(cf->rows.size()) : 0.0);
  if (plan.limit_accepted) est = std::min(est, static_cast<double>(*req.limit));
  plan.est_rows = est;
  return plan;
}

std::unique_ptr<Cursor> WideColumnWrapper::open(const ScanPlan& plan) {
  const auto* payload = dynamic_cast<const WcPayload*>(plan.payload.get());
  if (payload == nullptr)
    throw Error(ErrorKind::Execution, "scan plan does not belong to this wrapper");
  if (payload->has_params)
    throw Error(ErrorKind::Execution, "scan plan has unbound parameters");

  const ForeignTableDef& table = *plan.table;
  const ColumnFamily* cf = store_.find(payload->cf);

  auto build_row = [&](const std::string& key,
                       const std::map<std::string, std::string>& cells) {
    Row row;
    row.reserve(plan.columns.size());
    for (const auto& name : plan.columns) {
      const ColumnDef* col = table.rel_schema.column(name);
      std::string_view mapped = table.mapped_name(*col);
      Value v;
      if (mapped == "key") {
        v = Value::text(key);
      } else {
        auto it = cells.find(std::string(mapped));
        if (it == cells.end()) {
          row.push_back(Value::null());
          continue;
        }
        v = Value::text(it->second);
      }
      row.push_back(coerce(v, col->type, "row '" + key + "' column " + name));
    }
    return row;
  };

  std::vector<Row> rows;
  if (payload->key) {
    ++stats_.point_gets;
    if (cf != nullptr) {
      auto it = cf->rows.find(*payload->key);
      if (it != cf->rows.end()) rows.push_back(build_row(it->first, it->second));
    }
  } else {
    ++stats_.scans;
    if (cf != nullptr) {
      for (const auto& [key, cells] : cf->rows) {
        if (payload->limit && static_cast<int64_t>(rows.size()) >= *payload->limit) break;
        rows.push_back(build_row(key, cells));
      }
    }
  }
  return std::make_unique<WcCursor>(std::move(rows), &stats_);
}

}  // namespace pqe
