#include "polyqe/catalog.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "polyqe/error.hpp"
#include "polyqe/pipeline.hpp"
#include "polyqe/sql/parser.hpp"

namespace pqe {

namespace {

constexpr int kCatalogVersion = 1;

const std::string* find_option(const std::vector<std::pair<std::string, std::string>>& options,
                               std::string_view key) {
  for (const auto& [k, v] : options)
    if (k == key) return &v;
  return nullptr;
}

void upsert_option(std::vector<std::pair<std::string, std::string>>& options,
                   const std::string& key, const std::string& value) {
  for (auto& [k, v] : options) {
    if (k == key) {
      v = value;
      return;
    }
  }
  options.emplace_back(key, value);
}

[[noreturn]] void catalog_fail(const std::string& what) {
  throw Error(ErrorKind::Catalog, what);
}

}  // namespace

std::string_view store_kind_name(StoreKind k) {
  switch (k) {
    case StoreKind::DocStore: return "docstore";
    case StoreKind::WideColumn: return "widecolumn";
    case StoreKind::Kv: return "kv";
  }
  return "?";
}

std::optional<StoreKind> store_kind_from_name(std::string_view name) {
  if (name == "docstore") return StoreKind::DocStore;
  if (name == "widecolumn") return StoreKind::WideColumn;
  if (name == "kv") return StoreKind::Kv;
  return std::nullopt;
}

const std::string* ServerDef::option(std::string_view key) const {
  return find_option(options, key);
}

const std::string* ForeignTableDef::option(std::string_view key) const {
  return find_option(options, key);
}

std::string_view ForeignTableDef::mapped_name(const ColumnDef& col) const {
  const std::string* mname = col.option("mname");
  return mname ? std::string_view(*mname) : std::string_view(col.name);
}

void Catalog::add_server(ServerDef def) {
  if (server(def.name) != nullptr)
    catalog_fail("server '" + def.name + "' already exists");
  servers_.push_back(std::move(def));
}

const ServerDef* Catalog::server(std::string_view name) const {
  for (const auto& s : servers_)
    if (s.name == name) return &s;
  return nullptr;
}

const ForeignTableDef* Catalog::table(std::string_view schema, std::string_view name) const {
  for (const auto& t : tables_)
    if (t.schema == schema && t.name == name) return &t;
  return nullptr;
}

MatViewDef* Catalog::find_view(std::string_view name) {
  for (auto& v : views_)
    if (v.name == name) return &v;
  return nullptr;
}

Resolved Catalog::resolve(const sql::QualifiedName& name) const {
  Resolved r;
  if (name.schema.empty()) {
    for (const auto& v : views_) {
      if (v.name == name.name) {
        r.view = &v;
        return r;
      }
    }
    const ForeignTableDef* match = nullptr;
    for (const auto& t : tables_) {
      if (t.name == name.name) {
        if (match != nullptr)
          catalog_fail("table name '" + name.name + "' is ambiguous (qualify with a schema)");
        match = &t;
      }
    }
    if (match == nullptr) catalog_fail("unknown relation '" + name.name + "'");
    r.table = match;
    return r;
  }
  r.table = table(name.schema, name.name);
  if (r.table == nullptr) catalog_fail("unknown relation '" + name.text() + "'");
  return r;
}

void Catalog::validate_table(ForeignTableDef& def) const {
  if (server(def.server) == nullptr)
    catalog_fail("unknown server '" + def.server + "' for table " + def.qualified());
  const ServerDef* srv = server(def.server);
  if (const std::string* pipe = def.option("pipe")) {
    if (srv->kind != StoreKind::DocStore)
      catalog_fail("option 'pipe' is only valid on document-store tables (table " +
                   def.qualified() + ")");
    try {
      parse_pipeline(*pipe);
    } catch (const Error& e) {
      catalog_fail("invalid 'pipe' option on " + def.qualified() + ": " + e.what());
    }
  }
  def.composite.reset();
  def.composite_column.clear();
  for (const auto& col : def.rel_schema.columns) {
    if (const std::string* spec_text = col.option("composite")) {
      if (!def.composite_column.empty())
        catalog_fail("table " + def.qualified() + " has more than one composite key column");
      CompositeKeySpec spec;
      try {
        spec = parse_key_spec(*spec_text);
      } catch (const Error& e) {
        catalog_fail("invalid 'composite' option on " + def.qualified() + "." + col.name +
                     ": " + e.what());
      }
      for (const auto& c : spec.columns) {
        if (def.rel_schema.index_of(c) < 0)
          catalog_fail("composite key of " + def.qualified() + " references unknown column '" +
                       c + "'");
      }
      def.composite = std::move(spec);
      def.composite_column = col.name;
    }
  }
}

void Catalog::add_table(ForeignTableDef def) {
  if (table(def.schema, def.name) != nullptr)
    catalog_fail("table " + def.qualified() + " already exists");
  validate_table(def);
  tables_.push_back(std::move(def));
}

void Catalog::add_view(MatViewDef def) {
  if (find_view(def.name) != nullptr)
    catalog_fail("view '" + def.name + "' already exists");
  for (const auto& t : tables_)
    if (t.schema.empty() && t.name == def.name)
      catalog_fail("name '" + def.name + "' already names a table");
  views_.push_back(std::move(def));
}

void Catalog::drop_view(std::string_view name) {
  auto it = std::find_if(views_.begin(), views_.end(),
                         [&](const MatViewDef& v) { return v.name == name; });
  if (it == views_.end()) catalog_fail("unknown view '" + std::string(name) + "'");
  views_.erase(it);
}

void Catalog::create_table(const sql::CreateForeignTableStmt& stmt) {
  ForeignTableDef def;
  def.schema = stmt.name.schema;
  def.name = stmt.name.name;
  def.server = stmt.server;
  def.options = stmt.options;
  for (const auto& c : stmt.columns) {
    ColumnDef col;
    col.name = c.name;
    col.type = c.type;
    col.options = c.options;
    def.rel_schema.columns.push_back(std::move(col));
  }
  add_table(std::move(def));
}

void Catalog::alter_table(const sql::AlterForeignTableStmt& stmt) {
  ForeignTableDef* def = nullptr;
  for (auto& t : tables_) {
    if (t.schema == stmt.name.schema && t.name == stmt.name.name) {
      def = &t;
      break;
    }
  }
  if (def == nullptr) catalog_fail("unknown table '" + stmt.name.text() + "'");
  // Apply to a copy so a failed validation leaves the catalog unchanged.
  ForeignTableDef updated = *def;
  for (const auto& action : stmt.actions) {
    switch (action.kind) {
      case sql::AlterAction::Kind::SetColumnType: {
        ColumnDef* col = nullptr;
        for (auto& c : updated.rel_schema.columns)
          if (c.name == action.column) col = &c;
        if (col == nullptr)
          catalog_fail("unknown column '" + action.column + "' in " + updated.qualified());
        col->type = action.type;
        break;
      }
      case sql::AlterAction::Kind::SetColumnOptions: {
        ColumnDef* col = nullptr;
        for (auto& c : updated.rel_schema.columns)
          if (c.name == action.column) col = &c;
        if (col == nullptr)
          catalog_fail("unknown column '" + action.column + "' in " + updated.qualified());
        for (const auto& [k, v] : action.options) upsert_option(col->options, k, v);
        break;
      }
      case sql::AlterAction::Kind::AddColumn: {
        for (const auto& c : updated.rel_schema.columns)
          if (c.name == action.add.name)
            catalog_fail("column '" + action.add.name + "' already exists in " +
                         updated.qualified());
        ColumnDef col;
        col.name = action.add.name;
        col.type = action.add.type;
        col.options = action.add.options;
        updated.rel_schema.columns.push_back(std::move(col));
        break;
      }
    }
  }
  validate_table(updated);
  *def = std::move(updated);
}

void Catalog::drop_table(const sql::DropForeignTableStmt& stmt) {
  auto it = std::find_if(tables_.begin(), tables_.end(), [&](const ForeignTableDef& t) {
    return t.schema == stmt.name.schema && t.name == stmt.name.name;
  });
  if (it == tables_.end()) catalog_fail("unknown table '" + stmt.name.text() + "'");
  for (const auto& v : views_) {
    for (const auto& ref : referenced_tables(v.query)) {
      bool hit = ref.schema.empty() ? ref.name == it->name
                                    : (ref.schema == it->schema && ref.name == it->name);
      if (hit)
        catalog_fail("cannot drop " + it->qualified() + ": view '" + v.name +
                     "' references it");
    }
  }
  tables_.erase(it);
}

std::string Catalog::apply_ddl(const sql::Statement& stmt) {
  if (const auto* create = std::get_if<sql::CreateForeignTableStmt>(&stmt)) {
    create_table(*create);
    return "created foreign table " + create->name.text();
  }
  if (const auto* alter = std::get_if<sql::AlterForeignTableStmt>(&stmt)) {
    alter_table(*alter);
    return "altered foreign table " + alter->name.text();
  }
  if (const auto* drop = std::get_if<sql::DropForeignTableStmt>(&stmt)) {
    drop_table(*drop);
    return "dropped foreign table " + drop->name.text();
  }
  catalog_fail("statement is not catalog DDL");
}

std::vector<sql::QualifiedName> referenced_tables(const sql::Query& q) {
  std::vector<sql::QualifiedName> out;
  for (const auto& entry : q.from)
    out.push_back({entry.table.schema, entry.table.table});
  return out;
}

// ---- persistence ----

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json options_to_json(const std::vector<std::pair<std::string, std::string>>& options) {
  ordered_json arr = ordered_json::array();
  for (const auto& [k, v] : options) arr.push_back(ordered_json::array({k, v}));
  return arr;
}

std::vector<std::pair<std::string, std::string>> options_from_json(const ordered_json& arr) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : arr) out.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
  return out;
}

}  // namespace

void Catalog::save(const std::string& path) const {
  ordered_json root;
  root["version"] = kCatalogVersion;
  root["servers"] = ordered_json::array();
  for (const auto& s : servers_) {
    ordered_json j;
    j["name"] = s.name;
    j["kind"] = std::string(store_kind_name(s.kind));
    j["options"] = options_to_json(s.options);
    root["servers"].push_back(std::move(j));
  }
  root["tables"] = ordered_json::array();
  for (const auto& t : tables_) {
    ordered_json j;
    j["schema"] = t.schema;
    j["name"] = t.name;
    j["server"] = t.server;
    j["columns"] = ordered_json::array();
    for (const auto& c : t.rel_schema.columns) {
      ordered_json cj;
      cj["name"] = c.name;
      cj["type"] = std::string(scalar_type_name(c.type));
      cj["options"] = options_to_json(c.options);
      j["columns"].push_back(std::move(cj));
    }
    j["options"] = options_to_json(t.options);
    root["tables"].push_back(std::move(j));
  }
  root["views"] = ordered_json::array();
  for (const auto& v : views_) {
    ordered_json j;
    j["name"] = v.name;
    j["sql"] = sql::render(v.query);
    if (v.refresh_every_secs) j["refresh_every_secs"] = *v.refresh_every_secs;
    if (v.last_refreshed_micros)
      j["last_refreshed"] = format_timestamp_micros(*v.last_refreshed_micros);
    root["views"].push_back(std::move(j));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write catalog file " + path);
  out << root.dump(2) << "\n";
  if (!out) throw Error(ErrorKind::Io, "write to catalog file " + path + " failed");
}

Catalog Catalog::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read catalog file " + path);
  ordered_json root;
  try {
    root = ordered_json::parse(in);
  } catch (const ordered_json::parse_error& e) {
    throw Error(ErrorKind::Io, "catalog file " + path + " is corrupted at byte " +
                                   std::to_string(e.byte) + ": " + e.what());
  }
  try {
    int version = root.at("version").get<int>();
    if (version != kCatalogVersion)
      throw Error(ErrorKind::Io, "catalog file " + path + " has unsupported version " +
                                     std::to_string(version));
    Catalog cat;
    for (const auto& j : root.at("servers")) {
      ServerDef s;
      s.name = j.at("name").get<std::string>();
      auto kind = store_kind_from_name(j.at("kind").get<std::string>());
      if (!kind)
        throw Error(ErrorKind::Io, "catalog server '" + s.name + "' has unknown kind");
      s.kind = *kind;
      s.options = options_from_json(j.at("options"));
      cat.add_server(std::move(s));
    }
    for (const auto& j : root.at("tables")) {
      ForeignTableDef t;
      t.schema = j.at("schema").get<std::string>();
      t.name = j.at("name").get<std::string>();
      t.server = j.at("server").get<std::string>();
      for (const auto& cj : j.at("columns")) {
        ColumnDef c;
        c.name = cj.at("name").get<std::string>();
        auto type = scalar_type_from_name(cj.at("type").get<std::string>());
        if (!type)
          throw Error(ErrorKind::Io, "catalog column '" + c.name + "' has unknown type");
        c.type = *type;
        c.options = options_from_json(cj.at("options"));
        t.rel_schema.columns.push_back(std::move(c));
      }
      t.options = options_from_json(j.at("options"));
      cat.add_table(std::move(t));
    }
    for (const auto& j : root.at("views")) {
      MatViewDef v;
      v.name = j.at("name").get<std::string>();
      sql::Statement stmt = sql::parse(j.at("sql").get<std::string>());
      v.query = std::get<sql::SelectStmt>(stmt).query;
      if (j.contains("refresh_every_secs"))
        v.refresh_every_secs = j.at("refresh_every_secs").get<int64_t>();
      if (j.contains("last_refreshed")) {
        auto micros = parse_timestamp_micros(j.at("last_refreshed").get<std::string>());
        if (micros) v.last_refreshed_micros = *micros;
      }
      cat.add_view(std::move(v));
    }
    return cat;
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorKind::Io, "catalog file " + path + " is malformed: " + e.what());
  }
}

}  // namespace pqe
