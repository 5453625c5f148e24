#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polyqe/keyexpr.hpp"
#include "polyqe/sql/ast.hpp"
#include "polyqe/value.hpp"

namespace pqe {

enum class StoreKind { DocStore, WideColumn, Kv };

std::string_view store_kind_name(StoreKind k);
std::optional<StoreKind> store_kind_from_name(std::string_view name);

struct ServerDef {
  std::string name;
  StoreKind kind = StoreKind::DocStore;
  std::vector<std::pair<std::string, std::string>> options;

  const std::string* option(std::string_view key) const;
};

// A foreign table: relational schema plus the mapping onto a concrete store
// (collection/db for document stores, cf for wide-column, ns for key-value).
// Recognized table options: collection, db, pipe, cf, ns. Recognized column
// options: mname (document path), composite (key expression).
struct ForeignTableDef {
  std::string schema;
  std::string name;
  std::string server;
  RelSchema rel_schema;
  std::vector<std::pair<std::string, std::string>> options;

  // Parsed from the `composite` option of `composite_column` when present.
  std::optional<CompositeKeySpec> composite;
  std::string composite_column;

  const std::string* option(std::string_view key) const;
  std::string qualified() const { return schema.empty() ? name : schema + "." + name; }
  // The store path a column maps to: its `mname` option, else its own name.
  std::string_view mapped_name(const ColumnDef& col) const;
};

struct MatViewDef {
  std::string name;
  sql::Query query;
  std::optional<int64_t> refresh_every_secs;
  std::optional<int64_t> last_refreshed_micros;
};

// Result of resolving a FROM-clause name.
struct Resolved {
  const ForeignTableDef* table = nullptr;
  const MatViewDef* view = nullptr;
};

class Catalog {
 public:
  // DDL application. Returns a one-line summary for the CLI. Materialized-view
  // statements are not handled here (the engine executes their queries).
  std::string apply_ddl(const sql::Statement& stmt);

  void add_server(ServerDef def);
  void add_table(ForeignTableDef def);  // validates like CREATE
  void add_view(MatViewDef def);
  void drop_view(std::string_view name);
  MatViewDef* find_view(std::string_view name);

  const ServerDef* server(std::string_view name) const;
  const ForeignTableDef* table(std::string_view schema, std::string_view name) const;
  // Unqualified lookup: views first, then a table unique across schemas.
  Resolved resolve(const sql::QualifiedName& name) const;

  const std::vector<ServerDef>& servers() const { return servers_; }
  const std::vector<ForeignTableDef>& tables() const { return tables_; }
  const std::vector<MatViewDef>& views() const { return views_; }

  void save(const std::string& path) const;
  static Catalog load(const std::string& path);

 private:
  void create_table(const sql::CreateForeignTableStmt& stmt);
  void alter_table(const sql::AlterForeignTableStmt& stmt);
  void drop_table(const sql::DropForeignTableStmt& stmt);
  void validate_table(ForeignTableDef& def) const;

  std::vector<ServerDef> servers_;
  std::vector<ForeignTableDef> tables_;
  std::vector<MatViewDef> views_;
};

// Tables referenced by a query's FROM clause (qualified text), in order.
std::vector<sql::QualifiedName> referenced_tables(const sql::Query& q);

}  // namespace pqe
