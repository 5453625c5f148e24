#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polyqe/catalog.hpp"
#include "polyqe/inference.hpp"
#include "polyqe/matview.hpp"
#include "polyqe/planner.hpp"
#include "polyqe/stores.hpp"

namespace pqe {

struct EngineConfig {
  std::string catalog_path;  // empty: in-memory catalog, nothing saved
  std::string data_dir;      // empty: materialized views are not persisted
  int64_t bind_join_threshold = 1000;
  bool disable_pushdown = false;
  PlannerOptions::ForceJoin force_join = PlannerOptions::ForceJoin::Auto;
};

struct QueryResult {
  std::vector<std::string> columns;
  std::vector<ScalarType> types;
  std::vector<Row> rows;
};

// Outcome of one statement: SELECT fills `table`, everything else `message`.
struct ExecResult {
  std::optional<QueryResult> table;
  std::string message;
  std::vector<std::string> warnings;
};

// Ties the pieces together for one process: owns the catalog, one store
// backend per server, and the materialized-view store. Construction restores
// everything reachable from the catalog file: servers, any data files found
// in each server's data directory, and persisted view contents.
class Engine {
 public:
  explicit Engine(EngineConfig config);

  void add_server(const std::string& name, StoreKind kind, const std::string& data_dir);

  // Loads one data file (NDJSON for document servers, TSV otherwise) into
  // `target` — a collection (optionally "db.collection"), column family, or
  // namespace. When the server has a data directory the file is also copied
  // there under an ordinal prefix so a restart replays loads in order.
  size_t load_data(const std::string& server, const std::string& target, const std::string& path);

  // Empty into_schema defaults to the server name, so imported tables are
  // addressable as <server>.<table>. With apply=false the statements are
  // only generated; apply failures are reported as warnings.
  ImportResult import_schema(const std::string& server, int64_t sample_limit, bool apply,
                             std::string_view remote_schema = {},
                             std::string_view into_schema = {});

  ExecResult execute(const std::string& sql_text);
  ExecResult execute(const sql::Statement& stmt);
  QueryResult run_query(const sql::Query& q);
  std::string explain(const sql::Query& q);

  std::vector<std::string> scheduler_tick(int64_t now_micros);

  PlanContext plan_context();
  Catalog& catalog() { return catalog_; }
  MatViewStore& views() { return matviews_; }
  const EngineConfig& config() const { return config_; }
  StoreBackend* backend(const std::string& server);
  Wrapper* wrapper(const std::string& server);
  const WrapperStats* stats(const std::string& server);
  void reset_stats();

  // Non-fatal problems hit while restoring state (unloadable files, views
  // whose first population failed). The CLI prints these to stderr.
  const std::vector<std::string>& startup_warnings() const { return startup_warnings_; }

  static int64_t wall_clock_micros();

 private:
  void save_catalog();
  void sync_view_metadata();
  void load_server_dir(const std::string& server);
  size_t load_into(StoreBackend& backend, StoreKind kind, const std::string& target,
                   const std::string& path);
  StoreBackend& backend_for(const std::string& server);

  EngineConfig config_;
  Catalog catalog_;
  MatViewStore matviews_;
  std::map<std::string, StoreBackend> backends_;
  std::vector<std::string> startup_warnings_;
};

}  // namespace pqe
