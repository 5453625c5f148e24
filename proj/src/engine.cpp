#include "polyqe/engine.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <utility>

#include "polyqe/executor.hpp"
#include "polyqe/sql/parser.hpp"

namespace fs = std::filesystem;

namespace pqe {

namespace {

[[noreturn]] void engine_fail(ErrorKind kind, std::string msg) {
  throw Error(kind, std::move(msg));
}

// "db.collection" → {db, collection}; a bare name loads into the empty db.
std::pair<std::string, std::string> split_doc_target(const std::string& target) {
  auto dot = target.find('.');
  if (dot == std::string::npos) return {"", target};
  return {target.substr(0, dot), target.substr(dot + 1)};
}

const char* data_extension(StoreKind kind) {
  return kind == StoreKind::DocStore ? ".ndjson" : ".tsv";
}

// Strips a leading "NNN." load ordinal, if present, from an archived name.
std::string strip_ordinal(const std::string& base) {
  auto dot = base.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == base.size()) return base;
  for (size_t i = 0; i < dot; ++i)
    if (std::isdigit(static_cast<unsigned char>(base[i])) == 0) return base;
  return base.substr(dot + 1);
}

}  // namespace

Engine::Engine(EngineConfig config)
    : config_(std::move(config)), matviews_(config_.data_dir) {
  if (!config_.catalog_path.empty() && fs::exists(config_.catalog_path))
    catalog_ = Catalog::load(config_.catalog_path);

  for (const ServerDef& s : catalog_.servers()) {
    backends_.emplace(s.name, StoreBackend::make(s.kind, !config_.disable_pushdown));
    load_server_dir(s.name);
  }

  int64_t now = wall_clock_micros();
  if (!config_.data_dir.empty()) matviews_.load_persisted(catalog_, now);

  // Declared views with no persisted contents get an initial population;
  // a failure leaves the view refreshable later rather than aborting startup.
  for (const MatViewDef& v : catalog_.views()) {
    if (matviews_.find(v.name) != nullptr) continue;
    try {
      matviews_.create_view(v, plan_context(), now);
    } catch (const Error& e) {
      startup_warnings_.push_back("view '" + v.name + "' not populated: " + e.what());
    }
  }
  sync_view_metadata();
}

int64_t Engine::wall_clock_micros() {
  using namespace std::chrono;
  return duration_cast<microseconds>(system_clock::now().time_since_epoch()).count();
}

void Engine::save_catalog() {
  if (!config_.catalog_path.empty()) catalog_.save(config_.catalog_path);
}

void Engine::sync_view_metadata() {
  for (const MatViewDef& v : catalog_.views())
    if (const MatViewSnapshot* s = matviews_.find(v.name))
      catalog_.find_view(v.name)->last_refreshed_micros = s->last_refreshed_micros;
}

StoreBackend* Engine::backend(const std::string& server) {
  auto it = backends_.find(server);
  return it == backends_.end() ? nullptr : &it->second;
}

StoreBackend& Engine::backend_for(const std::string& server) {
  StoreBackend* be = backend(server);
  if (be == nullptr) engine_fail(ErrorKind::Catalog, "unknown server '" + server + "'");
  return *be;
}

Wrapper* Engine::wrapper(const std::string& server) {
  StoreBackend* be = backend(server);
  return be == nullptr ? nullptr : be->wrapper.get();
}

const WrapperStats* Engine::stats(const std::string& server) {
  Wrapper* w = wrapper(server);
  return w == nullptr ? nullptr : &w->stats();
}

void Engine::reset_stats() {
  for (auto& [name, be] : backends_) be.wrapper->stats().reset();
}

PlanContext Engine::plan_context() {
  PlanContext ctx;
  ctx.catalog = &catalog_;
  ctx.wrapper_for = [this](const std::string& server) { return wrapper(server); };
  ctx.view_snapshot = [this](const std::string& view) { return matviews_.snapshot(view); };
  ctx.options.bind_join_threshold = config_.bind_join_threshold;
  ctx.options.force_join = config_.force_join;
  return ctx;
}

void Engine::add_server(const std::string& name, StoreKind kind, const std::string& data_dir) {
  ServerDef def{name, kind, {}};
  if (!data_dir.empty()) def.options.emplace_back("data", data_dir);
  catalog_.add_server(std::move(def));
  backends_.emplace(name, StoreBackend::make(kind, !config_.disable_pushdown));
  if (!data_dir.empty()) {
    std::error_code ec;
    fs::create_directories(data_dir, ec);
    if (ec)
      engine_fail(ErrorKind::Io, "cannot create data directory " + data_dir + ": " + ec.message());
    load_server_dir(name);  // pick up files already sitting there
  }
  save_catalog();
}

size_t Engine::load_into(StoreBackend& backend, StoreKind kind, const std::string& target,
                         const std::string& path) {
  switch (kind) {
    case StoreKind::DocStore: {
      auto [db, coll] = split_doc_target(target);
      return backend.doc->load_ndjson_file(db, coll, path);
    }
    case StoreKind::WideColumn:
      return backend.wide->load_tsv_file(target, path);
    case StoreKind::Kv:
      return backend.kv->load_tsv_file(target, path);
  }
  engine_fail(ErrorKind::Store, "unhandled store kind");
}

size_t Engine::load_data(const std::string& server, const std::string& target,
                         const std::string& path) {
  const ServerDef* def = catalog_.server(server);
  if (def == nullptr) engine_fail(ErrorKind::Catalog, "unknown server '" + server + "'");
  size_t count = load_into(backend_for(server), def->kind, target, path);

  if (const std::string* dir = def->option("data"); dir != nullptr && !dir->empty()) {
    int max_ordinal = 0;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(*dir, ec)) {
      std::string name = entry.path().filename().string();
      auto dot = name.find('.');
      if (dot == std::string::npos || dot == 0) continue;
      bool digits = std::all_of(name.begin(), name.begin() + static_cast<long>(dot), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c)) != 0;
      });
      if (digits) max_ordinal = std::max(max_ordinal, std::atoi(name.c_str()));
    }
    char prefix[8];
    std::snprintf(prefix, sizeof prefix, "%03d.", max_ordinal + 1);
    fs::path dst = fs::path(*dir) / (prefix + target + data_extension(def->kind));
    fs::copy_file(path, dst, fs::copy_options::overwrite_existing, ec);
    if (ec)
      engine_fail(ErrorKind::Io, "cannot archive " + path + " into " + *dir + ": " + ec.message());
  }
  return count;
}

void Engine::load_server_dir(const std::string& server) {
  const ServerDef* def = catalog_.server(server);
  const std::string* dir = def != nullptr ? def->option("data") : nullptr;
  if (dir == nullptr || dir->empty()) return;
  std::error_code ec;
  if (!fs::is_directory(*dir, ec)) return;

  std::string ext = data_extension(def->kind);
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(*dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    if (name.size() > ext.size() && name.compare(name.size() - ext.size(), ext.size(), ext) == 0)
      names.push_back(std::move(name));
  }
  std::sort(names.begin(), names.end());

  StoreBackend& be = backend_for(server);
  for (const std::string& name : names) {
    std::string target = strip_ordinal(name.substr(0, name.size() - ext.size()));
    try {
      load_into(be, def->kind, target, (fs::path(*dir) / name).string());
    } catch (const Error& e) {
      startup_warnings_.push_back("server '" + server + "': could not load " + name + ": " +
                                  e.what());
    }
  }
}

ImportResult Engine::import_schema(const std::string& server, int64_t sample_limit, bool apply,
                                   std::string_view remote_schema, std::string_view into_schema) {
  const ServerDef* def = catalog_.server(server);
  if (def == nullptr) engine_fail(ErrorKind::Catalog, "unknown server '" + server + "'");
  std::string schema = into_schema.empty() ? server : std::string(into_schema);
  ImportResult result =
      import_foreign_schema(*def, backend_for(server), sample_limit, remote_schema, schema);
  if (apply) {
    for (const sql::Statement& stmt : result.statements) {
      try {
        catalog_.apply_ddl(stmt);
      } catch (const Error& e) {
        result.warnings.push_back(std::string("not applied: ") + e.what());
      }
    }
    save_catalog();
  }
  return result;
}

QueryResult Engine::run_query(const sql::Query& q) {
  reset_stats();
  PlanPtr plan = plan_query(q, plan_context());
  QueryResult result;
  for (const PlanCol& c : plan->schema) {
    result.columns.push_back(c.name);
    result.types.push_back(c.type);
  }
  result.rows = execute_plan(*plan);
  return result;
}

std::string Engine::explain(const sql::Query& q) {
  PlanPtr plan = plan_query(q, plan_context());
  return explain_text(*plan);
}

ExecResult Engine::execute(const std::string& sql_text) { return execute(sql::parse(sql_text)); }

ExecResult Engine::execute(const sql::Statement& stmt) {
  ExecResult out;
  if (const auto* sel = std::get_if<sql::SelectStmt>(&stmt)) {
    out.table = run_query(sel->query);
    return out;
  }
  if (const auto* ex = std::get_if<sql::ExplainStmt>(&stmt)) {
    out.message = explain(ex->query);
    return out;
  }
  if (const auto* imp = std::get_if<sql::ImportForeignSchemaStmt>(&stmt)) {
    int64_t sample = 100;
    for (const auto& [key, value] : imp->options) {
      if (key != "sample") continue;
      try {
        sample = std::stoll(value);
      } catch (const std::exception&) {
        engine_fail(ErrorKind::Plan, "invalid sample limit '" + value + "'");
      }
    }
    ImportResult res =
        import_schema(imp->server, sample, /*apply=*/true, imp->remote_schema, imp->into_schema);
    out.message = "imported foreign schema from server '" + imp->server + "' (" +
                  std::to_string(res.statements.size()) + " statements)";
    out.warnings = std::move(res.warnings);
    return out;
  }
  if (const auto* cv = std::get_if<sql::CreateMatViewStmt>(&stmt)) {
    MatViewDef def{cv->name, cv->query, cv->refresh_every_secs, std::nullopt};
    catalog_.add_view(def);
    try {
      matviews_.create_view(def, plan_context(), wall_clock_micros());
    } catch (...) {
      catalog_.drop_view(cv->name);
      throw;
    }
    sync_view_metadata();
    save_catalog();
    const MatViewSnapshot* snap = matviews_.find(cv->name);
    out.message = "created materialized view " + cv->name + " (" +
                  std::to_string(snap != nullptr ? snap->rows->size() : 0) + " rows)";
    return out;
  }
  if (const auto* rv = std::get_if<sql::RefreshMatViewStmt>(&stmt)) {
    RefreshReport report = matviews_.refresh(rv->name, plan_context(), wall_clock_micros());
    sync_view_metadata();
    save_catalog();
    out.message = "refreshed materialized view " + rv->name + " (" +
                  std::to_string(report.rows) + " rows)";
    return out;
  }
  out.message = catalog_.apply_ddl(stmt);
  save_catalog();
  return out;
}

std::vector<std::string> Engine::scheduler_tick(int64_t now_micros) {
  std::vector<std::string> refreshed = matviews_.scheduler_tick(plan_context(), now_micros);
  if (!refreshed.empty()) {
    sync_view_metadata();
    save_catalog();
  }
  return refreshed;
}

}  // namespace pqe
