#include "polyqe/matview.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "polyqe/error.hpp"
#include "polyqe/executor.hpp"
#include "polyqe/pipeline.hpp"

namespace pqe {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void view_fail(const std::string& what) {
  throw Error(ErrorKind::Execution, what);
}

}  // namespace

MatViewStore::MatViewStore(std::string data_dir) : data_dir_(std::move(data_dir)) {}

std::string MatViewStore::view_path(const std::string& name) const {
  return (fs::path(data_dir_) / "views" / (name + ".rows")).string();
}

MatViewStore::Refreshed MatViewStore::execute_view(const MatViewDef& def,
                                                   const PlanContext& ctx) const {
  PlanPtr plan = plan_query(def.query, ctx);
  Refreshed out;
  for (const PlanCol& col : plan->schema)
    out.schema.columns.push_back({col.name, col.type, {}});
  out.rows = std::make_shared<const std::vector<Row>>(execute_plan(*plan));
  return out;
}

void MatViewStore::register_job(const MatViewDef& def, int64_t now_micros) {
  if (!def.refresh_every_secs) return;
  if (*def.refresh_every_secs < 1)
    view_fail("refresh interval must be at least one second");
  for (auto& job : jobs_)
    if (job.view == def.name) {
      job.interval_secs = *def.refresh_every_secs;
      job.next_due_micros = now_micros + *def.refresh_every_secs * 1'000'000;
      return;
    }
  jobs_.push_back({def.name, *def.refresh_every_secs,
                   now_micros + *def.refresh_every_secs * 1'000'000, ""});
}

void MatViewStore::create_view(const MatViewDef& def, const PlanContext& ctx,
                               int64_t now_micros) {
  // Execute before touching any state: a failing query leaves no view.
  Refreshed fresh = execute_view(def, ctx);

  std::lock_guard<std::mutex> lock(mu_);
  MatViewSnapshot snap;
  snap.schema = std::move(fresh.schema);
  snap.rows = std::move(fresh.rows);
  snap.last_refreshed_micros = now_micros;
  persist(def.name, snap);
  views_[def.name] = std::move(snap);
  defs_[def.name] = def;
  register_job(def, now_micros);
}

RefreshReport MatViewStore::refresh(const std::string& name, const PlanContext& ctx,
                                    int64_t now_micros) {
  MatViewDef def;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = defs_.find(name);
    if (it == defs_.end()) view_fail("unknown materialized view '" + name + "'");
    def = it->second;
  }

  auto started = std::chrono::steady_clock::now();
  // Runs without the lock: readers keep using the current snapshot, and a
  // failure below leaves it untouched.
  Refreshed fresh = execute_view(def, ctx);
  double ms = std::chrono::duration<double, std::milli>(
                  std::chrono::steady_clock::now() - started)
                  .count();

  std::lock_guard<std::mutex> lock(mu_);
  MatViewSnapshot& snap = views_[name];
  snap.schema = std::move(fresh.schema);
  snap.rows = std::move(fresh.rows);
  snap.last_refreshed_micros = now_micros;
  persist(name, snap);
  return {snap.rows->size(), ms};
}

std::vector<std::string> MatViewStore::scheduler_tick(const PlanContext& ctx,
                                                      int64_t now_micros) {
  // Snapshot the due jobs under the lock, then refresh without it.
  std::vector<std::string> due;
  {
    std::lock_guard<std::mutex> lock(mu_);
    for (auto& job : jobs_)
      if (job.next_due_micros <= now_micros) due.push_back(job.view);
  }

  std::vector<std::string> refreshed;
  for (const std::string& name : due) {
    std::string error;
    try {
      refresh(name, ctx, now_micros);
      refreshed.push_back(name);
    } catch (const Error& e) {
      error = e.what();
    }
    std::lock_guard<std::mutex> lock(mu_);
    for (auto& job : jobs_) {
      if (job.view != name) continue;
      job.last_error = error;
      // Advance by whole intervals until the deadline is in the future; a
      // job that slept through several intervals still refreshes only once.
      int64_t step = job.interval_secs * 1'000'000;
      while (job.next_due_micros <= now_micros) job.next_due_micros += step;
    }
  }
  std::sort(refreshed.begin(), refreshed.end());
  return refreshed;
}

void MatViewStore::drop_view(const std::string& name) {
  std::lock_guard<std::mutex> lock(mu_);
  views_.erase(name);
  defs_.erase(name);
  jobs_.erase(std::remove_if(jobs_.begin(), jobs_.end(),
                             [&](const RefreshJob& j) { return j.view == name; }),
              jobs_.end());
  if (!data_dir_.empty()) {
    std::error_code ec;
    fs::remove(view_path(name), ec);
  }
}

std::optional<MatSnapshot> MatViewStore::snapshot(const std::string& name) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = views_.find(name);
  if (it == views_.end() || it->second.rows == nullptr) return std::nullopt;
  return MatSnapshot{it->second.schema, it->second.rows};
}

const MatViewSnapshot* MatViewStore::find(const std::string& name) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = views_.find(name);
  return it == views_.end() ? nullptr : &it->second;
}

std::vector<RefreshJob> MatViewStore::jobs() const {
  std::lock_guard<std::mutex> lock(mu_);
  return jobs_;
}

size_t MatViewStore::load_persisted(const Catalog& catalog, int64_t now_micros) {
  size_t restored = 0;
  for (const MatViewDef& def : catalog.views()) {
    std::lock_guard<std::mutex> lock(mu_);
    defs_[def.name] = def;
    register_job(def, now_micros);
    MatViewSnapshot snap;
    if (restore(def.name, &snap)) {
      views_[def.name] = std::move(snap);
      ++restored;
    }
  }
  return restored;
}

void MatViewStore::persist(const std::string& name, const MatViewSnapshot& snap) const {
  if (data_dir_.empty()) return;
  fs::path dir = fs::path(data_dir_) / "views";
  std::error_code ec;
  fs::create_directories(dir, ec);

  // Write the whole file aside, then rename over the old one, so a crash
  // mid-write never corrupts the last good copy.
  fs::path tmp = dir / (name + ".rows.tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    out << "polyqe-view 1\n";
    out << "last_refreshed " << snap.last_refreshed_micros << "\n";
    out << "columns " << snap.schema.columns.size() << "\n";
    for (const ColumnDef& col : snap.schema.columns)
      out << col.name << "\t" << scalar_type_name(col.type) << "\n";
    out << "rows " << snap.rows->size() << "\n";
    for (const Row& row : *snap.rows)
      out << render_relaxed_json(Value::array(Array(row.begin(), row.end()))) << "\n";
  }
  fs::rename(tmp, view_path(name), ec);
  if (ec) throw Error(ErrorKind::Io, "cannot replace " + view_path(name));
}

bool MatViewStore::restore(const std::string& name, MatViewSnapshot* out) const {
  if (data_dir_.empty()) return false;
  std::ifstream in(view_path(name));
  if (!in) return false;

  auto bad = [&]() -> bool {
    throw Error(ErrorKind::Io, "malformed view file " + view_path(name));
  };

  std::string line, word;
  if (!std::getline(in, line) || line != "polyqe-view 1") return bad();
  size_t ncols = 0, nrows = 0;
  {
    if (!std::getline(in, line)) return bad();
    std::istringstream ls(line);
    if (!(ls >> word >> out->last_refreshed_micros) || word != "last_refreshed")
      return bad();
  }
  {
    if (!std::getline(in, line)) return bad();
    std::istringstream ls(line);
    if (!(ls >> word >> ncols) || word != "columns") return bad();
  }
  for (size_t i = 0; i < ncols; ++i) {
    if (!std::getline(in, line)) return bad();
    size_t tab = line.find('\t');
    if (tab == std::string::npos) return bad();
    auto type = scalar_type_from_name(line.substr(tab + 1));
    if (!type) return bad();
    out->schema.columns.push_back({line.substr(0, tab), *type, {}});
  }
  {
    if (!std::getline(in, line)) return bad();
    std::istringstream ls(line);
    if (!(ls >> word >> nrows) || word != "rows") return bad();
  }

  auto rows = std::make_shared<std::vector<Row>>();
  rows->reserve(nrows);
  for (size_t i = 0; i < nrows; ++i) {
    if (!std::getline(in, line)) return bad();
    Value v = parse_relaxed_json(line);
    if (v.kind() != Value::Kind::Array || v.elements().size() != ncols) return bad();
    Row row;
    for (size_t c = 0; c < ncols; ++c)
      // JSON has no timestamp literal; coercion restores the declared types.
      row.push_back(coerce(v.elements()[c], out->schema.columns[c].type,
                           "view column " + out->schema.columns[c].name));
    rows->push_back(std::move(row));
  }
  out->rows = std::move(rows);
  return true;
}

}  // namespace pqe
