#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "polyqe/catalog.hpp"
#include "polyqe/planner.hpp"

namespace pqe {

// One refreshable result set. `rows` is immutable once published: refresh
// builds a new vector and swaps the pointer, so readers holding the old
// snapshot are never disturbed.
struct MatViewSnapshot {
  RelSchema schema;
  std::shared_ptr<const std::vector<Row>> rows;
  int64_t last_refreshed_micros = 0;
};

struct RefreshReport {
  size_t rows = 0;
  double duration_ms = 0.0;
};

struct RefreshJob {
  std::string view;
  int64_t interval_secs = 0;  // always >= 1
  int64_t next_due_micros = 0;
  std::string last_error;  // most recent scheduled-refresh failure, if any
};

// Stores materialized view contents and drives their scheduled refresh.
// The scheduler is tick-driven: callers pass the current time, which lets
// tests inject virtual clocks; a wall-clock loop is a thin wrapper above.
class MatViewStore {
 public:
  // When `data_dir` is non-empty, view contents persist under
  // <data_dir>/views/<name>.rows and survive restarts.
  explicit MatViewStore(std::string data_dir = "");

  // Plans and runs the view query once, publishes the result, and registers
  // a refresh job when the definition carries an interval. Errors propagate
  // and leave no trace of the view.
  void create_view(const MatViewDef& def, const PlanContext& ctx, int64_t now_micros);

  // Re-executes the stored query and atomically swaps in the new rows.
  // On failure the previous snapshot stays intact and the error propagates.
  RefreshReport refresh(const std::string& name, const PlanContext& ctx,
                        int64_t now_micros);

  // Refreshes every job due at `now`, advancing each job's deadline by whole
  // intervals until it lies in the future. Failures are recorded on the job
  // and do not stop other jobs. Returns the refreshed names, sorted.
  std::vector<std::string> scheduler_tick(const PlanContext& ctx, int64_t now_micros);

  void drop_view(const std::string& name);

  // Snapshot for the planner (nullopt when the view has no data yet).
  std::optional<MatSnapshot> snapshot(const std::string& name) const;
  const MatViewSnapshot* find(const std::string& name) const;
  std::vector<RefreshJob> jobs() const;

  // Restores persisted rows for every view the catalog knows, registering
  // refresh jobs relative to `now`. Returns how many views were restored.
  size_t load_persisted(const Catalog& catalog, int64_t now_micros);

 private:
  struct Refreshed {
    RelSchema schema;
    std::shared_ptr<const std::vector<Row>> rows;
  };
  Refreshed execute_view(const MatViewDef& def, const PlanContext& ctx) const;
  void persist(const std::string& name, const MatViewSnapshot& snap) const;
  bool restore(const std::string& name, MatViewSnapshot* out) const;
  std::string view_path(const std::string& name) const;
  void register_job(const MatViewDef& def, int64_t now_micros);

  std::string data_dir_;
  std::map<std::string, MatViewDef> defs_;
  std::map<std::string, MatViewSnapshot> views_;
  std::vector<RefreshJob> jobs_;
  mutable std::mutex mu_;
};

}  // namespace pqe
