#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "polyqe/catalog.hpp"
#include "polyqe/value.hpp"

namespace pqe {

// What a store adapter can evaluate natively. Constant per store kind, but an
// engine option can mask flags off to prove push-down neutrality.
struct WrapperCapabilities {
  bool filter_eq_on_key = false;
  bool filter_general = false;
  bool projection = false;
  bool sort = false;
  bool group_aggregate = false;
  bool limit = false;
  bool native_fragment = false;  // composes with a user-supplied pipe fragment

  static WrapperCapabilities all();
  static WrapperCapabilities none();
};

enum class FilterOp { Eq, Ne, Lt, Le, Gt, Ge, In };

// One comparison against a literal. The literal is pre-coerced to the
// column's declared type by the planner; In carries an Array literal.
// param >= 0 marks a bind-join slot filled per outer row before plan_scan.
struct FilterAtom {
  std::string column;
  FilterOp op = FilterOp::Eq;
  Value literal;
  int param = -1;
};

// A disjunction of atoms; the request filter set is a conjunction of these.
// Wrappers accept or decline whole conjuncts.
struct Conjunct {
  std::vector<FilterAtom> atoms;
};

struct SortKey {
  std::string column;
  bool ascending = true;
};

// Aggregate offered for push-down: only plain COUNT(*), SUM, AVG, MIN, MAX.
struct AggSpec {
  enum class Fn { Count, Sum, Avg, Min, Max };
  Fn fn = Fn::Count;
  std::string column;    // empty for Count
  std::string out_name;  // output column name in the scan schema
};

struct ScanRequest {
  const ForeignTableDef* table = nullptr;
  std::vector<std::string> required_columns;
  std::vector<Conjunct> filters;  // conjunctive normal form
  std::vector<SortKey> sort;
  std::optional<int64_t> limit;
  // Aggregate offer: when group_by is non-empty the wrapper may evaluate the
  // whole grouping natively; the scan then emits group_by + agg columns.
  std::vector<std::string> group_by;
  std::vector<AggSpec> aggs;
};

// Negotiated split. accepted + residual partition the request filters;
// native_text is the deterministic rendering of the native query.
struct ScanPlan {
  const ForeignTableDef* table = nullptr;
  std::vector<std::string> columns;  // cursor output columns, in order
  std::vector<Conjunct> accepted;
  std::vector<Conjunct> residual;
  bool sort_accepted = false;
  bool limit_accepted = false;
  bool aggregate_accepted = false;
  std::string native_text;
  double est_rows = 0;

  struct Payload {
    virtual ~Payload() = default;
  };
  std::shared_ptr<const Payload> payload;  // wrapper-private execution detail
};

// Per-wrapper counters, reset at query start; tests assert on them.
struct WrapperStats {
  int64_t point_gets = 0;
  int64_t scans = 0;
  int64_t rows_emitted = 0;

  void reset() { *this = WrapperStats{}; }
};

class Cursor {
 public:
  virtual ~Cursor() = default;
  virtual std::optional<Row> next() = 0;  // nullopt = end, repeatable
};

// The store adapter contract: capability report, scan negotiation, cursor.
class Wrapper {
 public:
  virtual ~Wrapper() = default;

  virtual WrapperCapabilities capabilities() const = 0;
  virtual ScanPlan plan_scan(const ScanRequest& req) const = 0;
  virtual std::unique_ptr<Cursor> open(const ScanPlan& plan) = 0;

  WrapperStats& stats() { return stats_; }
  const WrapperStats& stats() const { return stats_; }

 protected:
  WrapperStats stats_;
};

// Three-valued evaluation of a conjunct over a row (used for residual filters
// and by wrappers that post-filter): true only when some atom compares true.
bool eval_conjunct(const Conjunct& c, const RelSchema& schema, const Row& row);
bool eval_atom(const FilterAtom& a, const Value& cell);

}  // namespace pqe
