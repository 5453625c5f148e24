#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "polyqe/catalog.hpp"
#include "polyqe/sql/ast.hpp"
#include "polyqe/wrapper.hpp"

namespace pqe {

// Expression over a fixed row layout: column references are indexes into the
// child operator's output, so execution never looks names up.
struct RExpr;
using RExprPtr = std::shared_ptr<const RExpr>;

struct RExpr {
  enum class Kind { Column, Literal, Binary, In, Not };

  Kind kind = Kind::Literal;
  int column = -1;                   // Column
  Value literal;                     // Literal
  sql::BinOp op = sql::BinOp::Eq;    // Binary
  RExprPtr left, right;              // Binary
  RExprPtr child;                    // Not, and the subject of In
  std::vector<RExprPtr> items;       // In
  bool negated = false;              // In

  static RExprPtr column_ref(int index);
  static RExprPtr lit(Value v);
  static RExprPtr binary(sql::BinOp op, RExprPtr l, RExprPtr r);
  static RExprPtr in_list(RExprPtr subject, std::vector<RExprPtr> items, bool negated);
  static RExprPtr logical_not(RExprPtr c);
};

struct PlanCol {
  std::string binding;  // table alias / view name; empty for computed columns
  std::string name;
  ScalarType type = ScalarType::Text;
};
using PlanSchema = std::vector<PlanCol>;

struct ProjItem {
  RExprPtr expr;
  std::string name;
  std::string display;  // rendered source expression, for EXPLAIN
};

struct AggItem {
  sql::AggFunc fn = sql::AggFunc::Count;
  RExprPtr arg;  // null = COUNT(*)
  bool distinct = false;
};

struct PlanNode;
using PlanPtr = std::shared_ptr<PlanNode>;

struct PlanNode {
  enum class Op {
    ForeignScan,
    MatViewScan,
    Filter,
    Project,
    HashJoin,
    BindJoin,
    Aggregate,
    Sort,
    Limit,
    Distinct,
  };

  Op op = Op::Project;
  PlanSchema schema;
  double est = 1.0;
  std::vector<PlanPtr> children;

  // ForeignScan (also the BindJoin inner template, whose request carries
  // parameter slots that the executor fills per outer row).
  const ForeignTableDef* table = nullptr;
  Wrapper* wrapper = nullptr;
  ScanRequest request;
  ScanPlan scan;

  // MatViewScan
  std::string view_name;
  std::shared_ptr<const std::vector<Row>> view_rows;

  // Filter / join residual
  RExprPtr predicate;
  std::string predicate_display;

  // Project (no children: emits one synthetic row, e.g. SELECT 1)
  std::vector<ProjItem> items;

  // HashJoin equi-keys: (left column, right column) index pairs.
  std::vector<std::pair<int, int>> key_cols;
  std::vector<std::string> key_display;

  // BindJoin: parameter i takes its value from outer column param_sources[i].
  std::vector<int> param_sources;

  // Aggregate
  std::vector<RExprPtr> group_exprs;
  std::vector<std::string> group_display;
  std::vector<AggItem> aggs;
  std::vector<std::string> agg_display;

  // Sort
  std::vector<std::pair<RExprPtr, bool>> sort_keys;  // expr, ascending
  std::vector<std::string> sort_display;

  int64_t limit = 0;
};

struct PlannerOptions {
  int64_t bind_join_threshold = 1000;
  enum class ForceJoin { Auto, Hash, Bind };
  ForceJoin force_join = ForceJoin::Auto;
};

// A materialized view's current contents, snapshotted for one query.
struct MatSnapshot {
  RelSchema schema;
  std::shared_ptr<const std::vector<Row>> rows;
};

struct PlanContext {
  const Catalog* catalog = nullptr;
  std::function<Wrapper*(const std::string& server_name)> wrapper_for;
  std::function<std::optional<MatSnapshot>(const std::string& view_name)> view_snapshot;
  PlannerOptions options;
};

PlanPtr plan_query(const sql::Query& q, const PlanContext& ctx);

// One line per operator, two-space indent per level; ForeignScan lines quote
// the wrapper's native text verbatim.
std::string explain_text(const PlanNode& plan);

}  // namespace pqe
