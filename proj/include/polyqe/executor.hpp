#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "polyqe/planner.hpp"

namespace pqe {

// Volcano-style pull operator. next() returns one row or nullopt at end of
// stream; calling it again after the end keeps returning nullopt. close()
// releases resources early and is idempotent; a closed operator is at end.
class Operator {
 public:
  virtual ~Operator() = default;

  std::optional<Row> next() {
    if (closed_) return std::nullopt;
    return pull();
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    release();
  }

 protected:
  virtual std::optional<Row> pull() = 0;
  virtual void release() {}

 private:
  bool closed_ = false;
};

// Instantiate the operator tree for a plan. Foreign cursors open eagerly, so
// wrapper scan counters reflect plans that were actually executed.
std::unique_ptr<Operator> open_plan(const PlanNode& plan);

// Run a plan to completion.
std::vector<Row> execute_plan(const PlanNode& plan);

// Expression evaluation with SQL three-valued semantics: comparisons and
// logic over Null yield Null; type errors raise Execution errors.
Value eval_rexpr(const RExpr& e, const Row& row);

// Mediator-side unnest: emits one row per element of the array in `column`,
// the element replacing the array. Null or empty arrays drop the row; a
// non-array value is an Execution error.
std::unique_ptr<Operator> make_unnest(std::unique_ptr<Operator> child, int column);

// Wrap a materialized row set as an operator (used by tests and unnest).
std::unique_ptr<Operator> make_rows(std::vector<Row> rows);

}  // namespace pqe
