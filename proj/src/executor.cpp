#include "polyqe/executor.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "polyqe/error.hpp"
#include "polyqe/pipeline.hpp"

namespace pqe {

namespace {

[[noreturn]] void exec_fail(const std::string& msg) {
  throw Error(ErrorKind::Execution, msg);
}

// Three-valued boolean: true, false, or unknown (nullopt).
using Tri = std::optional<bool>;

Tri as_tri(const Value& v) {
  if (v.is_null()) return std::nullopt;
  if (v.kind() != Value::Kind::Bool)
    exec_fail("predicate did not evaluate to a boolean: " + v.to_sql_text());
  return v.as_bool();
}

Value from_tri(Tri t) {
  return t.has_value() ? Value::boolean(*t) : Value::null();
}

Value eval_comparison(sql::BinOp op, const Value& l, const Value& r) {
  Ordering ord = compare(l, r);
  if (ord == Ordering::Unknown) return Value::null();
  bool out = false;
  switch (op) {
    case sql::BinOp::Eq: out = ord == Ordering::Equal; break;
    case sql::BinOp::Ne: out = ord != Ordering::Equal; break;
    case sql::BinOp::Lt: out = ord == Ordering::Less; break;
    case sql::BinOp::Le: out = ord != Ordering::Greater; break;
    case sql::BinOp::Gt: out = ord == Ordering::Greater; break;
    default: out = ord != Ordering::Less; break;  // Ge
  }
  return Value::boolean(out);
}

Value eval_arith(sql::BinOp op, const Value& l, const Value& r) {
  if (l.is_null() || r.is_null()) return Value::null();
  if (!l.is_numeric() || !r.is_numeric())
    exec_fail("arithmetic on non-numeric value");
  if (op == sql::BinOp::Div) {
    double d = r.numeric_value();
    if (d == 0.0) exec_fail("division by zero");
    return Value::float64(l.numeric_value() / d);
  }
  if (l.kind() == Value::Kind::Int64 && r.kind() == Value::Kind::Int64) {
    int64_t a = l.as_int64(), b = r.as_int64();
    switch (op) {
      case sql::BinOp::Add: return Value::int64(a + b);
      case sql::BinOp::Sub: return Value::int64(a - b);
      default: return Value::int64(a * b);  // Mul
    }
  }
  double a = l.numeric_value(), b = r.numeric_value();
  switch (op) {
    case sql::BinOp::Add: return Value::float64(a + b);
    case sql::BinOp::Sub: return Value::float64(a - b);
    default: return Value::float64(a * b);
  }
}

}  // namespace

Value eval_rexpr(const RExpr& e, const Row& row) {
  switch (e.kind) {
    case RExpr::Kind::Column: {
      if (e.column < 0 || e.column >= static_cast<int>(row.size()))
        exec_fail("column index out of range");
      return row[static_cast<size_t>(e.column)];
    }
    case RExpr::Kind::Literal:
      return e.literal;
    case RExpr::Kind::Binary: {
      Value l = eval_rexpr(*e.left, row);
      Value r = eval_rexpr(*e.right, row);
      switch (e.op) {
        case sql::BinOp::And: {
          Tri a = as_tri(l), b = as_tri(r);
          if ((a && !*a) || (b && !*b)) return Value::boolean(false);
          if (!a || !b) return Value::null();
          return Value::boolean(true);
        }
        case sql::BinOp::Or: {
          Tri a = as_tri(l), b = as_tri(r);
          if ((a && *a) || (b && *b)) return Value::boolean(true);
          if (!a || !b) return Value::null();
          return Value::boolean(false);
        }
        case sql::BinOp::Add:
        case sql::BinOp::Sub:
        case sql::BinOp::Mul:
        case sql::BinOp::Div:
          return eval_arith(e.op, l, r);
        default:
          return eval_comparison(e.op, l, r);
      }
    }
    case RExpr::Kind::In: {
      Value subject = eval_rexpr(*e.child, row);
      bool any_unknown = subject.is_null();
      bool any_true = false;
      for (const auto& item : e.items) {
        Value v = eval_rexpr(*item, row);
        if (subject.is_null() || v.is_null()) {
          any_unknown = true;
          continue;
        }
        Ordering ord = compare(subject, v);
        if (ord == Ordering::Equal) any_true = true;
        if (ord == Ordering::Unknown) any_unknown = true;
      }
      Tri out;
      if (any_true) {
        out = true;
      } else if (any_unknown) {
        out = std::nullopt;
      } else {
        out = false;
      }
      if (e.negated && out.has_value()) out = !*out;
      return from_tri(out);
    }
    case RExpr::Kind::Not: {
      Tri t = as_tri(eval_rexpr(*e.child, row));
      if (!t) return Value::null();
      return Value::boolean(!*t);
    }
  }
  exec_fail("internal: unhandled expression kind");
}

namespace {

class RowsOp : public Operator {
 public:
  explicit RowsOp(std::vector<Row> rows) : rows_(std::move(rows)) {}

 protected:
  std::optional<Row> pull() override {
    if (i_ >= rows_.size()) return std::nullopt;
    return rows_[i_++];
  }
  void release() override { rows_.clear(); }

 private:
  std::vector<Row> rows_;
  size_t i_ = 0;
};

class ScanOp : public Operator {
 public:
  explicit ScanOp(const PlanNode& n) : cursor_(n.wrapper->open(n.scan)) {}

 protected:
  std::optional<Row> pull() override { return cursor_->next(); }
  void release() override { cursor_.reset(); }

 private:
  std::unique_ptr<Cursor> cursor_;
};

class MatViewOp : public Operator {
 public:
  explicit MatViewOp(const PlanNode& n) : rows_(n.view_rows) {}

 protected:
  std::optional<Row> pull() override {
    if (rows_ == nullptr || i_ >= rows_->size()) return std::nullopt;
    return (*rows_)[i_++];
  }
  void release() override { rows_.reset(); }

 private:
  std::shared_ptr<const std::vector<Row>> rows_;
  size_t i_ = 0;
};

class FilterExec : public Operator {
 public:
  FilterExec(std::unique_ptr<Operator> child, RExprPtr pred)
      : child_(std::move(child)), pred_(std::move(pred)) {}

 protected:
  std::optional<Row> pull() override {
    while (auto row = child_->next()) {
      Tri t = as_tri(eval_rexpr(*pred_, *row));
      if (t && *t) return row;
    }
    return std::nullopt;
  }
  void release() override { child_->close(); }

 private:
  std::unique_ptr<Operator> child_;
  RExprPtr pred_;
};

class ProjectExec : public Operator {
 public:
  ProjectExec(std::unique_ptr<Operator> child, const std::vector<ProjItem>& items)
      : child_(std::move(child)), items_(&items) {}

 protected:
  std::optional<Row> pull() override {
    if (child_ == nullptr) {
      // No input relation: emit a single synthetic row (e.g. SELECT 1).
      if (done_) return std::nullopt;
      done_ = true;
      return project(Row{});
    }
    if (auto row = child_->next()) return project(*row);
    return std::nullopt;
  }
  void release() override {
    if (child_) child_->close();
  }

 private:
  Row project(const Row& in) {
    Row out;
    out.reserve(items_->size());
    for (const auto& item : *items_) out.push_back(eval_rexpr(*item.expr, in));
    return out;
  }

  std::unique_ptr<Operator> child_;
  const std::vector<ProjItem>* items_;
  bool done_ = false;
};

class HashJoinExec : public Operator {
 public:
  HashJoinExec(const PlanNode& n, std::unique_ptr<Operator> left,
               std::unique_ptr<Operator> right)
      : node_(&n), left_(std::move(left)), right_(std::move(right)) {}

 protected:
  std::optional<Row> pull() override {
    if (!built_) build();
    for (;;) {
      while (match_ != nullptr && match_i_ < match_->size()) {
        Row combined = outer_row_;
        const Row& inner = (*match_)[match_i_++];
        combined.insert(combined.end(), inner.begin(), inner.end());
        if (node_->predicate) {
          Tri t = as_tri(eval_rexpr(*node_->predicate, combined));
          if (!t || !*t) continue;
        }
        return combined;
      }
      auto row = left_->next();
      if (!row) return std::nullopt;
      outer_row_ = std::move(*row);
      match_ = probe(outer_row_);
      match_i_ = 0;
    }
  }
  void release() override {
    match_ = nullptr;
    left_->close();
    right_->close();
    table_.clear();
  }

 private:
  void build() {
    built_ = true;
    while (auto row = right_->next()) {
      std::string key;
      bool null_key = false;
      Row keyvals;
      for (const auto& [l, r] : node_->key_cols) {
        (void)l;
        const Value& v = (*row)[static_cast<size_t>(r)];
        if (v.is_null()) null_key = true;
        keyvals.push_back(v);
      }
      if (null_key) continue;  // a null key never joins
      key = encode_group_key(keyvals);
      table_[key].push_back(std::move(*row));
    }
  }

  const std::vector<Row>* probe(const Row& outer) {
    Row keyvals;
    for (const auto& [l, r] : node_->key_cols) {
      (void)r;
      const Value& v = outer[static_cast<size_t>(l)];
      if (v.is_null()) return nullptr;
      keyvals.push_back(v);
    }
    auto it = table_.find(encode_group_key(keyvals));
    return it == table_.end() ? nullptr : &it->second;
  }

  const PlanNode* node_;
  std::unique_ptr<Operator> left_;
  std::unique_ptr<Operator> right_;
  bool built_ = false;
  std::map<std::string, std::vector<Row>> table_;
  Row outer_row_;
  const std::vector<Row>* match_ = nullptr;
  size_t match_i_ = 0;
};

class BindJoinExec : public Operator {
 public:
  BindJoinExec(const PlanNode& n, std::unique_ptr<Operator> left)
      : node_(&n), left_(std::move(left)) {}

 protected:
  std::optional<Row> pull() override {
    for (;;) {
      while (match_ != nullptr && match_i_ < match_->size()) {
        Row combined = outer_row_;
        const Row& inner = (*match_)[match_i_++];
        combined.insert(combined.end(), inner.begin(), inner.end());
        if (node_->predicate) {
          Tri t = as_tri(eval_rexpr(*node_->predicate, combined));
          if (!t || !*t) continue;
        }
        return combined;
      }
      auto row = left_->next();
      if (!row) return std::nullopt;
      outer_row_ = std::move(*row);
      match_ = probe(outer_row_);
      match_i_ = 0;
    }
  }
  void release() override {
    match_ = nullptr;
    left_->close();
    memo_.clear();
  }

 private:
  const std::vector<Row>* probe(const Row& outer) {
    const PlanNode& inner = *node_->children[1];
    Row params;
    bool null_param = false;
    for (int src : node_->param_sources) {
      const Value& v = outer[static_cast<size_t>(src)];
      if (v.is_null()) null_param = true;
      params.push_back(v);
    }
    if (null_param) return nullptr;  // a null key matches nothing; skip the probe
    std::string key = encode_group_key(params);
    auto it = memo_.find(key);
    if (it != memo_.end()) return &it->second;

    // Substitute the parameter values and negotiate the real scan.
    ScanRequest req = inner.request;
    for (auto& conjunct : req.filters) {
      for (auto& atom : conjunct.atoms) {
        if (atom.param < 0) continue;
        const Value& v = params[static_cast<size_t>(atom.param)];
        ScalarType t = inner.table->rel_schema.column(atom.column)->type;
        atom.literal = coerce(v, t, "bind parameter for " + atom.column);
        atom.param = -1;
      }
    }
    ScanPlan plan = inner.wrapper->plan_scan(req);
    // Schema of the cursor output, for residual conjunct evaluation; the
    // planner guaranteed the key atoms themselves are native.
    RelSchema schema;
    for (const auto& name : plan.columns)
      if (const ColumnDef* c = inner.table->rel_schema.column(name))
        schema.columns.push_back(*c);
    std::vector<Row> rows;
    auto cursor = inner.wrapper->open(plan);
    while (auto r = cursor->next()) {
      bool keep = true;
      for (const auto& rc : plan.residual)
        if (!eval_conjunct(rc, schema, *r)) keep = false;
      if (keep) rows.push_back(std::move(*r));
    }
    auto [pos, inserted] = memo_.emplace(key, std::move(rows));
    (void)inserted;
    return &pos->second;
  }

  const PlanNode* node_;
  std::unique_ptr<Operator> left_;
  std::map<std::string, std::vector<Row>> memo_;
  Row outer_row_;
  const std::vector<Row>* match_ = nullptr;
  size_t match_i_ = 0;
};

class AggregateExec : public Operator {
 public:
  AggregateExec(const PlanNode& n, std::unique_ptr<Operator> child)
      : node_(&n), child_(std::move(child)) {}

 protected:
  std::optional<Row> pull() override {
    if (!done_) run();
    if (i_ >= out_.size()) return std::nullopt;
    return out_[i_++];
  }
  void release() override {
    child_->close();
    out_.clear();
  }

 private:
  struct AggState {
    int64_t count = 0;
    int64_t sum_i = 0;
    double sum_d = 0.0;
    bool saw_float = false;
    bool saw_value = false;
    Value extreme;  // min/max so far
    std::set<std::string> distinct;
  };

  struct Group {
    Row keys;
    std::vector<AggState> aggs;
  };

  void run() {
    done_ = true;
    std::map<std::string, size_t> index;
    std::vector<Group> groups;
    bool global = node_->group_exprs.empty();
    if (global) {
      groups.emplace_back();
      groups.back().aggs.resize(node_->aggs.size());
    }
    while (auto row = child_->next()) {
      size_t gi = 0;
      if (!global) {
        Row keys;
        for (const auto& g : node_->group_exprs) keys.push_back(eval_rexpr(*g, *row));
        std::string key = encode_group_key(keys);
        auto it = index.find(key);
        if (it == index.end()) {
          gi = groups.size();
          index.emplace(key, gi);
          groups.emplace_back();
          groups.back().keys = std::move(keys);
          groups.back().aggs.resize(node_->aggs.size());
        } else {
          gi = it->second;
        }
      }
      Group& group = groups[gi];
      for (size_t a = 0; a < node_->aggs.size(); ++a)
        accumulate(node_->aggs[a], group.aggs[a], *row);
    }
    for (const auto& group : groups) {
      Row out = group.keys;
      for (size_t a = 0; a < node_->aggs.size(); ++a)
        out.push_back(finish(node_->aggs[a], group.aggs[a]));
      out_.push_back(std::move(out));
    }
  }

  void accumulate(const AggItem& item, AggState& st, const Row& row) {
    if (item.fn == sql::AggFunc::Count && item.arg == nullptr) {
      st.count++;
      return;
    }
    Value v = eval_rexpr(*item.arg, row);
    if (v.is_null()) return;  // aggregates skip nulls
    st.saw_value = true;
    switch (item.fn) {
      case sql::AggFunc::Count:
        if (item.distinct) {
          std::string key;
          encode_group_key(v, key);
          st.distinct.insert(std::move(key));
        } else {
          st.count++;
        }
        break;
      case sql::AggFunc::Sum:
      case sql::AggFunc::Avg:
        if (!v.is_numeric()) exec_fail("sum/avg over a non-numeric value");
        if (v.kind() == Value::Kind::Float64) st.saw_float = true;
        if (v.kind() == Value::Kind::Int64) st.sum_i += v.as_int64();
        st.sum_d += v.numeric_value();
        st.count++;
        break;
      case sql::AggFunc::Min:
      case sql::AggFunc::Max: {
        if (!st.extreme.is_null()) {
          Ordering ord = compare(v, st.extreme);
          bool better = item.fn == sql::AggFunc::Min ? ord == Ordering::Less
                                                     : ord == Ordering::Greater;
          if (better) st.extreme = std::move(v);
        } else {
          st.extreme = std::move(v);
        }
        break;
      }
    }
  }

  Value finish(const AggItem& item, const AggState& st) {
    switch (item.fn) {
      case sql::AggFunc::Count:
        if (item.distinct) return Value::int64(static_cast<int64_t>(st.distinct.size()));
        return Value::int64(st.count);
      case sql::AggFunc::Sum:
        if (!st.saw_value) return Value::null();
        return st.saw_float ? Value::float64(st.sum_d) : Value::int64(st.sum_i);
      case sql::AggFunc::Avg:
        if (!st.saw_value) return Value::null();
        return Value::float64(st.sum_d / static_cast<double>(st.count));
      default:
        return st.extreme;  // Null when no values seen
    }
  }

  const PlanNode* node_;
  std::unique_ptr<Operator> child_;
  bool done_ = false;
  std::vector<Row> out_;
  size_t i_ = 0;
};

class SortExec : public Operator {
 public:
  SortExec(const PlanNode& n, std::unique_ptr<Operator> child)
      : node_(&n), child_(std::move(child)) {}

 protected:
  std::optional<Row> pull() override {
    if (!done_) run();
    if (i_ >= rows_.size()) return std::nullopt;
    return rows_[i_++];
  }
  void release() override {
    child_->close();
    rows_.clear();
  }

 private:
  void run() {
    done_ = true;
    while (auto row = child_->next()) rows_.push_back(std::move(*row));
    const auto& keys = node_->sort_keys;
    std::stable_sort(rows_.begin(), rows_.end(), [&](const Row& a, const Row& b) {
      for (const auto& [expr, asc] : keys) {
        Value av = eval_rexpr(*expr, a);
        Value bv = eval_rexpr(*expr, b);
        if (sort_before(av, bv, asc)) return true;
        if (sort_before(bv, av, asc)) return false;
      }
      return false;
    });
  }

  const PlanNode* node_;
  std::unique_ptr<Operator> child_;
  bool done_ = false;
  std::vector<Row> rows_;
  size_t i_ = 0;
};

class LimitExec : public Operator {
 public:
  LimitExec(std::unique_ptr<Operator> child, int64_t limit)
      : child_(std::move(child)), remaining_(limit) {}

 protected:
  std::optional<Row> pull() override {
    if (remaining_ <= 0) return std::nullopt;
    auto row = child_->next();
    if (!row) {
      remaining_ = 0;
      return std::nullopt;
    }
    --remaining_;
    return row;
  }
  void release() override { child_->close(); }

 private:
  std::unique_ptr<Operator> child_;
  int64_t remaining_ = 0;
};

class DistinctExec : public Operator {
 public:
  explicit DistinctExec(std::unique_ptr<Operator> child) : child_(std::move(child)) {}

 protected:
  std::optional<Row> pull() override {
    while (auto row = child_->next()) {
      if (seen_.insert(encode_group_key(*row)).second) return row;
    }
    return std::nullopt;
  }
  void release() override {
    child_->close();
    seen_.clear();
  }

 private:
  std::unique_ptr<Operator> child_;
  std::set<std::string> seen_;
};

class UnnestExec : public Operator {
 public:
  UnnestExec(std::unique_ptr<Operator> child, int column)
      : child_(std::move(child)), column_(column) {}

 protected:
  std::optional<Row> pull() override {
    for (;;) {
      if (elem_i_ < pending_.size()) {
        Row out = base_;
        out[static_cast<size_t>(column_)] = pending_[elem_i_++];
        return out;
      }
      auto row = child_->next();
      if (!row) return std::nullopt;
      if (column_ < 0 || column_ >= static_cast<int>(row->size()))
        exec_fail("unnest column out of range");
      const Value& v = (*row)[static_cast<size_t>(column_)];
      if (v.is_null()) continue;  // null arrays produce no rows
      if (v.kind() != Value::Kind::Array)
        exec_fail("unnest argument is not an array: " + v.to_sql_text());
      if (v.elements().empty()) continue;  // empty arrays produce no rows
      base_ = *row;
      pending_ = v.elements();
      elem_i_ = 0;
    }
  }
  void release() override {
    child_->close();
    pending_.clear();
  }

 private:
  std::unique_ptr<Operator> child_;
  int column_;
  Row base_;
  Array pending_;
  size_t elem_i_ = 0;
};

}  // namespace

std::unique_ptr<Operator> open_plan(const PlanNode& plan) {
  switch (plan.op) {
    case PlanNode::Op::ForeignScan:
      return std::make_unique<ScanOp>(plan);
    case PlanNode::Op::MatViewScan:
      return std::make_unique<MatViewOp>(plan);
    case PlanNode::Op::Filter:
      return std::make_unique<FilterExec>(open_plan(*plan.children[0]), plan.predicate);
    case PlanNode::Op::Project:
      if (plan.children.empty())
        return std::make_unique<ProjectExec>(nullptr, plan.items);
      return std::make_unique<ProjectExec>(open_plan(*plan.children[0]), plan.items);
    case PlanNode::Op::HashJoin:
      return std::make_unique<HashJoinExec>(plan, open_plan(*plan.children[0]),
                                            open_plan(*plan.children[1]));
    case PlanNode::Op::BindJoin:
      // The inner child is a template; its cursors open per outer key.
      return std::make_unique<BindJoinExec>(plan, open_plan(*plan.children[0]));
    case PlanNode::Op::Aggregate:
      return std::make_unique<AggregateExec>(plan, open_plan(*plan.children[0]));
    case PlanNode::Op::Sort:
      return std::make_unique<SortExec>(plan, open_plan(*plan.children[0]));
    case PlanNode::Op::Limit:
      return std::make_unique<LimitExec>(open_plan(*plan.children[0]), plan.limit);
    case PlanNode::Op::Distinct:
      return std::make_unique<DistinctExec>(open_plan(*plan.children[0]));
  }
  exec_fail("internal: unhandled plan operator");
}

std::vector<Row> execute_plan(const PlanNode& plan) {
  auto op = open_plan(plan);
  std::vector<Row> out;
  while (auto row = op->next()) out.push_back(std::move(*row));
  return out;
}

std::unique_ptr<Operator> make_unnest(std::unique_ptr<Operator> child, int column) {
  return std::make_unique<UnnestExec>(std::move(child), column);
}

std::unique_ptr<Operator> make_rows(std::vector<Row> rows) {
  return std::make_unique<RowsOp>(std::move(rows));
}

}  // namespace pqe
