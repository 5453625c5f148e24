#include "polyqe/planner.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "polyqe/error.hpp"
#include "polyqe/sql/parser.hpp"

namespace pqe {

RExprPtr RExpr::column_ref(int index) {
  auto e = std::make_shared<RExpr>();
  e->kind = Kind::Column;
  e->column = index;
  return e;
}

RExprPtr RExpr::lit(Value v) {
  auto e = std::make_shared<RExpr>();
  e->kind = Kind::Literal;
  e->literal = std::move(v);
  return e;
}

RExprPtr RExpr::binary(sql::BinOp op, RExprPtr l, RExprPtr r) {
  auto e = std::make_shared<RExpr>();
  e->kind = Kind::Binary;
  e->op = op;
  e->left = std::move(l);
  e->right = std::move(r);
  return e;
}

RExprPtr RExpr::in_list(RExprPtr subject, std::vector<RExprPtr> items, bool negated) {
  auto e = std::make_shared<RExpr>();
  e->kind = Kind::In;
  e->child = std::move(subject);
  e->items = std::move(items);
  e->negated = negated;
  return e;
}

RExprPtr RExpr::logical_not(RExprPtr c) {
  auto e = std::make_shared<RExpr>();
  e->kind = Kind::Not;
  e->child = std::move(c);
  return e;
}

namespace {

[[noreturn]] void plan_fail(const std::string& msg) { throw Error(ErrorKind::Plan, msg); }

enum class TypeFamily { Numeric, Text, Bool, Timestamp };

TypeFamily family_of(ScalarType t) {
  switch (t) {
    case ScalarType::Bool: return TypeFamily::Bool;
    case ScalarType::Text: return TypeFamily::Text;
    case ScalarType::Timestamp: return TypeFamily::Timestamp;
    default: return TypeFamily::Numeric;
  }
}

std::optional<ScalarType> literal_type(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Bool: return ScalarType::Bool;
    case Value::Kind::Int64: return ScalarType::BigInt;
    case Value::Kind::Float64: return ScalarType::Double;
    case Value::Kind::Text: return ScalarType::Text;
    case Value::Kind::Timestamp: return ScalarType::Timestamp;
    default: return std::nullopt;  // Null carries no type
  }
}

Value typed_literal(const Value& v, ScalarType t, const std::string& what) {
  try {
    return coerce(v, t, what);
  } catch (const Error& e) {
    plan_fail("type-mismatched comparison: " + std::string(e.what()));
  }
}

bool is_comparison(sql::BinOp op) {
  switch (op) {
    case sql::BinOp::Eq:
    case sql::BinOp::Ne:
    case sql::BinOp::Lt:
    case sql::BinOp::Le:
    case sql::BinOp::Gt:
    case sql::BinOp::Ge:
      return true;
    default:
      return false;
  }
}

FilterOp filter_op(sql::BinOp op) {
  switch (op) {
    case sql::BinOp::Eq: return FilterOp::Eq;
    case sql::BinOp::Ne: return FilterOp::Ne;
    case sql::BinOp::Lt: return FilterOp::Lt;
    case sql::BinOp::Le: return FilterOp::Le;
    case sql::BinOp::Gt: return FilterOp::Gt;
    default: return FilterOp::Ge;
  }
}

sql::BinOp flipped(sql::BinOp op) {
  switch (op) {
    case sql::BinOp::Lt: return sql::BinOp::Gt;
    case sql::BinOp::Le: return sql::BinOp::Ge;
    case sql::BinOp::Gt: return sql::BinOp::Lt;
    case sql::BinOp::Ge: return sql::BinOp::Le;
    default: return op;  // Eq/Ne symmetric
  }
}

sql::BinOp inverted(sql::BinOp op) {
  switch (op) {
    case sql::BinOp::Eq: return sql::BinOp::Ne;
    case sql::BinOp::Ne: return sql::BinOp::Eq;
    case sql::BinOp::Lt: return sql::BinOp::Ge;
    case sql::BinOp::Le: return sql::BinOp::Gt;
    case sql::BinOp::Gt: return sql::BinOp::Le;
    default: return sql::BinOp::Lt;  // Ge
  }
}

bool atom_equal(const FilterAtom& a, const FilterAtom& b) {
  return a.column == b.column && a.op == b.op && a.param == b.param && a.literal == b.literal;
}

bool conjunct_equal(const Conjunct& a, const Conjunct& b) {
  if (a.atoms.size() != b.atoms.size()) return false;
  for (size_t i = 0; i < a.atoms.size(); ++i)
    if (!atom_equal(a.atoms[i], b.atoms[i])) return false;
  return true;
}

ScalarType agg_result_type(sql::AggFunc fn, std::optional<ScalarType> arg) {
  switch (fn) {
    case sql::AggFunc::Count: return ScalarType::BigInt;
    case sql::AggFunc::Avg: return ScalarType::Double;
    case sql::AggFunc::Sum:
      if (arg && (family_of(*arg) == TypeFamily::Numeric) &&
          (*arg == ScalarType::Double || *arg == ScalarType::Numeric))
        return ScalarType::Double;
      return ScalarType::BigInt;
    default:  // Min/Max keep the argument type
      return arg.value_or(ScalarType::Text);
  }
}

std::string agg_name(sql::AggFunc fn) {
  switch (fn) {
    case sql::AggFunc::Count: return "count";
    case sql::AggFunc::Sum: return "sum";
    case sql::AggFunc::Avg: return "avg";
    case sql::AggFunc::Min: return "min";
    case sql::AggFunc::Max: return "max";
  }
  return "agg";
}

AggSpec::Fn agg_spec_fn(sql::AggFunc fn) {
  switch (fn) {
    case sql::AggFunc::Count: return AggSpec::Fn::Count;
    case sql::AggFunc::Sum: return AggSpec::Fn::Sum;
    case sql::AggFunc::Avg: return AggSpec::Fn::Avg;
    case sql::AggFunc::Min: return AggSpec::Fn::Min;
    case sql::AggFunc::Max: return AggSpec::Fn::Max;
  }
  return AggSpec::Fn::Count;
}

struct Binding {
  std::string name;
  const ForeignTableDef* table = nullptr;  // null → materialized view
  std::string view_name;
  std::shared_ptr<const std::vector<Row>> view_rows;
  RelSchema schema;
};

// A WHERE/ON conjunct waiting for a home in the plan.
struct PoolEntry {
  sql::ExprPtr ast;
  std::set<int> bindings;
  bool consumed = false;  // accepted by a wrapper
};

// Typed, index-resolved expression.
struct Compiled {
  RExprPtr expr;
  std::optional<ScalarType> type;
};

class Planner {
 public:
  Planner(const sql::Query& q, const PlanContext& ctx) : q_(q), ctx_(ctx) {}

  PlanPtr plan();

 private:
  // -- name resolution over the current operator output --
  struct Layout {
    const PlanSchema* schema = nullptr;
    // Substitutions applied before column lookup (post-aggregation scope).
    const std::vector<std::pair<const sql::Expr*, int>>* replacements = nullptr;
    bool allow_aggregates = false;
  };

  int resolve_column(const Layout& lay, const std::string& qualifier,
                     const std::string& column) const {
    int found = -1;
    for (size_t i = 0; i < lay.schema->size(); ++i) {
      const PlanCol& c = (*lay.schema)[i];
      if (c.name != column) continue;
      if (!qualifier.empty() && c.binding != qualifier) continue;
      if (found >= 0)
        plan_fail("ambiguous column reference '" +
                  (qualifier.empty() ? column : qualifier + "." + column) + "'");
      found = static_cast<int>(i);
    }
    if (found < 0)
      plan_fail("unknown column '" +
                (qualifier.empty() ? column : qualifier + "." + column) + "'");
    return found;
  }

  Compiled compile(const sql::Expr& e, const Layout& lay) const;

  void collect_bindings();
  void collect_pool();
  void collect_aggregates();
  void ref_walk(const sql::Expr& e, std::set<int>* bindings,
                std::map<int, std::set<std::string>>* columns) const;
  // ORDER BY may name a SELECT alias; such references resolve later, so
  // failures on a bare unqualified name matching an alias are not errors.
  void note_tolerant(const sql::Expr& e, std::map<int, std::set<std::string>>* columns) const {
    try {
      ref_walk(e, nullptr, columns);
    } catch (const Error&) {
      if (e.kind == sql::Expr::Kind::ColumnRef && e.qualifier.empty()) {
        for (const auto& item : q_.select)
          if (item.alias == e.column) return;
      }
      throw;
    }
  }

  PlanPtr build_relation(int b);
  PlanPtr build_joins();
  PlanPtr finish(PlanPtr root);

  std::optional<Conjunct> atomize(const sql::Expr& e, int binding) const;
  bool plain_column_of(const sql::Expr& e, int binding, std::string* name) const;

  const sql::Query& q_;
  const PlanContext& ctx_;

  std::vector<Binding> bindings_;
  std::vector<PoolEntry> pool_;
  std::vector<const sql::Expr*> agg_exprs_;  // distinct aggregate calls
  std::map<int, std::set<std::string>> referenced_;  // binding → column names

  // Filled while building the single-table scan, to skip mediator stages the
  // wrapper already performed.
  bool sort_pushed_ = false;
  bool limit_pushed_ = false;
  bool agg_pushed_ = false;
};

void Planner::ref_walk(const sql::Expr& e, std::set<int>* bindings,
                       std::map<int, std::set<std::string>>* columns) const {
  switch (e.kind) {
    case sql::Expr::Kind::ColumnRef: {
      if (!e.qualifier.empty() &&
          std::none_of(bindings_.begin(), bindings_.end(),
                       [&](const Binding& b) { return b.name == e.qualifier; }))
        plan_fail("unknown table '" + e.qualifier + "'");
      int found_binding = -1;
      for (size_t b = 0; b < bindings_.size(); ++b) {
        if (!e.qualifier.empty() && bindings_[b].name != e.qualifier) continue;
        if (bindings_[b].schema.index_of(e.column) < 0) {
          if (!e.qualifier.empty())
            plan_fail("unknown column '" + e.qualifier + "." + e.column + "'");
          continue;
        }
        if (found_binding >= 0)
          plan_fail("ambiguous column reference '" + e.column + "'");
        found_binding = static_cast<int>(b);
      }
      if (found_binding < 0)
        plan_fail("unknown column '" +
                  (e.qualifier.empty() ? e.column : e.qualifier + "." + e.column) + "'");
      if (bindings) bindings->insert(found_binding);
      if (columns) (*columns)[found_binding].insert(e.column);
      return;
    }
    case sql::Expr::Kind::Literal:
      return;
    case sql::Expr::Kind::Binary:
      ref_walk(*e.left, bindings, columns);
      ref_walk(*e.right, bindings, columns);
      return;
    case sql::Expr::Kind::In:
      ref_walk(*e.subject, bindings, columns);
      for (const auto& it : e.in_items) ref_walk(*it, bindings, columns);
      return;
    case sql::Expr::Kind::Not:
      ref_walk(*e.child, bindings, columns);
      return;
    case sql::Expr::Kind::Aggregate:
      if (e.arg) ref_walk(*e.arg, bindings, columns);
      return;
  }
}

Compiled Planner::compile(const sql::Expr& e, const Layout& lay) const {
  switch (e.kind) {
    case sql::Expr::Kind::ColumnRef: {
      if (lay.replacements != nullptr) {
        for (const auto& [ast, idx] : *lay.replacements)
          if (sql::expr_equal(*ast, e))
            return {RExpr::column_ref(idx), (*lay.schema)[static_cast<size_t>(idx)].type};
        // Under GROUP BY a bare column must match a grouping expression.
        plan_fail("column '" + (e.qualifier.empty() ? e.column : e.qualifier + "." + e.column) +
                  "' must appear in the GROUP BY clause or be used in an aggregate");
      }
      int idx = resolve_column(lay, e.qualifier, e.column);
      return {RExpr::column_ref(idx), (*lay.schema)[static_cast<size_t>(idx)].type};
    }
    case sql::Expr::Kind::Literal:
      return {RExpr::lit(e.literal), literal_type(e.literal)};
    case sql::Expr::Kind::Binary: {
      if (lay.replacements != nullptr) {
        for (const auto& [ast, idx] : *lay.replacements)
          if (sql::expr_equal(*ast, e))
            return {RExpr::column_ref(idx), (*lay.schema)[static_cast<size_t>(idx)].type};
      }
      Compiled l = compile(*e.left, lay);
      Compiled r = compile(*e.right, lay);
      if (is_comparison(e.op)) {
        // A literal side adopts the column side's type; otherwise the two
        // sides must already live in the same type family.
        if (l.type && r.type && family_of(*l.type) != family_of(*r.type)) {
          if (e.right->kind == sql::Expr::Kind::Literal) {
            r.expr = RExpr::lit(typed_literal(e.right->literal, *l.type, "comparison"));
            r.type = l.type;
          } else if (e.left->kind == sql::Expr::Kind::Literal) {
            l.expr = RExpr::lit(typed_literal(e.left->literal, *r.type, "comparison"));
            l.type = r.type;
          } else {
            plan_fail("type-mismatched comparison: " + sql::render_expr(e));
          }
        }
        return {RExpr::binary(e.op, l.expr, r.expr), ScalarType::Bool};
      }
      if (e.op == sql::BinOp::And || e.op == sql::BinOp::Or)
        return {RExpr::binary(e.op, l.expr, r.expr), ScalarType::Bool};
      // Arithmetic.
      if ((l.type && family_of(*l.type) != TypeFamily::Numeric) ||
          (r.type && family_of(*r.type) != TypeFamily::Numeric))
        plan_fail("arithmetic on non-numeric operand: " + sql::render_expr(e));
      ScalarType out = ScalarType::BigInt;
      if (e.op == sql::BinOp::Div || (l.type && (*l.type == ScalarType::Double ||
                                                 *l.type == ScalarType::Numeric)) ||
          (r.type && (*r.type == ScalarType::Double || *r.type == ScalarType::Numeric)))
        out = ScalarType::Double;
      return {RExpr::binary(e.op, l.expr, r.expr), out};
    }
    case sql::Expr::Kind::In: {
      Compiled subject = compile(*e.subject, lay);
      std::vector<RExprPtr> items;
      for (const auto& item : e.in_items) {
        Compiled c = compile(*item, lay);
        if (subject.type && c.type && family_of(*subject.type) != family_of(*c.type)) {
          if (item->kind == sql::Expr::Kind::Literal) {
            c.expr = RExpr::lit(typed_literal(item->literal, *subject.type, "IN list"));
          } else {
            plan_fail("type-mismatched comparison: " + sql::render_expr(e));
          }
        }
        items.push_back(std::move(c.expr));
      }
      return {RExpr::in_list(subject.expr, std::move(items), e.negated), ScalarType::Bool};
    }
    case sql::Expr::Kind::Not: {
      Compiled c = compile(*e.child, lay);
      return {RExpr::logical_not(c.expr), ScalarType::Bool};
    }
    case sql::Expr::Kind::Aggregate: {
      if (!lay.allow_aggregates || lay.replacements == nullptr)
        plan_fail("aggregate not allowed here: " + sql::render_expr(e));
      for (const auto& [ast, idx] : *lay.replacements)
        if (sql::expr_equal(*ast, e))
          return {RExpr::column_ref(idx), (*lay.schema)[static_cast<size_t>(idx)].type};
      plan_fail("internal: unresolved aggregate " + sql::render_expr(e));
    }
  }
  plan_fail("internal: unhandled expression kind");
}

void Planner::collect_bindings() {
  for (const auto& entry : q_.from) {
    const sql::TableRef& tr = entry.table;
    Binding b;
    b.name = tr.binding_name();
    for (const auto& other : bindings_)
      if (other.name == b.name) plan_fail("duplicate table name or alias '" + b.name + "'");

    Resolved r = ctx_.catalog->resolve({tr.schema, tr.table});
    if (r.view != nullptr) {
      if (!ctx_.view_snapshot) plan_fail("materialized views unavailable in this context");
      std::optional<MatSnapshot> snap = ctx_.view_snapshot(r.view->name);
      if (!snap) plan_fail("materialized view '" + r.view->name + "' has no data");
      b.view_name = r.view->name;
      b.schema = snap->schema;
      b.view_rows = snap->rows;
    } else {
      b.table = r.table;
      b.schema = r.table->rel_schema;
    }
    bindings_.push_back(std::move(b));
  }
}

void Planner::collect_pool() {
  std::vector<std::pair<sql::ExprPtr, int>> raw;  // expr, max visible binding
  if (q_.where) raw.emplace_back(q_.where, static_cast<int>(bindings_.size()) - 1);
  for (size_t i = 0; i < q_.from.size(); ++i)
    if (q_.from[i].on) raw.emplace_back(q_.from[i].on, static_cast<int>(i));

  // Flatten AND trees into individual conjuncts.
  std::vector<std::pair<sql::ExprPtr, int>> stack = std::move(raw);
  while (!stack.empty()) {
    auto [e, visible] = stack.back();
    stack.pop_back();
    if (e->kind == sql::Expr::Kind::Binary && e->op == sql::BinOp::And) {
      stack.emplace_back(e->left, visible);
      stack.emplace_back(e->right, visible);
      continue;
    }
    PoolEntry entry;
    entry.ast = e;
    ref_walk(*e, &entry.bindings, &referenced_);
    if (!entry.bindings.empty() && *entry.bindings.rbegin() > visible)
      plan_fail("join condition references a table joined later: " + sql::render_expr(*e));
    pool_.push_back(std::move(entry));
  }
  std::reverse(pool_.begin(), pool_.end());  // keep source order

  auto note_refs = [&](const sql::Expr& e) { ref_walk(e, nullptr, &referenced_); };
  for (const auto& item : q_.select)
    if (item.expr) note_refs(*item.expr);
  for (const auto& g : q_.group_by) note_refs(*g);
  if (q_.having) note_refs(*q_.having);
  for (const auto& o : q_.order_by) note_tolerant(*o.expr, &referenced_);
}

void Planner::collect_aggregates() {
  std::vector<const sql::Expr*> work;
  for (const auto& item : q_.select)
    if (item.expr) work.push_back(item.expr.get());
  if (q_.having) work.push_back(q_.having.get());
  for (const auto& o : q_.order_by) work.push_back(o.expr.get());

  // Find aggregate calls anywhere in the given expressions, deduplicated.
  std::vector<const sql::Expr*> stack = work;
  while (!stack.empty()) {
    const sql::Expr* e = stack.back();
    stack.pop_back();
    switch (e->kind) {
      case sql::Expr::Kind::Aggregate: {
        bool seen = false;
        for (const auto* a : agg_exprs_)
          if (sql::expr_equal(*a, *e)) seen = true;
        if (!seen) agg_exprs_.push_back(e);
        // Aggregate arguments cannot themselves contain aggregates.
        break;
      }
      case sql::Expr::Kind::Binary:
        stack.push_back(e->left.get());
        stack.push_back(e->right.get());
        break;
      case sql::Expr::Kind::In:
        stack.push_back(e->subject.get());
        for (const auto& it : e->in_items) stack.push_back(it.get());
        break;
      case sql::Expr::Kind::Not:
        stack.push_back(e->child.get());
        break;
      default:
        break;
    }
  }
}

bool Planner::plain_column_of(const sql::Expr& e, int binding, std::string* name) const {
  if (e.kind != sql::Expr::Kind::ColumnRef) return false;
  if (!e.qualifier.empty() && e.qualifier != bindings_[static_cast<size_t>(binding)].name)
    return false;
  if (bindings_[static_cast<size_t>(binding)].schema.index_of(e.column) < 0) return false;
  *name = e.column;
  return true;
}

std::optional<Conjunct> Planner::atomize(const sql::Expr& e, int binding) const {
  const RelSchema& schema = bindings_[static_cast<size_t>(binding)].schema;

  // Gather OR leaves.
  std::vector<const sql::Expr*> leaves;
  std::vector<const sql::Expr*> stack = {&e};
  while (!stack.empty()) {
    const sql::Expr* n = stack.back();
    stack.pop_back();
    if (n->kind == sql::Expr::Kind::Binary && n->op == sql::BinOp::Or) {
      stack.push_back(n->left.get());
      stack.push_back(n->right.get());
    } else {
      leaves.push_back(n);
    }
  }
  std::reverse(leaves.begin(), leaves.end());

  Conjunct out;
  for (const sql::Expr* leaf : leaves) {
    const sql::Expr* n = leaf;
    bool invert = false;
    if (n->kind == sql::Expr::Kind::Not) {
      // NOT over a plain comparison inverts the operator; anything else
      // (NOT IN, nested logic) keeps three-valued semantics at the mediator.
      if (n->child->kind != sql::Expr::Kind::Binary || !is_comparison(n->child->op))
        return std::nullopt;
      invert = true;
      n = n->child.get();
    }
    FilterAtom atom;
    if (n->kind == sql::Expr::Kind::Binary && is_comparison(n->op)) {
      const sql::Expr *colside = n->left.get(), *litside = n->right.get();
      sql::BinOp op = n->op;
      if (colside->kind == sql::Expr::Kind::Literal &&
          litside->kind == sql::Expr::Kind::ColumnRef) {
        std::swap(colside, litside);
        op = flipped(op);
      }
      std::string col;
      if (!plain_column_of(*colside, binding, &col) ||
          litside->kind != sql::Expr::Kind::Literal)
        return std::nullopt;
      if (invert) op = inverted(op);
      atom.column = col;
      atom.op = filter_op(op);
      atom.literal = typed_literal(litside->literal, schema.column(col)->type, "column " + col);
    } else if (n->kind == sql::Expr::Kind::In && !n->negated) {
      std::string col;
      if (!plain_column_of(*n->subject, binding, &col)) return std::nullopt;
      Array items;
      for (const auto& item : n->in_items) {
        if (item->kind != sql::Expr::Kind::Literal) return std::nullopt;
        items.push_back(typed_literal(item->literal, schema.column(col)->type, "column " + col));
      }
      atom.column = col;
      atom.op = FilterOp::In;
      atom.literal = Value::array(std::move(items));
    } else {
      return std::nullopt;
    }
    out.atoms.push_back(std::move(atom));
  }

  // OR of equalities on one column folds into a single IN atom, which
  // wrappers can evaluate as one native predicate.
  if (out.atoms.size() > 1) {
    bool foldable = std::all_of(out.atoms.begin(), out.atoms.end(), [&](const FilterAtom& a) {
      return a.op == FilterOp::Eq && a.column == out.atoms[0].column;
    });
    if (foldable) {
      Array items;
      for (const auto& a : out.atoms) items.push_back(a.literal);
      FilterAtom folded;
      folded.column = out.atoms[0].column;
      folded.op = FilterOp::In;
      folded.literal = Value::array(std::move(items));
      out.atoms = {std::move(folded)};
    }
  }
  return out;
}

PlanPtr Planner::build_relation(int b) {
  Binding& bind = bindings_[static_cast<size_t>(b)];
  bool single = bindings_.size() == 1;

  // Which pool conjuncts belong solely to this relation?
  std::vector<PoolEntry*> mine;
  for (auto& entry : pool_)
    if (entry.bindings == std::set<int>{b}) mine.push_back(&entry);

  if (bind.table == nullptr) {
    // Materialized view: no push-down partner, everything stays residual.
    auto node = std::make_shared<PlanNode>();
    node->op = PlanNode::Op::MatViewScan;
    node->view_name = bind.view_name;
    node->view_rows = bind.view_rows;
    for (const auto& col : bind.schema.columns)
      node->schema.push_back({bind.name, col.name, col.type});
    node->est = static_cast<double>(node->view_rows->size());
    PlanPtr cur = node;
    for (PoolEntry* entry : mine) {
      auto f = std::make_shared<PlanNode>();
      f->op = PlanNode::Op::Filter;
      f->children = {cur};
      f->schema = cur->schema;
      Layout lay{&cur->schema, nullptr, false};
      f->predicate = compile(*entry->ast, lay).expr;
      f->predicate_display = sql::render_expr(*entry->ast);
      f->est = std::max(1.0, cur->est / 3.0);
      entry->consumed = true;
      cur = f;
    }
    return cur;
  }

  Wrapper* wrapper = ctx_.wrapper_for ? ctx_.wrapper_for(bind.table->server) : nullptr;
  if (wrapper == nullptr)
    plan_fail("no store connected for server '" + bind.table->server + "'");

  // Offerable conjuncts convert to wrapper form; the rest filter above.
  std::vector<std::pair<PoolEntry*, Conjunct>> offered;
  std::vector<PoolEntry*> unconvertible;
  for (PoolEntry* entry : mine) {
    if (auto c = atomize(*entry->ast, b)) {
      offered.emplace_back(entry, std::move(*c));
    } else {
      unconvertible.push_back(entry);
    }
  }

  ScanRequest req;
  req.table = bind.table;
  for (const auto& col : bind.schema.columns)
    if (referenced_[b].count(col.name) != 0) req.required_columns.push_back(col.name);
  for (const auto& [entry, conjunct] : offered) req.filters.push_back(conjunct);

  // Sort, limit, and whole aggregates are only offered on single-table
  // queries whose filters the wrapper can see in full.
  bool offer_context = single && unconvertible.empty();
  bool want_agg = offer_context && !q_.group_by.empty() && !agg_exprs_.empty();
  if (want_agg) {
    for (const auto& g : q_.group_by) {
      std::string name;
      if (!plain_column_of(*g, b, &name)) want_agg = false;
    }
    for (const sql::Expr* a : agg_exprs_) {
      if (a->distinct) want_agg = false;
      if (a->arg == nullptr) continue;  // COUNT(*)
      std::string name;
      if (a->agg == sql::AggFunc::Count || !plain_column_of(*a->arg, b, &name))
        want_agg = false;  // COUNT(col) skips nulls; wrappers count documents
    }
  }
  if (q_.group_by.empty() && !agg_exprs_.empty()) want_agg = false;

  if (want_agg) {
    for (const auto& g : q_.group_by) {
      std::string name;
      plain_column_of(*g, b, &name);
      req.group_by.push_back(name);
    }
    for (size_t i = 0; i < agg_exprs_.size(); ++i) {
      const sql::Expr* a = agg_exprs_[i];
      AggSpec spec;
      spec.fn = agg_spec_fn(a->agg);
      if (a->arg) {
        std::string name;
        plain_column_of(*a->arg, b, &name);
        spec.column = name;
      }
      spec.out_name = "agg" + std::to_string(i);
      req.aggs.push_back(std::move(spec));
    }
  }

  // Sort and limit act on post-aggregate rows, so a query that needs any
  // aggregation may push them only together with the aggregate itself.
  bool needs_agg = !q_.group_by.empty() || !agg_exprs_.empty();
  bool want_sort = offer_context && !q_.order_by.empty() && (!needs_agg || want_agg);
  std::vector<SortKey> sort_keys;
  if (want_sort) {
    for (const auto& o : q_.order_by) {
      std::string name;
      if (plain_column_of(*o.expr, b, &name) && (!want_agg || [&] {
            for (const auto& g : req.group_by)
              if (g == name) return true;
            return false;
          }())) {
        sort_keys.push_back({name, o.ascending});
      } else if (want_agg && o.expr->kind == sql::Expr::Kind::Aggregate) {
        bool matched = false;
        for (size_t i = 0; i < agg_exprs_.size(); ++i)
          if (sql::expr_equal(*agg_exprs_[i], *o.expr)) {
            sort_keys.push_back({"agg" + std::to_string(i), o.ascending});
            matched = true;
          }
        if (!matched) want_sort = false;
      } else {
        want_sort = false;
      }
    }
    if (want_sort) req.sort = sort_keys;
  }

  bool want_limit = offer_context && q_.limit.has_value() && !q_.distinct &&
                    q_.having == nullptr && (q_.order_by.empty() || want_sort) &&
                    (!needs_agg || want_agg);
  if (want_limit) req.limit = q_.limit;

  ScanPlan plan = wrapper->plan_scan(req);
  if (want_agg && !plan.aggregate_accepted) {
    // The wrapper declined the aggregate; sort and limit depend on it, so
    // re-negotiate a plain scan and aggregate at the mediator.
    req.group_by.clear();
    req.aggs.clear();
    req.sort.clear();
    req.limit.reset();
    want_sort = false;
    want_limit = false;
    want_agg = false;
    plan = wrapper->plan_scan(req);
  }

  // Projection pruning: drop columns only the accepted filters mentioned.
  if (!want_agg) {
    std::map<int, std::set<std::string>> needed;
    auto note = [&](const sql::Expr& e) { ref_walk(e, nullptr, &needed); };
    for (const auto& item : q_.select)
      if (item.expr) note(*item.expr);
    for (const auto& g : q_.group_by) note(*g);
    if (q_.having) note(*q_.having);
    for (const auto& o : q_.order_by) note_tolerant(*o.expr, &needed);
    // Join conjuncts touching this relation keep their key columns.
    for (const auto& entry : pool_)
      if (entry.bindings.size() > 1 && entry.bindings.count(b) != 0) note(*entry.ast);
    for (PoolEntry* entry : unconvertible) note(*entry->ast);
    for (const auto& [entry, conjunct] : offered) {
      bool residual = false;
      for (const auto& rc : plan.residual)
        if (conjunct_equal(rc, conjunct)) residual = true;
      if (residual) note(*entry->ast);
    }
    bool star = std::any_of(q_.select.begin(), q_.select.end(),
                            [](const sql::SelectItem& s) { return s.star; });
    std::vector<std::string> pruned;
    for (const auto& col : bind.schema.columns) {
      if (star || needed[b].count(col.name) != 0) pruned.push_back(col.name);
    }
    if (pruned != req.required_columns) {
      req.required_columns = std::move(pruned);
      plan = wrapper->plan_scan(req);
    }
  }

  // Mark accepted conjuncts consumed; residual ones stay in the pool as
  // mediator filters.
  std::vector<PoolEntry*> residual_entries = unconvertible;
  for (const auto& [entry, conjunct] : offered) {
    bool residual = false;
    for (const auto& rc : plan.residual)
      if (conjunct_equal(rc, conjunct)) residual = true;
    if (residual) {
      residual_entries.push_back(entry);
    } else {
      entry->consumed = true;
    }
  }

  auto node = std::make_shared<PlanNode>();
  node->op = PlanNode::Op::ForeignScan;
  node->table = bind.table;
  node->wrapper = wrapper;
  node->request = req;
  node->scan = plan;
  for (const auto& name : plan.columns) {
    if (const ColumnDef* col = bind.table->rel_schema.column(name)) {
      node->schema.push_back({bind.name, name, col->type});
    } else {
      // An aggregate output column; find its offered spec for the type.
      ScalarType t = ScalarType::BigInt;
      for (size_t i = 0; i < req.aggs.size(); ++i) {
        if (req.aggs[i].out_name != name) continue;
        std::optional<ScalarType> arg;
        if (!req.aggs[i].column.empty())
          arg = bind.table->rel_schema.column(req.aggs[i].column)->type;
        t = agg_result_type(agg_exprs_[i]->agg, arg);
      }
      node->schema.push_back({bind.name, name, t});
    }
  }
  node->est = plan.est_rows;

  if (single) {
    sort_pushed_ = want_sort && plan.sort_accepted;
    limit_pushed_ = q_.limit.has_value() && plan.limit_accepted;
    agg_pushed_ = want_agg && plan.aggregate_accepted;
  }

  PlanPtr cur = node;
  for (PoolEntry* entry : residual_entries) {
    auto f = std::make_shared<PlanNode>();
    f->op = PlanNode::Op::Filter;
    f->children = {cur};
    f->schema = cur->schema;
    Layout lay{&cur->schema, nullptr, false};
    f->predicate = compile(*entry->ast, lay).expr;
    f->predicate_display = sql::render_expr(*entry->ast);
    f->est = std::max(1.0, cur->est / 3.0);
    entry->consumed = true;
    cur = f;
  }
  return cur;
}

namespace {

// Shift every column index in an expression (used when an inner relation's
// filters move up to the combined join row).
RExprPtr rebase(const RExprPtr& e, int delta) {
  if (e == nullptr) return nullptr;
  auto out = std::make_shared<RExpr>(*e);
  if (out->kind == RExpr::Kind::Column) out->column += delta;
  out->left = rebase(e->left, delta);
  out->right = rebase(e->right, delta);
  out->child = rebase(e->child, delta);
  out->items.clear();
  for (const auto& it : e->items) out->items.push_back(rebase(it, delta));
  return out;
}

RExprPtr conjoin(RExprPtr a, RExprPtr b) {
  if (a == nullptr) return b;
  if (b == nullptr) return a;
  return RExpr::binary(sql::BinOp::And, std::move(a), std::move(b));
}

}  // namespace

PlanPtr Planner::build_joins() {
  PlanPtr cur = build_relation(0);

  for (int k = 1; k < static_cast<int>(bindings_.size()); ++k) {
    PlanPtr right = build_relation(k);

    // Conjuncts that become answerable exactly when relation k joins in.
    std::vector<PoolEntry*> here;
    for (auto& entry : pool_) {
      if (entry.consumed || entry.bindings.empty()) continue;
      if (*entry.bindings.rbegin() != k) continue;
      if (entry.bindings.size() < 2) continue;
      here.push_back(&entry);
    }

    // Split equi-join keys from general residual predicates.
    size_t left_width = cur->schema.size();
    PlanSchema combined = cur->schema;
    // The right side of a BindJoin is the bare scan; peel Filter nodes and
    // carry their predicates as join residuals.
    PlanPtr right_scan = right;
    std::vector<std::pair<RExprPtr, std::string>> peeled;
    while (right_scan->op == PlanNode::Op::Filter) {
      peeled.emplace_back(right_scan->predicate, right_scan->predicate_display);
      right_scan = right_scan->children[0];
    }

    for (const auto& col : right->schema) combined.push_back(col);

    std::vector<std::pair<int, int>> keys;
    std::vector<std::string> key_display;
    std::vector<PoolEntry*> residual;
    for (PoolEntry* entry : here) {
      const sql::Expr& e = *entry->ast;
      bool is_key = false;
      if (e.kind == sql::Expr::Kind::Binary && e.op == sql::BinOp::Eq &&
          e.left->kind == sql::Expr::Kind::ColumnRef &&
          e.right->kind == sql::Expr::Kind::ColumnRef) {
        Layout lay{&combined, nullptr, false};
        Compiled cl = compile(*e.left, lay);
        Compiled cr = compile(*e.right, lay);
        if (cl.type && cr.type && family_of(*cl.type) != family_of(*cr.type))
          plan_fail("type-mismatched comparison: " + sql::render_expr(e));
        int li = cl.expr->column;
        int ri = cr.expr->column;
        int lo = std::min(li, ri), hi = std::max(li, ri);
        if (lo < static_cast<int>(left_width) && hi >= static_cast<int>(left_width)) {
          keys.emplace_back(lo, hi - static_cast<int>(left_width));
          key_display.push_back(sql::render_expr(e));
          is_key = true;
        }
      }
      if (!is_key) residual.push_back(entry);
      entry->consumed = true;
    }

    // Decide BindJoin: the inner must be a foreign scan whose key columns the
    // wrapper accepts as (possibly composite) equality filters.
    bool try_bind = ctx_.options.force_join != PlannerOptions::ForceJoin::Hash &&
                    right_scan->op == PlanNode::Op::ForeignScan && !keys.empty() &&
                    (ctx_.options.force_join == PlannerOptions::ForceJoin::Bind ||
                     cur->est <= static_cast<double>(ctx_.options.bind_join_threshold));
    PlanPtr join;
    if (try_bind) {
      ScanRequest probe = right_scan->request;
      std::vector<int> sources;
      for (size_t i = 0; i < keys.size(); ++i) {
        FilterAtom a;
        a.column = right_scan->schema[static_cast<size_t>(keys[i].second)].name;
        a.op = FilterOp::Eq;
        a.param = static_cast<int>(i);
        probe.filters.push_back(Conjunct{{a}});
        sources.push_back(keys[i].first);
      }
      ScanPlan probe_plan = right_scan->wrapper->plan_scan(probe);
      bool all_keys_native = true;
      for (size_t i = 0; i < keys.size(); ++i) {
        bool found = false;
        for (const auto& c : probe_plan.accepted)
          for (const auto& a : c.atoms)
            if (a.param == static_cast<int>(i)) found = true;
        if (!found) all_keys_native = false;
      }
      if (all_keys_native) {
        auto inner = std::make_shared<PlanNode>(*right_scan);
        inner->request = probe;
        inner->scan = probe_plan;
        join = std::make_shared<PlanNode>();
        join->op = PlanNode::Op::BindJoin;
        join->children = {cur, inner};
        join->param_sources = std::move(sources);
        join->key_cols = keys;
        join->key_display = key_display;
        // Any filters peeled off the inner relation apply post-join.
        for (auto& [pred, display] : peeled) {
          join->predicate = conjoin(join->predicate,
                                    rebase(pred, static_cast<int>(left_width)));
          join->predicate_display = join->predicate_display.empty()
                                        ? display
                                        : join->predicate_display + " AND " + display;
        }
      }
    }
    if (join == nullptr) {
      join = std::make_shared<PlanNode>();
      join->op = PlanNode::Op::HashJoin;
      join->children = {cur, right};
      join->key_cols = keys;
      join->key_display = key_display;
    }
    join->schema = combined;
    join->est = std::max(1.0, cur->est * right->est / 10.0);

    for (PoolEntry* entry : residual) {
      Layout lay{&combined, nullptr, false};
      join->predicate = conjoin(join->predicate, compile(*entry->ast, lay).expr);
      std::string d = sql::render_expr(*entry->ast);
      join->predicate_display =
          join->predicate_display.empty() ? d : join->predicate_display + " AND " + d;
    }
    cur = join;
  }

  // Binding-free conjuncts (constant predicates) filter the joined stream.
  for (auto& entry : pool_) {
    if (entry.consumed) continue;
    if (!entry.bindings.empty()) continue;
    auto f = std::make_shared<PlanNode>();
    f->op = PlanNode::Op::Filter;
    f->children = {cur};
    f->schema = cur->schema;
    Layout lay{&cur->schema, nullptr, false};
    f->predicate = compile(*entry.ast, lay).expr;
    f->predicate_display = sql::render_expr(*entry.ast);
    f->est = cur->est;
    entry.consumed = true;
    cur = f;
  }
  for (const auto& entry : pool_)
    if (!entry.consumed) plan_fail("internal: unplaced predicate " + sql::render_expr(*entry.ast));
  return cur;
}

PlanPtr Planner::finish(PlanPtr root) {
  bool grouped = !q_.group_by.empty() || !agg_exprs_.empty();

  // Post-aggregation scope: expressions match group keys or aggregate calls.
  std::vector<std::pair<const sql::Expr*, int>> replacements;

  if (grouped && !agg_pushed_) {
    auto agg = std::make_shared<PlanNode>();
    agg->op = PlanNode::Op::Aggregate;
    agg->children = {root};
    Layout lay{&root->schema, nullptr, false};
    for (const auto& g : q_.group_by) {
      Compiled c = compile(*g, lay);
      std::string name = g->kind == sql::Expr::Kind::ColumnRef ? g->column : sql::render_expr(*g);
      std::string binding = g->kind == sql::Expr::Kind::ColumnRef
                                ? root->schema[static_cast<size_t>(c.expr->column)].binding
                                : "";
      agg->group_exprs.push_back(c.expr);
      agg->group_display.push_back(sql::render_expr(*g));
      agg->schema.push_back({binding, name, c.type.value_or(ScalarType::Text)});
    }
    for (size_t i = 0; i < agg_exprs_.size(); ++i) {
      const sql::Expr* a = agg_exprs_[i];
      AggItem item;
      item.fn = a->agg;
      item.distinct = a->distinct;
      std::optional<ScalarType> arg_type;
      if (a->arg) {
        Compiled c = compile(*a->arg, lay);
        item.arg = c.expr;
        arg_type = c.type;
      }
      agg->aggs.push_back(std::move(item));
      agg->agg_display.push_back(sql::render_expr(*a));
      agg->schema.push_back({"", "agg" + std::to_string(i), agg_result_type(a->agg, arg_type)});
    }
    agg->est = std::max(1.0, root->est / 5.0);
    root = agg;
  }

  if (grouped) {
    for (size_t i = 0; i < q_.group_by.size(); ++i)
      replacements.emplace_back(q_.group_by[i].get(), static_cast<int>(i));
    for (size_t i = 0; i < agg_exprs_.size(); ++i)
      replacements.emplace_back(agg_exprs_[i],
                                static_cast<int>(q_.group_by.size() + i));
  }

  Layout out_lay{&root->schema, grouped ? &replacements : nullptr, grouped};

  if (q_.having) {
    auto f = std::make_shared<PlanNode>();
    f->op = PlanNode::Op::Filter;
    f->children = {root};
    f->schema = root->schema;
    f->predicate = compile(*q_.having, out_lay).expr;
    f->predicate_display = sql::render_expr(*q_.having);
    f->est = std::max(1.0, root->est / 3.0);
    root = f;
    out_lay.schema = &root->schema;
  }

  if (!q_.order_by.empty() && !sort_pushed_) {
    auto s = std::make_shared<PlanNode>();
    s->op = PlanNode::Op::Sort;
    s->children = {root};
    s->schema = root->schema;
    for (const auto& o : q_.order_by) {
      // An unqualified name that is not in scope may name a SELECT alias.
      const sql::Expr* target = o.expr.get();
      if (target->kind == sql::Expr::Kind::ColumnRef && target->qualifier.empty()) {
        bool in_scope = true;
        try {
          compile(*target, out_lay);
        } catch (const Error&) {
          in_scope = false;
        }
        if (!in_scope) {
          for (const auto& item : q_.select)
            if (item.alias == target->column && item.expr) target = item.expr.get();
        }
      }
      s->sort_keys.emplace_back(compile(*target, out_lay).expr, o.ascending);
      s->sort_display.push_back(sql::render_expr(*o.expr) + (o.ascending ? " ASC" : " DESC"));
    }
    s->est = root->est;
    root = s;
    out_lay.schema = &root->schema;
  }

  // Projection.
  std::vector<ProjItem> items;
  PlanSchema out_schema;
  for (const auto& sel : q_.select) {
    if (sel.star) {
      if (grouped) plan_fail("SELECT * cannot be used with GROUP BY or aggregates");
      for (size_t i = 0; i < root->schema.size(); ++i) {
        const PlanCol& c = root->schema[i];
        if (!sel.star_qualifier.empty() && c.binding != sel.star_qualifier) continue;
        items.push_back({RExpr::column_ref(static_cast<int>(i)), c.name, c.name});
        out_schema.push_back({c.binding, c.name, c.type});
      }
      if (!sel.star_qualifier.empty() && out_schema.empty())
        plan_fail("unknown table '" + sel.star_qualifier + "' in select list");
      continue;
    }
    Compiled c = compile(*sel.expr, out_lay);
    std::string name = sel.alias;
    if (name.empty()) {
      if (sel.expr->kind == sql::Expr::Kind::ColumnRef) {
        name = sel.expr->column;
      } else if (sel.expr->kind == sql::Expr::Kind::Aggregate) {
        name = agg_name(sel.expr->agg);
      } else {
        name = sql::render_expr(*sel.expr);
      }
    }
    items.push_back({c.expr, name, sql::render_expr(*sel.expr)});
    out_schema.push_back({"", name, c.type.value_or(ScalarType::Text)});
  }

  // Drop a no-op projection: exact identity over the child's columns.
  bool identity = items.size() == root->schema.size();
  for (size_t i = 0; identity && i < items.size(); ++i) {
    identity = items[i].expr->kind == RExpr::Kind::Column &&
               items[i].expr->column == static_cast<int>(i) &&
               items[i].name == root->schema[i].name;
  }
  if (!identity) {
    auto p = std::make_shared<PlanNode>();
    p->op = PlanNode::Op::Project;
    p->children = {root};
    p->items = std::move(items);
    p->schema = std::move(out_schema);
    p->est = root->est;
    root = p;
  }

  if (q_.distinct) {
    auto d = std::make_shared<PlanNode>();
    d->op = PlanNode::Op::Distinct;
    d->children = {root};
    d->schema = root->schema;
    d->est = root->est;
    root = d;
  }

  if (q_.limit && !limit_pushed_) {
    auto l = std::make_shared<PlanNode>();
    l->op = PlanNode::Op::Limit;
    l->children = {root};
    l->schema = root->schema;
    l->limit = *q_.limit;
    l->est = std::min(root->est, static_cast<double>(*q_.limit));
    root = l;
  }
  return root;
}

void check_expr(const RExprPtr& e, size_t width) {
  if (e == nullptr) return;
  if (e->kind == RExpr::Kind::Column &&
      (e->column < 0 || e->column >= static_cast<int>(width)))
    throw Error(ErrorKind::Execution, "internal: plan column out of range");
  check_expr(e->left, width);
  check_expr(e->right, width);
  check_expr(e->child, width);
  for (const auto& it : e->items) check_expr(it, width);
}

void check_plan(const PlanNode& n) {
  for (const auto& c : n.children) check_plan(*c);
  size_t in_width = n.children.empty() ? 0 : n.children[0]->schema.size();
  switch (n.op) {
    case PlanNode::Op::Filter:
      check_expr(n.predicate, in_width);
      break;
    case PlanNode::Op::Project:
      for (const auto& item : n.items) check_expr(item.expr, in_width);
      break;
    case PlanNode::Op::HashJoin:
    case PlanNode::Op::BindJoin:
      for (const auto& [l, r] : n.key_cols) {
        if (l < 0 || l >= static_cast<int>(n.children[0]->schema.size()) || r < 0 ||
            r >= static_cast<int>(n.children[1]->schema.size()))
          throw Error(ErrorKind::Execution, "internal: join key out of range");
      }
      check_expr(n.predicate, n.schema.size());
      break;
    case PlanNode::Op::Aggregate:
      for (const auto& g : n.group_exprs) check_expr(g, in_width);
      for (const auto& a : n.aggs) check_expr(a.arg, in_width);
      break;
    case PlanNode::Op::Sort:
      for (const auto& [k, asc] : n.sort_keys) {
        (void)asc;
        check_expr(k, in_width);
      }
      break;
    default:
      break;
  }
}

PlanPtr Planner::plan() {
  collect_aggregates();

  if (q_.from.empty()) {
    if (!agg_exprs_.empty()) plan_fail("aggregate without a FROM clause");
    if (!q_.group_by.empty() || q_.having || !q_.order_by.empty())
      plan_fail("GROUP BY, HAVING and ORDER BY need a FROM clause");
    auto p = std::make_shared<PlanNode>();
    p->op = PlanNode::Op::Project;
    PlanSchema empty;
    Layout lay{&empty, nullptr, false};
    for (const auto& sel : q_.select) {
      if (sel.star) plan_fail("SELECT * needs a FROM clause");
      Compiled c = compile(*sel.expr, lay);
      std::string name = sel.alias.empty() ? sql::render_expr(*sel.expr) : sel.alias;
      p->items.push_back({c.expr, name, sql::render_expr(*sel.expr)});
      p->schema.push_back({"", name, c.type.value_or(ScalarType::Text)});
    }
    PlanPtr root = p;
    if (q_.limit) {
      auto l = std::make_shared<PlanNode>();
      l->op = PlanNode::Op::Limit;
      l->children = {root};
      l->schema = root->schema;
      l->limit = *q_.limit;
      root = l;
    }
    return root;
  }

  collect_bindings();
  collect_pool();
  PlanPtr joined = build_joins();
  return finish(std::move(joined));
}

}  // namespace

PlanPtr plan_query(const sql::Query& q, const PlanContext& ctx) {
  if (ctx.catalog == nullptr) throw Error(ErrorKind::Plan, "planner needs a catalog");
  Planner p(q, ctx);
  PlanPtr out = p.plan();
  check_plan(*out);
  return out;
}

namespace {

void explain_node(const PlanNode& n, int depth, std::string& out) {
  out.append(static_cast<size_t>(depth) * 2, ' ');
  switch (n.op) {
    case PlanNode::Op::ForeignScan:
      out += "ForeignScan " + n.table->qualified();
      out += " native: " + n.scan.native_text;
      break;
    case PlanNode::Op::MatViewScan:
      out += "MatViewScan " + n.view_name;
      break;
    case PlanNode::Op::Filter:
      out += "Filter (" + n.predicate_display + ")";
      break;
    case PlanNode::Op::Project: {
      out += "Project (";
      for (size_t i = 0; i < n.items.size(); ++i) {
        if (i) out += ", ";
        out += n.items[i].display;
        if (n.items[i].name != n.items[i].display) out += " AS " + n.items[i].name;
      }
      out += ")";
      break;
    }
    case PlanNode::Op::HashJoin:
    case PlanNode::Op::BindJoin: {
      out += n.op == PlanNode::Op::HashJoin ? "HashJoin (" : "BindJoin (";
      if (n.key_display.empty()) {
        out += "cross";
      } else {
        for (size_t i = 0; i < n.key_display.size(); ++i) {
          if (i) out += ", ";
          out += n.key_display[i];
        }
      }
      out += ")";
      if (!n.predicate_display.empty()) out += " filter (" + n.predicate_display + ")";
      break;
    }
    case PlanNode::Op::Aggregate: {
      out += "Aggregate (";
      for (size_t i = 0; i < n.group_display.size(); ++i) {
        if (i) out += ", ";
        out += n.group_display[i];
      }
      if (!n.group_display.empty() && !n.agg_display.empty()) out += " | ";
      for (size_t i = 0; i < n.agg_display.size(); ++i) {
        if (i) out += ", ";
        out += n.agg_display[i];
      }
      out += ")";
      break;
    }
    case PlanNode::Op::Sort: {
      out += "Sort (";
      for (size_t i = 0; i < n.sort_display.size(); ++i) {
        if (i) out += ", ";
        out += n.sort_display[i];
      }
      out += ")";
      break;
    }
    case PlanNode::Op::Limit:
      out += "Limit " + std::to_string(n.limit);
      break;
    case PlanNode::Op::Distinct:
      out += "Distinct";
      break;
  }
  out += "\n";
  for (const auto& c : n.children) explain_node(*c, depth + 1, out);
}

}  // namespace

std::string explain_text(const PlanNode& plan) {
  std::string out;
  explain_node(plan, 0, out);
  return out;
}

}  // namespace pqe
