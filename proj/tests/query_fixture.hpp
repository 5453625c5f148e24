#pragma once

// Shared fixture for planner and executor tests: a catalog over three live
// stores (document, wide-column, key-value), plus hand-built reference tables
// and a naive query interpreter used as an independent oracle. The oracle
// evaluates the parsed AST directly over cross products — no planner, no
// operators, no push-down — so agreement is meaningful.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "polyqe/catalog.hpp"
#include "polyqe/error.hpp"
#include "polyqe/executor.hpp"
#include "polyqe/pipeline.hpp"
#include "polyqe/planner.hpp"
#include "polyqe/sql/parser.hpp"
#include "polyqe/stores.hpp"

namespace qfix {

using namespace pqe;

// ---- reference data ----

struct OracleTable {
  std::string name;  // unqualified
  std::vector<std::string> columns;
  std::vector<Row> rows;
};

inline Value N() { return Value::null(); }
inline Value I(int64_t v) { return Value::int64(v); }
inline Value D(double v) { return Value::float64(v); }
inline Value T(const char* v) { return Value::text(v); }

struct Fixture {
  Catalog catalog;
  StoreBackend mongo = StoreBackend::make(StoreKind::DocStore, true);
  StoreBackend cass = StoreBackend::make(StoreKind::WideColumn, true);
  StoreBackend redis = StoreBackend::make(StoreKind::Kv, true);

  // Capability-masked wrappers over the same stores, for neutrality checks.
  DocWrapper doc_off;
  WideColumnWrapper wc_off;
  KvWrapper kv_off;

  std::vector<OracleTable> oracle;

  Fixture()
      : doc_off(*mongo.doc, WrapperCapabilities::none()),
        wc_off(*cass.wide, WrapperCapabilities::none()),
        kv_off(*redis.kv, WrapperCapabilities::none()) {
    catalog.add_server({"mongo", StoreKind::DocStore, {}});
    catalog.add_server({"cass", StoreKind::WideColumn, {}});
    catalog.add_server({"redis", StoreKind::Kv, {}});

    for (const char* ddl : {
             "CREATE FOREIGN TABLE main.customer ("
             " c_id int OPTIONS (mname 'C_ID'),"
             " c_w_id int OPTIONS (mname 'C_W_ID'),"
             " c_name text OPTIONS (mname 'C_NAME'),"
             " c_balance double precision OPTIONS (mname 'C_BAL')"
             ") SERVER mongo OPTIONS (collection 'CUSTOMER', db 'tpcc')",
             "CREATE FOREIGN TABLE main.orders ("
             " o_c_id int OPTIONS (mname 'C_ID'),"
             " o_id int OPTIONS (mname 'ORDERS.O_ID'),"
             " o_carrier text OPTIONS (mname 'ORDERS.CARRIER'),"
             " o_qty int OPTIONS (mname 'ORDERS.QTY')"
             ") SERVER mongo OPTIONS (collection 'CUSTOMER', db 'tpcc',"
             " pipe '[{\"$unwind\": \"$ORDERS\"}]')",
             "CREATE FOREIGN TABLE main.ctags ("
             " tc_id int OPTIONS (mname 'C_ID'),"
             " tag text OPTIONS (mname 'TAGS')"
             ") SERVER mongo OPTIONS (collection 'CUSTOMER', db 'tpcc',"
             " pipe '[{\"$unwind\": \"$TAGS\"}]')",
             "CREATE FOREIGN TABLE main.ctags_raw ("
             " rc_id int OPTIONS (mname 'C_ID'),"
             " tags text OPTIONS (mname 'TAGS')"
             ") SERVER mongo OPTIONS (collection 'CUSTOMER', db 'tpcc')",
             "CREATE FOREIGN TABLE main.district ("
             " key text,"
             " d_id smallint,"
             " d_w_id smallint,"
             " d_name text,"
             " d_next_o_id int"
             ") SERVER cass OPTIONS (cf 'district')",
             "ALTER FOREIGN TABLE main.district ALTER COLUMN key OPTIONS ("
             "composite 'd_id,d_w_id:str(d_id).zfill(5)+str(d_w_id).zfill(5)')",
             "CREATE FOREIGN TABLE main.sessions ("
             " key text,"
             " value text"
             ") SERVER redis OPTIONS (ns 'sessions')",
         }) {
      catalog.apply_ddl(sql::parse(ddl));
    }

    {
      std::istringstream docs(R"({"_id": "c1", "C_ID": 1, "C_W_ID": 1, "C_NAME": "alice", "C_BAL": 10.5, "TAGS": ["x", "y"], "ORDERS": [{"O_ID": 101, "CARRIER": "ups", "QTY": 2}, {"O_ID": 102, "QTY": 5}]}
{"_id": "c2", "C_ID": 2, "C_W_ID": 1, "C_NAME": "bob", "C_BAL": -3.25, "TAGS": [], "ORDERS": [{"O_ID": 201, "CARRIER": "dhl", "QTY": 1}]}
{"_id": "c3", "C_ID": 3, "C_W_ID": 2, "C_NAME": "carol", "ORDERS": []}
{"_id": "c4", "C_ID": 4, "C_W_ID": 2, "C_NAME": "alice", "C_BAL": 7.0, "TAGS": ["y"], "ORDERS": [{"O_ID": 401, "CARRIER": "ups", "QTY": 3}, {"O_ID": 402, "CARRIER": "fedex", "QTY": 2}, {"O_ID": 403, "QTY": 9}]}
{"_id": "c5", "C_ID": 5, "C_W_ID": 1, "C_NAME": "dave", "C_BAL": 0.0, "TAGS": ["x", "z", "x"]}
)");
      mongo.doc->load_ndjson("tpcc", "CUSTOMER", docs);
    }
    {
      std::istringstream tsv(
          "key\td_id\td_w_id\td_name\td_next_o_id\n"
          "0000100001\t1\t1\tCenter\t3001\n"
          "0000100002\t1\t2\tWestside\t3002\n"
          "0000200002\t2\t2\tHarbor\t3003\n");
      cass.wide->load_tsv("district", tsv);
    }
    {
      std::istringstream tsv(
          "key\tvalue\n"
          "s1\talice\n"
          "s2\tbob\n"
          "s3\tzed\n"
          "s4\talice\n");
      redis.kv->load_tsv("sessions", tsv);
    }

    oracle.push_back({"customer",
                      {"c_id", "c_w_id", "c_name", "c_balance"},
                      {{I(1), I(1), T("alice"), D(10.5)},
                       {I(2), I(1), T("bob"), D(-3.25)},
                       {I(3), I(2), T("carol"), N()},
                       {I(4), I(2), T("alice"), D(7.0)},
                       {I(5), I(1), T("dave"), D(0.0)}}});
    oracle.push_back({"orders",
                      {"o_c_id", "o_id", "o_carrier", "o_qty"},
                      {{I(1), I(101), T("ups"), I(2)},
                       {I(1), I(102), N(), I(5)},
                       {I(2), I(201), T("dhl"), I(1)},
                       {I(4), I(401), T("ups"), I(3)},
                       {I(4), I(402), T("fedex"), I(2)},
                       {I(4), I(403), N(), I(9)}}});
    oracle.push_back({"district",
                      {"key", "d_id", "d_w_id", "d_name", "d_next_o_id"},
                      {{T("0000100001"), I(1), I(1), T("Center"), I(3001)},
                       {T("0000100002"), I(1), I(2), T("Westside"), I(3002)},
                       {T("0000200002"), I(2), I(2), T("Harbor"), I(3003)}}});
    oracle.push_back({"sessions",
                      {"key", "value"},
                      {{T("s1"), T("alice")},
                       {T("s2"), T("bob")},
                       {T("s3"), T("zed")},
                       {T("s4"), T("alice")}}});
  }

  Wrapper* wrapper(const std::string& server) {
    if (server == "mongo") return mongo.wrapper.get();
    if (server == "cass") return cass.wrapper.get();
    if (server == "redis") return redis.wrapper.get();
    return nullptr;
  }

  Wrapper* wrapper_off(const std::string& server) {
    if (server == "mongo") return &doc_off;
    if (server == "cass") return &wc_off;
    if (server == "redis") return &kv_off;
    return nullptr;
  }

  PlanContext context(bool pushdown = true) {
    PlanContext ctx;
    ctx.catalog = &catalog;
    if (pushdown) {
      ctx.wrapper_for = [this](const std::string& s) { return wrapper(s); };
    } else {
      ctx.wrapper_for = [this](const std::string& s) { return wrapper_off(s); };
    }
    return ctx;
  }

  const OracleTable* reference(const std::string& name) const {
    for (const auto& t : oracle)
      if (t.name == name) return &t;
    return nullptr;
  }
};

// ---- engine driver ----

inline sql::Query parse_select(const std::string& text) {
  return std::get<sql::SelectStmt>(sql::parse(text)).query;
}

inline std::vector<Row> run_engine(Fixture& f, const std::string& text,
                                   PlanContext ctx) {
  auto plan = plan_query(parse_select(text), ctx);
  return execute_plan(*plan);
}

// ---- naive oracle interpreter ----

class Naive {
 public:
  explicit Naive(const Fixture& f) : f_(&f) {}

  std::vector<Row> run(const sql::Query& q) const;

 private:
  struct Scope {
    std::vector<std::string> bindings;               // per FROM entry
    std::vector<const OracleTable*> tables;          // aligned with bindings
    std::vector<size_t> offsets;                     // column offset per entry
  };

  size_t resolve(const Scope& s, const std::string& qualifier,
                 const std::string& column) const {
    std::optional<size_t> found;
    for (size_t b = 0; b < s.bindings.size(); ++b) {
      if (!qualifier.empty() && s.bindings[b] != qualifier) continue;
      const auto& cols = s.tables[b]->columns;
      for (size_t c = 0; c < cols.size(); ++c) {
        if (cols[c] != column) continue;
        if (found) throw Error(ErrorKind::Plan, "oracle: ambiguous " + column);
        found = s.offsets[b] + c;
      }
    }
    if (!found) throw Error(ErrorKind::Plan, "oracle: unknown " + column);
    return *found;
  }

  Value eval(const sql::Expr& e, const Scope& s, const Row& row) const {
    switch (e.kind) {
      case sql::Expr::Kind::ColumnRef:
        return row[resolve(s, e.qualifier, e.column)];
      case sql::Expr::Kind::Literal:
        return e.literal;
      case sql::Expr::Kind::Binary: {
        Value l = eval(*e.left, s, row);
        Value r = eval(*e.right, s, row);
        switch (e.op) {
          case sql::BinOp::And: {
            auto a = tri(l), b = tri(r);
            if ((a && !*a) || (b && !*b)) return Value::boolean(false);
            if (!a || !b) return Value::null();
            return Value::boolean(true);
          }
          case sql::BinOp::Or: {
            auto a = tri(l), b = tri(r);
            if ((a && *a) || (b && *b)) return Value::boolean(true);
            if (!a || !b) return Value::null();
            return Value::boolean(false);
          }
          case sql::BinOp::Add:
          case sql::BinOp::Sub:
          case sql::BinOp::Mul: {
            if (l.is_null() || r.is_null()) return Value::null();
            if (l.kind() == Value::Kind::Int64 && r.kind() == Value::Kind::Int64) {
              int64_t a = l.as_int64(), b = r.as_int64();
              return Value::int64(e.op == sql::BinOp::Add   ? a + b
                                  : e.op == sql::BinOp::Sub ? a - b
                                                            : a * b);
            }
            double a = l.numeric_value(), b = r.numeric_value();
            return Value::float64(e.op == sql::BinOp::Add   ? a + b
                                  : e.op == sql::BinOp::Sub ? a - b
                                                            : a * b);
          }
          case sql::BinOp::Div: {
            if (l.is_null() || r.is_null()) return Value::null();
            return Value::float64(l.numeric_value() / r.numeric_value());
          }
          default: {
            Ordering ord = compare(l, r);
            if (ord == Ordering::Unknown) return Value::null();
            bool out = false;
            switch (e.op) {
              case sql::BinOp::Eq: out = ord == Ordering::Equal; break;
              case sql::BinOp::Ne: out = ord != Ordering::Equal; break;
              case sql::BinOp::Lt: out = ord == Ordering::Less; break;
              case sql::BinOp::Le: out = ord != Ordering::Greater; break;
              case sql::BinOp::Gt: out = ord == Ordering::Greater; break;
              default: out = ord != Ordering::Less; break;
            }
            return Value::boolean(out);
          }
        }
      }
      case sql::Expr::Kind::In: {
        Value subject = eval(*e.subject, s, row);
        bool any_true = false, any_unknown = subject.is_null();
        for (const auto& item : e.in_items) {
          Value v = eval(*item, s, row);
          if (subject.is_null() || v.is_null()) {
            any_unknown = true;
            continue;
          }
          Ordering ord = compare(subject, v);
          if (ord == Ordering::Equal) any_true = true;
          if (ord == Ordering::Unknown) any_unknown = true;
        }
        if (any_true) return Value::boolean(!e.negated);
        if (any_unknown) return Value::null();
        return Value::boolean(e.negated);
      }
      case sql::Expr::Kind::Not: {
        auto t = tri(eval(*e.child, s, row));
        return t ? Value::boolean(!*t) : Value::null();
      }
      case sql::Expr::Kind::Aggregate:
        throw Error(ErrorKind::Plan, "oracle: aggregate outside group context");
    }
    throw Error(ErrorKind::Plan, "oracle: bad expression");
  }

  static std::optional<bool> tri(const Value& v) {
    if (v.is_null()) return std::nullopt;
    return v.as_bool();
  }

  // Aggregate over a set of source rows, with the engine's null rules.
  Value eval_agg(const sql::Expr& agg, const Scope& s,
                 const std::vector<Row>& rows) const {
    if (agg.agg == sql::AggFunc::Count && agg.arg == nullptr)
      return Value::int64(static_cast<int64_t>(rows.size()));
    int64_t count = 0, sum_i = 0;
    double sum_d = 0;
    bool saw_float = false, saw = false;
    Value extreme = Value::null();
    std::set<std::string> distinct;
    for (const Row& r : rows) {
      Value v = eval(*agg.arg, s, r);
      if (v.is_null()) continue;
      saw = true;
      switch (agg.agg) {
        case sql::AggFunc::Count:
          if (agg.distinct) {
            std::string key;
            encode_group_key(v, key);
            distinct.insert(std::move(key));
          } else {
            ++count;
          }
          break;
        case sql::AggFunc::Sum:
        case sql::AggFunc::Avg:
          if (v.kind() == Value::Kind::Float64) saw_float = true;
          if (v.kind() == Value::Kind::Int64) sum_i += v.as_int64();
          sum_d += v.numeric_value();
          ++count;
          break;
        case sql::AggFunc::Min:
        case sql::AggFunc::Max: {
          if (extreme.is_null()) {
            extreme = v;
          } else {
            Ordering ord = compare(v, extreme);
            if (agg.agg == sql::AggFunc::Min ? ord == Ordering::Less
                                             : ord == Ordering::Greater)
              extreme = v;
          }
          break;
        }
      }
    }
    switch (agg.agg) {
      case sql::AggFunc::Count:
        return agg.distinct ? Value::int64(static_cast<int64_t>(distinct.size()))
                            : Value::int64(count);
      case sql::AggFunc::Sum:
        if (!saw) return Value::null();
        return saw_float ? Value::float64(sum_d) : Value::int64(sum_i);
      case sql::AggFunc::Avg:
        if (!saw) return Value::null();
        return Value::float64(sum_d / static_cast<double>(count));
      default:
        return extreme;
    }
  }

  // Evaluate an output expression in group context: aggregates over the
  // group's rows, everything else over its first row.
  Value eval_grouped(const sql::Expr& e, const Scope& s,
                     const std::vector<Row>& rows) const {
    switch (e.kind) {
      case sql::Expr::Kind::Aggregate:
        return eval_agg(e, s, rows);
      case sql::Expr::Kind::Binary: {
        if (e.op == sql::BinOp::And || e.op == sql::BinOp::Or) {
          Value l = eval_grouped(*e.left, s, rows);
          Value r = eval_grouped(*e.right, s, rows);
          auto a = tri(l), b = tri(r);
          if (e.op == sql::BinOp::And) {
            if ((a && !*a) || (b && !*b)) return Value::boolean(false);
            if (!a || !b) return Value::null();
            return Value::boolean(true);
          }
          if ((a && *a) || (b && *b)) return Value::boolean(true);
          if (!a || !b) return Value::null();
          return Value::boolean(false);
        }
        Value l = eval_grouped(*e.left, s, rows);
        Value r = eval_grouped(*e.right, s, rows);
        // Reuse scalar logic by wrapping the two values as literals.
        sql::Expr synth;
        synth.kind = sql::Expr::Kind::Binary;
        synth.op = e.op;
        synth.left = sql::Expr::lit(l);
        synth.right = sql::Expr::lit(r);
        return eval(synth, s, rows.front());
      }
      default:
        return eval(e, s, rows.front());
    }
  }

  const Fixture* f_;
};

inline std::vector<Row> Naive::run(const sql::Query& q) const {
  Scope scope;
  size_t width = 0;
  for (const auto& entry : q.from) {
    const OracleTable* t = f_->reference(entry.table.table);
    if (t == nullptr) throw Error(ErrorKind::Plan, "oracle: no table " + entry.table.table);
    scope.bindings.push_back(entry.table.binding_name());
    scope.tables.push_back(t);
    scope.offsets.push_back(width);
    width += t->columns.size();
  }

  // Cross product, filtered by WHERE and all ON conditions.
  std::vector<Row> source;
  std::vector<size_t> idx(q.from.size(), 0);
  bool more = !q.from.empty();
  while (more) {
    Row row;
    for (size_t b = 0; b < q.from.size(); ++b) {
      const Row& part = scope.tables[b]->rows[idx[b]];
      row.insert(row.end(), part.begin(), part.end());
    }
    bool keep = true;
    auto apply = [&](const sql::Expr& cond) {
      auto t = tri(eval(cond, scope, row));
      if (!t || !*t) keep = false;
    };
    for (const auto& entry : q.from)
      if (entry.on && keep) apply(*entry.on);
    if (q.where && keep) apply(*q.where);
    if (keep) source.push_back(std::move(row));

    // Advance the cross-product odometer (last table fastest).
    size_t b = q.from.size();
    more = false;
    while (b > 0) {
      --b;
      if (++idx[b] < scope.tables[b]->rows.size()) {
        more = true;
        break;
      }
      idx[b] = 0;
    }
  }

  bool has_agg = false;
  {
    std::vector<const sql::Expr*> stack;
    for (const auto& item : q.select)
      if (item.expr) stack.push_back(item.expr.get());
    if (q.having) stack.push_back(q.having.get());
    for (const auto& o : q.order_by) stack.push_back(o.expr.get());
    while (!stack.empty()) {
      const sql::Expr* e = stack.back();
      stack.pop_back();
      if (e->kind == sql::Expr::Kind::Aggregate) has_agg = true;
      if (e->left) stack.push_back(e->left.get());
      if (e->right) stack.push_back(e->right.get());
      if (e->subject) stack.push_back(e->subject.get());
      for (const auto& it : e->in_items) stack.push_back(it.get());
      if (e->child) stack.push_back(e->child.get());
    }
  }
  bool grouped = !q.group_by.empty() || has_agg;

  // Produce (sort-key, output-row) pairs.
  struct Out {
    Row keys;
    Row row;
  };
  std::vector<Out> outs;

  auto order_expr = [&](const sql::OrderItem& o) -> const sql::Expr* {
    // An unqualified name may be a SELECT alias.
    if (o.expr->kind == sql::Expr::Kind::ColumnRef && o.expr->qualifier.empty()) {
      bool resolvable = true;
      try {
        resolve(scope, "", o.expr->column);
      } catch (const Error&) {
        resolvable = false;
      }
      if (!resolvable) {
        for (const auto& item : q.select)
          if (item.alias == o.expr->column && item.expr) return item.expr.get();
      }
    }
    return o.expr.get();
  };

  auto project_row = [&](const std::vector<Row>& rows) {
    Row out;
    for (const auto& item : q.select) {
      if (item.star) {
        for (const Value& v : rows.front()) out.push_back(v);
        continue;
      }
      out.push_back(grouped ? eval_grouped(*item.expr, scope, rows)
                            : eval(*item.expr, scope, rows.front()));
    }
    return out;
  };
  auto sort_keys_row = [&](const std::vector<Row>& rows) {
    Row keys;
    for (const auto& o : q.order_by) {
      const sql::Expr* e = order_expr(o);
      keys.push_back(grouped ? eval_grouped(*e, scope, rows)
                             : eval(*e, scope, rows.front()));
    }
    return keys;
  };

  if (grouped) {
    std::map<std::string, size_t> index;
    std::vector<std::vector<Row>> groups;
    std::vector<Row> keyrows;
    for (const Row& row : source) {
      Row keys;
      for (const auto& g : q.group_by) keys.push_back(eval(*g, scope, row));
      std::string key = encode_group_key(keys);
      auto it = index.find(key);
      size_t gi;
      if (it == index.end()) {
        gi = groups.size();
        index.emplace(key, gi);
        groups.emplace_back();
      } else {
        gi = it->second;
      }
      groups[gi].push_back(row);
    }
    if (q.group_by.empty() && groups.empty()) groups.emplace_back();  // global
    for (auto& rows : groups) {
      if (rows.empty()) {
        // Global aggregate over no rows: aggregates of an empty input.
        std::vector<Row> none;
        Row out;
        for (const auto& item : q.select)
          out.push_back(item.expr->kind == sql::Expr::Kind::Aggregate
                            ? eval_agg(*item.expr, scope, none)
                            : Value::null());
        outs.push_back({Row{}, std::move(out)});
        continue;
      }
      bool keep = true;
      if (q.having) {
        auto t = tri(eval_grouped(*q.having, scope, rows));
        keep = t && *t;
      }
      if (!keep) continue;
      outs.push_back({sort_keys_row(rows), project_row(rows)});
    }
  } else {
    for (const Row& row : source) {
      std::vector<Row> one = {row};
      outs.push_back({sort_keys_row(one), project_row(one)});
    }
  }

  if (!q.order_by.empty()) {
    std::stable_sort(outs.begin(), outs.end(), [&](const Out& a, const Out& b) {
      for (size_t i = 0; i < q.order_by.size(); ++i) {
        bool asc = q.order_by[i].ascending;
        if (sort_before(a.keys[i], b.keys[i], asc)) return true;
        if (sort_before(b.keys[i], a.keys[i], asc)) return false;
      }
      return false;
    });
  }

  std::vector<Row> result;
  std::set<std::string> seen;
  for (auto& o : outs) {
    if (q.distinct && !seen.insert(encode_group_key(o.row)).second) continue;
    result.push_back(std::move(o.row));
  }
  if (q.limit && static_cast<int64_t>(result.size()) > *q.limit)
    result.resize(static_cast<size_t>(*q.limit));
  return result;
}

// ---- comparison helpers ----

inline std::string row_text(const Row& r) {
  std::string s;
  for (const auto& v : r) {
    s += v.to_sql_text();
    s += "|";
  }
  return s;
}

inline std::vector<std::string> row_multiset(const std::vector<Row>& rows) {
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(row_text(r));
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::string> row_sequence(const std::vector<Row>& rows) {
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(row_text(r));
  return out;
}

}  // namespace qfix
