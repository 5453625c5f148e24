#include <cctype>

#include "polyqe/sql/parser.hpp"

namespace pqe::sql {

namespace {

bool needs_quoting(const std::string& ident) {
  if (ident.empty()) return true;
  if (!(std::islower(static_cast<unsigned char>(ident[0])) || ident[0] == '_')) return true;
  for (char c : ident) {
    if (!(std::islower(static_cast<unsigned char>(c)) ||
          std::isdigit(static_cast<unsigned char>(c)) || c == '_'))
      return true;
  }
  static const char* kReserved[] = {"select", "from",  "where", "group",   "by",     "having",
                                    "order",  "limit", "join",  "on",      "as",     "and",
                                    "or",     "not",   "in",    "distinct", "create", "alter",
                                    "drop",   "table", "view",  "import",  "into",   "refresh",
                                    "explain", "null", "true",  "false",   "inner",  "asc",
                                    "desc",   "union"};
  for (const char* r : kReserved)
    if (ident == r) return true;
  return false;
}

void render_ident(const std::string& ident, std::string& out) {
  if (!needs_quoting(ident)) {
    out += ident;
    return;
  }
  out.push_back('"');
  for (char c : ident) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

void render_qualified(const QualifiedName& n, std::string& out) {
  if (!n.schema.empty()) {
    render_ident(n.schema, out);
    out.push_back('.');
  }
  render_ident(n.name, out);
}

const char* binop_text(BinOp op) {
  switch (op) {
    case BinOp::Eq: return "=";
    case BinOp::Ne: return "<>";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::And: return "AND";
    case BinOp::Or: return "OR";
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
  }
  return "?";
}

int precedence(BinOp op) {
  switch (op) {
    case BinOp::Or: return 1;
    case BinOp::And: return 2;
    case BinOp::Eq:
    case BinOp::Ne:
    case BinOp::Lt:
    case BinOp::Le:
    case BinOp::Gt:
    case BinOp::Ge: return 4;
    case BinOp::Add:
    case BinOp::Sub: return 5;
    case BinOp::Mul:
    case BinOp::Div: return 6;
  }
  return 0;
}

void render_literal(const Value& v, std::string& out) {
  // Keep a Float64 literal re-parseable as Float64.
  if (v.kind() == Value::Kind::Float64) {
    std::string s = render_double(v.as_float64());
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("Inf") == std::string::npos && s.find("NaN") == std::string::npos)
      s += ".0";
    out += s;
    return;
  }
  out += v.to_sql_text();
}

void render_expr_prec(const Expr& e, int parent_prec, std::string& out);

void render_operand(const Expr& e, int prec, std::string& out) {
  render_expr_prec(e, prec, out);
}

void render_expr_prec(const Expr& e, int parent_prec, std::string& out) {
  switch (e.kind) {
    case Expr::Kind::ColumnRef:
      if (!e.qualifier.empty()) {
        render_ident(e.qualifier, out);
        out.push_back('.');
      }
      render_ident(e.column, out);
      return;
    case Expr::Kind::Literal:
      render_literal(e.literal, out);
      return;
    case Expr::Kind::Binary: {
      int prec = precedence(e.op);
      bool comparison = prec == 4;  // comparisons don't chain in the grammar
      bool parens = prec < parent_prec;
      if (parens) out.push_back('(');
      render_operand(*e.left, comparison ? prec + 1 : prec, out);
      out.push_back(' ');
      out += binop_text(e.op);
      out.push_back(' ');
      render_operand(*e.right, prec + 1, out);
      if (parens) out.push_back(')');
      return;
    }
    case Expr::Kind::In: {
      const int prec = 4;
      bool parens = prec < parent_prec;
      if (parens) out.push_back('(');
      render_operand(*e.subject, prec + 1, out);
      out += e.negated ? " NOT IN (" : " IN (";
      for (size_t i = 0; i < e.in_items.size(); ++i) {
        if (i) out += ", ";
        render_expr_prec(*e.in_items[i], 0, out);
      }
      out.push_back(')');
      if (parens) out.push_back(')');
      return;
    }
    case Expr::Kind::Not: {
      const int prec = 3;
      bool parens = prec < parent_prec;
      if (parens) out.push_back('(');
      out += "NOT ";
      render_operand(*e.child, prec, out);
      if (parens) out.push_back(')');
      return;
    }
    case Expr::Kind::Aggregate: {
      switch (e.agg) {
        case AggFunc::Count: out += "COUNT("; break;
        case AggFunc::Sum: out += "SUM("; break;
        case AggFunc::Avg: out += "AVG("; break;
        case AggFunc::Min: out += "MIN("; break;
        case AggFunc::Max: out += "MAX("; break;
      }
      if (e.arg == nullptr) {
        out += "*";
      } else {
        if (e.distinct) out += "DISTINCT ";
        render_expr_prec(*e.arg, 0, out);
      }
      out.push_back(')');
      return;
    }
  }
}

void render_options(const std::vector<std::pair<std::string, std::string>>& opts,
                    std::string& out) {
  out += "OPTIONS (";
  for (size_t i = 0; i < opts.size(); ++i) {
    if (i) out += ", ";
    render_ident(opts[i].first, out);
    out += " '";
    for (char c : opts[i].second) {
      if (c == '\'') out.push_back('\'');
      out.push_back(c);
    }
    out.push_back('\'');
  }
  out.push_back(')');
}

void render_query(const Query& q, std::string& out) {
  out += "SELECT ";
  if (q.distinct) out += "DISTINCT ";
  for (size_t i = 0; i < q.select.size(); ++i) {
    if (i) out += ", ";
    const SelectItem& item = q.select[i];
    if (item.star) {
      if (!item.star_qualifier.empty()) {
        render_ident(item.star_qualifier, out);
        out.push_back('.');
      }
      out.push_back('*');
    } else {
      render_expr_prec(*item.expr, 0, out);
      if (!item.alias.empty()) {
        out += " AS ";
        render_ident(item.alias, out);
      }
    }
  }
  for (size_t i = 0; i < q.from.size(); ++i) {
    const FromEntry& entry = q.from[i];
    if (i == 0) {
      out += " FROM ";
    } else if (entry.explicit_join) {
      out += " JOIN ";
    } else {
      out += ", ";
    }
    QualifiedName n{entry.table.schema, entry.table.table};
    render_qualified(n, out);
    if (!entry.table.alias.empty()) {
      out += " AS ";
      render_ident(entry.table.alias, out);
    }
    if (entry.explicit_join) {
      out += " ON ";
      render_expr_prec(*entry.on, 0, out);
    }
  }
  if (q.where) {
    out += " WHERE ";
    render_expr_prec(*q.where, 0, out);
  }
  if (!q.group_by.empty()) {
    out += " GROUP BY ";
    for (size_t i = 0; i < q.group_by.size(); ++i) {
      if (i) out += ", ";
      render_expr_prec(*q.group_by[i], 0, out);
    }
  }
  if (q.having) {
    out += " HAVING ";
    render_expr_prec(*q.having, 0, out);
  }
  if (!q.order_by.empty()) {
    out += " ORDER BY ";
    for (size_t i = 0; i < q.order_by.size(); ++i) {
      if (i) out += ", ";
      render_expr_prec(*q.order_by[i].expr, 0, out);
      if (!q.order_by[i].ascending) out += " DESC";
    }
  }
  if (q.limit) {
    out += " LIMIT ";
    out += render_int64(*q.limit);
  }
}

void type_spelling(ScalarType t, std::string& out) { out += scalar_type_name(t); }

struct StatementRenderer {
  std::string out;

  void operator()(const SelectStmt& s) { render_query(s.query, out); }

  void operator()(const CreateForeignTableStmt& s) {
    out += "CREATE FOREIGN TABLE ";
    render_qualified(s.name, out);
    out += " (";
    for (size_t i = 0; i < s.columns.size(); ++i) {
      if (i) out += ", ";
      render_ident(s.columns[i].name, out);
      out.push_back(' ');
      type_spelling(s.columns[i].type, out);
      if (!s.columns[i].options.empty()) {
        out.push_back(' ');
        render_options(s.columns[i].options, out);
      }
    }
    out += ") SERVER ";
    render_ident(s.server, out);
    if (!s.options.empty()) {
      out.push_back(' ');
      render_options(s.options, out);
    }
  }

  void operator()(const AlterForeignTableStmt& s) {
    out += "ALTER FOREIGN TABLE ";
    render_qualified(s.name, out);
    out.push_back(' ');
    for (size_t i = 0; i < s.actions.size(); ++i) {
      if (i) out += ", ";
      const AlterAction& a = s.actions[i];
      switch (a.kind) {
        case AlterAction::Kind::SetColumnOptions:
          out += "ALTER COLUMN ";
          render_ident(a.column, out);
          out.push_back(' ');
          render_options(a.options, out);
          break;
        case AlterAction::Kind::SetColumnType:
          out += "ALTER COLUMN ";
          render_ident(a.column, out);
          out += " TYPE ";
          type_spelling(a.type, out);
          break;
        case AlterAction::Kind::AddColumn:
          out += "ADD COLUMN ";
          render_ident(a.add.name, out);
          out.push_back(' ');
          type_spelling(a.add.type, out);
          if (!a.add.options.empty()) {
            out.push_back(' ');
            render_options(a.add.options, out);
          }
          break;
      }
    }
  }

  void operator()(const DropForeignTableStmt& s) {
    out += "DROP FOREIGN TABLE ";
    render_qualified(s.name, out);
  }

  void operator()(const ImportForeignSchemaStmt& s) {
    out += "IMPORT FOREIGN SCHEMA";
    if (!s.remote_schema.empty()) {
      out.push_back(' ');
      render_ident(s.remote_schema, out);
    }
    out += " FROM SERVER ";
    render_ident(s.server, out);
    if (!s.into_schema.empty()) {
      out += " INTO ";
      render_ident(s.into_schema, out);
    }
    if (!s.options.empty()) {
      out.push_back(' ');
      render_options(s.options, out);
    }
  }

  void operator()(const CreateMatViewStmt& s) {
    out += "CREATE MATERIALIZED VIEW ";
    render_ident(s.name, out);
    out += " AS ";
    render_query(s.query, out);
    if (s.refresh_every_secs) {
      out += " REFRESH EVERY ";
      out += render_int64(*s.refresh_every_secs);
      out += " SECONDS";
    }
  }

  void operator()(const RefreshMatViewStmt& s) {
    out += "REFRESH MATERIALIZED VIEW ";
    render_ident(s.name, out);
  }

  void operator()(const ExplainStmt& s) {
    out += "EXPLAIN ";
    render_query(s.query, out);
  }
};

}  // namespace

std::string render(const Statement& stmt) {
  StatementRenderer r;
  std::visit(r, stmt);
  return std::move(r.out);
}

std::string render(const Query& q) {
  std::string out;
  render_query(q, out);
  return out;
}

std::string render_expr(const Expr& e) {
  std::string out;
  render_expr_prec(e, 0, out);
  return out;
}

// ---- structural equality ----

bool expr_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Expr::Kind::ColumnRef: return a.qualifier == b.qualifier && a.column == b.column;
    case Expr::Kind::Literal: return a.literal == b.literal;
    case Expr::Kind::Binary:
      return a.op == b.op && expr_equal(*a.left, *b.left) && expr_equal(*a.right, *b.right);
    case Expr::Kind::In: {
      if (a.negated != b.negated || a.in_items.size() != b.in_items.size()) return false;
      if (!expr_equal(*a.subject, *b.subject)) return false;
      for (size_t i = 0; i < a.in_items.size(); ++i)
        if (!expr_equal(*a.in_items[i], *b.in_items[i])) return false;
      return true;
    }
    case Expr::Kind::Not: return expr_equal(*a.child, *b.child);
    case Expr::Kind::Aggregate: {
      if (a.agg != b.agg || a.distinct != b.distinct) return false;
      if ((a.arg == nullptr) != (b.arg == nullptr)) return false;
      return a.arg == nullptr || expr_equal(*a.arg, *b.arg);
    }
  }
  return false;
}

static bool expr_ptr_equal(const ExprPtr& a, const ExprPtr& b) {
  if ((a == nullptr) != (b == nullptr)) return false;
  return a == nullptr || expr_equal(*a, *b);
}

bool query_equal(const Query& a, const Query& b) {
  if (a.distinct != b.distinct || a.select.size() != b.select.size() ||
      a.from.size() != b.from.size() || a.group_by.size() != b.group_by.size() ||
      a.order_by.size() != b.order_by.size() || a.limit != b.limit)
    return false;
  for (size_t i = 0; i < a.select.size(); ++i) {
    const auto& x = a.select[i];
    const auto& y = b.select[i];
    if (x.star != y.star || x.star_qualifier != y.star_qualifier || x.alias != y.alias)
      return false;
    if (!x.star && !expr_equal(*x.expr, *y.expr)) return false;
  }
  for (size_t i = 0; i < a.from.size(); ++i) {
    const auto& x = a.from[i];
    const auto& y = b.from[i];
    if (x.table.schema != y.table.schema || x.table.table != y.table.table ||
        x.table.alias != y.table.alias || x.explicit_join != y.explicit_join)
      return false;
    if (x.explicit_join && !expr_equal(*x.on, *y.on)) return false;
  }
  if (!expr_ptr_equal(a.where, b.where) || !expr_ptr_equal(a.having, b.having)) return false;
  for (size_t i = 0; i < a.group_by.size(); ++i)
    if (!expr_equal(*a.group_by[i], *b.group_by[i])) return false;
  for (size_t i = 0; i < a.order_by.size(); ++i) {
    if (a.order_by[i].ascending != b.order_by[i].ascending) return false;
    if (!expr_equal(*a.order_by[i].expr, *b.order_by[i].expr)) return false;
  }
  return true;
}

namespace {

bool options_equal(const std::vector<std::pair<std::string, std::string>>& a,
                   const std::vector<std::pair<std::string, std::string>>& b) {
  return a == b;
}

struct StatementEq {
  const Statement& rhs;

  bool operator()(const SelectStmt& a) const {
    auto* b = std::get_if<SelectStmt>(&rhs);
    return b && query_equal(a.query, b->query);
  }
  bool operator()(const CreateForeignTableStmt& a) const {
    auto* b = std::get_if<CreateForeignTableStmt>(&rhs);
    if (!b || a.name.schema != b->name.schema || a.name.name != b->name.name ||
        a.server != b->server || !options_equal(a.options, b->options) ||
        a.columns.size() != b->columns.size())
      return false;
    for (size_t i = 0; i < a.columns.size(); ++i) {
      if (a.columns[i].name != b->columns[i].name || a.columns[i].type != b->columns[i].type ||
          !options_equal(a.columns[i].options, b->columns[i].options))
        return false;
    }
    return true;
  }
  bool operator()(const AlterForeignTableStmt& a) const {
    auto* b = std::get_if<AlterForeignTableStmt>(&rhs);
    if (!b || a.name.schema != b->name.schema || a.name.name != b->name.name ||
        a.actions.size() != b->actions.size())
      return false;
    for (size_t i = 0; i < a.actions.size(); ++i) {
      const auto& x = a.actions[i];
      const auto& y = b->actions[i];
      if (x.kind != y.kind || x.column != y.column) return false;
      switch (x.kind) {
        case AlterAction::Kind::SetColumnOptions:
          if (!options_equal(x.options, y.options)) return false;
          break;
        case AlterAction::Kind::SetColumnType:
          if (x.type != y.type) return false;
          break;
        case AlterAction::Kind::AddColumn:
          if (x.add.name != y.add.name || x.add.type != y.add.type ||
              !options_equal(x.add.options, y.add.options))
            return false;
          break;
      }
    }
    return true;
  }
  bool operator()(const DropForeignTableStmt& a) const {
    auto* b = std::get_if<DropForeignTableStmt>(&rhs);
    return b && a.name.schema == b->name.schema && a.name.name == b->name.name;
  }
  bool operator()(const ImportForeignSchemaStmt& a) const {
    auto* b = std::get_if<ImportForeignSchemaStmt>(&rhs);
    return b && a.remote_schema == b->remote_schema && a.server == b->server &&
           a.into_schema == b->into_schema && options_equal(a.options, b->options);
  }
  bool operator()(const CreateMatViewStmt& a) const {
    auto* b = std::get_if<CreateMatViewStmt>(&rhs);
    return b && a.name == b->name && a.refresh_every_secs == b->refresh_every_secs &&
           query_equal(a.query, b->query);
  }
  bool operator()(const RefreshMatViewStmt& a) const {
    auto* b = std::get_if<RefreshMatViewStmt>(&rhs);
    return b && a.name == b->name;
  }
  bool operator()(const ExplainStmt& a) const {
    auto* b = std::get_if<ExplainStmt>(&rhs);
    return b && query_equal(a.query, b->query);
  }
};

}  // namespace

bool statement_equal(const Statement& a, const Statement& b) {
  return std::visit(StatementEq{b}, a);
}

}  // namespace pqe::sql
