#include "polyqe/sql/parser.hpp"

#include <algorithm>
#include <unordered_set>

#include "polyqe/sql/lexer.hpp"

namespace pqe::sql {

namespace {

const std::unordered_set<std::string>& reserved_words() {
  static const std::unordered_set<std::string> kReserved = {
      "select", "from",  "where",    "group", "by",   "having", "order",   "limit",
      "join",   "on",    "as",       "and",   "or",   "not",    "in",      "distinct",
      "create", "alter", "drop",     "table", "view", "import", "into",    "refresh",
      "explain", "null", "true",     "false", "inner", "asc",   "desc",    "union",
  };
  return kReserved;
}

bool is_reserved(const std::string& word) { return reserved_words().count(word) > 0; }

class Parser {
 public:
  explicit Parser(const std::string& sql) : tokens_(lex(sql)) {}

  std::vector<Statement> parse_all() {
    std::vector<Statement> out;
    while (!at_end()) {
      if (accept_symbol(";")) continue;
      out.push_back(parse_statement());
      if (!at_end() && !accept_symbol(";"))
        fail("expected ';' or end of input");
    }
    return out;
  }

 private:
  std::vector<Token> tokens_;
  size_t pos_ = 0;

  const Token& cur() const { return tokens_[pos_]; }
  bool at_end() const { return cur().kind == TokenKind::End; }

  [[noreturn]] void fail(const std::string& what) const {
    const Token& t = cur();
    std::string tok = t.kind == TokenKind::End ? "end of input" : "'" + t.text + "'";
    throw ParseError(what + " near " + tok, t.line, t.column);
  }

  bool peek_kw(std::string_view word, size_t ahead = 0) const {
    const Token& t = tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
    return t.kind == TokenKind::Ident && t.text == word;
  }

  bool accept_kw(std::string_view word) {
    if (peek_kw(word)) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect_kw(std::string_view word) {
    if (!accept_kw(word)) fail("expected " + std::string(word));
  }

  bool accept_symbol(std::string_view s) {
    if (cur().is_symbol(s)) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect_symbol(std::string_view s) {
    if (!accept_symbol(s)) fail("expected '" + std::string(s) + "'");
  }

  // Identifier; reserved-word misuse is reported distinctly.
  std::string identifier(const char* what) {
    if (cur().kind == TokenKind::QuotedIdent) {
      return tokens_[pos_++].text;
    }
    if (cur().kind == TokenKind::Ident) {
      if (is_reserved(cur().text))
        fail("reserved word '" + cur().text + "' used as " + what +
             " (double-quote it to use it as an identifier)");
      return tokens_[pos_++].text;
    }
    fail(std::string("expected ") + what);
  }

  QualifiedName qualified_name(const char* what) {
    QualifiedName n;
    n.name = identifier(what);
    if (accept_symbol(".")) {
      n.schema = std::move(n.name);
      n.name = identifier(what);
    }
    return n;
  }

  // ---- statements ----

  Statement parse_statement() {
    if (peek_kw("select")) return SelectStmt{parse_query()};
    if (peek_kw("explain")) {
      ++pos_;
      return ExplainStmt{parse_query()};
    }
    if (peek_kw("create")) {
      if (peek_kw("materialized", 1)) return parse_create_matview();
      return parse_create_foreign_table();
    }
    if (peek_kw("alter")) return parse_alter_foreign_table();
    if (peek_kw("drop")) {
      ++pos_;
      expect_kw("foreign");
      expect_kw("table");
      return DropForeignTableStmt{qualified_name("table name")};
    }
    if (peek_kw("import")) return parse_import();
    if (peek_kw("refresh")) {
      ++pos_;
      expect_kw("materialized");
      expect_kw("view");
      return RefreshMatViewStmt{identifier("view name")};
    }
    fail("expected a statement");
  }

  std::vector<std::pair<std::string, std::string>> options_list() {
    std::vector<std::pair<std::string, std::string>> opts;
    expect_symbol("(");
    while (true) {
      std::string name = identifier("option name");
      if (cur().kind != TokenKind::String) fail("expected string value for option " + name);
      std::string value = tokens_[pos_++].text;
      opts.emplace_back(std::move(name), std::move(value));
      if (accept_symbol(",")) continue;
      expect_symbol(")");
      break;
    }
    return opts;
  }

  ScalarType type_name() {
    if (cur().kind != TokenKind::Ident) fail("expected a type name");
    std::string first = tokens_[pos_++].text;
    // Multi-word spellings from the DDL dialect.
    if (first == "double" && peek_kw("precision")) {
      ++pos_;
      first = "double precision";
    } else if (first == "timestamp" && peek_kw("without")) {
      ++pos_;
      expect_kw("time");
      expect_kw("zone");
      first = "timestamp without time zone";
    }
    auto t = scalar_type_from_name(first);
    if (!t) fail("unknown type name '" + first + "'");
    return *t;
  }

  Statement parse_create_foreign_table() {
    expect_kw("create");
    expect_kw("foreign");
    expect_kw("table");
    CreateForeignTableStmt stmt;
    stmt.name = qualified_name("table name");
    expect_symbol("(");
    while (true) {
      ColumnDefAst col;
      col.name = identifier("column name");
      col.type = type_name();
      if (accept_kw("options")) col.options = options_list();
      stmt.columns.push_back(std::move(col));
      if (accept_symbol(",")) continue;
      expect_symbol(")");
      break;
    }
    expect_kw("server");
    stmt.server = identifier("server name");
    if (accept_kw("options")) stmt.options = options_list();
    return stmt;
  }

  Statement parse_alter_foreign_table() {
    expect_kw("alter");
    expect_kw("foreign");
    expect_kw("table");
    AlterForeignTableStmt stmt;
    stmt.name = qualified_name("table name");
    while (true) {
      AlterAction action;
      if (accept_kw("add")) {
        expect_kw("column");
        action.kind = AlterAction::Kind::AddColumn;
        action.add.name = identifier("column name");
        action.add.type = type_name();
        if (accept_kw("options")) action.add.options = options_list();
      } else {
        expect_kw("alter");
        expect_kw("column");
        action.column = identifier("column name");
        if (accept_kw("type")) {
          action.kind = AlterAction::Kind::SetColumnType;
          action.type = type_name();
        } else if (accept_kw("options")) {
          action.kind = AlterAction::Kind::SetColumnOptions;
          action.options = options_list();
        } else {
          fail("expected TYPE or OPTIONS");
        }
      }
      stmt.actions.push_back(std::move(action));
      if (!accept_symbol(",")) break;
    }
    return stmt;
  }

  Statement parse_import() {
    expect_kw("import");
    expect_kw("foreign");
    expect_kw("schema");
    ImportForeignSchemaStmt stmt;
    if (cur().kind == TokenKind::Ident && !peek_kw("from")) stmt.remote_schema = identifier("schema name");
    else if (cur().kind == TokenKind::QuotedIdent) stmt.remote_schema = identifier("schema name");
    expect_kw("from");
    expect_kw("server");
    stmt.server = identifier("server name");
    if (accept_kw("into")) stmt.into_schema = identifier("schema name");
    if (accept_kw("options")) stmt.options = options_list();
    return stmt;
  }

  Statement parse_create_matview() {
    expect_kw("create");
    expect_kw("materialized");
    expect_kw("view");
    CreateMatViewStmt stmt;
    stmt.name = identifier("view name");
    expect_kw("as");
    stmt.query = parse_query();
    if (accept_kw("refresh")) {
      expect_kw("every");
      if (cur().kind != TokenKind::Number) fail("expected an interval in seconds");
      stmt.refresh_every_secs = parse_int_token();
      expect_kw("seconds");
      if (*stmt.refresh_every_secs < 1) fail("refresh interval must be >= 1 second");
    }
    return stmt;
  }

  int64_t parse_int_token() {
    const std::string& text = cur().text;
    if (text.find('.') != std::string::npos || text.find('e') != std::string::npos ||
        text.find('E') != std::string::npos)
      fail("expected an integer");
    ++pos_;
    return std::stoll(text);
  }

  // ---- queries ----

  Query parse_query() {
    expect_kw("select");
    Query q;
    q.distinct = accept_kw("distinct");
    while (true) {
      SelectItem item;
      if (accept_symbol("*")) {
        item.star = true;
      } else if (cur().kind == TokenKind::Ident && !is_reserved(cur().text) &&
                 tokens_[pos_ + 1].is_symbol(".") && tokens_[pos_ + 2].is_symbol("*")) {
        item.star = true;
        item.star_qualifier = tokens_[pos_].text;
        pos_ += 3;
      } else {
        item.expr = parse_expr();
        if (accept_kw("as")) {
          item.alias = identifier("alias");
        } else if (cur().kind == TokenKind::Ident && !is_reserved(cur().text)) {
          item.alias = tokens_[pos_++].text;
        } else if (cur().kind == TokenKind::QuotedIdent) {
          item.alias = tokens_[pos_++].text;
        }
      }
      q.select.push_back(std::move(item));
      if (!accept_symbol(",")) break;
    }
    if (accept_kw("from")) {
      while (true) {
        FromEntry entry;
        entry.table = table_ref();
        entry.explicit_join = false;
        q.from.push_back(std::move(entry));
        // JOIN chain binds to the running left-deep tree.
        while (peek_kw("join") || peek_kw("inner")) {
          accept_kw("inner");
          expect_kw("join");
          FromEntry join;
          join.table = table_ref();
          join.explicit_join = true;
          expect_kw("on");
          join.on = parse_expr();
          q.from.push_back(std::move(join));
        }
        if (!accept_symbol(",")) break;
      }
    }
    if (accept_kw("where")) q.where = parse_expr();
    if (accept_kw("group")) {
      expect_kw("by");
      while (true) {
        q.group_by.push_back(parse_expr());
        if (!accept_symbol(",")) break;
      }
    }
    if (accept_kw("having")) {
      if (q.group_by.empty()) fail("HAVING requires GROUP BY");
      q.having = parse_expr();
    }
    if (accept_kw("order")) {
      expect_kw("by");
      while (true) {
        OrderItem item;
        item.expr = parse_expr();
        if (accept_kw("desc"))
          item.ascending = false;
        else
          accept_kw("asc");
        q.order_by.push_back(std::move(item));
        if (!accept_symbol(",")) break;
      }
    }
    if (accept_kw("limit")) {
      if (cur().kind != TokenKind::Number) fail("expected a limit count");
      q.limit = parse_int_token();
      if (*q.limit < 0) fail("LIMIT must be non-negative");
    }
    validate_query(q);
    return q;
  }

  TableRef table_ref() {
    TableRef ref;
    QualifiedName n = qualified_name("table name");
    ref.schema = std::move(n.schema);
    ref.table = std::move(n.name);
    if (accept_kw("as")) {
      ref.alias = identifier("alias");
    } else if (cur().kind == TokenKind::Ident && !is_reserved(cur().text)) {
      ref.alias = tokens_[pos_++].text;
    } else if (cur().kind == TokenKind::QuotedIdent) {
      ref.alias = tokens_[pos_++].text;
    }
    return ref;
  }

  static bool contains_aggregate(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Aggregate: return true;
      case Expr::Kind::Binary: return contains_aggregate(*e.left) || contains_aggregate(*e.right);
      case Expr::Kind::Not: return contains_aggregate(*e.child);
      case Expr::Kind::In: {
        if (contains_aggregate(*e.subject)) return true;
        for (const auto& i : e.in_items)
          if (contains_aggregate(*i)) return true;
        return false;
      }
      default: return false;
    }
  }

  static bool contains_plain_column(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::ColumnRef: return true;
      case Expr::Kind::Aggregate: return false;  // columns inside aggregates don't count
      case Expr::Kind::Binary: return contains_plain_column(*e.left) || contains_plain_column(*e.right);
      case Expr::Kind::Not: return contains_plain_column(*e.child);
      case Expr::Kind::In: {
        if (contains_plain_column(*e.subject)) return true;
        for (const auto& i : e.in_items)
          if (contains_plain_column(*i)) return true;
        return false;
      }
      default: return false;
    }
  }

  void validate_query(const Query& q) {
    bool any_agg = false, any_plain = false;
    for (const auto& item : q.select) {
      if (item.star) {
        any_plain = true;
        continue;
      }
      if (contains_aggregate(*item.expr)) any_agg = true;
      if (!contains_aggregate(*item.expr) && contains_plain_column(*item.expr)) any_plain = true;
    }
    if (any_agg && any_plain && q.group_by.empty())
      fail("mixing aggregates and plain columns requires GROUP BY");
  }

  // ---- expressions ----

  ExprPtr parse_expr() { return parse_or(); }

  ExprPtr parse_or() {
    ExprPtr e = parse_and();
    while (accept_kw("or")) e = Expr::binary(BinOp::Or, e, parse_and());
    return e;
  }

  ExprPtr parse_and() {
    ExprPtr e = parse_not();
    while (accept_kw("and")) e = Expr::binary(BinOp::And, e, parse_not());
    return e;
  }

  ExprPtr parse_not() {
    if (accept_kw("not")) return Expr::logical_not(parse_not());
    return parse_comparison();
  }

  ExprPtr parse_comparison() {
    ExprPtr e = parse_additive();
    if (accept_symbol("=")) return Expr::binary(BinOp::Eq, e, parse_additive());
    if (accept_symbol("<>")) return Expr::binary(BinOp::Ne, e, parse_additive());
    if (accept_symbol("<=")) return Expr::binary(BinOp::Le, e, parse_additive());
    if (accept_symbol(">=")) return Expr::binary(BinOp::Ge, e, parse_additive());
    if (accept_symbol("<")) return Expr::binary(BinOp::Lt, e, parse_additive());
    if (accept_symbol(">")) return Expr::binary(BinOp::Gt, e, parse_additive());
    bool negated = false;
    if (peek_kw("not") && peek_kw("in", 1)) {
      pos_ += 2;
      negated = true;
    } else if (accept_kw("in")) {
      negated = false;
    } else {
      return e;
    }
    expect_symbol("(");
    std::vector<ExprPtr> items;
    while (true) {
      items.push_back(parse_expr());
      if (!accept_symbol(",")) break;
    }
    expect_symbol(")");
    return Expr::in_list(e, std::move(items), negated);
  }

  ExprPtr parse_additive() {
    ExprPtr e = parse_multiplicative();
    while (true) {
      if (accept_symbol("+"))
        e = Expr::binary(BinOp::Add, e, parse_multiplicative());
      else if (accept_symbol("-"))
        e = Expr::binary(BinOp::Sub, e, parse_multiplicative());
      else
        break;
    }
    return e;
  }

  ExprPtr parse_multiplicative() {
    ExprPtr e = parse_unary();
    while (true) {
      if (accept_symbol("*"))
        e = Expr::binary(BinOp::Mul, e, parse_unary());
      else if (accept_symbol("/"))
        e = Expr::binary(BinOp::Div, e, parse_unary());
      else
        break;
    }
    return e;
  }

  ExprPtr parse_unary() {
    if (cur().is_symbol("-")) {
      // Fold a leading minus into a numeric literal.
      if (tokens_[pos_ + 1].kind == TokenKind::Number) {
        ++pos_;
        ExprPtr lit = number_literal();
        if (lit->literal.kind() == Value::Kind::Int64)
          lit->literal = Value::int64(-lit->literal.as_int64());
        else
          lit->literal = Value::float64(-lit->literal.as_float64());
        return lit;
      }
      ++pos_;
      ExprPtr zero = Expr::lit(Value::int64(0));
      return Expr::binary(BinOp::Sub, zero, parse_unary());
    }
    return parse_primary();
  }

  ExprPtr number_literal() {
    const std::string& text = cur().text;
    ++pos_;
    if (text.find('.') == std::string::npos && text.find('e') == std::string::npos &&
        text.find('E') == std::string::npos) {
      try {
        return Expr::lit(Value::int64(std::stoll(text)));
      } catch (const std::out_of_range&) {
        return Expr::lit(Value::float64(std::stod(text)));
      }
    }
    return Expr::lit(Value::float64(std::stod(text)));
  }

  static std::optional<AggFunc> agg_from_name(const std::string& name) {
    if (name == "count") return AggFunc::Count;
    if (name == "sum") return AggFunc::Sum;
    if (name == "avg") return AggFunc::Avg;
    if (name == "min") return AggFunc::Min;
    if (name == "max") return AggFunc::Max;
    return std::nullopt;
  }

  ExprPtr parse_primary() {
    if (cur().kind == TokenKind::Number) return number_literal();
    if (cur().kind == TokenKind::String) {
      ExprPtr e = Expr::lit(Value::text(cur().text));
      ++pos_;
      return e;
    }
    if (accept_kw("null")) return Expr::lit(Value::null());
    if (accept_kw("true")) return Expr::lit(Value::boolean(true));
    if (accept_kw("false")) return Expr::lit(Value::boolean(false));
    if (accept_symbol("(")) {
      ExprPtr e = parse_expr();
      expect_symbol(")");
      return e;
    }
    if (cur().kind == TokenKind::Ident || cur().kind == TokenKind::QuotedIdent) {
      // Aggregate call?
      if (cur().kind == TokenKind::Ident && tokens_[pos_ + 1].is_symbol("(")) {
        auto agg = agg_from_name(cur().text);
        if (agg) {
          ++pos_;
          expect_symbol("(");
          bool distinct = false;
          ExprPtr arg;
          if (*agg == AggFunc::Count && accept_symbol("*")) {
            arg = nullptr;
          } else {
            distinct = accept_kw("distinct");
            arg = parse_expr();
          }
          expect_symbol(")");
          if (distinct && *agg != AggFunc::Count)
            fail("DISTINCT is only supported in COUNT");
          return Expr::aggregate(*agg, arg, distinct);
        }
      }
      std::string first = identifier("column name");
      if (accept_symbol(".")) {
        std::string second = identifier("column name");
        return Expr::column_ref(std::move(first), std::move(second));
      }
      return Expr::column_ref("", std::move(first));
    }
    fail("expected an expression");
  }
};

}  // namespace

ExprPtr Expr::column_ref(std::string qualifier, std::string column) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::ColumnRef;
  e->qualifier = std::move(qualifier);
  e->column = std::move(column);
  return e;
}

ExprPtr Expr::lit(Value v) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Literal;
  e->literal = std::move(v);
  return e;
}

ExprPtr Expr::binary(BinOp op, ExprPtr l, ExprPtr r) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Binary;
  e->op = op;
  e->left = std::move(l);
  e->right = std::move(r);
  return e;
}

ExprPtr Expr::in_list(ExprPtr subject, std::vector<ExprPtr> items, bool negated) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::In;
  e->subject = std::move(subject);
  e->in_items = std::move(items);
  e->negated = negated;
  return e;
}

ExprPtr Expr::logical_not(ExprPtr c) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Not;
  e->child = std::move(c);
  return e;
}

ExprPtr Expr::aggregate(AggFunc f, ExprPtr arg, bool distinct) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Aggregate;
  e->agg = f;
  e->arg = std::move(arg);
  e->distinct = distinct;
  return e;
}

Statement parse(const std::string& sql) {
  Parser p(sql);
  auto stmts = p.parse_all();
  if (stmts.empty()) throw ParseError("empty statement", 1, 1);
  if (stmts.size() > 1)
    throw ParseError("expected a single statement, got " + std::to_string(stmts.size()), 1, 1);
  return std::move(stmts.front());
}

std::vector<Statement> parse_script(const std::string& sql) {
  Parser p(sql);
  return p.parse_all();
}

}  // namespace pqe::sql
