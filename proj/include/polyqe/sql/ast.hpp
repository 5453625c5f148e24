#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "polyqe/value.hpp"

namespace pqe::sql {

enum class BinOp { Eq, Ne, Lt, Le, Gt, Ge, And, Or, Add, Sub, Mul, Div };
enum class AggFunc { Count, Sum, Avg, Min, Max };

struct Expr;
using ExprPtr = std::shared_ptr<Expr>;

struct Expr {
  enum class Kind { ColumnRef, Literal, Binary, In, Not, Aggregate };

  Kind kind = Kind::Literal;

  // ColumnRef: optional table/alias qualifier.
  std::string qualifier;
  std::string column;

  // Literal
  Value literal;

  // Binary
  BinOp op = BinOp::Eq;
  ExprPtr left, right;

  // In: subject [NOT] IN (items...)
  ExprPtr subject;
  std::vector<ExprPtr> in_items;
  bool negated = false;

  // Not
  ExprPtr child;

  // Aggregate: arg == nullptr means COUNT(*)
  AggFunc agg = AggFunc::Count;
  ExprPtr arg;
  bool distinct = false;

  static ExprPtr column_ref(std::string qualifier, std::string column);
  static ExprPtr lit(Value v);
  static ExprPtr binary(BinOp op, ExprPtr l, ExprPtr r);
  static ExprPtr in_list(ExprPtr subject, std::vector<ExprPtr> items, bool negated);
  static ExprPtr logical_not(ExprPtr c);
  static ExprPtr aggregate(AggFunc f, ExprPtr arg, bool distinct);
};

bool expr_equal(const Expr& a, const Expr& b);

struct SelectItem {
  ExprPtr expr;           // null for a star item
  std::string alias;
  bool star = false;
  std::string star_qualifier;  // for `t.*`
};

struct TableRef {
  std::string schema;  // may be empty
  std::string table;
  std::string alias;   // may be empty

  std::string qualified() const { return schema.empty() ? table : schema + "." + table; }
  // Name that column references resolve against.
  std::string binding_name() const { return alias.empty() ? table : alias; }
};

struct FromEntry {
  TableRef table;
  bool explicit_join = false;  // true for JOIN ... ON, false for comma syntax
  ExprPtr on;                  // only for explicit joins
};

struct OrderItem {
  ExprPtr expr;
  bool ascending = true;
};

struct Query {
  bool distinct = false;
  std::vector<SelectItem> select;
  std::vector<FromEntry> from;  // empty: no FROM clause
  ExprPtr where;
  std::vector<ExprPtr> group_by;
  ExprPtr having;
  std::vector<OrderItem> order_by;
  std::optional<int64_t> limit;
};

struct ColumnDefAst {
  std::string name;
  ScalarType type = ScalarType::Text;
  std::vector<std::pair<std::string, std::string>> options;
};

struct QualifiedName {
  std::string schema;  // may be empty
  std::string name;

  std::string text() const { return schema.empty() ? name : schema + "." + name; }
};

struct SelectStmt {
  Query query;
};

struct CreateForeignTableStmt {
  QualifiedName name;
  std::vector<ColumnDefAst> columns;
  std::string server;
  std::vector<std::pair<std::string, std::string>> options;
};

struct AlterAction {
  enum class Kind { SetColumnOptions, SetColumnType, AddColumn };
  Kind kind = Kind::SetColumnOptions;
  std::string column;
  std::vector<std::pair<std::string, std::string>> options;  // SetColumnOptions
  ScalarType type = ScalarType::Text;                        // SetColumnType
  ColumnDefAst add;                                          // AddColumn
};

struct AlterForeignTableStmt {
  QualifiedName name;
  std::vector<AlterAction> actions;
};

struct DropForeignTableStmt {
  QualifiedName name;
};

struct ImportForeignSchemaStmt {
  std::string remote_schema;  // may be empty
  std::string server;
  std::string into_schema;    // may be empty
  std::vector<std::pair<std::string, std::string>> options;
};

struct CreateMatViewStmt {
  std::string name;
  Query query;
  std::optional<int64_t> refresh_every_secs;
};

struct RefreshMatViewStmt {
  std::string name;
};

struct ExplainStmt {
  Query query;
};

using Statement =
    std::variant<SelectStmt, CreateForeignTableStmt, AlterForeignTableStmt, DropForeignTableStmt,
                 ImportForeignSchemaStmt, CreateMatViewStmt, RefreshMatViewStmt, ExplainStmt>;

bool statement_equal(const Statement& a, const Statement& b);
bool query_equal(const Query& a, const Query& b);

}  // namespace pqe::sql
