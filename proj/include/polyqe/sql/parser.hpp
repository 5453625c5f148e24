#pragma once

#include <string>
#include <vector>

#include "polyqe/sql/ast.hpp"

namespace pqe::sql {

// Parses exactly one statement (a trailing ';' is allowed).
Statement parse(const std::string& sql);

// Parses a ';'-separated script.
std::vector<Statement> parse_script(const std::string& sql);

// Deterministic rendering; parse(render(x)) is structurally equal to x.
std::string render(const Statement& stmt);
std::string render(const Query& q);
std::string render_expr(const Expr& e);

}  // namespace pqe::sql
