#include "polyqe/wrapper.hpp"

namespace pqe {

WrapperCapabilities WrapperCapabilities::all() {
  WrapperCapabilities c;
  c.filter_eq_on_key = c.filter_general = c.projection = c.sort = c.group_aggregate =
      c.limit = c.native_fragment = true;
  return c;
}

WrapperCapabilities WrapperCapabilities::none() { return WrapperCapabilities{}; }

bool eval_atom(const FilterAtom& a, const Value& cell) {
  if (cell.is_null()) return false;
  if (a.op == FilterOp::In) {
    for (const auto& cand : a.literal.elements())
      if (compare(cell, cand) == Ordering::Equal) return true;
    return false;
  }
  Ordering o = compare(cell, a.literal);
  if (o == Ordering::Unknown) return false;
  switch (a.op) {
    case FilterOp::Eq: return o == Ordering::Equal;
    case FilterOp::Ne: return o != Ordering::Equal;
    case FilterOp::Lt: return o == Ordering::Less;
    case FilterOp::Le: return o != Ordering::Greater;
    case FilterOp::Gt: return o == Ordering::Greater;
    case FilterOp::Ge: return o != Ordering::Less;
    case FilterOp::In: break;
  }
  return false;
}

bool eval_conjunct(const Conjunct& c, const RelSchema& schema, const Row& row) {
  for (const auto& a : c.atoms) {
    int idx = schema.index_of(a.column);
    if (idx < 0) continue;
    if (eval_atom(a, row[static_cast<size_t>(idx)])) return true;
  }
  return false;
}

}  // namespace pqe
