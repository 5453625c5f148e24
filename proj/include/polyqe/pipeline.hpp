#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "polyqe/value.hpp"

namespace pqe {

// Aggregation-pipeline subset executed by the document store emulator:
// $match, $project, $unwind, $sort, $limit, $group.

struct MatchCond {
  enum class Op { Eq, Ne, Gt, Gte, Lt, Lte, In };
  std::string path;
  Op op = Op::Eq;
  Value literal;  // for In: an array of candidates
  // Engine-added conditions carry the declared column type; the cell is
  // coerced before comparing and a failed coercion means "no match".
  // User-written conditions compare raw stored values.
  std::optional<ScalarType> coerce_to;
};

struct MatchStage {
  std::vector<MatchCond> conds;  // conjunction
};

struct ProjectStage {
  // Inclusion entries ({path: 1}) keep the value at the path, rebuilding
  // nested structure; `_id` is kept (when present) only when the stage has an
  // inclusion entry and {_id: 0} is absent. Rename entries ({name: "$path"})
  // bind the value at the path to a new top-level field (Null when absent).
  struct Entry {
    enum class Kind { Include, ExcludeId, Rename };
    Kind kind = Kind::Include;
    std::string name;  // include path, or rename target field
    std::string path;  // rename source path
    // Engine-added renames coerce to the declared column type; failure is a
    // data error naming the document.
    std::optional<ScalarType> coerce_to;
  };
  std::vector<Entry> entries;

  bool inclusion_form() const {
    for (const auto& e : entries)
      if (e.kind != Entry::Kind::Rename) return true;
    return false;
  }
  bool excludes_id() const {
    for (const auto& e : entries)
      if (e.kind == Entry::Kind::ExcludeId) return true;
    return false;
  }
};

struct UnwindStage {
  std::string path;  // without the leading '$'
};

struct SortStage {
  struct Key {
    std::string path;
    bool ascending = true;
    std::optional<ScalarType> coerce_to;  // engine-added typed sort
  };
  std::vector<Key> keys;
};

struct LimitStage {
  int64_t n = 0;
};

struct GroupStage {
  // _id spec: "$path", a document of name→"$path", or any constant (a single
  // group keyed by that constant; null is the conventional spelling).
  Value id_spec;
  struct Acc {
    enum class Fn { Sum, Avg, Min, Max, Count };
    std::string field;
    Fn fn = Fn::Count;
    std::string path;  // source path; empty means `constant` (or Count)
    Value constant;    // e.g. the 1 in {$sum: 1}
  };
  std::vector<Acc> accs;
};

using PipelineStage =
    std::variant<MatchStage, ProjectStage, UnwindStage, SortStage, LimitStage, GroupStage>;

struct Pipeline {
  std::vector<PipelineStage> stages;
  // When parsed from the envelope form {aggregate: ..., pipeline: [...], ...}
  // the full envelope is kept so extra options (cursor, allowDiskUse,
  // $readPreference, $db) survive into the rendered native query. They have
  // no effect on execution.
  bool had_envelope = false;
  Document envelope;  // original envelope fields, including "pipeline"
};

// Relaxed object notation: bare field names (including '$'-prefixed) are
// accepted alongside double-quoted ones; values are strings, numbers,
// true/false/null, arrays, and nested objects.
Value parse_relaxed_json(const std::string& text);

// Deterministic shell-style rendering: bare keys where unambiguous,
// double-quoted strings, canonical numbers.
std::string render_relaxed_json(const Value& v);

// Accepts the bare array form `[{...}, ...]` or the envelope form.
Pipeline parse_pipeline(const std::string& text);

// Pipeline back to its value form (array of stage documents).
Value pipeline_to_value(const Pipeline& p);

// Native query text: the envelope (original extras preserved, pipeline
// replaced) or a fresh {aggregate: <collection>, pipeline: [...]}.
std::string render_native_query(const Pipeline& p, const std::string& collection);

// Executes the stages in order over a document stream.
std::vector<Document> pipeline_execute(const std::vector<Document>& docs, const Pipeline& p);

// Sort-key comparison used by both the emulator and the mediator: ascending
// puts Nulls last, descending puts them first; mixed scalar kinds order by a
// fixed kind rank so the ordering is total; arrays/documents of the same kind
// keep their relative order (stable sort).
bool sort_before(const Value& a, const Value& b, bool ascending);

}  // namespace pqe
