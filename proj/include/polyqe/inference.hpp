#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "polyqe/sql/ast.hpp"
#include "polyqe/stores.hpp"
#include "polyqe/value.hpp"

namespace pqe {

// What a sampled value looked like. Int64 values that fit a 32-bit integer
// count as Int so generated columns stay narrow; wider ones become BigInt.
enum class ObservedType { Bool, Int, BigInt, Double, Text, Timestamp, Array, Document };

std::string_view observed_type_name(ObservedType t);

struct FieldStat {
  // Documents in which the path occurs at least once.
  int64_t doc_count = 0;
  // One entry per observed value at the path (array elements excluded).
  std::map<ObservedType, int64_t> histogram;
  // Scalar array elements observed at the path, for typing `value` columns.
  std::map<ObservedType, int64_t> element_histogram;

  double occurrence_prob(int64_t sample_size) const;
  // Majority vote over the histogram; any tie for the maximum resolves to
  // Text, the only type every value coerces into.
  ObservedType resolved() const;
  ScalarType column_type() const;   // resolved() as a column type
  ScalarType element_type() const;  // majority over element_histogram
};

struct ProbabilisticSchema {
  std::string collection;
  int64_t sample_size = 0;
  // Dot-separated paths in first-seen order; order drives generated DDL.
  std::vector<std::pair<std::string, FieldStat>> fields;

  const FieldStat* find(std::string_view path) const;
};

// Scans min(docs.size(), sample_limit) documents from the front: sampling is
// deliberately deterministic so repeated imports generate identical DDL.
ProbabilisticSchema infer(const std::vector<Document>& docs, int64_t sample_limit,
                          std::string_view collection_name);

struct MappingOptions {
  bool parent_id = true;   // child tables get a _parent_id column
  double min_prob = 0.0;   // drop fields observed less often than this
};

// One outer table plus one child table per nested array, each child carrying
// an unwind pipe and (by default) a parent-id column.
struct RelationalMapping {
  std::vector<sql::CreateForeignTableStmt> tables;
};

RelationalMapping derive_mapping(
    const ProbabilisticSchema& ps, const std::string& server_name,
    const std::string& into_schema,
    const std::vector<std::pair<std::string, std::string>>& table_options,
    const MappingOptions& opts = {});

struct ImportResult {
  std::vector<sql::Statement> statements;
  std::vector<std::string> warnings;  // per-collection failures, import continues
};

// Generates CREATE FOREIGN TABLE statements for everything the backend holds:
// derived mappings for document collections, one all-text table per column
// family (stores keep cells as UTF-8 strings), and a key/value pair per
// namespace. remote_schema filters document databases when non-empty.
ImportResult import_foreign_schema(const ServerDef& server, const StoreBackend& backend,
                                   int64_t sample_limit, std::string_view remote_schema,
                                   std::string_view into_schema,
                                   const MappingOptions& opts = {});

}  // namespace pqe
