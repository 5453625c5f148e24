#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "polyqe/pipeline.hpp"
#include "polyqe/wrapper.hpp"

namespace pqe {

// ---- document store ----

struct DocCollection {
  std::string db;
  std::string name;
  std::vector<Document> docs;
  int64_t next_oid = 1;  // for auto-generated _id values
};

class DocStore {
 public:
  DocCollection& get_or_create(std::string_view db, std::string_view name);
  const DocCollection* find(std::string_view db, std::string_view name) const;

  // Assigns `_id` = "oid:<n>" when the document lacks one.
  void insert(DocCollection& coll, Document doc);

  // Newline-delimited documents, one per line; blank lines skipped.
  size_t load_ndjson(std::string_view db, std::string_view name, std::istream& in);
  size_t load_ndjson_file(std::string_view db, std::string_view name, const std::string& path);

  std::vector<const DocCollection*> collections() const;  // sorted by (db, name)

 private:
  std::map<std::pair<std::string, std::string>, DocCollection> colls_;
};

// ---- wide-column store ----

struct ColumnFamily {
  std::string name;
  std::vector<std::string> qualifiers;  // header order
  // key → qualifier → cell. Cells are UTF-8 text.
  std::map<std::string, std::map<std::string, std::string>> rows;
};

class WideColumnStore {
 public:
  ColumnFamily& get_or_create(std::string_view name);
  const ColumnFamily* find(std::string_view name) const;

  void put(ColumnFamily& cf, std::string key, std::map<std::string, std::string> cells);

  // Tab-separated with a header row; a `key` column is mandatory and the
  // remaining headers name qualifiers.
  size_t load_tsv(std::string_view name, std::istream& in);
  size_t load_tsv_file(std::string_view name, const std::string& path);

  std::vector<const ColumnFamily*> families() const;  // sorted by name

 private:
  std::map<std::string, ColumnFamily, std::less<>> families_;
};

// ---- key-value store ----

struct KvNamespace {
  std::string name;
  std::map<std::string, std::string> entries;
};

class KvStore {
 public:
  KvNamespace& get_or_create(std::string_view name);
  const KvNamespace* find(std::string_view name) const;

  // Tab-separated with a `key`/`value` header row.
  size_t load_tsv(std::string_view name, std::istream& in);
  size_t load_tsv_file(std::string_view name, const std::string& path);

  std::vector<const KvNamespace*> namespaces() const;  // sorted by name

 private:
  std::map<std::string, KvNamespace, std::less<>> namespaces_;
};

// ---- wrappers ----

// Pipeline composition for the document wrapper, exposed for tests:
// [hoisted Match] + user pipe + [post Match] + Project(column -> "$mname"),
// then optionally Group/Sort/Limit. A filter hoists before the pipe iff the
// pipe contains only Unwind/Match stages and the filter's path does not
// traverse an unwound array.
Pipeline compose_doc_pipeline(const ForeignTableDef& table,
                              const std::vector<Conjunct>& accepted,
                              const std::vector<std::string>& columns,
                              const std::vector<SortKey>& sort, bool push_sort,
                              std::optional<int64_t> limit, bool push_limit,
                              const std::vector<std::string>& group_by,
                              const std::vector<AggSpec>& aggs);

// True when `path` would change meaning if evaluated before unwinding
// `unwind_path` (the path equals it or descends into it).
bool path_traverses(std::string_view path, std::string_view unwind_path);

class DocWrapper : public Wrapper {
 public:
  explicit DocWrapper(const DocStore& store,
                      WrapperCapabilities caps = default_capabilities());
  static WrapperCapabilities default_capabilities() { return WrapperCapabilities::all(); }

  WrapperCapabilities capabilities() const override { return caps_; }
  ScanPlan plan_scan(const ScanRequest& req) const override;
  std::unique_ptr<Cursor> open(const ScanPlan& plan) override;

 private:
  const DocStore& store_;
  WrapperCapabilities caps_;
};

class WideColumnWrapper : public Wrapper {
 public:
  explicit WideColumnWrapper(const WideColumnStore& store,
                             WrapperCapabilities caps = default_capabilities());
  static WrapperCapabilities default_capabilities();

  WrapperCapabilities capabilities() const override { return caps_; }
  ScanPlan plan_scan(const ScanRequest& req) const override;
  std::unique_ptr<Cursor> open(const ScanPlan& plan) override;

 private:
  const WideColumnStore& store_;
  WrapperCapabilities caps_;
};

class KvWrapper : public Wrapper {
 public:
  explicit KvWrapper(const KvStore& store,
                     WrapperCapabilities caps = WrapperCapabilities::none());

  WrapperCapabilities capabilities() const override { return caps_; }
  ScanPlan plan_scan(const ScanRequest& req) const override;
  std::unique_ptr<Cursor> open(const ScanPlan& plan) override;

 private:
  const KvStore& store_;
  WrapperCapabilities caps_;
};

// One store instance plus its wrapper, bound to a catalog server.
struct StoreBackend {
  StoreKind kind = StoreKind::DocStore;
  std::unique_ptr<DocStore> doc;
  std::unique_ptr<WideColumnStore> wide;
  std::unique_ptr<KvStore> kv;
  std::unique_ptr<Wrapper> wrapper;

  static StoreBackend make(StoreKind kind, bool pushdown_enabled);
};

}  // namespace pqe
