#include <algorithm>
#include <fstream>
#include <sstream>

#include "polyqe/error.hpp"
#include "polyqe/stores.hpp"

namespace pqe {

// ---- store ----

DocCollection& DocStore::get_or_create(std::string_view db, std::string_view name) {
  auto key = std::make_pair(std::string(db), std::string(name));
  auto it = colls_.find(key);
  if (it == colls_.end()) {
    DocCollection coll;
    coll.db = key.first;
    coll.name = key.second;
    it = colls_.emplace(std::move(key), std::move(coll)).first;
  }
  return it->second;
}

const DocCollection* DocStore::find(std::string_view db, std::string_view name) const {
  auto it = colls_.find(std::make_pair(std::string(db), std::string(name)));
  return it == colls_.end() ? nullptr : &it->second;
}

void DocStore::insert(DocCollection& coll, Document doc) {
  bool has_id = false;
  for (const auto& f : doc) {
    if (f.name == "_id") {
      has_id = true;
      break;
    }
  }
  if (!has_id) {
    doc.insert(doc.begin(),
               {"_id", Value::text("oid:" + std::to_string(coll.next_oid++))});
  }
  coll.docs.push_back(std::move(doc));
}

size_t DocStore::load_ndjson(std::string_view db, std::string_view name, std::istream& in) {
  DocCollection& coll = get_or_create(db, name);
  std::string line;
  size_t count = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Value v;
    try {
      v = parse_relaxed_json(line);
    } catch (const Error& e) {
      throw Error(ErrorKind::Store, "collection " + std::string(name) + " line " +
                                        std::to_string(lineno) + ": " + e.what());
    }
    if (v.kind() != Value::Kind::Document)
      throw Error(ErrorKind::Store, "collection " + std::string(name) + " line " +
                                        std::to_string(lineno) + ": not a document");
    insert(coll, v.fields());
    ++count;
  }
  return count;
}

size_t DocStore::load_ndjson_file(std::string_view db, std::string_view name,
                                  const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
  return load_ndjson(db, name, in);
}

std::vector<const DocCollection*> DocStore::collections() const {
  std::vector<const DocCollection*> out;
  for (const auto& [key, coll] : colls_) out.push_back(&coll);
  return out;
}

// ---- pipeline composition ----

bool path_traverses(std::string_view path, std::string_view unwind_path) {
  if (path == unwind_path) return true;
  return path.size() > unwind_path.size() && path.substr(0, unwind_path.size()) == unwind_path &&
         path[unwind_path.size()] == '.';
}

namespace {

MatchCond::Op match_op(FilterOp op) {
  switch (op) {
    case FilterOp::Eq: return MatchCond::Op::Eq;
    case FilterOp::Ne: return MatchCond::Op::Ne;
    case FilterOp::Lt: return MatchCond::Op::Lt;
    case FilterOp::Le: return MatchCond::Op::Lte;
    case FilterOp::Gt: return MatchCond::Op::Gt;
    case FilterOp::Ge: return MatchCond::Op::Gte;
    case FilterOp::In: return MatchCond::Op::In;
  }
  return MatchCond::Op::Eq;
}

GroupStage::Acc::Fn group_fn(AggSpec::Fn fn) {
  switch (fn) {
    case AggSpec::Fn::Count: return GroupStage::Acc::Fn::Count;
    case AggSpec::Fn::Sum: return GroupStage::Acc::Fn::Sum;
    case AggSpec::Fn::Avg: return GroupStage::Acc::Fn::Avg;
    case AggSpec::Fn::Min: return GroupStage::Acc::Fn::Min;
    case AggSpec::Fn::Max: return GroupStage::Acc::Fn::Max;
  }
  return GroupStage::Acc::Fn::Count;
}

Pipeline parse_table_pipe(const ForeignTableDef& table) {
  const std::string* pipe = table.option("pipe");
  return pipe ? parse_pipeline(*pipe) : Pipeline{};
}

}  // namespace

Pipeline compose_doc_pipeline(const ForeignTableDef& table,
                              const std::vector<Conjunct>& accepted,
                              const std::vector<std::string>& columns,
                              const std::vector<SortKey>& sort, bool push_sort,
                              std::optional<int64_t> limit, bool push_limit,
                              const std::vector<std::string>& group_by,
                              const std::vector<AggSpec>& aggs) {
  Pipeline user = parse_table_pipe(table);

  bool pipe_commutes = true;  // only Unwind/Match stages allow hoisting past
  std::vector<std::string> unwinds;
  for (const auto& stage : user.stages) {
    if (const auto* u = std::get_if<UnwindStage>(&stage)) {
      unwinds.push_back(u->path);
    } else if (!std::holds_alternative<MatchStage>(stage)) {
      pipe_commutes = false;
    }
  }

  MatchStage pre, post;
  for (const auto& conjunct : accepted) {
    const FilterAtom& a = conjunct.atoms.at(0);
    const ColumnDef* col = table.rel_schema.column(a.column);
    MatchCond cond;
    cond.path = std::string(table.mapped_name(*col));
    cond.op = match_op(a.op);
    cond.literal = a.literal;
    cond.coerce_to = col->type;
    bool hoist = pipe_commutes && std::none_of(unwinds.begin(), unwinds.end(),
                                               [&](const std::string& u) {
                                                 return path_traverses(cond.path, u);
                                               });
    (hoist ? pre : post).conds.push_back(std::move(cond));
  }

  Pipeline out;
  out.had_envelope = user.had_envelope;  // keep driver options from the pipe
  out.envelope = user.envelope;
  if (!pre.conds.empty()) out.stages.push_back(std::move(pre));
  for (const auto& stage : user.stages) out.stages.push_back(stage);
  if (!post.conds.empty()) out.stages.push_back(std::move(post));

  // Rename every needed column to its own name, coercing to the declared
  // type. When aggregating, the group keys and accumulator inputs are needed.
  std::vector<std::string> to_project;
  if (group_by.empty()) {
    to_project = columns;
  } else {
    to_project = group_by;
    for (const auto& agg : aggs) {
      if (agg.column.empty()) continue;
      if (std::find(to_project.begin(), to_project.end(), agg.column) == to_project.end())
        to_project.push_back(agg.column);
    }
  }
  if (!to_project.empty()) {
    ProjectStage proj;
    for (const auto& name : to_project) {
      const ColumnDef* col = table.rel_schema.column(name);
      ProjectStage::Entry e;
      e.kind = ProjectStage::Entry::Kind::Rename;
      e.name = name;
      e.path = std::string(table.mapped_name(*col));
      e.coerce_to = col->type;
      proj.entries.push_back(std::move(e));
    }
    out.stages.push_back(std::move(proj));
  }

  if (!group_by.empty()) {
    GroupStage g;
    Document id_spec;
    for (const auto& name : group_by) id_spec.push_back({name, Value::text("$" + name)});
    g.id_spec = Value::document(std::move(id_spec));
    for (const auto& agg : aggs) {
      GroupStage::Acc acc;
      acc.field = agg.out_name;
      acc.fn = group_fn(agg.fn);
      acc.path = agg.column;
      g.accs.push_back(std::move(acc));
    }
    out.stages.push_back(std::move(g));
    ProjectStage flat;
    for (const auto& name : group_by) {
      ProjectStage::Entry e;
      e.kind = ProjectStage::Entry::Kind::Rename;
      e.name = name;
      e.path = "_id." + name;
      flat.entries.push_back(std::move(e));
    }
    for (const auto& agg : aggs) {
      ProjectStage::Entry e;
      e.kind = ProjectStage::Entry::Kind::Rename;
      e.name = agg.out_name;
      e.path = agg.out_name;
      flat.entries.push_back(std::move(e));
    }
    out.stages.push_back(std::move(flat));
  }

  if (push_sort && !sort.empty()) {
    SortStage s;
    for (const auto& k : sort) s.keys.push_back({k.column, k.ascending, std::nullopt});
    out.stages.push_back(std::move(s));
  }
  if (push_limit && limit) out.stages.push_back(LimitStage{*limit});
  return out;
}

// ---- wrapper ----

namespace {

struct DocPayload : ScanPlan::Payload {
  std::string db;
  std::string collection;
  Pipeline pipeline;
  bool has_params = false;
  bool project_in_pipeline = true;
};

struct RowsCursor : Cursor {
  std::vector<Row> rows;
  size_t i = 0;
  WrapperStats* stats;

  RowsCursor(std::vector<Row> r, WrapperStats* s) : rows(std::move(r)), stats(s) {}

  std::optional<Row> next() override {
    if (i >= rows.size()) return std::nullopt;
    ++stats->rows_emitted;
    return std::move(rows[i++]);
  }
};

std::string doc_db(const ForeignTableDef& table) {
  const std::string* db = table.option("db");
  return db ? *db : std::string();
}

std::string doc_collection(const ForeignTableDef& table) {
  const std::string* coll = table.option("collection");
  return coll ? *coll : table.name;
}

bool scalar(const Value& v) {
  return v.kind() != Value::Kind::Array && v.kind() != Value::Kind::Document;
}

// Conjuncts with bind parameters render their literal as a placeholder.
std::vector<Conjunct> display_conjuncts(const std::vector<Conjunct>& conjs) {
  std::vector<Conjunct> out = conjs;
  for (auto& c : out)
    for (auto& a : c.atoms)
      if (a.param >= 0) a.literal = Value::text("?");
  return out;
}

bool has_param(const std::vector<Conjunct>& conjs) {
  for (const auto& c : conjs)
    for (const auto& a : c.atoms)
      if (a.param >= 0) return true;
  return false;
}

}  // namespace

DocWrapper::DocWrapper(const DocStore& store, WrapperCapabilities caps)
    : store_(store), caps_(caps) {}

ScanPlan DocWrapper::plan_scan(const ScanRequest& req) const {
  const ForeignTableDef& table = *req.table;
  ScanPlan plan;
  plan.table = req.table;

  bool has_pipe = table.option("pipe") != nullptr;
  bool composable = !has_pipe || caps_.native_fragment;
  bool push_filters = caps_.filter_general && composable;

  for (const auto& conjunct : req.filters) {
    if (push_filters && conjunct.atoms.size() == 1) {
      plan.accepted.push_back(conjunct);
    } else {
      plan.residual.push_back(conjunct);
    }
  }

  // Grouping / sort / limit only push when everything below them is native.
  bool agg_ok = !req.group_by.empty() && caps_.group_aggregate && caps_.projection &&
                composable && plan.residual.empty();
  plan.aggregate_accepted = agg_ok;

  if (agg_ok) {
    plan.columns = req.group_by;
    for (const auto& agg : req.aggs) plan.columns.push_back(agg.out_name);
  } else {
    plan.columns = req.required_columns;
  }

  bool sort_ok = !req.sort.empty() && caps_.sort && caps_.projection && composable &&
                 (req.group_by.empty() || agg_ok);
  if (sort_ok) {
    for (const auto& k : req.sort)
      if (std::find(plan.columns.begin(), plan.columns.end(), k.column) == plan.columns.end())
        sort_ok = false;
  }
  plan.sort_accepted = sort_ok;

  plan.limit_accepted = req.limit.has_value() && caps_.limit && composable &&
                        plan.residual.empty() && (req.sort.empty() || sort_ok) &&
                        (req.group_by.empty() || agg_ok);

  auto payload = std::make_shared<DocPayload>();
  payload->db = doc_db(table);
  payload->collection = doc_collection(table);
  payload->has_params = has_param(plan.accepted);
  payload->project_in_pipeline = caps_.projection;

  auto compose = [&](const std::vector<Conjunct>& conjs) {
    return compose_doc_pipeline(
        table, conjs, payload->project_in_pipeline ? plan.columns : std::vector<std::string>{},
        req.sort, plan.sort_accepted, req.limit, plan.limit_accepted,
        agg_ok ? req.group_by : std::vector<std::string>{},
        agg_ok ? req.aggs : std::vector<AggSpec>{});
  };
  payload->pipeline = compose(plan.accepted);
  plan.native_text = payload->has_params
                         ? render_native_query(compose(display_conjuncts(plan.accepted)),
                                               payload->collection)
                         : render_native_query(payload->pipeline, payload->collection);
  plan.payload = payload;

  const DocCollection* coll = store_.find(payload->db, payload->collection);
  double est = coll ? static_cast<double>(coll->docs.size()) : 0.0;
  for (const auto& c : plan.accepted) {
    bool eq = c.atoms.at(0).op == FilterOp::Eq;
    est = std::max(1.0, est / (eq ? 10.0 : 3.0));
  }
  if (agg_ok) est = std::max(1.0, est / 5.0);
  if (plan.limit_accepted) est = std::min(est, static_cast<double>(*req.limit));
  plan.est_rows = est;
  return plan;
}

std::unique_ptr<Cursor> DocWrapper::open(const ScanPlan& plan) {
  const auto* payload = dynamic_cast<const DocPayload*>(plan.payload.get());
  if (payload == nullptr)
    throw Error(ErrorKind::Execution, "scan plan does not belong to this wrapper");
  if (payload->has_params)
    throw Error(ErrorKind::Execution, "scan plan has unbound parameters");

  ++stats_.scans;
  const DocCollection* coll = store_.find(payload->db, payload->collection);
  static const std::vector<Document> kEmpty;
  const std::vector<Document>& docs = coll ? coll->docs : kEmpty;
  std::vector<Document> out = pipeline_execute(docs, payload->pipeline);

  const ForeignTableDef& table = *plan.table;
  std::vector<Row> rows;
  rows.reserve(out.size());
  for (const auto& doc : out) {
    Row row;
    row.reserve(plan.columns.size());
    for (const auto& name : plan.columns) {
      if (payload->project_in_pipeline) {
        // The pipeline already renamed and coerced; read the field directly.
        const Value* v = nullptr;
        for (const auto& f : doc)
          if (f.name == name) v = &f.value;
        row.push_back(v ? *v : Value::null());
      } else {
        const ColumnDef* col = table.rel_schema.column(name);
        Value v = get_path(Value::document(doc), table.mapped_name(*col));
        if (!v.is_null() && scalar(v)) {
          std::string id;
          for (const auto& f : doc)
            if (f.name == "_id") id = f.value.to_plain_text();
          v = coerce(v, col->type, "document " + (id.empty() ? "<no _id>" : id));
        }
        row.push_back(std::move(v));
      }
    }
    rows.push_back(std::move(row));
  }
  return std::make_unique<RowsCursor>(std::move(rows), &stats_);
}

StoreBackend StoreBackend::make(StoreKind kind, bool pushdown_enabled) {
  StoreBackend b;
  b.kind = kind;
  switch (kind) {
    case StoreKind::DocStore:
      b.doc = std::make_unique<DocStore>();
      b.wrapper = std::make_unique<DocWrapper>(
          *b.doc, pushdown_enabled ? DocWrapper::default_capabilities()
                                   : WrapperCapabilities::none());
      break;
    case StoreKind::WideColumn:
      b.wide = std::make_unique<WideColumnStore>();
      b.wrapper = std::make_unique<WideColumnWrapper>(
          *b.wide, pushdown_enabled ? WideColumnWrapper::default_capabilities()
                                    : WrapperCapabilities::none());
      break;
    case StoreKind::Kv:
      b.kv = std::make_unique<KvStore>();
      b.wrapper = std::make_unique<KvWrapper>(*b.kv);
      break;
  }
  return b;
}

}  // namespace pqe
