#include "polyqe/stores.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "polyqe/error.hpp"
#include "polyqe/sql/parser.hpp"

using namespace pqe;

namespace {

const char* kOrdersCreate = R"(CREATE FOREIGN TABLE ymdb.orders (
 o_all_local numeric OPTIONS (mname 'ORDERS.O_ALL_LOCAL'),
 o_carrier_id numeric OPTIONS (mname 'ORDERS.O_CARRIER_ID'),
 o_entry_d timestamp without time zone OPTIONS (mname
'ORDERS.O_ENTRY_D'),
 o_id numeric OPTIONS (mname 'ORDERS.O_ID'),
 o_ol_cnt numeric OPTIONS (mname 'ORDERS.O_OL_CNT'),
 o_c_id numeric OPTIONS (mname 'C_ID'),
 o_d_id numeric OPTIONS (mname 'C_D_ID'),
 o_w_id numeric OPTIONS (mname 'C_W_ID')
)
SERVER ymdbserver
OPTIONS (collection 'CUSTOMER', db 'tpcc',
 pipe '[{"$unwind": "$ORDERS"}]'
);)";

const char* kDistrictAlter = R"(ALTER FOREIGN TABLE cass.district
  ALTER COLUMN key OPTIONS (composite
   'd_id,d_w_id:str(d_id).zfill(5)+str(d_w_id).zfill(5)'),
  ALTER COLUMN d_id TYPE SMALLINT,
  ALTER COLUMN d_w_id TYPE SMALLINT;)";

struct Fixture {
  Catalog catalog;
  DocStore docs;
  WideColumnStore wide;
  KvStore kv;

  Fixture() {
    catalog.add_server({"ymdbserver", StoreKind::DocStore, {}});
    catalog.add_server({"cassandra", StoreKind::WideColumn, {}});
    catalog.add_server({"redis", StoreKind::Kv, {}});
  }

  const ForeignTableDef& ddl(const std::string& stmt,
                             const std::string& schema, const std::string& name) {
    catalog.apply_ddl(sql::parse(stmt));
    return *catalog.table(schema, name);
  }

  void load_customers() {
    std::istringstream in(
        R"({"_id": "c1", "C_ID": 1, "C_D_ID": 1, "C_W_ID": 1, "ORDERS": [{"O_ID": 1, "O_ENTRY_D": "2024-01-15 10:00:00", "O_OL_CNT": 2, "O_ALL_LOCAL": 1, "O_CARRIER_ID": 5}, {"O_ID": 2, "O_ENTRY_D": "2024-02-01 09:30:00", "O_OL_CNT": 1, "O_ALL_LOCAL": 1, "O_CARRIER_ID": 3}]}
{"C_ID": 2, "C_D_ID": 1, "C_W_ID": 2, "ORDERS": [{"O_ID": 1, "O_ENTRY_D": "2024-03-05 12:00:00", "O_OL_CNT": 4, "O_ALL_LOCAL": 0, "O_CARRIER_ID": 1}]}
)");
    docs.load_ndjson("tpcc", "CUSTOMER", in);
  }

  void load_district() {
    std::istringstream in(
        "key\td_id\td_w_id\td_name\td_next_o_id\n"
        "0000100002\t1\t2\tWestside\t3001\n"
        "0000200002\t2\t2\tHarbor\t3101\n"
        "0000100001\t1\t1\tCenter\t3201\n");
    wide.load_tsv("district", in);
  }
};

ScanRequest request(const ForeignTableDef& t, std::vector<std::string> cols,
                    std::vector<Conjunct> filters = {}) {
  ScanRequest req;
  req.table = &t;
  req.required_columns = std::move(cols);
  req.filters = std::move(filters);
  return req;
}

Conjunct atom(std::string col, FilterOp op, Value lit, int param = -1) {
  return Conjunct{{FilterAtom{std::move(col), op, std::move(lit), param}}};
}

std::vector<Row> drain(Wrapper& w, const ScanPlan& plan) {
  auto cur = w.open(plan);
  std::vector<Row> rows;
  while (auto r = cur->next()) rows.push_back(std::move(*r));
  return rows;
}

RelSchema scan_schema(const ForeignTableDef& t, const std::vector<std::string>& cols) {
  RelSchema s;
  for (const auto& name : cols) s.columns.push_back(*t.rel_schema.column(name));
  return s;
}

std::vector<Row> apply_residual(std::vector<Row> rows, const RelSchema& schema,
                                const std::vector<Conjunct>& residual) {
  std::vector<Row> out;
  for (auto& row : rows) {
    bool keep = true;
    for (const auto& c : residual)
      if (!eval_conjunct(c, schema, row)) {
        keep = false;
        break;
      }
    if (keep) out.push_back(std::move(row));
  }
  return out;
}

std::string row_text(const Row& row) {
  std::string s;
  for (const auto& v : row) {
    if (!s.empty()) s += "|";
    s += v.to_sql_text();
  }
  return s;
}

std::vector<std::string> row_multiset(const std::vector<Row>& rows) {
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(row_text(r));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

// ---- document store basics ----

TEST_CASE("ndjson load assigns ids and reports errors with line numbers") {
  DocStore store;
  std::istringstream in(R"({"_id": "x", "v": 1}

{"v": 2}
)");
  CHECK(store.load_ndjson("db", "c", in) == 2);
  const DocCollection* coll = store.find("db", "c");
  REQUIRE(coll != nullptr);
  REQUIRE(coll->docs.size() == 2);
  CHECK(coll->docs[0][0].value == Value::text("x"));
  CHECK(coll->docs[1][0].name == "_id");
  CHECK(coll->docs[1][0].value == Value::text("oid:1"));

  std::istringstream bad("{}\n{nope\n");
  try {
    store.load_ndjson("db", "c2", bad);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Store);
    CHECK(std::string(e.what()).find("collection c2 line 2") != std::string::npos);
  }
  std::istringstream notdoc("[1, 2]\n");
  CHECK_THROWS_AS(store.load_ndjson("db", "c3", notdoc), Error);
}

// ---- pipeline composition ----

TEST_CASE("filters on outer fields hoist before the table pipe") {
  Fixture fx;
  const ForeignTableDef& orders = fx.ddl(kOrdersCreate, "ymdb", "orders");

  // o_w_id maps to C_W_ID on the enclosing document: the match may run
  // before the unwind. o_id maps into the unwound array: it must not.
  Pipeline hoisted = compose_doc_pipeline(
      orders, {atom("o_w_id", FilterOp::Eq, Value::float64(1))}, {"o_id"}, {}, false,
      std::nullopt, false, {}, {});
  CHECK(render_native_query(hoisted, "CUSTOMER") ==
        R"({aggregate: "CUSTOMER", pipeline: [{$match: {C_W_ID: {$eq: 1}}}, )"
        R"({$unwind: "$ORDERS"}, {$project: {o_id: "$ORDERS.O_ID"}}]})");

  Pipeline post = compose_doc_pipeline(
      orders, {atom("o_id", FilterOp::Eq, Value::float64(1))}, {"o_id"}, {}, false,
      std::nullopt, false, {}, {});
  CHECK(render_native_query(post, "CUSTOMER") ==
        R"({aggregate: "CUSTOMER", pipeline: [{$unwind: "$ORDERS"}, )"
        R"({$match: {ORDERS.O_ID: {$eq: 1}}}, {$project: {o_id: "$ORDERS.O_ID"}}]})");

  Pipeline plain = compose_doc_pipeline(orders, {}, {"o_id", "o_w_id"}, {}, false,
                                        std::nullopt, false, {}, {});
  CHECK(render_native_query(plain, "CUSTOMER") ==
        R"({aggregate: "CUSTOMER", pipeline: [{$unwind: "$ORDERS"}, )"
        R"({$project: {o_id: "$ORDERS.O_ID", o_w_id: "$C_W_ID"}}]})");
}

TEST_CASE("filters never hoist past a non-commuting pipe stage") {
  Fixture fx;
  const ForeignTableDef& t = fx.ddl(
      "CREATE FOREIGN TABLE ymdb.grouped (g text OPTIONS (mname '_id'), n int) "
      "SERVER ymdbserver OPTIONS (collection 'c', pipe "
      "'[{\"$group\": {\"_id\": \"$tag\", \"n\": {\"$sum\": 1}}}]')",
      "ymdb", "grouped");
  Pipeline p = compose_doc_pipeline(t, {atom("g", FilterOp::Eq, Value::text("a"))},
                                    {"g", "n"}, {}, false, std::nullopt, false, {}, {});
  // The filter lands after the group stage.
  std::string text = render_native_query(p, "c");
  CHECK(text.find("$group") < text.find("$match"));
}

TEST_CASE("an envelope pipe keeps its extra options in the rendered query") {
  Fixture fx;
  const ForeignTableDef& t = fx.ddl(
      "CREATE FOREIGN TABLE ymdb.env (o_id numeric OPTIONS (mname 'ORDERS.O_ID')) "
      "SERVER ymdbserver OPTIONS (collection 'CUSTOMER', pipe "
      "'{\"pipeline\": [{\"$unwind\": \"$ORDERS\"}], \"allowDiskUse\": true}')",
      "ymdb", "env");
  Pipeline p = compose_doc_pipeline(t, {}, {"o_id"}, {}, false, std::nullopt, false, {}, {});
  CHECK(render_native_query(p, "CUSTOMER") ==
        R"({pipeline: [{$unwind: "$ORDERS"}, {$project: {o_id: "$ORDERS.O_ID"}}], )"
        R"(allowDiskUse: true})");
}

// ---- document wrapper ----

TEST_CASE("document scans push single-atom filters and count matched rows only") {
  Fixture fx;
  fx.load_customers();
  const ForeignTableDef& orders = fx.ddl(kOrdersCreate, "ymdb", "orders");
  DocWrapper w(fx.docs);

  ScanRequest req = request(orders, {"o_id", "o_w_id"},
                            {atom("o_w_id", FilterOp::Eq, Value::float64(1))});
  ScanPlan plan = w.plan_scan(req);
  CHECK(plan.accepted.size() == 1);
  CHECK(plan.residual.empty());
  CHECK(plan.est_rows == doctest::Approx(1.0));
  CHECK(plan.native_text ==
        R"({aggregate: "CUSTOMER", pipeline: [{$match: {C_W_ID: {$eq: 1}}}, )"
        R"({$unwind: "$ORDERS"}, {$project: {o_id: "$ORDERS.O_ID", o_w_id: "$C_W_ID"}}]})");

  std::vector<Row> rows = drain(w, plan);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == Row{Value::float64(1), Value::float64(1)});
  CHECK(rows[1] == Row{Value::float64(2), Value::float64(1)});
  CHECK(w.stats().scans == 1);
  CHECK(w.stats().point_gets == 0);
  // Only matching documents cross the wrapper boundary.
  CHECK(w.stats().rows_emitted == 2);

  // Multi-atom disjunctions stay residual even at full capability.
  ScanRequest req2 = request(orders, {"o_id"});
  Conjunct either;
  either.atoms.push_back(FilterAtom{"o_id", FilterOp::Eq, Value::float64(1)});
  either.atoms.push_back(FilterAtom{"o_id", FilterOp::Eq, Value::float64(2)});
  req2.filters.push_back(either);
  ScanPlan plan2 = w.plan_scan(req2);
  CHECK(plan2.accepted.empty());
  CHECK(plan2.residual.size() == 1);
}

TEST_CASE("capability masking moves work to the mediator without changing rows") {
  Fixture fx;
  fx.load_customers();
  const ForeignTableDef& orders = fx.ddl(kOrdersCreate, "ymdb", "orders");

  ScanRequest req = request(orders, {"o_id", "o_w_id", "o_entry_d"},
                            {atom("o_w_id", FilterOp::Eq, Value::float64(1))});

  DocWrapper full(fx.docs);
  std::vector<Row> pushed = drain(full, full.plan_scan(req));

  DocWrapper bare(fx.docs, WrapperCapabilities::none());
  ScanPlan plan = bare.plan_scan(req);
  CHECK(plan.accepted.empty());
  CHECK(plan.residual.size() == 1);
  // The table pipe still runs: it is part of the mapping, not an optimization.
  CHECK(plan.native_text ==
        R"({aggregate: "CUSTOMER", pipeline: [{$unwind: "$ORDERS"}]})");
  std::vector<Row> raw = drain(bare, plan);
  CHECK(raw.size() == 3);  // every unwound order is transferred
  CHECK(bare.stats().rows_emitted == 3);

  std::vector<Row> filtered =
      apply_residual(std::move(raw), scan_schema(orders, plan.columns), plan.residual);
  CHECK(filtered == pushed);
  CHECK(pushed.at(0).at(2).kind() == Value::Kind::Timestamp);
}

TEST_CASE("grouped scans emit one row per group") {
  Fixture fx;
  std::istringstream in(R"({"a": 1, "b": "x", "c": 1.5}
{"a": 2, "b": "x", "c": 2.5}
{"a": 5, "b": "y"}
)");
  fx.docs.load_ndjson("", "props", in);
  const ForeignTableDef& t = fx.ddl(
      "CREATE FOREIGN TABLE prop.t (a bigint, b text, c double precision) "
      "SERVER ymdbserver OPTIONS (collection 'props')",
      "prop", "t");
  DocWrapper w(fx.docs);

  ScanRequest req = request(t, {"b"});
  req.group_by = {"b"};
  req.aggs = {{AggSpec::Fn::Count, "", "n_rows"},
              {AggSpec::Fn::Sum, "a", "total"},
              {AggSpec::Fn::Avg, "c", "avg_c"}};
  ScanPlan plan = w.plan_scan(req);
  CHECK(plan.aggregate_accepted);
  CHECK(plan.columns == std::vector<std::string>{"b", "n_rows", "total", "avg_c"});
  CHECK(plan.est_rows == doctest::Approx(1.0));

  std::vector<Row> rows = drain(w, plan);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == Row{Value::text("x"), Value::int64(2), Value::int64(3),
                       Value::float64(2.0)});
  CHECK(rows[1] == Row{Value::text("y"), Value::int64(1), Value::int64(5), Value::null()});
  CHECK(w.stats().rows_emitted == 2);

  // A residual filter forces the aggregate back to the mediator.
  ScanRequest blocked = req;
  Conjunct pair;
  pair.atoms.push_back(FilterAtom{"a", FilterOp::Eq, Value::int64(1)});
  pair.atoms.push_back(FilterAtom{"a", FilterOp::Eq, Value::int64(2)});
  blocked.filters.push_back(pair);
  ScanPlan declined = w.plan_scan(blocked);
  CHECK_FALSE(declined.aggregate_accepted);
  CHECK(declined.columns == std::vector<std::string>{"b"});

  DocWrapper noagg(fx.docs, [] {
    WrapperCapabilities c = WrapperCapabilities::all();
    c.group_aggregate = false;
    return c;
  }());
  CHECK_FALSE(noagg.plan_scan(req).aggregate_accepted);
}

TEST_CASE("sort and limit push-down") {
  Fixture fx;
  std::istringstream in(R"({"a": 3, "b": "x"}
{"a": 1, "b": "x"}
{"a": 2, "b": "y"}
{"a": 5, "b": "x"}
)");
  fx.docs.load_ndjson("", "props", in);
  const ForeignTableDef& t = fx.ddl(
      "CREATE FOREIGN TABLE prop.t (a bigint, b text) SERVER ymdbserver "
      "OPTIONS (collection 'props')",
      "prop", "t");

  DocWrapper w(fx.docs);
  ScanRequest req = request(t, {"a", "b"}, {atom("b", FilterOp::Eq, Value::text("x"))});
  req.sort = {{"a", false}};
  req.limit = 2;
  ScanPlan plan = w.plan_scan(req);
  CHECK(plan.sort_accepted);
  CHECK(plan.limit_accepted);
  CHECK(plan.est_rows == doctest::Approx(1.0));
  std::vector<Row> rows = drain(w, plan);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == Row{Value::int64(5), Value::text("x")});
  CHECK(rows[1] == Row{Value::int64(3), Value::text("x")});

  // Sort keys must be scan outputs.
  ScanRequest narrow = request(t, {"b"});
  narrow.sort = {{"a", true}};
  CHECK_FALSE(w.plan_scan(narrow).sort_accepted);

  // A declined filter leaves sort pushable (filtering preserves order) but
  // blocks the limit.
  WrapperCapabilities sort_only = WrapperCapabilities::all();
  sort_only.filter_general = false;
  sort_only.group_aggregate = false;
  DocWrapper s(fx.docs, sort_only);
  ScanPlan partial = s.plan_scan(req);
  CHECK(partial.residual.size() == 1);
  CHECK(partial.sort_accepted);
  CHECK_FALSE(partial.limit_accepted);
  std::vector<Row> ordered = apply_residual(
      drain(s, partial), scan_schema(t, partial.columns), partial.residual);
  std::vector<Row> want = {{Value::int64(5), Value::text("x")},
                           {Value::int64(3), Value::text("x")},
                           {Value::int64(1), Value::text("x")}};
  CHECK(ordered == want);
}

TEST_CASE("bind parameters render as placeholders and refuse to run") {
  Fixture fx;
  fx.load_customers();
  const ForeignTableDef& orders = fx.ddl(kOrdersCreate, "ymdb", "orders");
  DocWrapper w(fx.docs);

  ScanRequest req = request(orders, {"o_id"},
                            {atom("o_w_id", FilterOp::Eq, Value::null(), 0)});
  ScanPlan plan = w.plan_scan(req);
  CHECK(plan.native_text.find(R"({$match: {C_W_ID: {$eq: "?"}}})") != std::string::npos);
  CHECK_THROWS_AS(w.open(plan), Error);

  // Substituting the literal yields a runnable plan.
  req.filters[0].atoms[0].param = -1;
  req.filters[0].atoms[0].literal = Value::float64(2);
  std::vector<Row> rows = drain(w, w.plan_scan(req));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0] == Row{Value::float64(1)});
}

TEST_CASE("edge scans: no columns, missing collection") {
  Fixture fx;
  fx.load_customers();
  const ForeignTableDef& orders = fx.ddl(kOrdersCreate, "ymdb", "orders");
  DocWrapper w(fx.docs);

  std::vector<Row> rows = drain(w, w.plan_scan(request(orders, {})));
  CHECK(rows.size() == 3);  // zero-width rows still count cardinality
  for (const auto& r : rows) CHECK(r.empty());

  const ForeignTableDef& ghost = fx.ddl(
      "CREATE FOREIGN TABLE ymdb.ghost (a text) SERVER ymdbserver "
      "OPTIONS (collection 'nope')",
      "ymdb", "ghost");
  ScanPlan plan = w.plan_scan(request(ghost, {"a"}));
  CHECK(plan.est_rows == 0.0);
  CHECK(drain(w, plan).empty());
}

TEST_CASE("push-down and mediator evaluation agree on random data") {
  Fixture fx;
  const ForeignTableDef& t = fx.ddl(
      "CREATE FOREIGN TABLE prop.t (a bigint, b text, c double precision) "
      "SERVER ymdbserver OPTIONS (collection 'props')",
      "prop", "t");

  std::mt19937_64 rng(20240820);
  const char* texts[] = {"x", "y", "z"};

  for (int trial = 0; trial < 40; ++trial) {
    DocStore store;
    DocCollection& coll = store.get_or_create("", "props");
    size_t n = rng() % 30;
    for (size_t i = 0; i < n; ++i) {
      Document d;
      d.push_back({"a", Value::int64(static_cast<int64_t>(rng() % 10))});
      if (rng() % 5 != 0) d.push_back({"b", Value::text(texts[rng() % 3])});
      if (rng() % 2 == 0)
        d.push_back({"c", Value::float64(static_cast<double>(rng() % 100) / 10.0)});
      store.insert(coll, std::move(d));
    }

    auto random_atom = [&]() -> FilterAtom {
      switch (rng() % 3) {
        case 0: {
          FilterOp ops[] = {FilterOp::Eq, FilterOp::Ne, FilterOp::Lt,
                            FilterOp::Le, FilterOp::Gt, FilterOp::Ge};
          return {"a", ops[rng() % 6], Value::int64(static_cast<int64_t>(rng() % 10))};
        }
        case 1: {
          if (rng() % 3 == 0) {
            Array in;
            in.push_back(Value::text(texts[rng() % 3]));
            in.push_back(Value::text(texts[rng() % 3]));
            return {"b", FilterOp::In, Value::array(std::move(in))};
          }
          return {"b", rng() % 2 == 0 ? FilterOp::Eq : FilterOp::Ne,
                  Value::text(texts[rng() % 3])};
        }
        default:
          return {"c", rng() % 2 == 0 ? FilterOp::Lt : FilterOp::Gt,
                  Value::float64(static_cast<double>(rng() % 100) / 10.0)};
      }
    };

    ScanRequest req = request(t, {"a", "b", "c"});
    size_t nconj = rng() % 3;
    for (size_t i = 0; i < nconj; ++i) {
      Conjunct c;
      size_t natoms = 1 + rng() % 2;
      for (size_t j = 0; j < natoms; ++j) c.atoms.push_back(random_atom());
      req.filters.push_back(std::move(c));
    }

    DocWrapper pushed(store);
    ScanPlan plan = pushed.plan_scan(req);
    REQUIRE(plan.accepted.size() + plan.residual.size() == req.filters.size());
    std::vector<Row> got = apply_residual(
        drain(pushed, plan), scan_schema(t, plan.columns), plan.residual);

    DocWrapper bare(store, WrapperCapabilities::none());
    ScanPlan full = bare.plan_scan(req);
    REQUIRE(full.accepted.empty());
    std::vector<Row> want = apply_residual(
        drain(bare, full), scan_schema(t, full.columns), full.residual);

    REQUIRE(row_multiset(got) == row_multiset(want));
  }
}

TEST_CASE("hoisting a match over an unwind never changes results") {
  Fixture fx;
  const ForeignTableDef& t = fx.ddl(
      "CREATE FOREIGN TABLE prop.u (g bigint, h bigint OPTIONS (mname 'xs.h')) "
      "SERVER ymdbserver OPTIONS (collection 'nested', pipe "
      "'[{\"$unwind\": \"$xs\"}]')",
      "prop", "u");

  std::mt19937_64 rng(20240821);
  for (int trial = 0; trial < 40; ++trial) {
    DocStore store;
    DocCollection& coll = store.get_or_create("", "nested");
    size_t n = rng() % 12;
    for (size_t i = 0; i < n; ++i) {
      Document d;
      d.push_back({"g", Value::int64(static_cast<int64_t>(rng() % 5))});
      if (rng() % 4 != 0) {
        Array xs;
        size_t k = rng() % 4;
        for (size_t j = 0; j < k; ++j) {
          Document e;
          e.push_back({"h", Value::int64(static_cast<int64_t>(rng() % 5))});
          xs.push_back(Value::document(std::move(e)));
        }
        d.push_back({"xs", Value::array(std::move(xs))});
      }
      store.insert(coll, std::move(d));
    }

    ScanRequest req = request(t, {"g", "h"});
    req.filters.push_back(
        atom("g", rng() % 2 == 0 ? FilterOp::Eq : FilterOp::Le,
             Value::int64(static_cast<int64_t>(rng() % 5))));
    if (rng() % 2 == 0)
      req.filters.push_back(
          atom("h", rng() % 2 == 0 ? FilterOp::Eq : FilterOp::Gt,
               Value::int64(static_cast<int64_t>(rng() % 5))));

    DocWrapper pushed(store);
    ScanPlan plan = pushed.plan_scan(req);
    REQUIRE(plan.residual.empty());
    // The g-filter hoists ahead of the unwind, the h-filter stays behind it.
    size_t unwind_at = plan.native_text.find("$unwind");
    CHECK(plan.native_text.find("{$match: {g:") < unwind_at);
    if (req.filters.size() == 2)
      CHECK(plan.native_text.find("{$match: {xs.h:") > unwind_at);
    std::vector<Row> got = drain(pushed, plan);

    DocWrapper bare(store, WrapperCapabilities::none());
    ScanPlan full = bare.plan_scan(req);
    std::vector<Row> want = apply_residual(
        drain(bare, full), scan_schema(t, full.columns), full.residual);
    REQUIRE(got == want);
  }
}

// ---- wide-column wrapper ----

TEST_CASE("composite key equalities route to a point get") {
  Fixture fx;
  fx.load_district();
  fx.ddl("CREATE FOREIGN TABLE cass.district (key text, d_id text, d_w_id text, "
         "d_name text, d_next_o_id text) SERVER cassandra OPTIONS (cf 'district')",
         "cass", "district");
  const ForeignTableDef& t = fx.ddl(kDistrictAlter, "cass", "district");
  WideColumnWrapper w(fx.wide);

  ScanRequest req = request(t, {"d_name"},
                            {atom("d_id", FilterOp::Eq, Value::int64(1)),
                             atom("d_w_id", FilterOp::Eq, Value::int64(2))});
  ScanPlan plan = w.plan_scan(req);
  CHECK(plan.accepted.size() == 2);
  CHECK(plan.residual.empty());
  CHECK(plan.native_text == "SELECT d_name FROM district WHERE key = '0000100002'");
  CHECK(plan.est_rows == doctest::Approx(1.0));

  std::vector<Row> rows = drain(w, plan);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0] == Row{Value::text("Westside")});
  CHECK(w.stats().point_gets == 1);
  CHECK(w.stats().scans == 0);
  CHECK(w.stats().rows_emitted == 1);
}

TEST_CASE("direct row-key equality routes to a point get") {
  Fixture fx;
  fx.load_district();
  const ForeignTableDef& t = fx.ddl(
      "CREATE FOREIGN TABLE cass.d2 (key text, d_name text) SERVER cassandra "
      "OPTIONS (cf 'district')",
      "cass", "d2");
  WideColumnWrapper w(fx.wide);
  ScanPlan plan = w.plan_scan(
      request(t, {"key", "d_name"}, {atom("key", FilterOp::Eq, Value::text("0000100001"))}));
  CHECK(plan.native_text ==
        "SELECT key, d_name FROM district WHERE key = '0000100001'");
  std::vector<Row> rows = drain(w, plan);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0] == Row{Value::text("0000100001"), Value::text("Center")});
  CHECK(w.stats().point_gets == 1);

  // A miss still counts as a point get and yields no rows.
  ScanPlan miss = w.plan_scan(
      request(t, {"key"}, {atom("key", FilterOp::Eq, Value::text("zzz"))}));
  CHECK(drain(w, miss).empty());
  CHECK(w.stats().point_gets == 2);
}

TEST_CASE("incomplete keys and non-key filters fall back to a scan") {
  Fixture fx;
  fx.load_district();
  fx.ddl("CREATE FOREIGN TABLE cass.district (key text, d_id text, d_w_id text, "
         "d_name text, d_next_o_id text) SERVER cassandra OPTIONS (cf 'district')",
         "cass", "district");
  const ForeignTableDef& t = fx.ddl(kDistrictAlter, "cass", "district");
  WideColumnWrapper w(fx.wide);

  ScanRequest req = request(t, {"key", "d_id", "d_name"},
                            {atom("d_id", FilterOp::Eq, Value::int64(1))});
  ScanPlan plan = w.plan_scan(req);
  CHECK(plan.accepted.empty());
  CHECK(plan.residual.size() == 1);
  CHECK(plan.native_text == "SELECT key, d_id, d_name FROM district");
  CHECK(plan.est_rows == doctest::Approx(3.0));

  std::vector<Row> rows = drain(w, plan);
  CHECK(rows.size() == 3);  // full transfer: the store cannot filter this
  CHECK(w.stats().scans == 1);
  std::vector<Row> filtered =
      apply_residual(std::move(rows), scan_schema(t, plan.columns), plan.residual);
  REQUIRE(filtered.size() == 2);
  CHECK(filtered[0] == Row{Value::text("0000100001"), Value::int64(1), Value::text("Center")});
  CHECK(filtered[1] ==
        Row{Value::text("0000100002"), Value::int64(1), Value::text("Westside")});

  // Range predicates on key columns cannot use the key either.
  ScanPlan range = w.plan_scan(request(t, {"key"},
                                       {atom("d_id", FilterOp::Lt, Value::int64(9)),
                                        atom("d_w_id", FilterOp::Eq, Value::int64(2))}));
  CHECK(range.accepted.empty());
  CHECK(range.residual.size() == 2);
}

TEST_CASE("wide-column limit only applies to unfiltered scans") {
  Fixture fx;
  fx.load_district();
  const ForeignTableDef& t = fx.ddl(
      "CREATE FOREIGN TABLE cass.d2 (key text, d_name text) SERVER cassandra "
      "OPTIONS (cf 'district')",
      "cass", "d2");
  WideColumnWrapper w(fx.wide);

  ScanRequest req = request(t, {"key"});
  req.limit = 2;
  ScanPlan plan = w.plan_scan(req);
  CHECK(plan.limit_accepted);
  CHECK(plan.native_text == "SELECT key FROM district LIMIT 2");
  std::vector<Row> rows = drain(w, plan);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == Row{Value::text("0000100001")});  // store order is by key
  CHECK(rows[1] == Row{Value::text("0000100002")});

  req.filters.push_back(atom("d_name", FilterOp::Eq, Value::text("Center")));
  CHECK_FALSE(w.plan_scan(req).limit_accepted);
}

TEST_CASE("cell coercion failures name the row and column") {
  Fixture fx;
  std::istringstream in("key\td_next_o_id\nr1\t3001\nr2\tjunk\n");
  fx.wide.load_tsv("district", in);
  const ForeignTableDef& t = fx.ddl(
      "CREATE FOREIGN TABLE cass.d3 (key text, d_next_o_id int) SERVER cassandra "
      "OPTIONS (cf 'district')",
      "cass", "d3");
  WideColumnWrapper w(fx.wide);
  try {
    drain(w, w.plan_scan(request(t, {"d_next_o_id"})));
    FAIL("expected coercion failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Coercion);
    CHECK(std::string(e.what()).find("row 'r2'") != std::string::npos);
    CHECK(std::string(e.what()).find("d_next_o_id") != std::string::npos);
  }
}

TEST_CASE("masking the key capability still returns correct rows") {
  Fixture fx;
  fx.load_district();
  fx.ddl("CREATE FOREIGN TABLE cass.district (key text, d_id text, d_w_id text, "
         "d_name text, d_next_o_id text) SERVER cassandra OPTIONS (cf 'district')",
         "cass", "district");
  const ForeignTableDef& t = fx.ddl(kDistrictAlter, "cass", "district");

  ScanRequest req = request(t, {"d_id", "d_w_id", "d_name"},
                            {atom("d_id", FilterOp::Eq, Value::int64(1)),
                             atom("d_w_id", FilterOp::Eq, Value::int64(2))});

  WideColumnWrapper keyed(fx.wide);
  std::vector<Row> via_key = drain(keyed, keyed.plan_scan(req));

  WideColumnWrapper bare(fx.wide, WrapperCapabilities::none());
  ScanPlan plan = bare.plan_scan(req);
  CHECK(plan.residual.size() == 2);
  CHECK(plan.native_text == "SELECT * FROM district");
  std::vector<Row> via_scan = apply_residual(
      drain(bare, plan), scan_schema(t, plan.columns), plan.residual);
  CHECK(via_scan == via_key);
  CHECK(bare.stats().scans == 1);
  CHECK(bare.stats().rows_emitted == 3);
}

TEST_CASE("loader rejects malformed column-family files") {
  WideColumnStore store;
  std::istringstream noheader("");
  CHECK_THROWS_AS(store.load_tsv("x", noheader), Error);
  std::istringstream nokey("a\tb\n1\t2\n");
  CHECK_THROWS_AS(store.load_tsv("x", nokey), Error);
  std::istringstream shortrow("key\ta\nk1\t1\nk2\n");
  try {
    store.load_tsv("x", shortrow);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

// ---- key-value wrapper ----

TEST_CASE("key-value scans accept nothing and map only key and value") {
  Fixture fx;
  std::istringstream in("key\tvalue\nsess:1\talice\nsess:2\tbob\n");
  fx.kv.load_tsv("sessions", in);
  const ForeignTableDef& t = fx.ddl(
      "CREATE FOREIGN TABLE kv.sessions (k text OPTIONS (mname 'key'), "
      "v text OPTIONS (mname 'value'), extra text) SERVER redis "
      "OPTIONS (ns 'sessions')",
      "kv", "sessions");
  KvWrapper w(fx.kv);

  ScanRequest req = request(t, {"k", "v", "extra"},
                            {atom("k", FilterOp::Eq, Value::text("sess:2"))});
  ScanPlan plan = w.plan_scan(req);
  CHECK(plan.accepted.empty());
  CHECK(plan.residual.size() == 1);
  CHECK(plan.native_text == "SCAN sessions");
  CHECK(plan.est_rows == doctest::Approx(2.0));

  std::vector<Row> rows = drain(w, plan);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == Row{Value::text("sess:1"), Value::text("alice"), Value::null()});
  CHECK(rows[1] == Row{Value::text("sess:2"), Value::text("bob"), Value::null()});
  CHECK(w.stats().scans == 1);

  std::vector<Row> filtered =
      apply_residual(std::move(rows), scan_schema(t, plan.columns), plan.residual);
  REQUIRE(filtered.size() == 1);
  CHECK(filtered[0].at(1) == Value::text("bob"));
}

TEST_CASE("key-value loader enforces its header and typed values coerce") {
  KvStore store;
  std::istringstream bad("k\tv\n");
  CHECK_THROWS_AS(store.load_tsv("x", bad), Error);
  std::istringstream missing("key\tvalue\nonlykey\n");
  CHECK_THROWS_AS(store.load_tsv("x", missing), Error);

  Fixture fx;
  std::istringstream counts("key\tvalue\nhits\t42\n");
  fx.kv.load_tsv("counters", counts);
  const ForeignTableDef& t = fx.ddl(
      "CREATE FOREIGN TABLE kv.counters (k text OPTIONS (mname 'key'), "
      "n bigint OPTIONS (mname 'value')) SERVER redis OPTIONS (ns 'counters')",
      "kv", "counters");
  KvWrapper w(fx.kv);
  std::vector<Row> rows = drain(w, w.plan_scan(request(t, {"k", "n"})));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0] == Row{Value::text("hits"), Value::int64(42)});
}

// ---- backend factory ----

TEST_CASE("the backend factory wires stores to wrappers") {
  StoreBackend doc = StoreBackend::make(StoreKind::DocStore, true);
  CHECK(doc.doc != nullptr);
  CHECK(doc.wrapper->capabilities().filter_general);

  StoreBackend doc_off = StoreBackend::make(StoreKind::DocStore, false);
  CHECK_FALSE(doc_off.wrapper->capabilities().filter_general);

  StoreBackend wide = StoreBackend::make(StoreKind::WideColumn, true);
  CHECK(wide.wide != nullptr);
  CHECK(wide.wrapper->capabilities().filter_eq_on_key);
  CHECK_FALSE(wide.wrapper->capabilities().filter_general);
  CHECK_FALSE(wide.wrapper->capabilities().sort);

  StoreBackend kv = StoreBackend::make(StoreKind::Kv, true);
  CHECK(kv.kv != nullptr);
  CHECK_FALSE(kv.wrapper->capabilities().filter_eq_on_key);
  CHECK_FALSE(kv.wrapper->capabilities().limit);
}
