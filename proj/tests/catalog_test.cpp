#include "polyqe/catalog.hpp"

#include <cstdio>
#include <fstream>
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
OPTIONS (collection 'CUSTOMER', db 'tpcc', host 'mongo',
 auth_db 'admin', user '...', password '...',
 pipe '[{"$unwind": "$ORDERS"}]'
);)";

const char* kDistrictAlter = R"(ALTER FOREIGN TABLE cass.district
  ALTER COLUMN key OPTIONS (composite
   'd_id,d_w_id:str(d_id).zfill(5)+str(d_w_id).zfill(5)'),
  ALTER COLUMN d_id TYPE SMALLINT,
  ALTER COLUMN d_w_id TYPE SMALLINT;)";

Catalog with_servers() {
  Catalog cat;
  cat.add_server({"ymdbserver", StoreKind::DocStore, {{"host", "mongo"}}});
  cat.add_server({"cassandra", StoreKind::WideColumn, {}});
  cat.add_server({"redis", StoreKind::Kv, {}});
  return cat;
}

void create_district(Catalog& cat) {
  cat.apply_ddl(sql::parse(
      "CREATE FOREIGN TABLE cass.district (key text, d_id text, d_w_id text, "
      "d_name text, d_next_o_id text) SERVER cassandra OPTIONS (cf 'district')"));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempFile {
  std::string path;
  explicit TempFile(const char* name) : path(std::string("/tmp/pqe_cat_") + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("create foreign table registers schema, options, and pipe") {
  Catalog cat = with_servers();
  std::string summary = cat.apply_ddl(sql::parse(kOrdersCreate));
  CHECK(summary == "created foreign table ymdb.orders");

  const ForeignTableDef* t = cat.table("ymdb", "orders");
  REQUIRE(t != nullptr);
  CHECK(t->server == "ymdbserver");
  REQUIRE(t->rel_schema.columns.size() == 8);
  CHECK(t->rel_schema.columns[0].name == "o_all_local");
  CHECK(t->rel_schema.columns[0].type == ScalarType::Numeric);
  CHECK(*t->rel_schema.columns[0].option("mname") == "ORDERS.O_ALL_LOCAL");
  CHECK(t->rel_schema.columns[2].type == ScalarType::Timestamp);
  CHECK(*t->option("collection") == "CUSTOMER");
  CHECK(*t->option("db") == "tpcc");
  CHECK(*t->option("pipe") == R"([{"$unwind": "$ORDERS"}])");
  CHECK(t->mapped_name(t->rel_schema.columns[7]) == "C_W_ID");
  CHECK_FALSE(t->composite.has_value());
}

TEST_CASE("alter installs a composite key and retypes columns") {
  Catalog cat = with_servers();
  create_district(cat);
  cat.apply_ddl(sql::parse(kDistrictAlter));

  const ForeignTableDef* t = cat.table("cass", "district");
  REQUIRE(t != nullptr);
  REQUIRE(t->composite.has_value());
  CHECK(t->composite_column == "key");
  CHECK(t->composite->columns == std::vector<std::string>{"d_id", "d_w_id"});
  CHECK(t->rel_schema.column("d_id")->type == ScalarType::SmallInt);
  CHECK(t->rel_schema.column("d_w_id")->type == ScalarType::SmallInt);
  CHECK(t->rel_schema.column("key")->type == ScalarType::Text);
}

TEST_CASE("ddl validation errors") {
  Catalog cat = with_servers();
  create_district(cat);

  auto fails_with = [&](const char* ddl, const char* needle) {
    try {
      cat.apply_ddl(sql::parse(ddl));
      FAIL_CHECK("expected an error for: ", ddl);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Catalog);
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  fails_with("CREATE FOREIGN TABLE t (a text) SERVER nosuch", "unknown server");
  fails_with(
      "CREATE FOREIGN TABLE cass.district (a text) SERVER cassandra",
      "already exists");
  fails_with("ALTER FOREIGN TABLE cass.district ALTER COLUMN nope TYPE INT",
             "unknown column");
  fails_with("ALTER FOREIGN TABLE no.tbl ALTER COLUMN a TYPE INT", "unknown table");
  fails_with("DROP FOREIGN TABLE no.tbl", "unknown table");
  // A pipe must parse and is a document-store feature.
  fails_with("CREATE FOREIGN TABLE ymdb.bad (a text) SERVER ymdbserver "
             "OPTIONS (pipe 'not json')",
             "invalid 'pipe'");
  fails_with("CREATE FOREIGN TABLE cass.bad (a text) SERVER cassandra "
             "OPTIONS (pipe '[]')",
             "only valid on document-store");
  // Composite specs must parse and reference declared columns.
  fails_with("ALTER FOREIGN TABLE cass.district ALTER COLUMN key OPTIONS "
             "(composite 'nope')",
             "invalid 'composite'");
  fails_with("ALTER FOREIGN TABLE cass.district ALTER COLUMN key OPTIONS "
             "(composite 'ghost:str(ghost)')",
             "unknown column 'ghost'");
  // A failed multi-action ALTER leaves the table untouched.
  CHECK(cat.table("cass", "district")->rel_schema.column("d_id")->type == ScalarType::Text);
}

TEST_CASE("alter is atomic across actions") {
  Catalog cat = with_servers();
  create_district(cat);
  try {
    cat.apply_ddl(sql::parse("ALTER FOREIGN TABLE cass.district "
                             "ALTER COLUMN d_id TYPE SMALLINT, "
                             "ALTER COLUMN nope TYPE INT"));
    FAIL("expected failure");
  } catch (const Error&) {
  }
  CHECK(cat.table("cass", "district")->rel_schema.column("d_id")->type == ScalarType::Text);
}

TEST_CASE("drop checks view dependencies") {
  Catalog cat = with_servers();
  create_district(cat);
  MatViewDef v;
  v.name = "district_snapshot";
  v.query = std::get<sql::SelectStmt>(sql::parse("SELECT d_name FROM cass.district")).query;
  cat.add_view(std::move(v));

  CHECK_THROWS_AS(cat.apply_ddl(sql::parse("DROP FOREIGN TABLE cass.district")), Error);
  cat.drop_view("district_snapshot");
  cat.apply_ddl(sql::parse("DROP FOREIGN TABLE cass.district"));
  CHECK(cat.table("cass", "district") == nullptr);
}

TEST_CASE("resolution rules") {
  Catalog cat = with_servers();
  create_district(cat);
  cat.apply_ddl(sql::parse(kOrdersCreate));
  cat.apply_ddl(
      sql::parse("CREATE FOREIGN TABLE other.district (x text) SERVER redis"));

  CHECK(cat.resolve({"cass", "district"}).table->server == "cassandra");
  CHECK(cat.resolve({"", "orders"}).table != nullptr);  // unique across schemas
  CHECK_THROWS_AS(cat.resolve({"", "district"}), Error);  // ambiguous
  CHECK_THROWS_AS(cat.resolve({"", "nothing"}), Error);
  CHECK_THROWS_AS(cat.resolve({"wrong", "orders"}), Error);

  MatViewDef v;
  v.name = "orders";  // a view shadows same-named tables for unqualified use
  v.query = std::get<sql::SelectStmt>(sql::parse("SELECT d_name FROM cass.district")).query;
  cat.add_view(std::move(v));
  CHECK(cat.resolve({"", "orders"}).view != nullptr);
  CHECK(cat.resolve({"ymdb", "orders"}).table != nullptr);
}

TEST_CASE("save and load round-trip") {
  Catalog cat = with_servers();
  create_district(cat);
  cat.apply_ddl(sql::parse(kDistrictAlter));
  cat.apply_ddl(sql::parse(kOrdersCreate));
  MatViewDef v;
  v.name = "recent";
  v.query =
      std::get<sql::SelectStmt>(
          sql::parse("SELECT o_id FROM ymdb.orders WHERE o_w_id = 1 ORDER BY o_id DESC"))
          .query;
  v.refresh_every_secs = 60;
  v.last_refreshed_micros = 1700000000000000;
  cat.add_view(std::move(v));

  TempFile f1("round1.json"), f2("round2.json");
  cat.save(f1.path);
  Catalog loaded = Catalog::load(f1.path);
  loaded.save(f2.path);
  CHECK(slurp(f1.path) == slurp(f2.path));

  CHECK(loaded.servers().size() == 3);
  const ForeignTableDef* t = loaded.table("cass", "district");
  REQUIRE(t != nullptr);
  REQUIRE(t->composite.has_value());
  CHECK(t->composite->source == "d_id,d_w_id:str(d_id).zfill(5)+str(d_w_id).zfill(5)");
  REQUIRE(loaded.views().size() == 1);
  CHECK(loaded.views()[0].refresh_every_secs == 60);
  CHECK(loaded.views()[0].last_refreshed_micros == 1700000000000000);
  CHECK(sql::render(loaded.views()[0].query) == sql::render(cat.views()[0].query));
}

TEST_CASE("load failures") {
  TempFile f("bad.json");
  {
    std::ofstream out(f.path);
    out << "{ this is not json";
  }
  try {
    Catalog::load(f.path);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }
  {
    std::ofstream out(f.path);
    out << R"({"version": 99, "servers": [], "tables": [], "views": []})";
  }
  CHECK_THROWS_AS(Catalog::load(f.path), Error);
  CHECK_THROWS_AS(Catalog::load("/nonexistent/dir/cat.json"), Error);
}

TEST_CASE("random ddl sequences survive persistence") {
  std::mt19937_64 rng(20240819);
  TempFile f1("prop1.json"), f2("prop2.json");
  for (int trial = 0; trial < 20; ++trial) {
    Catalog cat = with_servers();
    int tables = 0;
    for (int step = 0; step < 12; ++step) {
      int action = static_cast<int>(rng() % 3);
      std::string name = "t" + std::to_string(rng() % 6);
      try {
        if (action == 0) {
          std::string ddl = "CREATE FOREIGN TABLE s." + name +
                            " (a int OPTIONS (mname 'A'), b text) SERVER ymdbserver" +
                            (rng() % 2 == 0 ? " OPTIONS (collection 'C', db 'd')" : "");
          cat.apply_ddl(sql::parse(ddl));
          ++tables;
        } else if (action == 1) {
          cat.apply_ddl(sql::parse("ALTER FOREIGN TABLE s." + name +
                                   " ALTER COLUMN a TYPE BIGINT, ALTER COLUMN b OPTIONS "
                                   "(mname 'B2')"));
        } else {
          cat.apply_ddl(sql::parse("DROP FOREIGN TABLE s." + name));
          --tables;
        }
      } catch (const Error&) {
        // Redundant creates/drops are expected in a random walk.
      }
    }
    cat.save(f1.path);
    Catalog loaded = Catalog::load(f1.path);
    loaded.save(f2.path);
    REQUIRE(slurp(f1.path) == slurp(f2.path));
  }
}
