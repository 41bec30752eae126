#include <atomic>
#include <catch_amalgamated.hpp>

#include "netcare/core.hpp"

using namespace netcare;

TEST_CASE("dates parse, format and reject impossible days", "[core]") {
  const auto d = parse_date("2016-08-29");
  CHECK(format_date(d) == "2016-08-29");
  CHECK(to_timestamp(d) == 1472428800);
  CHECK_FALSE(try_parse_date("2016-02-30"));
  CHECK_FALSE(try_parse_date("2016-8-29"));
  CHECK(try_parse_date("2016-02-29"));
  CHECK_THROWS_AS(parse_date("bogus"), ConfigError);
}

TEST_CASE("datetimes accept T, space, seconds and Z", "[core]") {
  const Timestamp base = 1472428800;
  CHECK(try_parse_datetime("2016-08-29T00:01") == base + 60);
  CHECK(try_parse_datetime("2016-08-29 13:05:07") == base + 13 * 3600 + 5 * 60 + 7);
  CHECK(try_parse_datetime("2016-08-29T13:05Z") == base + 13 * 3600 + 5 * 60);
  CHECK_FALSE(try_parse_datetime("2016-08-29T24:00"));
  CHECK_FALSE(try_parse_datetime("2016-08-29"));
  CHECK(format_minute(base + 13 * 3600 + 5 * 60 + 59) == "2016-08-29T13:05");
  CHECK(format_minute(-60) == "1969-12-31T23:59");
}

TEST_CASE("field splitting trims and keeps empty fields", "[core]") {
  const auto f = split_fields(" a ,,b\r", ',');
  REQUIRE(f.size() == 3);
  CHECK(f[0] == "a");
  CHECK(f[1].empty());
  CHECK(f[2] == "b");
}

TEST_CASE("numbers parse strictly", "[core]") {
  CHECK(parse_number<int>("+42") == 42);
  CHECK_FALSE(parse_number<int>("42x"));
  CHECK_FALSE(parse_number<double>(""));
  CHECK(parse_number<double>("1e-3") == 1e-3);
}

TEST_CASE("format_double round-trips", "[core]") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125}) CHECK(parse_number<double>(format_double(v)) == v);
}

TEST_CASE("fnv1a matches reference vectors", "[core]") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("derived seeds are deterministic and distinct", "[core]") {
  CHECK(derive_seed(7, 1) == derive_seed(7, 1));
  CHECK(derive_seed(7, 1) != derive_seed(7, 2));
  CHECK(derive_seed(7, 1, 2) != derive_seed(7, 2, 1));
}

TEST_CASE("parallel_for visits every index once and rethrows", "[core]") {
  for (unsigned threads : {1u, 3u, 8u}) {
    std::vector<std::atomic<int>> hits(101);
    parallel_for(hits.size(), threads, [&](std::size_t k) { ++hits[k]; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
  CHECK_THROWS_AS(parallel_for(10, 4, [](std::size_t k) {
                    if (k == 7) throw DataError("boom");
                  }),
                  DataError);
}

TEST_CASE("errors carry their kind", "[core]") {
  CHECK(ConfigError("x").kind() == ErrorKind::config);
  CHECK(BudgetError("x").kind() == ErrorKind::budget);
  const SchemaError s("bad", 12);
  CHECK(s.kind() == ErrorKind::data);
  CHECK(s.line() == 12);
  CHECK(std::string(s.what()).find("line 12") != std::string::npos);
  const ArtifactError a("graph", "missing");
  CHECK(a.stage() == "graph");
}
