#include "modcl/report.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace modcl;

TEST_SUITE("report") {
  TEST_CASE("CSV parsing handles quoted fields") {
    const auto t = parse_csv("a,b,c\n1,\"x,\"\"y\"\"\",3\r\n4,,6\n");
    REQUIRE(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 2U);
    CHECK(t.rows[0][1] == "x,\"y\"");
    CHECK(t.rows[1][1].empty());
    CHECK(t.column("c") == 2U);
    CHECK_FALSE(t.column("d").has_value());
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(parse_csv("h\n" + csv_escape("q\"x,y") + "\n").rows[0][0] == "q\"x,y");
    CHECK_THROWS_AS(parse_csv("a,b\n1\n"), ReportError);
    CHECK_THROWS_AS(parse_csv("a\n\"open\n"), ReportError);
    CHECK_THROWS_AS(parse_csv(""), ReportError);
  }

  TEST_CASE("aggregation over seeds matches a two-pass computation") {
    Rng rng = make_stream(1, 0);
    std::vector<CsvTable> per_seed;
    std::vector<std::vector<double>> values(2);
    for (int seed = 0; seed < 5; ++seed) {
      CsvTable t;
      t.header = {"mode", "p", "seed", "acc_overall"};
      for (int g = 0; g < 2; ++g) {
        const double v = uniform(rng, 0.2, 0.9);
        values[static_cast<std::size_t>(g)].push_back(v);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        t.rows.push_back({g == 0 ? "random" : "semantic", "1", std::to_string(seed), buf});
      }
      per_seed.push_back(t);
    }
    const auto agg = aggregate(concat(per_seed), "acc_overall");
    CHECK(agg.group_columns == std::vector<std::string>{"mode", "p"});
    REQUIRE(agg.rows.size() == 2U);
    for (std::size_t g = 0; g < 2; ++g) {
      double mean = 0.0;
      for (double v : values[g]) mean += v;
      mean /= 5.0;
      double ss = 0.0;
      for (double v : values[g]) ss += (v - mean) * (v - mean);
      CHECK(agg.rows[g].n == 5U);
      CHECK(agg.rows[g].mean == doctest::Approx(mean).epsilon(1e-14));
      CHECK(agg.rows[g].stddev == doctest::Approx(std::sqrt(ss / 4.0)).epsilon(1e-12));
    }
    CHECK(agg.rows[0].key == std::vector<std::string>{"random", "1"});
    CHECK_FALSE(format_aggregate(agg).empty());
  }

  TEST_CASE("aggregation edge cases") {
    const auto t = parse_csv("epoch,seed,acc_overall\n0,0,\n0,1,0.5\n1,0,0.25\n");
    const auto agg = aggregate(t, "acc_overall", std::vector<std::string>{"epoch"});
    REQUIRE(agg.rows.size() == 2U);
    CHECK(agg.rows[0].n == 1U);
    CHECK(agg.rows[0].stddev == 0.0);
    CHECK_THROWS_AS(aggregate(t, "missing"), ReportError);
    CHECK_THROWS_AS(aggregate(parse_csv("seed,acc_overall\n0,abc\n"), "acc_overall"), ReportError);
  }

  TEST_CASE("tables with different headers are not combined") {
    const auto a = parse_csv("x,y\n1,2\n");
    const auto b = parse_csv("x,z\n1,2\n");
    CHECK_THROWS_AS(concat({a, b}), ReportError);
    CHECK(concat({a, a}).rows.size() == 2U);
  }

  TEST_CASE("run manifests list artifacts and refuse missing ones") {
    testing::TempDir dir("manifest");
    {
      std::ofstream(dir / "metrics.csv") << "h\n";
    }
    RunManifest m("pretrain", dir.path());
    m.set_config({{"tau", "0.07"}}, "abc123");
    m.add_artifact("metrics.csv");
    m.set("seed", "3");
    m.finish("ok");
    const auto kv = read_key_values(dir / kRunManifestFile);
    CHECK(kv.at("command") == "pretrain");
    CHECK(kv.at("status") == "ok");
    CHECK(kv.at("artifact.0") == "metrics.csv");
    CHECK(kv.at("config.tau") == "0.07");
    CHECK(kv.count("source_revision") == 1);
    CHECK(kv.count("platform") == 1);
    CHECK(sibling_fingerprint(dir / "metrics.csv") == "abc123");

    RunManifest bad("pretrain", dir.path() / "other");
    bad.add_artifact("nothing.csv");
    CHECK_THROWS_AS(bad.finish("ok"), ReportError);
    CHECK_FALSE(sibling_fingerprint(dir / "other" / "x.csv").has_value());
  }

  TEST_CASE("timestamps") {
    const auto t = std::chrono::system_clock::time_point{} + std::chrono::seconds(86400 + 3661);
    CHECK(utc_timestamp(t, true) == "19700102T010101Z");
  }
}
