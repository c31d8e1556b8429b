#include "modcl/dataset_io.hpp"
#include "modcl/kv.hpp"
#include "modcl/pickle.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

using namespace modcl;
namespace fs = std::filesystem;

namespace {

Dataset small_dataset(int per_cell = 10, std::uint64_t seed = 3) {
  std::vector<ModulationScheme> schemes{make_scheme(SchemeId::BPSK), make_scheme(SchemeId::QAM16),
                                        make_scheme(SchemeId::GFSK)};
  const std::vector<double> snr{-4.0, 6.0};
  auto ds = synth_dataset(schemes, snr, per_cell, 32, seed);
  ds.class_names = {"BPSK", "QAM16", "GFSK"};
  return ds;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void replace_in_file(const fs::path& p, const std::string& from, const std::string& to) {
  std::string text;
  {
    const auto bytes = slurp(p);
    text.assign(bytes.begin(), bytes.end());
  }
  const auto at = text.find(from);
  REQUIRE(at != std::string::npos);
  text.replace(at, from.size(), to);
  std::ofstream(p, std::ios::binary | std::ios::trunc) << text;
}

// value = 100*m + snr + k/4 + r/8 + t/128, m = sorted class position
float fixture_value(int m, int snr, int k, int r, int t) {
  return static_cast<float>(100 * m + snr + k / 4.0 + r / 8.0 + t / 128.0);
}

}  // namespace

TEST_SUITE("dataset_io") {
  TEST_CASE("key=value text round trips and rejects malformed lines") {
    const KeyValueList kv{{"a", "1"}, {"b.c", "x=y"}, {"empty", ""}};
    const auto parsed = parse_key_values(format_key_values(kv));
    CHECK(parsed.at("a") == "1");
    CHECK(parsed.at("b.c") == "x=y");
    CHECK(parsed.at("empty").empty());
    CHECK(parse_key_values("# comment\n\nk=v\n").size() == 1);
    CHECK_THROWS_AS(parse_key_values("no separator\n"), KeyValueError);
    CHECK_THROWS_AS(parse_key_values("k=1\nk=2\n"), KeyValueError);
  }

  TEST_CASE("container round trip is bit exact") {
    testing::TempDir dir("io");
    const auto ds = small_dataset();
    save_dataset(ds, dir.path());
    const auto back = load_dataset(dir.path());
    REQUIRE(back.size() == ds.size());
    CHECK(back.class_names == ds.class_names);
    CHECK(back.snr_levels == ds.snr_levels);
    CHECK(back.creation_seed == ds.creation_seed);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      CHECK(back.instances[i].samples == ds.instances[i].samples);
      CHECK(back.instances[i].label() == ds.instances[i].label());
      CHECK(back.instances[i].snr_db == ds.instances[i].snr_db);
    }
    const auto m = read_manifest(dir.path());
    CHECK(m.num_instances == ds.size());
    CHECK(m.length == 32);
  }

  TEST_CASE("binary files follow the documented layout") {
    testing::TempDir dir("layout");
    const auto ds = small_dataset(2);
    save_dataset(ds, dir.path());
    const auto samples = slurp(dir / "samples.f32");
    const auto labels = slurp(dir / "labels.i32");
    const auto snr = slurp(dir / "snr.i16");
    const std::size_t n = ds.size(), t_len = 32;
    REQUIRE(samples.size() == n * 2 * t_len * 4);
    REQUIRE(labels.size() == n * 4);
    REQUIRE(snr.size() == n * 2);
    auto le32 = [](const char* p) {
      const auto* u = reinterpret_cast<const unsigned char*>(p);
      return static_cast<std::uint32_t>(u[0]) | (static_cast<std::uint32_t>(u[1]) << 8) |
             (static_cast<std::uint32_t>(u[2]) << 16) | (static_cast<std::uint32_t>(u[3]) << 24);
    };
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t t = 0; t < t_len; ++t) {
          const std::uint32_t bits = le32(&samples[((i * 2 + r) * t_len + t) * 4]);
          float v;
          std::memcpy(&v, &bits, 4);
          CHECK(v == ds.instances[i].samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)));
        }
      }
      CHECK(static_cast<std::int32_t>(le32(&labels[i * 4])) == ds.instances[i].label());
      const auto* u = reinterpret_cast<const unsigned char*>(&snr[i * 2]);
      const auto s = static_cast<std::int16_t>(u[0] | (u[1] << 8));
      CHECK(s == static_cast<int>(ds.instances[i].snr_db));
    }
  }

  TEST_CASE("damaged containers are rejected with specific errors") {
    testing::TempDir dir("damage");
    const auto ds = small_dataset(2);
    save_dataset(ds, dir.path());
    SUBCASE("version") {
      replace_in_file(dir / "manifest.txt", "version=1", "version=7");
      CHECK_THROWS_AS(load_dataset(dir.path()), VersionMismatchError);
    }
    SUBCASE("truncated samples") {
      fs::resize_file(dir / "samples.f32", fs::file_size(dir / "samples.f32") - 4);
      CHECK_THROWS_AS(load_dataset(dir.path()), TruncatedFileError);
    }
    SUBCASE("oversized labels") {
      std::ofstream(dir / "labels.i32", std::ios::binary | std::ios::app) << "xxxx";
      CHECK_THROWS_AS(load_dataset(dir.path()), ManifestError);
    }
    SUBCASE("missing key") {
      replace_in_file(dir / "manifest.txt", "num_instances=", "count=");
      CHECK_THROWS_AS(load_dataset(dir.path()), ManifestError);
    }
    SUBCASE("label out of range") {
      std::fstream f(dir / "labels.i32", std::ios::binary | std::ios::in | std::ios::out);
      const char bad[4] = {9, 0, 0, 0};
      f.write(bad, 4);
      f.close();
      CHECK_THROWS_AS(load_dataset(dir.path()), ManifestError);
    }
    SUBCASE("missing file") {
      fs::remove(dir / "snr.i16");
      CHECK_THROWS_AS(load_dataset(dir.path()), DatasetIoError);
    }
  }

  TEST_CASE("stratified split partitions every cell by the declared ratios") {
    const auto ds = small_dataset(10);
    const auto split = stratified_split(ds, SplitSpec{});
    CHECK(split.train.size() == 6 * 6);
    CHECK(split.val.size() == 6 * 1);
    CHECK(split.test.size() == 6 * 3);
    std::set<std::size_t> all;
    for (const auto* part : {&split.train, &split.val, &split.test}) {
      for (auto i : *part) CHECK(all.insert(i).second);
    }
    CHECK(all.size() == ds.size());
    CHECK(split.labeled == split.train);
    CHECK_FALSE(split.budget_shortfall);
    for (int c = 0; c < 3; ++c) {
      for (double snr : {-4.0, 6.0}) {
        int n = 0;
        for (auto i : split.test) n += ds.instances[i].label() == c && ds.instances[i].snr_db == snr;
        CHECK(n == 3);
      }
    }
    const auto again = stratified_split(ds, SplitSpec{});
    CHECK(again.train == split.train);
    SplitSpec other;
    other.split_seed = 5;
    CHECK(stratified_split(ds, other).train != split.train);
  }

  TEST_CASE("label budget takes N per class and SNR from the train split") {
    const auto ds = small_dataset(10);
    SplitSpec spec;
    spec.label_budget = 4;
    const auto split = stratified_split(ds, spec);
    CHECK(split.labeled.size() == 6 * 4);
    const std::set<std::size_t> train(split.train.begin(), split.train.end());
    std::map<std::pair<int, int>, int> per_cell;
    for (auto i : split.labeled) {
      CHECK(train.count(i) == 1);
      ++per_cell[{ds.instances[i].label(), static_cast<int>(ds.instances[i].snr_db)}];
    }
    for (const auto& [cell, n] : per_cell) CHECK(n == 4);
    spec.label_budget = 9;
    CHECK(stratified_split(ds, spec).budget_shortfall);
  }

  TEST_CASE("split preconditions") {
    const auto ds = small_dataset(10);
    SplitSpec bad;
    bad.train = 0.7;
    CHECK_THROWS(stratified_split(ds, bad));
    SplitSpec zero;
    zero.label_budget = 0;
    CHECK_THROWS(stratified_split(ds, zero));
    SplitSpec budget;
    budget.label_budget = 1;
    CHECK_THROWS_AS(stratified_split(small_dataset(3), budget), InsufficientCellError);
  }

  TEST_CASE("RadioML archives decode across pickle protocols") {
    for (const char* name : {"radioml_p2.pkl", "radioml_p4.pkl", "radioml_p5.pkl", "radioml_py2.pkl",
                             "radioml_f64.pkl"}) {
      CAPTURE(name);
      const auto ds = read_radioml_archive(testing::data_dir() / name);
      CHECK(ds.class_names == std::vector<std::string>{"BPSK", "QPSK"});
      CHECK(ds.snr_levels == std::vector<int>{-2, 4});
      REQUIRE(ds.size() == 12);
      CHECK(ds.length() == 8);
      std::size_t i = 0;
      for (int m = 0; m < 2; ++m) {
        for (int snr : {-2, 4}) {
          for (int k = 0; k < 3; ++k, ++i) {
            const auto& x = ds.instances[i];
            CHECK(x.label() == m);
            CHECK(x.snr_db == snr);
            CHECK(x.instance_id == i);
            for (int r = 0; r < 2; ++r) {
              for (int t = 0; t < 8; ++t) CHECK(x.samples(r, t) == fixture_value(m, snr, k, r, t));
            }
          }
        }
      }
    }
  }

  TEST_CASE("converted archives load as native containers") {
    testing::TempDir dir("convert");
    convert_radioml_archive(testing::data_dir() / "radioml_p4.pkl", dir.path());
    const auto ds = load_dataset(dir.path());
    CHECK(ds.size() == 12);
    CHECK(ds.instances[7].samples(1, 3) == fixture_value(1, -2, 1, 1, 3));
  }

  TEST_CASE("two keys with three records give six instances") {
    const auto ds = read_radioml_archive(testing::data_dir() / "radioml_mini.pkl");
    CHECK(ds.size() == 6);
    CHECK(ds.class_names == std::vector<std::string>{"BPSK", "QPSK"});
    CHECK(ds.snr_levels == std::vector<int>{0});
  }

  TEST_CASE("an archive with the RML2016.10A key layout converts to 11 classes and 20 SNR levels") {
    testing::TempDir dir("rml_layout");
    convert_radioml_archive(testing::data_dir() / "radioml_2016_layout.pkl", dir.path());
    const auto m = read_manifest(dir.path());
    CHECK(m.class_names.size() == 11);
    REQUIRE(m.snr_levels.size() == 20);
    for (int i = 0; i < 20; ++i) CHECK(m.snr_levels[static_cast<std::size_t>(i)] == -20 + 2 * i);
    CHECK(m.num_instances == 220);
    CHECK(m.class_names.front() == "8PSK");
    CHECK(m.class_names.back() == "WBFM");
  }

  TEST_CASE("malformed archives are rejected") {
    CHECK_THROWS_AS(read_radioml_archive(testing::data_dir() / "radioml_bad_shape.pkl"), DatasetIoError);
    CHECK_THROWS_AS(read_radioml_archive(testing::data_dir() / "missing.pkl"), DatasetIoError);
    testing::TempDir dir("badpkl");
    std::ofstream(dir / "junk.pkl", std::ios::binary) << "\x80\x04not a pickle";
    CHECK_THROWS_AS(read_radioml_archive(dir / "junk.pkl"), DatasetIoError);
  }

  TEST_CASE("pickle reader handles basic values") {
    // pickle.dumps({'a': [1, 2.5, None, True], 'b': (b'xy', 'z')}, protocol=3)
    const std::uint8_t bytes[] = {
        0x80, 0x03, '}', 'q', 0x00, '(', 'X', 0x01, 0x00, 0x00, 0x00, 'a', 'q', 0x01, ']', 'q', 0x02,
        '(', 'K', 0x01, 'G', 0x40, 0x04, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 'N', 0x88, 'e', 'X', 0x01,
        0x00, 0x00, 0x00, 'b', 'q', 0x03, 'C', 0x02, 'x', 'y', 'q', 0x04, 'X', 0x01, 0x00, 0x00, 0x00,
        'z', 'q', 0x05, 0x86, 'q', 0x06, 'u', '.'};
    const auto v = pickle::load(bytes);
    REQUIRE(v->kind == pickle::Value::Kind::Dict);
    REQUIRE(v->entries.size() == 2);
    const auto& list = *v->entries[0].second;
    REQUIRE(list.kind == pickle::Value::Kind::List);
    REQUIRE(list.items.size() == 4);
    CHECK(list.items[0]->integer == 1);
    CHECK(list.items[1]->real == 2.5);
    CHECK(list.items[2]->kind == pickle::Value::Kind::None);
    CHECK(list.items[3]->kind == pickle::Value::Kind::Bool);
    const auto& tup = *v->entries[1].second;
    CHECK(tup.items[0]->kind == pickle::Value::Kind::Bytes);
    CHECK(tup.items[0]->text == "xy");
    CHECK(tup.items[1]->text == "z");
  }
}
