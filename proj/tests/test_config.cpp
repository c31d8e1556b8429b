#include "modcl/config.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>

using namespace modcl;

namespace {

KeyValueMap as_map(const KeyValueList& list) { return {list.begin(), list.end()}; }

bool mentions(const ConfigError& e, const std::string& key) {
  return std::any_of(e.issues().begin(), e.issues().end(),
                     [&](const std::string& issue) { return issue.rfind(key + ":", 0) == 0; });
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults describe the full-scale setup") {
    const ExperimentConfig c;
    CHECK(c.tau == 0.07);
    CHECK(c.learning_rate == 1e-3);
    CHECK(c.batch_size == 256);
    CHECK(c.pretrain_epochs == 240);
    CHECK(c.seeds.size() == 5U);
    CHECK(c.synth.length == 128);
    CHECK(c.encoder.feature_dim == 64);
    CHECK(c.projector.out_dim == 128);
    CHECK(c.method == Method::ModCl);
    CHECK(c.tiers.ac);
    CHECK(c.tiers.sc);
    CHECK(c.tiers.jc);
    CHECK_FALSE(c.symmetric_anchors);
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("desk preset") {
    const auto c = ExperimentConfig::desk_scale();
    CHECK(c.batch_size == 64);
    CHECK(c.pretrain_epochs == 30);
    CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2});
    CHECK(c.split.label_budget == 5);
    CHECK(c.synth.schemes.size() == 4U);
    CHECK(c.synth.snr_db == std::vector<double>{0.0, 10.0});
    CHECK(c.synth.per_cell * 8 == 2000);
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("every offending key is reported at once") {
    const KeyValueMap kv{{"tau", "-1"}, {"batch_size", "0"}, {"nope", "1"}, {"learning_rate", "abc"},
                         {"divergence.factor", "1"}};
    try {
      apply_config(ExperimentConfig{}, kv);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(mentions(e, "tau"));
      CHECK(mentions(e, "batch_size"));
      CHECK(mentions(e, "nope"));
      CHECK(mentions(e, "learning_rate"));
      CHECK(mentions(e, "divergence.factor"));
      CHECK(std::string(e.what()).find('\n') == std::string::npos);
    }
  }

  TEST_CASE("serialization round trips through apply_config") {
    ExperimentConfig c = ExperimentConfig::desk_scale();
    c.tau = 0.1;
    c.segment_length = 16;
    c.tiers.sc = false;
    c.method = Method::InstanceBaseline;
    c.corruption.mode = CorruptionMode::Semantic;
    c.corruption.p = 0.35;
    c.synth.options.rolloff = 0.35;
    const auto list = serialize_config(c);
    const auto back = apply_config(ExperimentConfig{}, as_map(list));
    CHECK(serialize_config(back) == list);
    CHECK(back.tau == 0.1);
    CHECK(back.segment_length == 16);
    CHECK_FALSE(back.tiers.sc);
    CHECK(back.corruption.p == 0.35);
    for (const auto& [k, v] : list) CHECK(v.find("0000000") == std::string::npos);
  }

  TEST_CASE("every serialized key is accepted") {
    const auto keys = config_keys();
    for (const auto& [k, v] : serialize_config(ExperimentConfig{})) {
      CAPTURE(k);
      CHECK(std::find(keys.begin(), keys.end(), k) != keys.end());
    }
  }

  TEST_CASE("fingerprint ignores seeds only") {
    ExperimentConfig a;
    ExperimentConfig b = a;
    b.seeds = {7};
    CHECK(config_fingerprint(a) == config_fingerprint(b));
    b.tau = 0.2;
    CHECK(config_fingerprint(a) != config_fingerprint(b));
  }

  TEST_CASE("config files layer over a base") {
    testing::TempDir dir("cfg");
    {
      std::ofstream out(dir / "run.cfg");
      out << "# desk overrides\ntau = 0.2\nmethod = random-init\nseeds = 3,4\n";
    }
    const auto c = load_config(dir / "run.cfg", ExperimentConfig::desk_scale());
    CHECK(c.tau == 0.2);
    CHECK(c.method == Method::RandomInit);
    CHECK(c.seeds == std::vector<std::uint64_t>{3, 4});
    CHECK(c.batch_size == 64);
    CHECK_THROWS_AS(load_config(dir / "missing.cfg", ExperimentConfig{}), ConfigError);
  }

  TEST_CASE("the synthetic dataset follows the config grid") {
    ExperimentConfig c;
    c.synth.schemes = {SchemeId::BPSK, SchemeId::QPSK};
    c.synth.snr_db = {0.0};
    c.synth.per_cell = 3;
    c.synth.length = 16;
    const auto ds = prepare_dataset(c);
    CHECK(ds.size() == 6U);
    CHECK(ds.length() == 16);
    CHECK(ds.num_classes() == 2);
  }
}
