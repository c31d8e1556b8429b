#include "modcl/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace modcl {
namespace {

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  return out;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument("not a finite number");
  return v;
}

long long to_int(const std::string& s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("not an integer");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("not an unsigned integer");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("expected true/false");
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string fmt_doubles(const std::vector<double>& v) {
  std::vector<std::string> s;
  for (double d : v) s.push_back(fmt(d));
  return join(s, ",");
}

std::string fmt_seeds(const std::vector<std::uint64_t>& v) {
  std::vector<std::string> s;
  for (auto d : v) s.push_back(std::to_string(d));
  return join(s, ",");
}

std::string tiers_name(const TierMask& m) {
  std::vector<std::string> s;
  if (m.ac) s.emplace_back("ac");
  if (m.sc) s.emplace_back("sc");
  if (m.jc) s.emplace_back("jc");
  return s.empty() ? "none" : join(s, ",");
}

TierMask parse_tiers(const std::string& text) {
  TierMask m{false, false, false};
  if (text == "all") return {};
  for (const auto& t : split_list(text)) {
    if (t == "ac") m.ac = true;
    else if (t == "sc") m.sc = true;
    else if (t == "jc") m.jc = true;
    else throw std::invalid_argument("unknown loss term '" + t + "'");
  }
  return m;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data.dir", [](ExperimentConfig& c, const std::string& v) { c.data_dir = v; }},
      {"synth.schemes", [](ExperimentConfig& c, const std::string& v) {
         c.synth.schemes.clear();
         for (const auto& s : split_list(v)) c.synth.schemes.push_back(scheme_id_from_name(s));
       }},
      {"synth.snr_db", [](ExperimentConfig& c, const std::string& v) {
         c.synth.snr_db.clear();
         for (const auto& s : split_list(v)) c.synth.snr_db.push_back(to_double(s));
       }},
      {"synth.per_cell", [](ExperimentConfig& c, const std::string& v) { c.synth.per_cell = static_cast<int>(to_int(v)); }},
      {"synth.length", [](ExperimentConfig& c, const std::string& v) { c.synth.length = static_cast<int>(to_int(v)); }},
      {"synth.seed", [](ExperimentConfig& c, const std::string& v) { c.synth.seed = to_u64(v); }},
      {"synth.pulse", [](ExperimentConfig& c, const std::string& v) {
         if (v == "rrc") c.synth.options.pulse = PulseShape::RootRaisedCosine;
         else if (v == "rect") c.synth.options.pulse = PulseShape::Rectangular;
         else throw std::invalid_argument("expected rrc or rect");
       }},
      {"synth.sps", [](ExperimentConfig& c, const std::string& v) { c.synth.options.samples_per_symbol = static_cast<int>(to_int(v)); }},
      {"synth.rolloff", [](ExperimentConfig& c, const std::string& v) { c.synth.options.rolloff = to_double(v); }},
      {"synth.random_phase", [](ExperimentConfig& c, const std::string& v) { c.synth.options.random_phase = to_bool(v); }},
      {"synth.random_timing", [](ExperimentConfig& c, const std::string& v) { c.synth.options.random_timing = to_bool(v); }},
      {"synth.max_freq_offset", [](ExperimentConfig& c, const std::string& v) { c.synth.options.max_freq_offset = to_double(v); }},
      {"synth.fading", [](ExperimentConfig& c, const std::string& v) {
         if (v == "none") c.synth.options.fading = Fading::None;
         else if (v == "rayleigh") c.synth.options.fading = Fading::SingleTapRayleigh;
         else throw std::invalid_argument("expected none or rayleigh");
       }},
      {"split.train", [](ExperimentConfig& c, const std::string& v) { c.split.train = to_double(v); }},
      {"split.val", [](ExperimentConfig& c, const std::string& v) { c.split.val = to_double(v); }},
      {"split.test", [](ExperimentConfig& c, const std::string& v) { c.split.test = to_double(v); }},
      {"split.seed", [](ExperimentConfig& c, const std::string& v) { c.split.split_seed = to_u64(v); }},
      {"label_budget", [](ExperimentConfig& c, const std::string& v) {
         if (v == "all") c.split.label_budget.reset();
         else c.split.label_budget = static_cast<int>(to_int(v));
       }},
      {"augment.set", [](ExperimentConfig& c, const std::string& v) {
         c.view1.enabled = c.view2.enabled = parse_augmentation_set(v);
       }},
      {"augment.prob", [](ExperimentConfig& c, const std::string& v) { c.view1.activation_prob = c.view2.activation_prob = to_double(v); }},
      {"augment.mask_min", [](ExperimentConfig& c, const std::string& v) { c.view1.mask_fraction_range.first = c.view2.mask_fraction_range.first = to_double(v); }},
      {"augment.mask_max", [](ExperimentConfig& c, const std::string& v) { c.view1.mask_fraction_range.second = c.view2.mask_fraction_range.second = to_double(v); }},
      {"augment.scale_min", [](ExperimentConfig& c, const std::string& v) { c.view1.scale_range.first = c.view2.scale_range.first = to_double(v); }},
      {"augment.scale_max", [](ExperimentConfig& c, const std::string& v) { c.view1.scale_range.second = c.view2.scale_range.second = to_double(v); }},
      {"augment.max_shift", [](ExperimentConfig& c, const std::string& v) { c.view1.max_shift = c.view2.max_shift = static_cast<int>(to_int(v)); }},
      {"augment.view1_seed", [](ExperimentConfig& c, const std::string& v) { c.view1.rng_seed = to_u64(v); }},
      {"augment.view2_seed", [](ExperimentConfig& c, const std::string& v) { c.view2.rng_seed = to_u64(v); }},
      {"encoder.widths", [](ExperimentConfig& c, const std::string& v) { c.encoder.widths = parse_int_list(v); }},
      {"encoder.kernels", [](ExperimentConfig& c, const std::string& v) { c.encoder.kernels = parse_int_list(v); }},
      {"encoder.feature_dim", [](ExperimentConfig& c, const std::string& v) { c.encoder.feature_dim = static_cast<int>(to_int(v)); }},
      {"projector.hidden_dim", [](ExperimentConfig& c, const std::string& v) { c.projector.hidden_dim = static_cast<int>(to_int(v)); }},
      {"projector.out_dim", [](ExperimentConfig& c, const std::string& v) { c.projector.out_dim = static_cast<int>(to_int(v)); }},
      {"tau", [](ExperimentConfig& c, const std::string& v) { c.tau = to_double(v); }},
      {"learning_rate", [](ExperimentConfig& c, const std::string& v) { c.learning_rate = to_double(v); }},
      {"batch_size", [](ExperimentConfig& c, const std::string& v) { c.batch_size = static_cast<int>(to_int(v)); }},
      {"pretrain_epochs", [](ExperimentConfig& c, const std::string& v) { c.pretrain_epochs = static_cast<int>(to_int(v)); }},
      {"probe_epochs", [](ExperimentConfig& c, const std::string& v) { c.probe_epochs = static_cast<int>(to_int(v)); }},
      {"finetune_epochs", [](ExperimentConfig& c, const std::string& v) { c.finetune_epochs = static_cast<int>(to_int(v)); }},
      {"probe_batch_size", [](ExperimentConfig& c, const std::string& v) { c.probe_batch_size = static_cast<int>(to_int(v)); }},
      {"probe_learning_rate", [](ExperimentConfig& c, const std::string& v) { c.probe_learning_rate = to_double(v); }},
      {"seeds", [](ExperimentConfig& c, const std::string& v) {
         c.seeds.clear();
         for (const auto& s : split_list(v)) c.seeds.push_back(to_u64(s));
       }},
      {"method", [](ExperimentConfig& c, const std::string& v) {
         if (v == "mod-cl") c.method = Method::ModCl;
         else if (v == "instance-baseline") c.method = Method::InstanceBaseline;
         else if (v == "random-init") c.method = Method::RandomInit;
         else throw std::invalid_argument("expected mod-cl, instance-baseline or random-init");
       }},
      {"loss.tiers", [](ExperimentConfig& c, const std::string& v) { c.tiers = parse_tiers(v); }},
      {"segment_length", [](ExperimentConfig& c, const std::string& v) {
         if (v == "full") c.segment_length.reset();
         else c.segment_length = static_cast<int>(to_int(v));
       }},
      {"segment.random_crop", [](ExperimentConfig& c, const std::string& v) { c.random_crop = to_bool(v); }},
      {"symmetric_anchors", [](ExperimentConfig& c, const std::string& v) { c.symmetric_anchors = to_bool(v); }},
      {"corruption.mode", [](ExperimentConfig& c, const std::string& v) {
         if (v == "none") c.corruption.mode = CorruptionMode::None;
         else if (v == "random") c.corruption.mode = CorruptionMode::Random;
         else if (v == "semantic") c.corruption.mode = CorruptionMode::Semantic;
         else throw std::invalid_argument("expected none, random or semantic");
       }},
      {"corruption.p", [](ExperimentConfig& c, const std::string& v) { c.corruption.p = to_double(v); }},
      {"corruption.freeze", [](ExperimentConfig& c, const std::string& v) { c.corruption.freeze = to_bool(v); }},
      {"corruption.seed", [](ExperimentConfig& c, const std::string& v) { c.corruption.seed = to_u64(v); }},
      {"checkpoint_every", [](ExperimentConfig& c, const std::string& v) { c.checkpoint_every = static_cast<int>(to_int(v)); }},
      {"divergence.factor", [](ExperimentConfig& c, const std::string& v) { c.divergence_factor = to_double(v); }},
      {"divergence.patience", [](ExperimentConfig& c, const std::string& v) { c.divergence_patience = static_cast<int>(to_int(v)); }},
  };
  return table;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : std::invalid_argument("invalid config: " + join(issues, "; ")), issues_(std::move(issues)) {}

std::string method_name(Method m) {
  switch (m) {
    case Method::ModCl: return "mod-cl";
    case Method::InstanceBaseline: return "instance-baseline";
    case Method::RandomInit: return "random-init";
  }
  return "?";
}

std::string corruption_mode_name(CorruptionMode m) {
  switch (m) {
    case CorruptionMode::None: return "none";
    case CorruptionMode::Random: return "random";
    case CorruptionMode::Semantic: return "semantic";
  }
  return "?";
}

ExperimentConfig ExperimentConfig::desk_scale() {
  ExperimentConfig c;
  c.batch_size = 64;
  c.pretrain_epochs = 30;
  c.seeds = {0, 1, 2};
  c.split.label_budget = 5;
  return c;
}

void ExperimentConfig::validate() const {
  std::vector<std::string> issues;
  const auto check = [&](bool ok, const std::string& msg) {
    if (!ok) issues.push_back(msg);
  };
  check(tau > 0.0 && std::isfinite(tau), "tau: must be > 0");
  check(learning_rate > 0.0, "learning_rate: must be > 0");
  check(probe_learning_rate > 0.0, "probe_learning_rate: must be > 0");
  check(batch_size >= 1, "batch_size: must be >= 1");
  check(probe_batch_size >= 1, "probe_batch_size: must be >= 1");
  check(pretrain_epochs >= 1, "pretrain_epochs: must be >= 1");
  check(probe_epochs >= 1, "probe_epochs: must be >= 1");
  check(finetune_epochs >= 1, "finetune_epochs: must be >= 1");
  check(!seeds.empty(), "seeds: must be non-empty");
  check(tiers.any(), "loss.tiers: at least one term is required");
  check(!segment_length || *segment_length >= 1, "segment_length: must be >= 1 or 'full'");
  check(corruption.p >= 0.0 && corruption.p <= 1.0, "corruption.p: must lie in [0, 1]");
  check(checkpoint_every >= 1, "checkpoint_every: must be >= 1");
  check(divergence_factor > 1.0, "divergence.factor: must be > 1");
  check(divergence_patience >= 1, "divergence.patience: must be >= 1");
  check(split.train > 0.0 && split.val >= 0.0 && split.test > 0.0 &&
            std::abs(split.train + split.val + split.test - 1.0) < 1e-9,
        "split.train/split.val/split.test: must be non-negative and sum to 1");
  check(!split.label_budget || *split.label_budget >= 1, "label_budget: must be >= 1 or 'all'");
  if (data_dir.empty()) {
    check(!synth.schemes.empty(), "synth.schemes: must be non-empty");
    check(!synth.snr_db.empty(), "synth.snr_db: must be non-empty");
    check(synth.per_cell >= 1, "synth.per_cell: must be >= 1");
    check(synth.length >= 2, "synth.length: must be >= 2");
    check(synth.options.samples_per_symbol >= 1, "synth.sps: must be >= 1");
    check(synth.options.rolloff > 0.0 && synth.options.rolloff <= 1.0, "synth.rolloff: must lie in (0, 1]");
    check(synth.options.max_freq_offset >= 0.0 && synth.options.max_freq_offset < 0.5,
          "synth.max_freq_offset: must lie in [0, 0.5)");
    if (segment_length) {
      check(2 * *segment_length <= synth.length, "segment_length: 2L must not exceed synth.length");
    }
  }
  const int length = data_dir.empty() ? synth.length : 1 << 20;
  for (const auto* p : {&view1, &view2}) {
    try {
      validate_policy(*p, segment_length ? 2 * *segment_length : length);
    } catch (const std::exception& e) {
      issues.push_back(std::string("augment.*: ") + e.what());
      break;
    }
  }
  try {
    encoder.validate();
  } catch (const std::exception& e) {
    issues.push_back(std::string("encoder.*: ") + e.what());
  }
  try {
    projector.validate();
  } catch (const std::exception& e) {
    issues.push_back(std::string("projector.*: ") + e.what());
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

ViewOptions ExperimentConfig::view_options() const {
  ViewOptions v;
  v.segment_length = segment_length;
  v.random_crop = random_crop;
  v.symmetric_anchors = symmetric_anchors;
  return v;
}

ExperimentConfig apply_config(const ExperimentConfig& base, const KeyValueMap& kv) {
  ExperimentConfig c = base;
  std::vector<std::string> issues;
  const auto& table = setters();
  for (const auto& [key, value] : kv) {
    const auto it = table.find(key);
    if (it == table.end()) {
      issues.push_back(key + ": unknown key");
      continue;
    }
    try {
      it->second(c, value);
    } catch (const std::exception& e) {
      issues.push_back(key + ": bad value '" + value + "' (" + e.what() + ")");
    }
  }
  // Range checks run on whatever parsed, so one error report covers every key.
  try {
    c.validate();
  } catch (const ConfigError& e) {
    issues.insert(issues.end(), e.issues().begin(), e.issues().end());
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const ExperimentConfig& base) {
  KeyValueMap kv;
  try {
    kv = read_key_values(path);
  } catch (const KeyValueError& e) {
    throw ConfigError({path.string() + ": " + e.what()});
  }
  return apply_config(base, kv);
}

KeyValueList serialize_config(const ExperimentConfig& c) {
  std::vector<std::string> schemes;
  for (auto id : c.synth.schemes) schemes.emplace_back(scheme_name(id));
  return {
      {"data.dir", c.data_dir},
      {"synth.schemes", join(schemes, ",")},
      {"synth.snr_db", fmt_doubles(c.synth.snr_db)},
      {"synth.per_cell", std::to_string(c.synth.per_cell)},
      {"synth.length", std::to_string(c.synth.length)},
      {"synth.seed", std::to_string(c.synth.seed)},
      {"synth.pulse", c.synth.options.pulse == PulseShape::RootRaisedCosine ? "rrc" : "rect"},
      {"synth.sps", std::to_string(c.synth.options.samples_per_symbol)},
      {"synth.rolloff", fmt(c.synth.options.rolloff)},
      {"synth.random_phase", c.synth.options.random_phase ? "true" : "false"},
      {"synth.random_timing", c.synth.options.random_timing ? "true" : "false"},
      {"synth.max_freq_offset", fmt(c.synth.options.max_freq_offset)},
      {"synth.fading", c.synth.options.fading == Fading::None ? "none" : "rayleigh"},
      {"split.train", fmt(c.split.train)},
      {"split.val", fmt(c.split.val)},
      {"split.test", fmt(c.split.test)},
      {"split.seed", std::to_string(c.split.split_seed)},
      {"label_budget", c.split.label_budget ? std::to_string(*c.split.label_budget) : "all"},
      {"augment.set", format_augmentation_set(c.view1.enabled)},
      {"augment.prob", fmt(c.view1.activation_prob)},
      {"augment.mask_min", fmt(c.view1.mask_fraction_range.first)},
      {"augment.mask_max", fmt(c.view1.mask_fraction_range.second)},
      {"augment.scale_min", fmt(c.view1.scale_range.first)},
      {"augment.scale_max", fmt(c.view1.scale_range.second)},
      {"augment.max_shift", std::to_string(c.view1.max_shift)},
      {"augment.view1_seed", std::to_string(c.view1.rng_seed)},
      {"augment.view2_seed", std::to_string(c.view2.rng_seed)},
      {"encoder.widths", format_int_list(c.encoder.widths)},
      {"encoder.kernels", format_int_list(c.encoder.kernels)},
      {"encoder.feature_dim", std::to_string(c.encoder.feature_dim)},
      {"projector.hidden_dim", std::to_string(c.projector.hidden_dim)},
      {"projector.out_dim", std::to_string(c.projector.out_dim)},
      {"tau", fmt(c.tau)},
      {"learning_rate", fmt(c.learning_rate)},
      {"batch_size", std::to_string(c.batch_size)},
      {"pretrain_epochs", std::to_string(c.pretrain_epochs)},
      {"probe_epochs", std::to_string(c.probe_epochs)},
      {"finetune_epochs", std::to_string(c.finetune_epochs)},
      {"probe_batch_size", std::to_string(c.probe_batch_size)},
      {"probe_learning_rate", fmt(c.probe_learning_rate)},
      {"seeds", fmt_seeds(c.seeds)},
      {"method", method_name(c.method)},
      {"loss.tiers", tiers_name(c.tiers)},
      {"segment_length", c.segment_length ? std::to_string(*c.segment_length) : "full"},
      {"segment.random_crop", c.random_crop ? "true" : "false"},
      {"symmetric_anchors", c.symmetric_anchors ? "true" : "false"},
      {"corruption.mode", corruption_mode_name(c.corruption.mode)},
      {"corruption.p", fmt(c.corruption.p)},
      {"corruption.freeze", c.corruption.freeze ? "true" : "false"},
      {"corruption.seed", std::to_string(c.corruption.seed)},
      {"checkpoint_every", std::to_string(c.checkpoint_every)},
      {"divergence.factor", fmt(c.divergence_factor)},
      {"divergence.patience", std::to_string(c.divergence_patience)},
  };
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, setter] : setters()) keys.push_back(k);
  return keys;
}

std::string config_fingerprint(const ExperimentConfig& config) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& [k, v] : serialize_config(config)) {
    if (k == "seeds") continue;
    for (char ch : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001B3ULL;
    }
  }
  return format_hash(h);
}

Dataset prepare_dataset(const ExperimentConfig& config) {
  if (!config.data_dir.empty()) return load_dataset(config.data_dir);
  std::vector<ModulationScheme> schemes;
  for (auto id : config.synth.schemes) {
    schemes.push_back(make_scheme(id, config.synth.options.pulse, config.synth.options.samples_per_symbol,
                                  config.synth.options.rolloff));
  }
  return synth_dataset(schemes, config.synth.snr_db, config.synth.per_cell, config.synth.length,
                       config.synth.seed, config.synth.options);
}

}  // namespace modcl
