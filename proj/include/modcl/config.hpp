#pragma once

#include "modcl/augment.hpp"
#include "modcl/contrastive_loss.hpp"
#include "modcl/dataset.hpp"
#include "modcl/dataset_io.hpp"
#include "modcl/kv.hpp"
#include "modcl/model.hpp"
#include "modcl/modulation.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace modcl {

/// Lists every offending key; what() joins them on one line.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  [[nodiscard]] const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  std::vector<std::string> issues_;
};

enum class Method { ModCl, InstanceBaseline, RandomInit };
enum class CorruptionMode { None, Random, Semantic };

std::string method_name(Method m);
std::string corruption_mode_name(CorruptionMode m);

struct SynthConfig {
  std::vector<SchemeId> schemes{SchemeId::BPSK, SchemeId::QPSK, SchemeId::QAM16, SchemeId::GFSK};
  std::vector<double> snr_db{0.0, 10.0};
  int per_cell = 250;
  int length = 128;
  std::uint64_t seed = 1;
  SynthOptions options;
};

struct CorruptionConfig {
  CorruptionMode mode = CorruptionMode::None;
  double p = 0.0;
  bool freeze = false;  // one coin per (instance, relation slot) for the whole run
  std::uint64_t seed = 0;

  [[nodiscard]] bool active() const noexcept { return mode != CorruptionMode::None && p > 0.0; }
};

/// Full run specification. Member defaults are the full-scale settings;
/// desk_scale() returns the reduced setup used for quick experiments.
struct ExperimentConfig {
  std::string data_dir;  // empty: synthesize from `synth`
  SynthConfig synth;
  SplitSpec split;  // label_budget lives here; nullopt means every train instance

  AugmentPolicy view1{.rng_seed = 1};
  AugmentPolicy view2{.rng_seed = 2};

  EncoderSpec encoder;
  ProjectorSpec projector;

  double tau = 0.07;
  double learning_rate = 1e-3;
  int batch_size = 256;
  int pretrain_epochs = 240;
  int probe_epochs = 80;
  int finetune_epochs = 80;
  int probe_batch_size = 16;
  double probe_learning_rate = 1e-3;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  Method method = Method::ModCl;
  TierMask tiers;
  std::optional<int> segment_length;
  bool random_crop = false;
  bool symmetric_anchors = false;
  CorruptionConfig corruption;

  int checkpoint_every = 40;
  double divergence_factor = 10.0;
  int divergence_patience = 100;

  static ExperimentConfig desk_scale();

  /// Throws ConfigError listing every violated constraint.
  void validate() const;
  [[nodiscard]] ViewOptions view_options() const;
};

/// Applies key=value pairs on top of `base`. Unknown keys and bad values are
/// all collected before throwing.
ExperimentConfig apply_config(const ExperimentConfig& base, const KeyValueMap& kv);
ExperimentConfig load_config(const std::filesystem::path& path, const ExperimentConfig& base);
KeyValueList serialize_config(const ExperimentConfig& config);
/// Every key apply_config accepts.
std::vector<std::string> config_keys();

/// Hash of the serialized config with the seed list removed; runs that share it
/// may be aggregated together.
std::string config_fingerprint(const ExperimentConfig& config);

/// Loads or synthesizes the dataset the config points at.
Dataset prepare_dataset(const ExperimentConfig& config);

}  // namespace modcl
