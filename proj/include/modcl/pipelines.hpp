#pragma once

#include "modcl/config.hpp"
#include "modcl/contrastive_loss.hpp"
#include "modcl/dataset.hpp"
#include "modcl/dataset_io.hpp"
#include "modcl/model.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace modcl {

/// A label was read on a path that must stay label-blind.
class LabelLeakError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The labeled subset overlaps evaluation data or leaves the train split.
class BudgetViolationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MetricsRecord {
  int epoch = 0;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  std::optional<LossBreakdown> loss;  // for probing/fine-tuning only l_total (cross-entropy) is set
  std::optional<double> acc_overall;
  std::map<int, double> acc_per_snr;
  double wall_s = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "epoch,step,seed,l_sc,l_ac,l_jc,l_total,acc_overall,acc_per_snr_json,wall_s";

/// Empty cells for fields a stage does not produce.
std::string format_metrics_row(const MetricsRecord& record);

/// Append-only CSV sink; the header is written when the file is created.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void write(const MetricsRecord& record);
  [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

struct RunHooks {
  std::function<void(const MetricsRecord&)> on_metrics;
  std::optional<std::filesystem::path> checkpoint_dir;
};

struct PretrainResult {
  std::unique_ptr<ContrastiveModel> model;
  std::vector<MetricsRecord> history;
  std::vector<std::filesystem::path> checkpoints;
  std::int64_t steps = 0;
  std::int64_t label_reads = 0;  // nonzero only with corruption enabled
  std::size_t relations_seen = 0;
  std::size_t relations_corrupted = 0;
};

/// Dispatches on config.method. `pool` indexes the unlabeled training
/// instances; no label is read unless corruption is active.
PretrainResult pretrain(const ExperimentConfig& config, const Dataset& dataset,
                        std::span<const std::size_t> pool, std::uint64_t seed, const RunHooks& hooks = {});

PretrainResult pretrain_mod_cl(const ExperimentConfig& config, const Dataset& dataset,
                               std::span<const std::size_t> pool, std::uint64_t seed,
                               const RunHooks& hooks = {});

/// Two full-length views per instance, symmetric NT-Xent over 2B embeddings.
PretrainResult pretrain_instance_baseline(const ExperimentConfig& config, const Dataset& dataset,
                                          std::span<const std::size_t> pool, std::uint64_t seed,
                                          const RunHooks& hooks = {});

/// Untrained encoder with the seed's initialization.
PretrainResult random_init(const ExperimentConfig& config, std::uint64_t seed);

struct EvalResult {
  double acc_overall = 0.0;
  std::map<int, double> acc_per_snr;
  std::size_t count = 0;
};

/// Accuracy of `predictions` against the instances' labels, overall and per SNR.
EvalResult score_predictions(const Dataset& dataset, std::span<const std::size_t> indices,
                             std::span<const int> predictions);

/// Rejects labeled subsets that leave the train split or touch val/test.
void check_labeled_subset(const SplitResult& split, std::size_t dataset_size);

/// Index lists of a split, written next to pretraining outputs so later stages
/// can prove their labeled subset never touched held-out data.
void save_split_record(const std::filesystem::path& path, const SplitResult& split);
SplitResult load_split_record(const std::filesystem::path& path);
/// Throws BudgetViolationError when `labeled` reaches into the record's val/test.
void check_against_record(std::span<const std::size_t> labeled, const SplitResult& record);

struct ProbeResult {
  EvalResult test;
  std::vector<MetricsRecord> history;
  std::uint64_t hash_before = 0;
  std::uint64_t hash_after = 0;
  std::unique_ptr<LinearClassifier> classifier;
};

/// Frozen encoder, no augmentation; trains only the linear classifier on
/// [z_1; z_2] features of the labeled subset and reports test accuracy.
ProbeResult linear_probe(ContrastiveModel& model, const Dataset& dataset, const SplitResult& split,
                         const ExperimentConfig& config, std::uint64_t seed, const RunHooks& hooks = {});

struct FineTuneResult {
  EvalResult test;
  std::vector<MetricsRecord> history;
  std::unique_ptr<ContrastiveModel> model;
  std::unique_ptr<LinearClassifier> classifier;
};

/// Encoder and classifier trained end to end. A null model starts from the
/// seed's random initialization.
FineTuneResult fine_tune(std::unique_ptr<ContrastiveModel> model, const Dataset& dataset,
                         const SplitResult& split, const ExperimentConfig& config, std::uint64_t seed,
                         const RunHooks& hooks = {});

/// Pretrain with config.method, then probe. Returns the probe's test result.
struct MethodRun {
  PretrainResult pretrain;
  ProbeResult probe;
};
MethodRun pretrain_and_probe(const ExperimentConfig& config, const Dataset& dataset, const SplitResult& split,
                             std::uint64_t seed, const RunHooks& hooks = {});

}  // namespace modcl
