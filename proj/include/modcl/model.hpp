#pragma once

#include "modcl/common.hpp"
#include "modcl/contrastive_loss.hpp"
#include "modcl/kv.hpp"
#include "modcl/nn.hpp"
#include "modcl/pairing.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace modcl {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Conv blocks: conv(k) -> BN -> LeakyReLU -> max-pool 2, then global average
/// pooling. `widths` are the hidden block widths; the last block emits feature_dim.
struct EncoderSpec {
  std::vector<int> widths{32, 64, 64};
  std::vector<int> kernels{5, 5, 5, 5};
  int feature_dim = 64;

  [[nodiscard]] int num_blocks() const noexcept { return static_cast<int>(widths.size()) + 1; }
  void validate() const;
};

struct ProjectorSpec {
  int hidden_dim = 256;
  int out_dim = 128;

  void validate() const;
};

class Encoder {
 public:
  struct Block {
    nn::Conv1d::Cache conv;
    nn::BatchNorm::Cache bn;
    nn::LeakyReluCache act;
    nn::MaxPoolCache pool;
    int length = 0;
  };
  struct Tape {
    std::vector<Block> blocks;
    int batch = 0;
    int final_length = 0;
  };

  Encoder(const EncoderSpec& spec, Rng& rng);

  /// x is 2 x (batch * length); returns feature_dim x batch.
  nn::Matrix forward(const nn::Matrix& x, int batch, int length, nn::Mode mode, Tape* tape);
  void backward(const nn::Matrix& grad_features, const Tape& tape);

  void parameters(std::vector<nn::Parameter*>& out);
  void visit(const nn::StateVisitor& f);
  [[nodiscard]] const EncoderSpec& spec() const noexcept { return spec_; }

 private:
  EncoderSpec spec_;
  std::vector<nn::Conv1d> convs_;
  std::vector<nn::BatchNorm> norms_;
};

/// Linear -> BN -> LeakyReLU -> Linear.
class Projector {
 public:
  struct Tape {
    nn::Linear::Cache fc1;
    nn::BatchNorm::Cache bn;
    nn::LeakyReluCache act;
    nn::Linear::Cache fc2;
  };

  Projector(int in_dim, const ProjectorSpec& spec, Rng& rng);

  nn::Matrix forward(const nn::Matrix& z, nn::Mode mode, Tape* tape);
  nn::Matrix backward(const nn::Matrix& grad_h, const Tape& tape);

  void parameters(std::vector<nn::Parameter*>& out);
  void visit(const nn::StateVisitor& f);
  [[nodiscard]] const ProjectorSpec& spec() const noexcept { return spec_; }

 private:
  ProjectorSpec spec_;
  nn::Linear fc1_;
  nn::BatchNorm bn_;
  nn::Linear fc2_;
};

/// c_omega: one affine map from the concatenated segment features to K scores.
class LinearClassifier {
 public:
  LinearClassifier(int in_dim, int num_classes, Rng& rng);

  /// features: in_dim x count; returns K x count.
  nn::Matrix scores(const nn::Matrix& features, nn::Linear::Cache* cache = nullptr) const;
  /// Argmax per column, ties to the lowest class index.
  [[nodiscard]] std::vector<int> predict(const nn::Matrix& features) const;
  nn::Matrix backward(const nn::Matrix& grad_scores, const nn::Linear::Cache& cache,
                      bool need_input_grad);

  void parameters(std::vector<nn::Parameter*>& out) { fc_.parameters(out); }
  void visit(const nn::StateVisitor& f) { fc_.visit(f); }
  nn::Linear& layer() noexcept { return fc_; }
  [[nodiscard]] int in_dim() const noexcept { return fc_.in_features(); }
  [[nodiscard]] int num_classes() const noexcept { return fc_.out_features(); }

 private:
  nn::Linear fc_;
};

/// Per-segment outputs, row i belongs to segment i of the batch.
struct EmbeddingBatch {
  EmbeddingMatrix z;
  EmbeddingMatrix h;
  EmbeddingMatrix h_norm;
};

/// Everything needed to backpropagate one encode() call.
struct ForwardTape {
  struct Group {
    std::vector<std::size_t> members;
    Encoder::Tape encoder;
  };
  std::vector<Group> groups;
  Projector::Tape projector;
  std::size_t count = 0;
};

/// Encoder plus projection head with a shared parameter set.
class ContrastiveModel {
 public:
  ContrastiveModel(const EncoderSpec& encoder, const ProjectorSpec& projector, std::uint64_t seed);

  /// Same-length segments are encoded together; each length forms its own
  /// batch-normalization group.
  nn::Matrix features(std::span<const IqMatrix> segments, nn::Mode mode, ForwardTape* tape);
  EmbeddingBatch embed(std::span<const IqMatrix> segments, nn::Mode mode, ForwardTape* tape);
  EmbeddingBatch encode(const SegmentViewBatch& batch, nn::Mode mode, ForwardTape* tape);

  /// Backpropagates d/dh (rows per segment) into every parameter gradient.
  void backward(const EmbeddingMatrix& grad_h, const ForwardTape& tape);
  /// Backpropagates d/dz (feature_dim x count) into the encoder only.
  void backward_features(const nn::Matrix& grad_z, const ForwardTape& tape);

  std::vector<nn::Parameter*> parameters();
  std::vector<nn::Parameter*> encoder_parameters();

  Encoder& encoder() noexcept { return encoder_; }
  Projector& projector() noexcept { return projector_; }
  [[nodiscard]] int feature_dim() const noexcept { return encoder_.spec().feature_dim; }
  [[nodiscard]] std::uint64_t init_seed() const noexcept { return seed_; }

  /// FNV-1a over every encoder tensor (including running statistics).
  [[nodiscard]] std::uint64_t encoder_hash();

 private:
  std::uint64_t seed_;
  Encoder encoder_;
  Projector projector_;
};

/// Concatenated segment features [z_1; z_2] for each instance, evaluation mode,
/// no augmentation. Returns 2F x count.
nn::Matrix instance_features(ContrastiveModel& model, std::span<const IqInstance* const> instances,
                             const ViewOptions& options = {}, std::size_t chunk = 256);

std::string format_hash(std::uint64_t hash);

// ------------------------------------------------------------------ checkpoints

inline constexpr int kCheckpointVersion = 1;

struct CheckpointInfo {
  EncoderSpec encoder;
  ProjectorSpec projector;
  std::uint64_t seed = 0;
  int epoch = 0;
  std::string method;
  KeyValueList extra;  // free-form provenance carried through unchanged
};

/// Directory with manifest.txt and params.f32 (little-endian float32 tensors in
/// the order listed by the manifest). The projector entries are flagged as
/// discardable; a classifier is appended when given.
void save_checkpoint(const std::filesystem::path& dir, ContrastiveModel& model,
                     const CheckpointInfo& info, LinearClassifier* classifier = nullptr);

struct LoadedCheckpoint {
  CheckpointInfo info;
  std::unique_ptr<ContrastiveModel> model;
  std::unique_ptr<LinearClassifier> classifier;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

std::string format_int_list(const std::vector<int>& values);
std::vector<int> parse_int_list(const std::string& text);

}  // namespace modcl
