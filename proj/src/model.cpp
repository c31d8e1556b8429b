#include "modcl/model.hpp"

#include "modcl/endian.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace modcl {
namespace fs = std::filesystem;
namespace {

constexpr const char* kManifestFile = "manifest.txt";
constexpr const char* kParamsFile = "params.f32";

int block_in(const EncoderSpec& spec, int b) { return b == 0 ? 2 : spec.widths[static_cast<std::size_t>(b - 1)]; }
int block_out(const EncoderSpec& spec, int b) {
  return b + 1 == spec.num_blocks() ? spec.feature_dim : spec.widths[static_cast<std::size_t>(b)];
}

// Packs equal-length segments into a 2 x (count * length) activation.
nn::Matrix pack(std::span<const IqMatrix> segments, const std::vector<std::size_t>& members, int length) {
  nn::Matrix x(2, static_cast<Eigen::Index>(members.size()) * length);
  for (std::size_t i = 0; i < members.size(); ++i) {
    x.middleCols(static_cast<Eigen::Index>(i) * length, length) = segments[members[i]];
  }
  return x;
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

int parse_int(const KeyValueMap& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw CheckpointError("checkpoint manifest is missing '" + key + "'");
  try {
    std::size_t used = 0;
    const int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint manifest key '" + key + "' is not an integer: " + it->second);
  }
}

struct TensorEntry {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

}  // namespace

// ------------------------------------------------------------------ specs

void EncoderSpec::validate() const {
  if (feature_dim < 8) throw ContractViolation("encoder feature_dim must be >= 8, got " + std::to_string(feature_dim));
  if (kernels.size() != widths.size() + 1) {
    throw ContractViolation("encoder needs one kernel size per block (" + std::to_string(widths.size() + 1) +
                            "), got " + std::to_string(kernels.size()));
  }
  for (int w : widths) {
    if (w < 1) throw ContractViolation("encoder widths must be positive");
  }
  for (int k : kernels) {
    if (k < 1 || k % 2 == 0) throw ContractViolation("encoder kernel sizes must be odd and positive");
  }
}

void ProjectorSpec::validate() const {
  if (hidden_dim < 1 || out_dim < 1) throw ContractViolation("projector dimensions must be positive");
}

// ------------------------------------------------------------------ Encoder

Encoder::Encoder(const EncoderSpec& spec, Rng& rng) : spec_(spec) {
  spec_.validate();
  for (int b = 0; b < spec_.num_blocks(); ++b) {
    const std::string name = "encoder.block" + std::to_string(b);
    convs_.emplace_back(name + ".conv", block_in(spec_, b), block_out(spec_, b),
                        spec_.kernels[static_cast<std::size_t>(b)], rng);
    norms_.emplace_back(name + ".bn", block_out(spec_, b));
  }
}

nn::Matrix Encoder::forward(const nn::Matrix& x, int batch, int length, nn::Mode mode, Tape* tape) {
  if (batch < 1 || length < 1) throw ContractViolation("encoder input must be non-empty");
  if (tape != nullptr) {
    tape->blocks.assign(convs_.size(), {});
    tape->batch = batch;
  }
  nn::Matrix a = x;
  int len = length;
  for (std::size_t b = 0; b < convs_.size(); ++b) {
    Block* blk = tape != nullptr ? &tape->blocks[b] : nullptr;
    if (blk != nullptr) blk->length = len;
    a = convs_[b].forward(a, batch, len, blk ? &blk->conv : nullptr);
    a = norms_[b].forward(a, mode, blk ? &blk->bn : nullptr);
    a = nn::leaky_relu(a, blk ? &blk->act : nullptr);
    a = nn::max_pool(a, batch, len, blk ? &blk->pool : nullptr);
    len = nn::pooled_length(len);
  }
  if (tape != nullptr) tape->final_length = len;
  return nn::global_average_pool(a, batch, len);
}

void Encoder::backward(const nn::Matrix& grad_features, const Tape& tape) {
  nn::Matrix g = nn::global_average_pool_backward(grad_features, tape.batch, tape.final_length);
  for (std::size_t b = convs_.size(); b-- > 0;) {
    const Block& blk = tape.blocks[b];
    g = nn::max_pool_backward(g, blk.pool, convs_[b].out_channels());
    g = nn::leaky_relu_backward(g, blk.act);
    g = norms_[b].backward(g, blk.bn);
    g = convs_[b].backward(g, blk.conv, b > 0);
  }
}

void Encoder::parameters(std::vector<nn::Parameter*>& out) {
  for (std::size_t b = 0; b < convs_.size(); ++b) {
    convs_[b].parameters(out);
    norms_[b].parameters(out);
  }
}

void Encoder::visit(const nn::StateVisitor& f) {
  for (std::size_t b = 0; b < convs_.size(); ++b) {
    convs_[b].visit(f);
    norms_[b].visit(f);
  }
}

// ------------------------------------------------------------------ Projector

Projector::Projector(int in_dim, const ProjectorSpec& spec, Rng& rng)
    : spec_(spec),
      fc1_("projector.fc1", in_dim, spec.hidden_dim, rng),
      bn_("projector.bn", spec.hidden_dim),
      fc2_("projector.fc2", spec.hidden_dim, spec.out_dim, rng) {
  spec_.validate();
}

nn::Matrix Projector::forward(const nn::Matrix& z, nn::Mode mode, Tape* tape) {
  nn::Matrix a = fc1_.forward(z, tape ? &tape->fc1 : nullptr);
  a = bn_.forward(a, mode, tape ? &tape->bn : nullptr);
  a = nn::leaky_relu(a, tape ? &tape->act : nullptr);
  return fc2_.forward(a, tape ? &tape->fc2 : nullptr);
}

nn::Matrix Projector::backward(const nn::Matrix& grad_h, const Tape& tape) {
  nn::Matrix g = fc2_.backward(grad_h, tape.fc2);
  g = nn::leaky_relu_backward(g, tape.act);
  g = bn_.backward(g, tape.bn);
  return fc1_.backward(g, tape.fc1);
}

void Projector::parameters(std::vector<nn::Parameter*>& out) {
  fc1_.parameters(out);
  bn_.parameters(out);
  fc2_.parameters(out);
}

void Projector::visit(const nn::StateVisitor& f) {
  fc1_.visit(f);
  bn_.visit(f);
  fc2_.visit(f);
}

// ------------------------------------------------------------------ LinearClassifier

LinearClassifier::LinearClassifier(int in_dim, int num_classes, Rng& rng)
    : fc_("classifier", in_dim, num_classes, rng) {
  if (num_classes < 1) throw ContractViolation("classifier needs at least one class");
}

nn::Matrix LinearClassifier::scores(const nn::Matrix& features, nn::Linear::Cache* cache) const {
  return fc_.forward(features, cache);
}

std::vector<int> LinearClassifier::predict(const nn::Matrix& features) const {
  const nn::Matrix s = scores(features);
  std::vector<int> out(static_cast<std::size_t>(s.cols()));
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < s.rows(); ++k) {
      if (s(k, j) > s(best, j)) best = k;
    }
    out[static_cast<std::size_t>(j)] = static_cast<int>(best);
  }
  return out;
}

nn::Matrix LinearClassifier::backward(const nn::Matrix& grad_scores, const nn::Linear::Cache& cache,
                                      bool need_input_grad) {
  return fc_.backward(grad_scores, cache, need_input_grad);
}

// ------------------------------------------------------------------ ContrastiveModel

ContrastiveModel::ContrastiveModel(const EncoderSpec& encoder, const ProjectorSpec& projector,
                                   std::uint64_t seed)
    : seed_(seed),
      encoder_([&] {
        Rng rng = make_stream(seed, 101);
        return Encoder(encoder, rng);
      }()),
      projector_([&] {
        Rng rng = make_stream(seed, 102);
        return Projector(encoder.feature_dim, projector, rng);
      }()) {}

nn::Matrix ContrastiveModel::features(std::span<const IqMatrix> segments, nn::Mode mode, ForwardTape* tape) {
  if (segments.empty()) throw ContractViolation("encode: no segments");
  std::map<int, std::vector<std::size_t>> by_length;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!segments[i].allFinite()) {
      throw ContractViolation("encode: segment " + std::to_string(i) + " contains NaN/Inf");
    }
    by_length[static_cast<int>(segments[i].cols())].push_back(i);
  }
  nn::Matrix z(feature_dim(), static_cast<Eigen::Index>(segments.size()));
  if (tape != nullptr) {
    tape->groups.clear();
    tape->count = segments.size();
  }
  for (auto& [length, members] : by_length) {
    const auto count = static_cast<int>(members.size());
    Encoder::Tape* et = nullptr;
    if (tape != nullptr) {
      tape->groups.push_back({members, {}});
      et = &tape->groups.back().encoder;
    }
    const nn::Matrix f = encoder_.forward(pack(segments, members, length), count, length, mode, et);
    for (std::size_t i = 0; i < members.size(); ++i) {
      z.col(static_cast<Eigen::Index>(members[i])) = f.col(static_cast<Eigen::Index>(i));
    }
  }
  return z;
}

EmbeddingBatch ContrastiveModel::embed(std::span<const IqMatrix> segments, nn::Mode mode, ForwardTape* tape) {
  const nn::Matrix z = features(segments, mode, tape);
  const nn::Matrix h = projector_.forward(z, mode, tape ? &tape->projector : nullptr);
  EmbeddingBatch out;
  out.z = z.transpose().cast<double>();
  out.h = h.transpose().cast<double>();
  out.h_norm = l2_normalize_rows(out.h);
  return out;
}

EmbeddingBatch ContrastiveModel::encode(const SegmentViewBatch& batch, nn::Mode mode, ForwardTape* tape) {
  if (batch.segments.size() != 4 * static_cast<std::size_t>(batch.batch_size)) {
    throw ContractViolation("encode: batch must hold 4B segments");
  }
  return embed(batch.segments, mode, tape);
}

void ContrastiveModel::backward(const EmbeddingMatrix& grad_h, const ForwardTape& tape) {
  const nn::Matrix g = grad_h.transpose().cast<float>();
  backward_features(projector_.backward(g, tape.projector), tape);
}

void ContrastiveModel::backward_features(const nn::Matrix& grad_z, const ForwardTape& tape) {
  for (const auto& group : tape.groups) {
    nn::Matrix g(grad_z.rows(), static_cast<Eigen::Index>(group.members.size()));
    for (std::size_t i = 0; i < group.members.size(); ++i) {
      g.col(static_cast<Eigen::Index>(i)) = grad_z.col(static_cast<Eigen::Index>(group.members[i]));
    }
    encoder_.backward(g, group.encoder);
  }
}

std::vector<nn::Parameter*> ContrastiveModel::parameters() {
  std::vector<nn::Parameter*> out;
  encoder_.parameters(out);
  projector_.parameters(out);
  return out;
}

std::vector<nn::Parameter*> ContrastiveModel::encoder_parameters() {
  std::vector<nn::Parameter*> out;
  encoder_.parameters(out);
  return out;
}

std::uint64_t ContrastiveModel::encoder_hash() {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  encoder_.visit([&](const std::string& name, nn::Matrix& t) {
    h = fnv1a(h, name.data(), name.size());
    const std::int64_t shape[2] = {t.rows(), t.cols()};
    h = fnv1a(h, shape, sizeof(shape));
    h = fnv1a(h, t.data(), static_cast<std::size_t>(t.size()) * sizeof(float));
  });
  return h;
}

nn::Matrix instance_features(ContrastiveModel& model, std::span<const IqInstance* const> instances,
                             const ViewOptions& options, std::size_t chunk) {
  const int f = model.feature_dim();
  nn::Matrix out(2 * f, static_cast<Eigen::Index>(instances.size()));
  ViewOptions fixed = options;
  fixed.random_crop = false;
  std::vector<IqMatrix> segments;
  for (std::size_t start = 0; start < instances.size(); start += chunk) {
    const std::size_t stop = std::min(instances.size(), start + chunk);
    segments.clear();
    for (std::size_t i = start; i < stop; ++i) {
      auto [a, b] = split_segments(crop_for_segments(instances[i]->samples, fixed, nullptr));
      segments.push_back(std::move(a));
      segments.push_back(std::move(b));
    }
    const nn::Matrix z = model.features(segments, nn::Mode::Eval, nullptr);
    for (std::size_t i = start; i < stop; ++i) {
      const auto j = static_cast<Eigen::Index>(i - start);
      out.col(static_cast<Eigen::Index>(i)).head(f) = z.col(2 * j);
      out.col(static_cast<Eigen::Index>(i)).tail(f) = z.col(2 * j + 1);
    }
  }
  return out;
}

std::string format_hash(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::string format_int_list(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw std::invalid_argument("empty entry in integer list '" + text + "'");
    std::size_t used = 0;
    const int v = std::stoi(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad integer '" + item + "'");
    out.push_back(v);
  }
  return out;
}

// ------------------------------------------------------------------ checkpoints

void save_checkpoint(const fs::path& dir, ContrastiveModel& model, const CheckpointInfo& info,
                     LinearClassifier* classifier) {
  fs::create_directories(dir);
  std::vector<TensorEntry> entries;
  std::vector<const nn::Matrix*> tensors;
  const auto collect = [&](const std::string& name, nn::Matrix& t) {
    entries.push_back({name, t.rows(), t.cols()});
    tensors.push_back(&t);
  };
  model.encoder().visit(collect);
  const std::size_t encoder_count = entries.size();
  model.projector().visit(collect);
  const std::size_t projector_end = entries.size();
  if (classifier != nullptr) classifier->visit(collect);

  KeyValueList kv = {
      {"version", std::to_string(kCheckpointVersion)},
      {"method", info.method},
      {"seed", std::to_string(info.seed)},
      {"epoch", std::to_string(info.epoch)},
      {"encoder.kind", "small-conv1d"},
      {"encoder.widths", format_int_list(info.encoder.widths)},
      {"encoder.kernels", format_int_list(info.encoder.kernels)},
      {"encoder.feature_dim", std::to_string(info.encoder.feature_dim)},
      {"projector.hidden_dim", std::to_string(info.projector.hidden_dim)},
      {"projector.out_dim", std::to_string(info.projector.out_dim)},
      {"projector.discardable", "true"},
      {"classifier.classes", classifier ? std::to_string(classifier->num_classes()) : "0"},
      {"encoder_hash", format_hash(model.encoder_hash())},
      {"params_file", kParamsFile},
      {"params_dtype", "float32-le"},
      {"tensor_count", std::to_string(entries.size())},
  };
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const char* part = i < encoder_count ? "encoder" : i < projector_end ? "projector" : "classifier";
    kv.emplace_back("tensor." + std::to_string(i), entries[i].name + ":" + std::to_string(entries[i].rows) +
                                                       "x" + std::to_string(entries[i].cols) + ":" + part);
  }
  for (const auto& e : info.extra) kv.emplace_back("extra." + e.first, e.second);

  std::ofstream out(dir / kParamsFile, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + (dir / kParamsFile).string());
  for (const auto* t : tensors) {
    // Column-major element order, as stored by Eigen.
    for (Eigen::Index i = 0; i < t->size(); ++i) {
      const float le = to_little(t->data()[i]);
      out.write(reinterpret_cast<const char*>(&le), sizeof(float));
    }
  }
  if (!out) throw CheckpointError("write failed for " + (dir / kParamsFile).string());
  out.close();
  write_key_values(dir / kManifestFile, kv);
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  KeyValueMap kv;
  try {
    kv = read_key_values(dir / kManifestFile);
  } catch (const std::exception& e) {
    throw CheckpointError("cannot read checkpoint manifest in " + dir.string() + ": " + e.what());
  }
  if (parse_int(kv, "version") != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + kv["version"]);
  }
  LoadedCheckpoint ck;
  try {
    ck.info.encoder.widths = parse_int_list(kv.at("encoder.widths"));
    ck.info.encoder.kernels = parse_int_list(kv.at("encoder.kernels"));
    ck.info.seed = std::stoull(kv.at("seed"));
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  ck.info.encoder.feature_dim = parse_int(kv, "encoder.feature_dim");
  ck.info.projector.hidden_dim = parse_int(kv, "projector.hidden_dim");
  ck.info.projector.out_dim = parse_int(kv, "projector.out_dim");
  ck.info.epoch = parse_int(kv, "epoch");
  ck.info.method = kv.count("method") ? kv["method"] : "";
  for (const auto& [k, v] : kv) {
    if (k.rfind("extra.", 0) == 0) ck.info.extra.emplace_back(k.substr(6), v);
  }
  try {
    ck.model = std::make_unique<ContrastiveModel>(ck.info.encoder, ck.info.projector, ck.info.seed);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("invalid model spec in checkpoint: ") + e.what());
  }
  const int classes = parse_int(kv, "classifier.classes");
  if (classes > 0) {
    Rng rng = make_stream(ck.info.seed, 103);
    ck.classifier = std::make_unique<LinearClassifier>(2 * ck.info.encoder.feature_dim, classes, rng);
  }

  std::vector<std::pair<std::string, nn::Matrix*>> tensors;
  const auto collect = [&](const std::string& name, nn::Matrix& t) { tensors.emplace_back(name, &t); };
  ck.model->encoder().visit(collect);
  ck.model->projector().visit(collect);
  if (ck.classifier) ck.classifier->visit(collect);

  const int declared = parse_int(kv, "tensor_count");
  if (declared != static_cast<int>(tensors.size())) {
    throw CheckpointError("checkpoint declares " + std::to_string(declared) + " tensors, model has " +
                          std::to_string(tensors.size()));
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& spec = kv["tensor." + std::to_string(i)];
    auto* t = tensors[i].second;
    const std::string expect = tensors[i].first + ":" + std::to_string(t->rows()) + "x" + std::to_string(t->cols()) + ":";
    if (spec.rfind(expect, 0) != 0) {
      throw CheckpointError("tensor " + std::to_string(i) + " is '" + spec + "', expected '" + expect + "...'");
    }
    total += static_cast<std::size_t>(t->size());
  }

  const fs::path params = dir / kParamsFile;
  std::error_code ec;
  const auto size = fs::file_size(params, ec);
  if (ec) throw CheckpointError("cannot stat " + params.string());
  if (size != total * sizeof(float)) {
    throw CheckpointError(params.string() + " holds " + std::to_string(size) + " bytes, expected " +
                          std::to_string(total * sizeof(float)));
  }
  std::ifstream in(params, std::ios::binary);
  for (auto& [name, t] : tensors) {
    in.read(reinterpret_cast<char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(float)));
    for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] = to_little(t->data()[i]);
  }
  if (!in) throw CheckpointError("read failed for " + params.string());

  if (kv.count("encoder_hash") && kv["encoder_hash"] != format_hash(ck.model->encoder_hash())) {
    throw CheckpointError("encoder hash mismatch: manifest " + kv["encoder_hash"] + ", blob " +
                          format_hash(ck.model->encoder_hash()));
  }
  return ck;
}

}  // namespace modcl
