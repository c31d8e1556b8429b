#include "modcl/pipelines.hpp"

#include "modcl/diagnostics.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

namespace modcl {
namespace fs = std::filesystem;
namespace {

// Stream counters; each consumer of randomness owns one.
constexpr std::uint64_t kShuffleStream = 1'000'000;
constexpr std::uint64_t kViewStream = 2'000'000'000;
constexpr std::uint64_t kCorruptionStream = 3;
constexpr std::uint64_t kClassifierStream = 103;
constexpr std::uint64_t kProbeShuffleStream = 4'000'000;
constexpr std::uint64_t kFineTuneShuffleStream = 5'000'000;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

class DivergenceGuard {
 public:
  DivergenceGuard(double factor, int patience) : factor_(factor), patience_(patience) {}

  void observe(double loss, std::int64_t step) {
    if (!std::isfinite(loss)) {
      throw DivergenceError("training diverged: loss is " + std::to_string(loss) + " at step " + std::to_string(step));
    }
    if (std::isnan(initial_)) initial_ = loss;
    if (loss > factor_ * initial_) {
      if (++run_ >= patience_) {
        throw DivergenceError("training diverged: loss stayed above " + num(factor_) + "x its initial value " +
                              num(initial_) + " for " + std::to_string(run_) + " steps (step " +
                              std::to_string(step) + ")");
      }
    } else {
      run_ = 0;
    }
  }

 private:
  double factor_;
  int patience_;
  double initial_ = std::numeric_limits<double>::quiet_NaN();
  int run_ = 0;
};

std::vector<const IqInstance*> gather(const Dataset& dataset, std::span<const std::size_t> indices) {
  std::vector<const IqInstance*> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    if (i >= dataset.instances.size()) throw ContractViolation("instance index " + std::to_string(i) + " out of range");
    out.push_back(&dataset.instances[i]);
  }
  return out;
}

CheckpointInfo checkpoint_info(const ExperimentConfig& config, std::uint64_t seed, int epoch) {
  CheckpointInfo info;
  info.encoder = config.encoder;
  info.projector = config.projector;
  info.seed = seed;
  info.epoch = epoch;
  info.method = method_name(config.method);
  info.extra = {{"config_fingerprint", config_fingerprint(config)}};
  return info;
}

void maybe_checkpoint(const ExperimentConfig& config, const RunHooks& hooks, PretrainResult& r,
                      std::uint64_t seed, int epochs_done) {
  if (!hooks.checkpoint_dir) return;
  const bool last = epochs_done == config.pretrain_epochs;
  if (!last && epochs_done % config.checkpoint_every != 0) return;
  char name[32];
  std::snprintf(name, sizeof(name), "epoch_%04d", epochs_done);
  const fs::path dir = *hooks.checkpoint_dir / name;
  save_checkpoint(dir, *r.model, checkpoint_info(config, seed, epochs_done));
  r.checkpoints.push_back(dir);
}

void emit(PretrainResult& r, const RunHooks& hooks, MetricsRecord rec) {
  if (hooks.on_metrics) hooks.on_metrics(rec);
  r.history.push_back(std::move(rec));
}

// Mean softmax cross-entropy over the columns of `scores`; fills d/dscores.
double cross_entropy(const nn::Matrix& scores, std::span<const int> labels, nn::Matrix* grad) {
  const auto count = scores.cols();
  double total = 0.0;
  if (grad != nullptr) grad->resize(scores.rows(), count);
  for (Eigen::Index j = 0; j < count; ++j) {
    const Eigen::VectorXd s = scores.col(j).cast<double>();
    const double top = s.maxCoeff();
    const Eigen::VectorXd e = (s.array() - top).exp();
    const double z = e.sum();
    const int y = labels[static_cast<std::size_t>(j)];
    total += std::log(z) + top - s(y);
    if (grad != nullptr) {
      Eigen::VectorXd p = e / z;
      p(y) -= 1.0;
      grad->col(j) = (p / static_cast<double>(count)).cast<float>();
    }
  }
  return total / static_cast<double>(count);
}

std::vector<int> read_labels(const Dataset& dataset, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(dataset.instances[i].label());
  return out;
}

LossBreakdown ce_breakdown(double ce) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {nan, nan, nan, ce, nan};
}

}  // namespace

// ------------------------------------------------------------------ metrics

std::string format_metrics_row(const MetricsRecord& r) {
  std::string row = std::to_string(r.epoch) + "," + std::to_string(r.step) + "," + std::to_string(r.seed) + ",";
  if (r.loss) {
    row += num(r.loss->l_sc) + "," + num(r.loss->l_ac) + "," + num(r.loss->l_jc) + "," + num(r.loss->l_total) + ",";
  } else {
    row += ",,,,";
  }
  row += (r.acc_overall ? num(*r.acc_overall) : "") + ",";
  if (!r.acc_per_snr.empty()) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [snr, acc] : r.acc_per_snr) j[std::to_string(snr)] = acc;
    std::string text = j.dump();
    // CSV quoting: double every quote and wrap the field.
    std::string quoted = "\"";
    for (char c : text) {
      quoted += c;
      if (c == '"') quoted += '"';
    }
    row += quoted + "\"";
  }
  row += "," + num(r.wall_s);
  return row;
}

MetricsWriter::MetricsWriter(const fs::path& path) : path_(path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  out_.open(path, std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot open metrics file " + path.string());
  out_ << kMetricsHeader << '\n';
  out_.flush();
}

void MetricsWriter::write(const MetricsRecord& record) {
  out_ << format_metrics_row(record) << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("write failed for " + path_.string());
}

// ------------------------------------------------------------------ pretraining

PretrainResult pretrain(const ExperimentConfig& config, const Dataset& dataset, std::span<const std::size_t> pool,
                        std::uint64_t seed, const RunHooks& hooks) {
  switch (config.method) {
    case Method::ModCl: return pretrain_mod_cl(config, dataset, pool, seed, hooks);
    case Method::InstanceBaseline: return pretrain_instance_baseline(config, dataset, pool, seed, hooks);
    case Method::RandomInit: return random_init(config, seed);
  }
  throw ContractViolation("unknown method");
}

PretrainResult pretrain_mod_cl(const ExperimentConfig& config, const Dataset& dataset,
                               std::span<const std::size_t> pool, std::uint64_t seed, const RunHooks& hooks) {
  config.validate();
  if (pool.empty()) throw ContractViolation("pretrain: the unlabeled pool is empty");
  const auto instances = gather(dataset, pool);

  PretrainResult r;
  r.model = std::make_unique<ContrastiveModel>(config.encoder, config.projector, seed);
  nn::Adam opt(r.model->parameters(), config.learning_rate);
  DivergenceGuard guard(config.divergence_factor, config.divergence_patience);

  const bool corrupt = config.corruption.active();
  const CorruptionSpec cspec{config.corruption.mode, config.corruption.p, mix_seed(seed, config.corruption.seed),
                             config.corruption.freeze};
  Rng corruption_rng = make_stream(mix_seed(seed, config.corruption.seed), kCorruptionStream);
  const ViewOptions options = config.view_options();

  const LabelAudit::Scope audit;
  const auto t0 = Clock::now();
  std::vector<std::size_t> order(instances.size());
  std::vector<const IqInstance*> batch;
  std::vector<int> labels;
  const auto b = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng = make_stream(seed, kShuffleStream + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t start = 0; start < order.size(); start += b) {
      const std::size_t stop = std::min(order.size(), start + b);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(instances[order[i]]);

      Rng view_rng = make_stream(seed, kViewStream + static_cast<std::uint64_t>(r.steps));
      SegmentViewBatch views = make_views(batch, config.view1, config.view2, view_rng, options);
      if (corrupt) {
        labels.clear();
        for (const auto* inst : batch) labels.push_back(inst->label());
        views = corrupt_positive_pairs(std::move(views), labels, cspec, corruption_rng);
        r.relations_corrupted += views.corruption_log.size();
      }
      r.relations_seen += views.relations.size();

      ForwardTape tape;
      opt.zero_grad();
      const EmbeddingBatch emb = r.model->encode(views, nn::Mode::Train, &tape);
      EmbeddingMatrix grad;
      LossBreakdown loss;
      try {
        loss = contrastive_loss(emb.h_norm, views.relations, config.tau, config.tiers, &grad);
      } catch (const NonFiniteLossError& e) {
        throw DivergenceError(std::string("training diverged: ") + e.what() + " at step " + std::to_string(r.steps));
      }
      guard.observe(loss.l_total, r.steps);
      r.model->backward(l2_normalize_backward(emb.h, grad), tape);
      opt.step();

      MetricsRecord rec;
      rec.epoch = epoch;
      rec.step = r.steps++;
      rec.seed = seed;
      rec.loss = loss;
      rec.wall_s = seconds_since(t0);
      emit(r, hooks, std::move(rec));
    }
    maybe_checkpoint(config, hooks, r, seed, epoch + 1);
  }

  r.label_reads = static_cast<std::int64_t>(audit.reads());
  if (!corrupt && r.label_reads != 0) {
    throw LabelLeakError("pretraining read " + std::to_string(r.label_reads) + " labels");
  }
  return r;
}

PretrainResult pretrain_instance_baseline(const ExperimentConfig& config, const Dataset& dataset,
                                          std::span<const std::size_t> pool, std::uint64_t seed,
                                          const RunHooks& hooks) {
  config.validate();
  if (pool.empty()) throw ContractViolation("pretrain: the unlabeled pool is empty");
  const auto instances = gather(dataset, pool);

  PretrainResult r;
  r.model = std::make_unique<ContrastiveModel>(config.encoder, config.projector, seed);
  nn::Adam opt(r.model->parameters(), config.learning_rate);
  DivergenceGuard guard(config.divergence_factor, config.divergence_patience);

  const LabelAudit::Scope audit;
  const auto t0 = Clock::now();
  std::vector<std::size_t> order(instances.size());
  std::vector<const IqInstance*> batch;
  const auto b = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng = make_stream(seed, kShuffleStream + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t start = 0; start < order.size(); start += b) {
      const std::size_t stop = std::min(order.size(), start + b);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(instances[order[i]]);

      Rng view_rng = make_stream(seed, kViewStream + static_cast<std::uint64_t>(r.steps));
      const auto views = make_instance_views(batch, config.view1, config.view2, view_rng);

      ForwardTape tape;
      opt.zero_grad();
      const EmbeddingBatch emb = r.model->embed(views, nn::Mode::Train, &tape);
      EmbeddingMatrix grad;
      double loss = 0.0;
      try {
        loss = instance_nt_xent(emb.h_norm, config.tau, &grad);
      } catch (const NonFiniteLossError& e) {
        throw DivergenceError(std::string("training diverged: ") + e.what() + " at step " + std::to_string(r.steps));
      }
      guard.observe(loss, r.steps);
      r.model->backward(l2_normalize_backward(emb.h, grad), tape);
      opt.step();

      MetricsRecord rec;
      rec.epoch = epoch;
      rec.step = r.steps++;
      rec.seed = seed;
      rec.loss = ce_breakdown(loss);
      rec.wall_s = seconds_since(t0);
      emit(r, hooks, std::move(rec));
    }
    maybe_checkpoint(config, hooks, r, seed, epoch + 1);
  }

  r.label_reads = static_cast<std::int64_t>(audit.reads());
  if (r.label_reads != 0) throw LabelLeakError("pretraining read " + std::to_string(r.label_reads) + " labels");
  return r;
}

PretrainResult random_init(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  PretrainResult r;
  r.model = std::make_unique<ContrastiveModel>(config.encoder, config.projector, seed);
  return r;
}

// ------------------------------------------------------------------ evaluation

EvalResult score_predictions(const Dataset& dataset, std::span<const std::size_t> indices,
                             std::span<const int> predictions) {
  if (indices.size() != predictions.size()) throw ContractViolation("score_predictions: size mismatch");
  if (indices.empty()) throw ContractViolation("score_predictions: nothing to score");
  EvalResult r;
  std::map<int, std::pair<std::size_t, std::size_t>> cells;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& inst = dataset.instances[indices[k]];
    const bool hit = inst.label() == predictions[k];
    hits += hit ? 1 : 0;
    auto& cell = cells[static_cast<int>(std::lround(inst.snr_db))];
    cell.first += hit ? 1 : 0;
    ++cell.second;
  }
  r.count = indices.size();
  r.acc_overall = static_cast<double>(hits) / static_cast<double>(r.count);
  for (const auto& [snr, c] : cells) r.acc_per_snr[snr] = static_cast<double>(c.first) / static_cast<double>(c.second);
  return r;
}

void check_labeled_subset(const SplitResult& split, std::size_t dataset_size) {
  std::vector<char> role(dataset_size, 0);  // 1 train, 2 val, 3 test
  const auto mark = [&](const std::vector<std::size_t>& idx, char tag) {
    for (auto i : idx) {
      if (i >= dataset_size) throw BudgetViolationError("split index " + std::to_string(i) + " is out of range");
      role[i] = tag;
    }
  };
  mark(split.train, 1);
  mark(split.val, 2);
  mark(split.test, 3);
  for (auto i : split.labeled) {
    if (i >= dataset_size) throw BudgetViolationError("labeled index " + std::to_string(i) + " is out of range");
    if (role[i] == 3) throw BudgetViolationError("labeled subset leaks test instance " + std::to_string(i));
    if (role[i] == 2) throw BudgetViolationError("labeled subset leaks validation instance " + std::to_string(i));
    if (role[i] != 1) throw BudgetViolationError("labeled instance " + std::to_string(i) + " is not in the train split");
  }
}

namespace {

std::string index_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::size_t> parse_index_list(const KeyValueMap& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw BudgetViolationError("split record is missing '" + key + "'");
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  const std::string& s = it->second;
  while (pos < s.size()) {
    std::size_t end = s.find(',', pos);
    if (end == std::string::npos) end = s.size();
    out.push_back(static_cast<std::size_t>(std::stoull(s.substr(pos, end - pos))));
    pos = end + 1;
  }
  return out;
}

}  // namespace

void save_split_record(const fs::path& path, const SplitResult& split) {
  write_key_values(path, {{"train", index_list(split.train)},
                          {"val", index_list(split.val)},
                          {"test", index_list(split.test)},
                          {"labeled", index_list(split.labeled)}});
}

SplitResult load_split_record(const fs::path& path) {
  const auto kv = read_key_values(path);
  SplitResult r;
  r.train = parse_index_list(kv, "train");
  r.val = parse_index_list(kv, "val");
  r.test = parse_index_list(kv, "test");
  r.labeled = parse_index_list(kv, "labeled");
  return r;
}

void check_against_record(std::span<const std::size_t> labeled, const SplitResult& record) {
  std::vector<std::size_t> held(record.val);
  held.insert(held.end(), record.test.begin(), record.test.end());
  std::sort(held.begin(), held.end());
  for (auto i : labeled) {
    if (std::binary_search(held.begin(), held.end(), i)) {
      throw BudgetViolationError("labeled instance " + std::to_string(i) +
                                 " is held out in the pretraining split record");
    }
  }
}

ProbeResult linear_probe(ContrastiveModel& model, const Dataset& dataset, const SplitResult& split,
                         const ExperimentConfig& config, std::uint64_t seed, const RunHooks& hooks) {
  config.validate();
  check_labeled_subset(split, dataset.instances.size());
  if (split.labeled.empty()) throw ContractViolation("linear_probe: the labeled subset is empty");
  if (split.test.empty()) throw ContractViolation("linear_probe: the test split is empty");

  ProbeResult r;
  r.hash_before = model.encoder_hash();
  const auto t0 = Clock::now();
  const ViewOptions options = config.view_options();
  const nn::Matrix train_f = instance_features(model, gather(dataset, split.labeled), options);
  const nn::Matrix test_f = instance_features(model, gather(dataset, split.test), options);
  const std::vector<int> train_y = read_labels(dataset, split.labeled);

  Rng init = make_stream(seed, kClassifierStream);
  r.classifier = std::make_unique<LinearClassifier>(static_cast<int>(train_f.rows()), dataset.num_classes(), init);
  std::vector<nn::Parameter*> params;
  r.classifier->parameters(params);
  nn::Adam opt(params, config.probe_learning_rate);

  std::vector<std::size_t> order(split.labeled.size());
  const auto b = static_cast<std::size_t>(config.probe_batch_size);
  std::int64_t step = 0;
  nn::Matrix xb;
  std::vector<int> yb;
  for (int epoch = 0; epoch < config.probe_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng = make_stream(seed, kProbeShuffleStream + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += b) {
      const std::size_t stop = std::min(order.size(), start + b);
      xb.resize(train_f.rows(), static_cast<Eigen::Index>(stop - start));
      yb.clear();
      for (std::size_t i = start; i < stop; ++i) {
        xb.col(static_cast<Eigen::Index>(i - start)) = train_f.col(static_cast<Eigen::Index>(order[i]));
        yb.push_back(train_y[order[i]]);
      }
      opt.zero_grad();
      nn::Linear::Cache cache;
      const nn::Matrix scores = r.classifier->scores(xb, &cache);
      nn::Matrix grad;
      epoch_loss += cross_entropy(scores, yb, &grad);
      r.classifier->backward(grad, cache, false);
      opt.step();
      ++step;
      ++batches;
    }
    const auto predictions = r.classifier->predict(test_f);
    r.test = score_predictions(dataset, split.test, predictions);

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.step = step;
    rec.seed = seed;
    rec.loss = ce_breakdown(epoch_loss / static_cast<double>(batches));
    rec.acc_overall = r.test.acc_overall;
    rec.acc_per_snr = r.test.acc_per_snr;
    rec.wall_s = seconds_since(t0);
    if (hooks.on_metrics) hooks.on_metrics(rec);
    r.history.push_back(std::move(rec));
  }

  r.hash_after = model.encoder_hash();
  if (r.hash_after != r.hash_before) {
    throw std::logic_error("linear probe modified the frozen encoder (" + format_hash(r.hash_before) + " -> " +
                           format_hash(r.hash_after) + ")");
  }
  return r;
}

FineTuneResult fine_tune(std::unique_ptr<ContrastiveModel> model, const Dataset& dataset, const SplitResult& split,
                         const ExperimentConfig& config, std::uint64_t seed, const RunHooks& hooks) {
  config.validate();
  check_labeled_subset(split, dataset.instances.size());
  if (split.labeled.empty()) throw ContractViolation("fine_tune: the labeled subset is empty");
  if (split.test.empty()) throw ContractViolation("fine_tune: the test split is empty");

  FineTuneResult r;
  r.model = model ? std::move(model) : std::make_unique<ContrastiveModel>(config.encoder, config.projector, seed);
  const int f = r.model->feature_dim();
  Rng init = make_stream(seed, kClassifierStream);
  r.classifier = std::make_unique<LinearClassifier>(2 * f, dataset.num_classes(), init);

  std::vector<nn::Parameter*> params = r.model->encoder_parameters();
  r.classifier->parameters(params);
  nn::Adam opt(params, config.learning_rate);

  ViewOptions options = config.view_options();
  options.random_crop = false;
  const auto labeled = gather(dataset, split.labeled);
  const auto test = gather(dataset, split.test);
  const std::vector<int> train_y = read_labels(dataset, split.labeled);

  const auto t0 = Clock::now();
  std::vector<std::size_t> order(labeled.size());
  const auto b = static_cast<std::size_t>(config.probe_batch_size);
  std::vector<IqMatrix> segments;
  std::vector<int> yb;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < config.finetune_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng = make_stream(seed, kFineTuneShuffleStream + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += b) {
      const std::size_t stop = std::min(order.size(), start + b);
      segments.clear();
      yb.clear();
      for (std::size_t i = start; i < stop; ++i) {
        auto [s0, s1] = split_segments(crop_for_segments(labeled[order[i]]->samples, options, nullptr));
        segments.push_back(std::move(s0));
        segments.push_back(std::move(s1));
        yb.push_back(train_y[order[i]]);
      }
      const auto count = static_cast<Eigen::Index>(stop - start);
      opt.zero_grad();
      ForwardTape tape;
      const nn::Matrix z = r.model->features(segments, nn::Mode::Train, &tape);
      nn::Matrix feats(2 * f, count);
      for (Eigen::Index j = 0; j < count; ++j) {
        feats.col(j).head(f) = z.col(2 * j);
        feats.col(j).tail(f) = z.col(2 * j + 1);
      }
      nn::Linear::Cache cache;
      const nn::Matrix scores = r.classifier->scores(feats, &cache);
      nn::Matrix grad;
      epoch_loss += cross_entropy(scores, yb, &grad);
      const nn::Matrix dfeat = r.classifier->backward(grad, cache, true);
      nn::Matrix dz(f, 2 * count);
      for (Eigen::Index j = 0; j < count; ++j) {
        dz.col(2 * j) = dfeat.col(j).head(f);
        dz.col(2 * j + 1) = dfeat.col(j).tail(f);
      }
      r.model->backward_features(dz, tape);
      opt.step();
      ++step;
      ++batches;
    }
    const auto predictions = r.classifier->predict(instance_features(*r.model, test, options));
    r.test = score_predictions(dataset, split.test, predictions);

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.step = step;
    rec.seed = seed;
    rec.loss = ce_breakdown(epoch_loss / static_cast<double>(batches));
    rec.acc_overall = r.test.acc_overall;
    rec.acc_per_snr = r.test.acc_per_snr;
    rec.wall_s = seconds_since(t0);
    if (hooks.on_metrics) hooks.on_metrics(rec);
    r.history.push_back(std::move(rec));
  }
  return r;
}

MethodRun pretrain_and_probe(const ExperimentConfig& config, const Dataset& dataset, const SplitResult& split,
                             std::uint64_t seed, const RunHooks& hooks) {
  MethodRun run;
  run.pretrain = pretrain(config, dataset, split.train, seed, hooks);
  run.probe = linear_probe(*run.pretrain.model, dataset, split, config, seed, hooks);
  return run;
}

}  // namespace modcl
