// modcl: command-line entry point for dataset preparation, training runs,
// diagnostics and result aggregation.

#include "modcl/config.hpp"
#include "modcl/dataset_io.hpp"
#include "modcl/diagnostics.hpp"
#include "modcl/kv.hpp"
#include "modcl/model.hpp"
#include "modcl/pickle.hpp"
#include "modcl/pipelines.hpp"
#include "modcl/report.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace modcl;

namespace {

constexpr const char* kOutputRootEnv = "MODCL_OUTPUT_ROOT";

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kProtocol = 5,
  kDiverged = 6,
  kCheckFailed = 7,
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

int fail(const char* kind, int code, const std::string& message) {
  std::cerr << "error=" << kind << " exit=" << code << " message=" << one_line(message) << '\n';
  return code;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// ------------------------------------------------------------------ config flags

struct ConfigFlags {
  std::string config_path;
  std::string preset = "paper";
  std::vector<std::string> sets;
  std::map<std::string, std::string> values;
  std::optional<std::uint64_t> seed;
  std::string out;
  CLI::App* app = nullptr;
};

void add_output_flag(CLI::App* app, std::string& out) {
  app->add_option("--out", out, std::string("output root (default: $") + kOutputRootEnv + " or ./runs)");
}

void add_config_flags(CLI::App* app, ConfigFlags& f, bool seed_flag = true) {
  f.app = app;
  app->add_option("--config", f.config_path, "key=value config file")->check(CLI::ExistingFile);
  app->add_option("--preset", f.preset, "base settings before overrides")
      ->check(CLI::IsMember({"paper", "desk"}))
      ->capture_default_str();
  app->add_option("--set", f.sets, "override as key=value (repeatable)");
  if (seed_flag) app->add_option("--seed", f.seed, "run a single seed");
  add_output_flag(app, f.out);
  auto* group = app->add_option_group("config keys", "one flag per config key");
  for (const auto& key : config_keys()) {
    group->add_option("--" + key, f.values[key], "config key " + key);
  }
}

ExperimentConfig build_config(const ConfigFlags& f, const char* seed_key = "seeds") {
  ExperimentConfig base = f.preset == "desk" ? ExperimentConfig::desk_scale() : ExperimentConfig{};
  KeyValueMap kv;
  if (!f.config_path.empty()) kv = read_key_values(f.config_path);
  std::vector<std::string> issues;
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      issues.push_back("--set '" + s + "' is not key=value");
      continue;
    }
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (!issues.empty()) throw ConfigError(issues);
  for (const auto& [key, value] : f.values) {
    if (f.app->count("--" + key) > 0) kv[key] = value;
  }
  if (f.seed) kv[seed_key] = std::to_string(*f.seed);
  return apply_config(base, kv);
}

// ------------------------------------------------------------------ run directories

fs::path output_root(const std::string& out) {
  if (!out.empty()) return out;
  if (const char* env = std::getenv(kOutputRootEnv); env != nullptr && *env != '\0') return env;
  return "runs";
}

std::string seed_tag(std::span<const std::uint64_t> seeds) {
  std::string tag;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) tag += '-';
    tag += std::to_string(seeds[i]);
  }
  return tag;
}

fs::path create_run_dir(const fs::path& root, const std::string& command, const std::string& seeds) {
  fs::create_directories(root);
  const std::string stem = utc_timestamp(std::chrono::system_clock::now(), true) + "_" + command + "_seed" + seeds;
  for (int k = 0;; ++k) {
    const fs::path dir = root / (k == 0 ? stem : stem + "." + std::to_string(k));
    if (fs::create_directory(dir)) return dir;
  }
}

RunManifest start_run(const std::string& command, const fs::path& dir, const ExperimentConfig* config) {
  RunManifest m(command, dir);
  if (config != nullptr) m.set_config(serialize_config(*config), config_fingerprint(*config));
  return m;
}

void record_checkpoints(RunManifest& m, const fs::path& run_dir, const std::vector<fs::path>& dirs) {
  for (const auto& d : dirs) {
    const auto rel = fs::relative(d, run_dir);
    m.add_artifact(rel / "manifest.txt");
    m.add_artifact(rel / "params.f32");
  }
}

void print_summary(const KeyValueList& kv) {
  bool first = true;
  for (const auto& [k, v] : kv) {
    std::cout << (first ? "" : " ") << k << '=' << v;
    first = false;
  }
  std::cout << std::endl;
}

// Per-epoch progress on stderr; per-step rows go to the metrics file.
class Progress {
 public:
  explicit Progress(std::string label) : label_(std::move(label)) {}

  void observe(const MetricsRecord& r) {
    if (r.epoch != epoch_) flush();
    epoch_ = r.epoch;
    if (r.loss && std::isfinite(r.loss->l_total)) {
      sum_ += r.loss->l_total;
      ++n_;
    }
    acc_ = r.acc_overall;
  }

  void flush() {
    if (epoch_ < 0) return;
    std::cerr << label_ << " epoch " << epoch_;
    if (n_ > 0) std::cerr << " loss " << num(sum_ / static_cast<double>(n_));
    if (acc_) std::cerr << " acc " << num(*acc_);
    std::cerr << '\n';
    sum_ = 0.0;
    n_ = 0;
    acc_.reset();
    epoch_ = -1;
  }

 private:
  std::string label_;
  int epoch_ = -1;
  double sum_ = 0.0;
  long n_ = 0;
  std::optional<double> acc_;
};

RunHooks metrics_hooks(MetricsWriter& writer, Progress& progress) {
  RunHooks hooks;
  hooks.on_metrics = [&writer, &progress](const MetricsRecord& r) {
    writer.write(r);
    progress.observe(r);
  };
  return hooks;
}

void write_eval_summary(const fs::path& path, const EvalResult& eval, KeyValueList extra) {
  KeyValueList kv = {{"acc_overall", num(eval.acc_overall)}, {"test_count", std::to_string(eval.count)}};
  for (const auto& [snr, acc] : eval.acc_per_snr) kv.emplace_back("acc_snr." + std::to_string(snr), num(acc));
  kv.insert(kv.end(), extra.begin(), extra.end());
  write_key_values(path, kv);
}

CheckpointInfo info_for(const ExperimentConfig& config, std::uint64_t seed, int epoch, const std::string& method) {
  CheckpointInfo info;
  info.encoder = config.encoder;
  info.projector = config.projector;
  info.seed = seed;
  info.epoch = epoch;
  info.method = method;
  info.extra = {{"config_fingerprint", config_fingerprint(config)}};
  return info;
}

// The pretraining run's split record sits two levels above an epoch checkpoint.
std::optional<fs::path> split_record_for(const fs::path& checkpoint) {
  fs::path dir = fs::absolute(checkpoint).lexically_normal();
  if (dir.filename().empty()) dir = dir.parent_path();
  const fs::path candidate = dir.parent_path().parent_path() / "split.txt";
  if (fs::exists(candidate)) return candidate;
  return std::nullopt;
}

// ------------------------------------------------------------------ subcommands

int cmd_synth(const ConfigFlags& flags, const std::string& dest_flag) {
  const ExperimentConfig config = build_config(flags, "synth.seed");
  const fs::path run_dir = create_run_dir(output_root(flags.out), "synth", std::to_string(config.synth.seed));
  RunManifest m = start_run("synth", run_dir, &config);
  ExperimentConfig synth_only = config;
  synth_only.data_dir.clear();
  const Dataset ds = prepare_dataset(synth_only);
  const fs::path dest = dest_flag.empty() ? run_dir / "dataset" : fs::path(dest_flag);
  save_dataset(ds, dest);
  const fs::path rel = dest_flag.empty() ? fs::path("dataset") : fs::absolute(dest);
  for (const char* f : {"manifest.txt", "samples.f32", "labels.i32", "snr.i16"}) m.add_artifact(rel / f);
  m.set("instances", std::to_string(ds.instances.size()));
  m.finish("ok");
  print_summary({{"run_dir", run_dir.string()}, {"dataset", dest.string()},
                 {"instances", std::to_string(ds.instances.size())}});
  return kOk;
}

int cmd_convert(const std::string& source, const std::string& dest_flag, const std::string& out) {
  const fs::path run_dir = create_run_dir(output_root(out), "convert", "none");
  RunManifest m = start_run("convert", run_dir, nullptr);
  const fs::path dest = dest_flag.empty() ? run_dir / "dataset" : fs::path(dest_flag);
  convert_radioml_archive(source, dest);
  const fs::path rel = dest_flag.empty() ? fs::path("dataset") : fs::absolute(dest);
  for (const char* f : {"manifest.txt", "samples.f32", "labels.i32", "snr.i16"}) m.add_artifact(rel / f);
  m.set("source", fs::absolute(source).string());
  m.finish("ok");
  const auto manifest = read_manifest(dest);
  print_summary({{"run_dir", run_dir.string()}, {"dataset", dest.string()},
                 {"instances", std::to_string(manifest.num_instances)}});
  return kOk;
}

int cmd_pretrain(const ConfigFlags& flags, const std::string& command, std::optional<Method> forced) {
  ExperimentConfig config = build_config(flags);
  if (forced) config.method = *forced;
  const Dataset ds = prepare_dataset(config);
  const SplitResult split = stratified_split(ds, config.split);
  for (const auto seed : config.seeds) {
    const fs::path run_dir = create_run_dir(output_root(flags.out), command, std::to_string(seed));
    RunManifest m = start_run(command, run_dir, &config);
    save_split_record(run_dir / "split.txt", split);
    m.add_artifact("split.txt");

    MetricsWriter writer(run_dir / "metrics.csv");
    Progress progress(command + " seed " + std::to_string(seed));
    RunHooks hooks = metrics_hooks(writer, progress);
    hooks.checkpoint_dir = run_dir / "checkpoints";
    PretrainResult r = pretrain(config, ds, split.train, seed, hooks);
    progress.flush();
    m.add_artifact("metrics.csv");
    if (r.checkpoints.empty()) {
      const fs::path dir = *hooks.checkpoint_dir / "epoch_0000";
      save_checkpoint(dir, *r.model, info_for(config, seed, 0, method_name(config.method)));
      r.checkpoints.push_back(dir);
    }
    record_checkpoints(m, run_dir, r.checkpoints);

    const std::string hash = format_hash(r.model->encoder_hash());
    m.set("seed", std::to_string(seed));
    m.set("steps", std::to_string(r.steps));
    m.set("label_reads", std::to_string(r.label_reads));
    m.set("encoder_hash", hash);
    m.finish("ok");
    KeyValueList summary = {{"run_dir", run_dir.string()},
                            {"seed", std::to_string(seed)},
                            {"method", method_name(config.method)},
                            {"steps", std::to_string(r.steps)},
                            {"checkpoint", r.checkpoints.back().string()},
                            {"encoder_hash", hash}};
    if (!r.history.empty() && r.history.back().loss) summary.emplace_back("final_loss", num(r.history.back().loss->l_total));
    print_summary(summary);
  }
  return kOk;
}

struct LoadedModel {
  std::unique_ptr<ContrastiveModel> model;
  std::uint64_t seed = 0;
  std::string source = "random-init";
};

LoadedModel model_for(const ExperimentConfig& config, const std::string& checkpoint, std::optional<std::uint64_t> seed,
                      bool allow_none) {
  LoadedModel out;
  if (!checkpoint.empty()) {
    LoadedCheckpoint ck = load_checkpoint(checkpoint);
    out.model = std::move(ck.model);
    out.seed = seed.value_or(ck.info.seed);
    out.source = fs::absolute(checkpoint).string();
    return out;
  }
  out.seed = seed.value_or(config.seeds.front());
  if (config.method == Method::RandomInit) {
    out.model = std::make_unique<ContrastiveModel>(config.encoder, config.projector, out.seed);
  } else if (!allow_none) {
    throw UsageError("--checkpoint is required unless method=random-init");
  }
  return out;
}

int cmd_probe(const ConfigFlags& flags, const std::string& checkpoint) {
  const ExperimentConfig config = build_config(flags);
  LoadedModel lm = model_for(config, checkpoint, flags.seed, false);
  const Dataset ds = prepare_dataset(config);
  const SplitResult split = stratified_split(ds, config.split);
  if (!checkpoint.empty()) {
    if (const auto record = split_record_for(checkpoint)) check_against_record(split.labeled, load_split_record(*record));
  }

  const fs::path run_dir = create_run_dir(output_root(flags.out), "probe", std::to_string(lm.seed));
  RunManifest m = start_run("probe", run_dir, &config);
  MetricsWriter writer(run_dir / "metrics.csv");
  Progress progress("probe seed " + std::to_string(lm.seed));
  ProbeResult r = linear_probe(*lm.model, ds, split, config, lm.seed, metrics_hooks(writer, progress));
  progress.flush();
  m.add_artifact("metrics.csv");

  const fs::path ck = run_dir / "probe_checkpoint";
  save_checkpoint(ck, *lm.model, info_for(config, lm.seed, config.probe_epochs, "probe"), r.classifier.get());
  record_checkpoints(m, run_dir, {ck});
  write_eval_summary(run_dir / "summary.txt", r.test,
                     {{"encoder", lm.source},
                      {"labeled_count", std::to_string(split.labeled.size())},
                      {"encoder_hash_before", format_hash(r.hash_before)},
                      {"encoder_hash_after", format_hash(r.hash_after)}});
  m.add_artifact("summary.txt");
  m.set("seed", std::to_string(lm.seed));
  m.set("encoder", lm.source);
  m.finish("ok");
  print_summary({{"run_dir", run_dir.string()},
                 {"seed", std::to_string(lm.seed)},
                 {"acc_overall", num(r.test.acc_overall)},
                 {"encoder_hash", format_hash(r.hash_after)}});
  return kOk;
}

int cmd_finetune(const ConfigFlags& flags, const std::string& checkpoint) {
  const ExperimentConfig config = build_config(flags);
  LoadedModel lm = model_for(config, checkpoint, flags.seed, true);
  const Dataset ds = prepare_dataset(config);
  const SplitResult split = stratified_split(ds, config.split);
  if (!checkpoint.empty()) {
    if (const auto record = split_record_for(checkpoint)) check_against_record(split.labeled, load_split_record(*record));
  }

  const fs::path run_dir = create_run_dir(output_root(flags.out), "finetune", std::to_string(lm.seed));
  RunManifest m = start_run("finetune", run_dir, &config);
  MetricsWriter writer(run_dir / "metrics.csv");
  Progress progress("finetune seed " + std::to_string(lm.seed));
  FineTuneResult r = fine_tune(std::move(lm.model), ds, split, config, lm.seed, metrics_hooks(writer, progress));
  progress.flush();
  m.add_artifact("metrics.csv");

  const fs::path ck = run_dir / "checkpoint";
  save_checkpoint(ck, *r.model, info_for(config, lm.seed, config.finetune_epochs, "finetune"), r.classifier.get());
  record_checkpoints(m, run_dir, {ck});
  write_eval_summary(run_dir / "summary.txt", r.test,
                     {{"encoder", lm.source}, {"labeled_count", std::to_string(split.labeled.size())}});
  m.add_artifact("summary.txt");
  m.set("seed", std::to_string(lm.seed));
  m.set("encoder", lm.source);
  m.finish("ok");
  print_summary({{"run_dir", run_dir.string()},
                 {"seed", std::to_string(lm.seed)},
                 {"acc_overall", num(r.test.acc_overall)}});
  return kOk;
}

std::vector<double> parse_p_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !(v >= 0.0 && v <= 1.0)) {
      throw UsageError("--p entry '" + item + "' must be a number in [0, 1]");
    }
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("--p is empty");
  return out;
}

std::vector<CorruptionMode> parse_modes(const std::string& text) {
  std::vector<CorruptionMode> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "random") {
      out.push_back(CorruptionMode::Random);
    } else if (item == "semantic") {
      out.push_back(CorruptionMode::Semantic);
    } else {
      throw UsageError("--modes entry '" + item + "' must be random or semantic");
    }
  }
  if (out.empty()) throw UsageError("--modes is empty");
  return out;
}

int cmd_corrupt_sweep(const ConfigFlags& flags, const std::string& p_text, const std::string& modes_text) {
  const auto p_grid = parse_p_grid(p_text);
  const auto modes = parse_modes(modes_text);
  const ExperimentConfig config = build_config(flags);
  const Dataset ds = prepare_dataset(config);
  const SplitResult split = stratified_split(ds, config.split);

  const fs::path run_dir = create_run_dir(output_root(flags.out), "corrupt-sweep", seed_tag(config.seeds));
  RunManifest m = start_run("corrupt-sweep", run_dir, &config);
  std::ofstream csv(run_dir / "sweep.csv");
  csv << kSweepHeader << '\n';
  csv.flush();
  std::cout << kSweepHeader << std::endl;
  const auto rows = corruption_sweep(config, ds, split, p_grid, modes, [&](const SweepRow& row) {
    const std::string line = format_sweep_row(row);
    csv << line << '\n';
    csv.flush();
    std::cout << line << std::endl;
  });
  csv.close();
  if (!csv) throw DatasetIoError("write failed for " + (run_dir / "sweep.csv").string());
  m.add_artifact("sweep.csv");
  m.set("p_grid", p_text);
  m.set("modes", modes_text);
  m.set("rows", std::to_string(rows.size()));
  m.finish("ok");
  print_summary({{"run_dir", run_dir.string()}, {"rows", std::to_string(rows.size())}});
  return kOk;
}

int cmd_mi_check(std::uint64_t seed, int models, int maps, const std::string& out) {
  const fs::path run_dir = create_run_dir(output_root(out), "mi-check", std::to_string(seed));
  RunManifest m("mi-check", run_dir);
  const InformationSuite suite = run_information_suite(seed, models, maps);
  {
    std::ofstream f(run_dir / "mi_report.txt");
    f << "# mutual information reported in bits (nats / ln 2); tolerance 1e-9 nats\n" << suite.report;
    if (!f) throw DatasetIoError("write failed for mi_report.txt");
  }
  m.add_artifact("mi_report.txt");
  m.set("seed", std::to_string(seed));
  m.set("models", std::to_string(models));
  m.set("maps_per_model", std::to_string(maps));
  m.set("failures", std::to_string(suite.failures));
  m.finish(suite.pass() ? "ok" : "failed");
  print_summary({{"run_dir", run_dir.string()},
                 {"models", std::to_string(suite.models)},
                 {"maps", std::to_string(suite.maps)},
                 {"asserted", std::to_string(suite.asserted)},
                 {"failures", std::to_string(suite.failures)},
                 {"strict_gap", suite.strict_gap ? "yes" : "no"},
                 {"result", suite.pass() ? "PASS" : "FAIL"}});
  if (!suite.pass()) {
    throw CheckFailed("information bounds violated; see " + (run_dir / "mi_report.txt").string());
  }
  return kOk;
}

struct AblationPoint {
  std::string label;
  KeyValueMap overrides;
};

std::vector<AblationPoint> ablation_grid(const std::string& axis) {
  std::vector<AblationPoint> grid;
  auto values = [&](const char* key, std::initializer_list<const char*> vs) {
    for (const char* v : vs) grid.push_back({v, {{key, v}}});
  };
  if (axis == "loss-components") {
    for (const char* v : {"ac", "sc", "jc", "ac+sc", "ac+jc", "sc+jc", "ac+sc+jc"}) {
      std::string tiers = v;
      for (auto& c : tiers) {
        if (c == '+') c = ',';
      }
      grid.push_back({v, {{"loss.tiers", tiers}}});
    }
  } else if (axis == "segment-length") {
    values("segment_length", {"64", "32", "16", "8", "4"});
  } else if (axis == "temperature") {
    values("tau", {"0.05", "0.07", "0.1", "0.2"});
  } else if (axis == "batch-size") {
    values("batch_size", {"64", "128", "256", "512", "1024"});
  } else if (axis == "learning-rate") {
    values("learning_rate", {"0.0005", "0.001", "0.005", "0.01"});
  } else {
    throw UsageError("unknown ablation axis '" + axis + "'");
  }
  return grid;
}

int cmd_ablate(const ConfigFlags& flags, const std::string& axis) {
  const auto grid = ablation_grid(axis);
  const ExperimentConfig config = build_config(flags);
  // Validate every grid point before spending time on training.
  std::vector<ExperimentConfig> configs;
  for (const auto& point : grid) configs.push_back(apply_config(config, point.overrides));
  const Dataset ds = prepare_dataset(config);
  const SplitResult split = stratified_split(ds, config.split);

  const fs::path run_dir = create_run_dir(output_root(flags.out), "ablate", seed_tag(config.seeds));
  RunManifest m = start_run("ablate", run_dir, &config);
  const std::string header = "axis,value,seed,acc_overall";
  std::ofstream csv(run_dir / "ablation.csv");
  csv << header << '\n';
  std::cout << header << std::endl;
  CsvTable table;
  table.header = {"axis", "value", "seed", "acc_overall"};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (const auto seed : configs[i].seeds) {
      const double acc = pretrain_and_probe(configs[i], ds, split, seed).probe.test.acc_overall;
      std::vector<std::string> row = {axis, grid[i].label, std::to_string(seed), num(acc)};
      const std::string line = axis + "," + grid[i].label + "," + row[2] + "," + row[3];
      csv << line << '\n';
      csv.flush();
      std::cout << line << std::endl;
      table.rows.push_back(std::move(row));
    }
  }
  csv.close();
  const std::string summary = format_aggregate(aggregate(table, "acc_overall", std::vector<std::string>{"axis", "value"}));
  {
    std::ofstream f(run_dir / "ablation_summary.csv");
    f << summary;
    if (!f || !csv) throw DatasetIoError("write failed under " + run_dir.string());
  }
  std::cout << summary;
  m.add_artifact("ablation.csv");
  m.add_artifact("ablation_summary.csv");
  m.set("axis", axis);
  m.finish("ok");
  print_summary({{"run_dir", run_dir.string()}, {"points", std::to_string(grid.size())}});
  return kOk;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& metric, const std::string& group,
               bool unverified, const std::string& out) {
  std::vector<CsvTable> tables;
  std::map<std::string, std::string> seen;  // fingerprint -> first file
  for (const auto& in : inputs) {
    tables.push_back(read_csv(in));
    const auto fp = sibling_fingerprint(in);
    if (!fp) {
      if (!unverified && inputs.size() > 1) {
        throw ReportError("no run manifest next to " + in + "; cannot confirm it shares a config snapshot");
      }
      continue;
    }
    seen.emplace(*fp, in);
  }
  if (seen.size() > 1) {
    std::string detail;
    for (const auto& [fp, file] : seen) detail += (detail.empty() ? "" : ", ") + file + " (" + fp + ")";
    throw ReportError("incompatible config snapshots: " + detail);
  }
  std::optional<std::vector<std::string>> groups;
  if (!group.empty()) {
    groups.emplace();
    std::stringstream ss(group);
    std::string g;
    while (std::getline(ss, g, ',')) groups->push_back(g);
  }
  const std::string text = format_aggregate(aggregate(concat(tables), metric, groups));

  const fs::path run_dir = create_run_dir(output_root(out), "report", "none");
  RunManifest m("report", run_dir);
  if (!seen.empty()) m.set("config_fingerprint", seen.begin()->first);
  for (std::size_t i = 0; i < inputs.size(); ++i) m.set("input." + std::to_string(i), fs::absolute(inputs[i]).string());
  {
    std::ofstream f(run_dir / "report.csv");
    f << text;
    if (!f) throw DatasetIoError("write failed for report.csv");
  }
  m.add_artifact("report.csv");
  m.finish("ok");
  std::cout << text;
  print_summary({{"run_dir", run_dir.string()}, {"inputs", std::to_string(inputs.size())}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segment-level contrastive pretraining for modulation classification"};
  app.require_subcommand(1);

  ConfigFlags synth_flags, pretrain_flags, baseline_flags, probe_flags, finetune_flags, sweep_flags, ablate_flags;
  std::string synth_dest, convert_source, convert_dest, convert_out;
  std::string probe_checkpoint, finetune_checkpoint;
  std::string sweep_p = "0,0.5,1", sweep_modes = "random,semantic";
  std::string ablate_axis;
  std::uint64_t mi_seed = 0;
  int mi_models = 100, mi_maps = 10;
  std::string mi_out;
  std::vector<std::string> report_inputs;
  std::string report_metric = "acc_overall", report_group, report_out;
  bool report_unverified = false;

  auto* synth = app.add_subcommand("synth", "synthesize a dataset (--seed sets synth.seed)");
  add_config_flags(synth, synth_flags);
  synth->add_option("--dest", synth_dest, "dataset directory (default: <run dir>/dataset)");

  auto* convert = app.add_subcommand("convert", "convert a RadioML pickle to the native dataset format");
  convert->add_option("--source", convert_source, "RadioML .pkl file")->required()->check(CLI::ExistingFile);
  convert->add_option("--dest", convert_dest, "dataset directory (default: <run dir>/dataset)");
  add_output_flag(convert, convert_out);

  auto* pretrain = app.add_subcommand("pretrain", "pretrain one encoder per seed with config.method");
  add_config_flags(pretrain, pretrain_flags);

  auto* baseline = app.add_subcommand("baseline", "instance-level contrastive pretraining per seed");
  add_config_flags(baseline, baseline_flags);

  auto* probe = app.add_subcommand("probe", "linear probe on a frozen encoder");
  add_config_flags(probe, probe_flags);
  probe->add_option("--checkpoint", probe_checkpoint, "checkpoint directory")->check(CLI::ExistingDirectory);

  auto* finetune = app.add_subcommand("finetune", "fine-tune encoder and classifier end to end");
  add_config_flags(finetune, finetune_flags);
  finetune->add_option("--checkpoint", finetune_checkpoint, "start from this checkpoint (default: random init)")
      ->check(CLI::ExistingDirectory);

  auto* sweep = app.add_subcommand("corrupt-sweep", "semantic-corruption diagnostic");
  add_config_flags(sweep, sweep_flags);
  sweep->add_option("--p", sweep_p, "comma-separated corruption probabilities")->capture_default_str();
  sweep->add_option("--modes", sweep_modes, "comma-separated: random, semantic")->capture_default_str();

  auto* mi = app.add_subcommand("mi-check", "exact information bounds on random toy models");
  mi->add_option("--seed", mi_seed)->capture_default_str();
  mi->add_option("--models", mi_models)->check(CLI::NonNegativeNumber)->capture_default_str();
  mi->add_option("--maps", mi_maps, "random maps f per model")->check(CLI::NonNegativeNumber)->capture_default_str();
  add_output_flag(mi, mi_out);

  auto* ablate = app.add_subcommand("ablate", "ablation grid along one axis");
  add_config_flags(ablate, ablate_flags);
  ablate->add_option("--axis", ablate_axis)
      ->required()
      ->check(CLI::IsMember({"loss-components", "segment-length", "temperature", "batch-size", "learning-rate"}));

  auto* report = app.add_subcommand("report", "aggregate result CSVs into mean and std tables");
  report->add_option("inputs", report_inputs, "CSV files")->required()->check(CLI::ExistingFile);
  report->add_option("--metric", report_metric)->capture_default_str();
  report->add_option("--group", report_group, "comma-separated grouping columns");
  report->add_flag("--unverified", report_unverified, "accept inputs without a run manifest");
  add_output_flag(report, report_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (argc > 1 && argv[1][0] != '-' && app.get_subcommand_no_throw(argv[1]) == nullptr) {
      return fail("usage", kUsage, std::string("unknown subcommand '") + argv[1] + "'");
    }
    return fail("usage", kUsage, e.what());
  }

  try {
    if (*synth) return cmd_synth(synth_flags, synth_dest);
    if (*convert) return cmd_convert(convert_source, convert_dest, convert_out);
    if (*pretrain) return cmd_pretrain(pretrain_flags, "pretrain", std::nullopt);
    if (*baseline) return cmd_pretrain(baseline_flags, "baseline", Method::InstanceBaseline);
    if (*probe) return cmd_probe(probe_flags, probe_checkpoint);
    if (*finetune) return cmd_finetune(finetune_flags, finetune_checkpoint);
    if (*sweep) return cmd_corrupt_sweep(sweep_flags, sweep_p, sweep_modes);
    if (*mi) return cmd_mi_check(mi_seed, mi_models, mi_maps, mi_out);
    if (*ablate) return cmd_ablate(ablate_flags, ablate_axis);
    if (*report) return cmd_report(report_inputs, report_metric, report_group, report_unverified, report_out);
  } catch (const UsageError& e) {
    return fail("usage", kUsage, e.what());
  } catch (const ConfigError& e) {
    return fail("config", kConfig, e.what());
  } catch (const CheckFailed& e) {
    return fail("check_failed", kCheckFailed, e.what());
  } catch (const DivergenceError& e) {
    return fail("diverged", kDiverged, e.what());
  } catch (const BudgetViolationError& e) {
    return fail("budget_violation", kProtocol, e.what());
  } catch (const LabelLeakError& e) {
    return fail("label_leak", kProtocol, e.what());
  } catch (const InsufficientCellError& e) {
    return fail("insufficient_cell", kProtocol, e.what());
  } catch (const InfeasibleCorruptionError& e) {
    return fail("infeasible_corruption", kProtocol, e.what());
  } catch (const DatasetIoError& e) {
    return fail("io", kIo, e.what());
  } catch (const CheckpointError& e) {
    return fail("io", kIo, e.what());
  } catch (const KeyValueError& e) {
    return fail("io", kIo, e.what());
  } catch (const pickle::ParseError& e) {
    return fail("io", kIo, e.what());
  } catch (const ReportError& e) {
    return fail("report", kIo, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail("io", kIo, e.what());
  } catch (const std::exception& e) {
    return fail("internal", kInternal, e.what());
  }
  return fail("usage", kUsage, "no subcommand");
}
