#include "modcl/dataset_io.hpp"

#include "modcl/endian.hpp"
#include "modcl/kv.hpp"
#include "modcl/pickle.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

namespace modcl {
namespace fs = std::filesystem;
namespace {

constexpr const char* kManifestFile = "manifest.txt";
constexpr const char* kSamplesFile = "samples.f32";
constexpr const char* kLabelsFile = "labels.i32";
constexpr const char* kSnrFile = "snr.i16";

template <typename T>
void write_array(const fs::path& path, const std::vector<T>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetIoError("cannot open " + path.string() + " for writing");
  for (T v : values) {
    const T le = to_little(v);
    out.write(reinterpret_cast<const char*>(&le), sizeof(T));
  }
  if (!out) throw DatasetIoError("write failed for " + path.string());
}

template <typename T>
std::vector<T> read_array(const fs::path& path, std::size_t count) {
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec) throw DatasetIoError("cannot stat " + path.string() + ": " + ec.message());
  const std::size_t expected = count * sizeof(T);
  if (size < expected) {
    throw TruncatedFileError(path.filename().string() + " is truncated: " + std::to_string(size) +
                             " bytes, manifest requires " + std::to_string(expected));
  }
  if (size > expected) {
    throw ManifestError(path.filename().string() + " holds " + std::to_string(size) +
                        " bytes but the manifest declares " + std::to_string(expected));
  }
  std::vector<T> values(count);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetIoError("cannot open " + path.string());
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(expected));
  if (in.gcount() != static_cast<std::streamsize>(expected)) {
    throw TruncatedFileError(path.filename().string() + " ended early");
  }
  for (auto& v : values) v = to_little(v);
  return values;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ManifestError("manifest key '" + key + "' is not an integer: '" + value + "'");
  }
}

const std::string& require(const KeyValueMap& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ManifestError("manifest is missing key '" + key + "'");
  return it->second;
}

}  // namespace

DatasetManifest manifest_of(const Dataset& dataset) {
  DatasetManifest m;
  m.num_instances = dataset.size();
  m.length = dataset.length();
  m.class_names = dataset.class_names;
  m.snr_levels = dataset.snr_levels;
  m.creation_seed = dataset.creation_seed;
  return m;
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  dataset.validate();
  for (const auto& name : dataset.class_names) {
    if (name.find_first_of(",\n=") != std::string::npos) {
      throw ManifestError("class name '" + name + "' contains a reserved character");
    }
  }
  const auto m = manifest_of(dataset);
  fs::create_directories(dir);

  const auto n = dataset.size();
  const auto len = static_cast<std::size_t>(m.length);
  std::vector<float> samples(n * 2 * len);
  std::vector<std::int32_t> labels(n);
  std::vector<std::int16_t> snr(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& inst = dataset.instances[i];
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t t = 0; t < len; ++t) {
        samples[(i * 2 + r) * len + t] =
            inst.samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t));
      }
    }
    labels[i] = inst.label();
    snr[i] = static_cast<std::int16_t>(std::lround(inst.snr_db));
  }
  write_array(dir / kSamplesFile, samples);
  write_array(dir / kLabelsFile, labels);
  write_array(dir / kSnrFile, snr);

  std::vector<std::string> snr_strings;
  for (int s : m.snr_levels) snr_strings.push_back(std::to_string(s));
  KeyValueList kv{
      {"version", std::to_string(m.version)},
      {"num_instances", std::to_string(m.num_instances)},
      {"T", std::to_string(m.length)},
      {"class_names", join(m.class_names)},
      {"snr_levels", join(snr_strings)},
      {"creation_seed", m.creation_seed ? std::to_string(*m.creation_seed) : "null"},
      {"samples_file", kSamplesFile},
      {"samples_dtype", "float32"},
      {"samples_shape", std::to_string(n) + ",2," + std::to_string(len)},
      {"labels_file", kLabelsFile},
      {"labels_dtype", "int32"},
      {"labels_shape", std::to_string(n)},
      {"snr_file", kSnrFile},
      {"snr_dtype", "int16"},
      {"snr_shape", std::to_string(n)},
  };
  write_key_values(dir / kManifestFile, kv);
}

DatasetManifest read_manifest(const fs::path& dir) {
  KeyValueMap kv;
  try {
    kv = read_key_values(dir / kManifestFile);
  } catch (const KeyValueError& e) {
    throw ManifestError(e.what());
  }
  DatasetManifest m;
  const auto version = parse_int("version", require(kv, "version"));
  if (version != kContainerVersion) {
    throw VersionMismatchError("dataset container version " + std::to_string(version) +
                               " is not supported (expected " +
                               std::to_string(kContainerVersion) + ")");
  }
  m.version = static_cast<int>(version);
  const auto n = parse_int("num_instances", require(kv, "num_instances"));
  if (n < 1) throw ManifestError("num_instances must be >= 1");
  m.num_instances = static_cast<std::size_t>(n);
  const auto len = parse_int("T", require(kv, "T"));
  if (len < 1) throw ManifestError("T must be >= 1");
  m.length = static_cast<int>(len);
  m.class_names = split_commas(require(kv, "class_names"));
  if (m.class_names.empty()) throw ManifestError("class_names is empty");
  {
    auto sorted = m.class_names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ManifestError("class_names contains duplicates");
    }
  }
  for (const auto& s : split_commas(require(kv, "snr_levels"))) {
    m.snr_levels.push_back(static_cast<int>(parse_int("snr_levels", s)));
  }
  const auto& seed = require(kv, "creation_seed");
  if (seed != "null") {
    try {
      m.creation_seed = std::stoull(seed);
    } catch (const std::exception&) {
      throw ManifestError("creation_seed is neither an integer nor null: '" + seed + "'");
    }
  }
  const std::string expected_shape =
      std::to_string(m.num_instances) + ",2," + std::to_string(m.length);
  if (auto it = kv.find("samples_shape"); it != kv.end() && it->second != expected_shape) {
    throw ManifestError("samples_shape " + it->second + " disagrees with num_instances/T");
  }
  return m;
}

Dataset load_dataset(const fs::path& dir) {
  const auto m = read_manifest(dir);
  const auto n = m.num_instances;
  const auto len = static_cast<std::size_t>(m.length);
  auto samples = read_array<float>(dir / kSamplesFile, n * 2 * len);
  auto labels = read_array<std::int32_t>(dir / kLabelsFile, n);
  auto snr = read_array<std::int16_t>(dir / kSnrFile, n);

  Dataset ds;
  ds.class_names = m.class_names;
  ds.snr_levels = m.snr_levels;
  ds.creation_seed = m.creation_seed;
  ds.instances.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= m.class_names.size()) {
      throw ManifestError("label " + std::to_string(labels[i]) + " at instance " +
                          std::to_string(i) + " is outside class_names");
    }
    if (std::find(m.snr_levels.begin(), m.snr_levels.end(), snr[i]) == m.snr_levels.end()) {
      throw ManifestError("snr " + std::to_string(snr[i]) + " at instance " + std::to_string(i) +
                          " is not listed in snr_levels");
    }
    IqMatrix x(2, static_cast<Eigen::Index>(len));
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t t = 0; t < len; ++t) {
        x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) =
            samples[(i * 2 + r) * len + t];
      }
    }
    if (!x.allFinite()) {
      throw ManifestError("instance " + std::to_string(i) + " contains NaN/Inf samples");
    }
    ds.instances.emplace_back(std::move(x), labels[i], static_cast<double>(snr[i]), i);
  }
  return ds;
}

SplitResult stratified_split(const Dataset& dataset, const SplitSpec& spec) {
  const double sum = spec.train + spec.val + spec.test;
  if (spec.train <= 0.0 || spec.val <= 0.0 || spec.test <= 0.0 || std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be positive and sum to 1");
  }
  if (spec.label_budget && *spec.label_budget < 1) {
    throw std::invalid_argument("label budget N must be >= 1");
  }

  const auto num_snr = dataset.snr_levels.size();
  std::vector<std::vector<std::size_t>> cells(static_cast<std::size_t>(dataset.num_classes()) *
                                              num_snr);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& inst = dataset.instances[i];
    const auto snr = static_cast<int>(std::lround(inst.snr_db));
    const auto it = std::find(dataset.snr_levels.begin(), dataset.snr_levels.end(), snr);
    if (it == dataset.snr_levels.end()) {
      throw std::invalid_argument("instance " + std::to_string(i) + " has unlisted SNR " +
                                  std::to_string(snr));
    }
    const auto s = static_cast<std::size_t>(it - dataset.snr_levels.begin());
    cells[static_cast<std::size_t>(inst.label()) * num_snr + s].push_back(i);
  }

  const double min_ratio = std::min({spec.train, spec.val, spec.test});
  const auto min_cell = static_cast<std::size_t>(std::ceil(1.0 / min_ratio - 1e-9));

  SplitResult result;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto& cell = cells[c];
    const std::string cell_name = dataset.class_names[c / num_snr] + "@" +
                                  std::to_string(dataset.snr_levels[c % num_snr]) + "dB";
    if (cell.empty()) throw InsufficientCellError("cell " + cell_name + " is empty");
    if (spec.label_budget && cell.size() < min_cell) {
      throw InsufficientCellError("cell " + cell_name + " has " + std::to_string(cell.size()) +
                                  " instances; budgeted splits need at least " +
                                  std::to_string(min_cell));
    }
    Rng rng = make_stream(spec.split_seed, c);
    std::shuffle(cell.begin(), cell.end(), rng);

    const auto n = cell.size();
    auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.train));
    auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.val));
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);

    result.train.insert(result.train.end(), cell.begin(), cell.begin() + n_train);
    result.val.insert(result.val.end(), cell.begin() + n_train, cell.begin() + n_train + n_val);
    result.test.insert(result.test.end(), cell.begin() + n_train + n_val, cell.end());

    auto take = n_train;
    if (spec.label_budget) {
      const auto budget = static_cast<std::size_t>(*spec.label_budget);
      if (n_train < budget) result.budget_shortfall = true;
      take = std::min(budget, n_train);
    }
    result.labeled.insert(result.labeled.end(), cell.begin(), cell.begin() + take);
  }
  return result;
}

Dataset read_radioml_archive(const fs::path& source) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw DatasetIoError("cannot open archive " + source.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());

  pickle::ValuePtr root;
  try {
    root = pickle::load(bytes);
  } catch (const pickle::ParseError& e) {
    throw DatasetIoError(source.filename().string() + ": " + e.what());
  }
  if (root->kind != pickle::Value::Kind::Dict) {
    throw DatasetIoError("archive root is not a mapping: " + root->describe());
  }
  if (root->entries.empty()) throw DatasetIoError("archive mapping is empty");

  struct Cell {
    std::string name;
    int snr;
    pickle::Array array;
  };
  std::vector<Cell> cells;
  std::size_t length = 0;
  for (const auto& [key, value] : root->entries) {
    const auto& k = *key;
    if (k.kind != pickle::Value::Kind::Tuple || k.items.size() != 2 || !k.items[0]->is_string_like() ||
        k.items[1]->kind != pickle::Value::Kind::Int) {
      throw DatasetIoError("archive key " + k.describe() + " is not a (modulation, snr) pair");
    }
    Cell cell{k.items[0]->text, static_cast<int>(k.items[1]->integer), {}};
    try {
      cell.array = pickle::to_array(*value);
    } catch (const pickle::ParseError& e) {
      throw DatasetIoError("archive key " + k.describe() + ": " + e.what());
    }
    const auto& shape = cell.array.shape;
    if (shape.size() != 3 || shape[1] != 2 || shape[2] < 1) {
      throw DatasetIoError("archive key " + k.describe() + " does not hold a (count, 2, T) array");
    }
    if (length == 0) length = shape[2];
    if (shape[2] != length) {
      throw DatasetIoError("archive key " + k.describe() + " has T=" + std::to_string(shape[2]) +
                           ", other keys have T=" + std::to_string(length));
    }
    if (cell.name.find_first_of(",\n=") != std::string::npos) {
      throw DatasetIoError("archive key " + k.describe() + " has a reserved character in its name");
    }
    cells.push_back(std::move(cell));
  }

  Dataset ds;
  for (const auto& c : cells) {
    ds.class_names.push_back(c.name);
    ds.snr_levels.push_back(c.snr);
  }
  std::sort(ds.class_names.begin(), ds.class_names.end());
  ds.class_names.erase(std::unique(ds.class_names.begin(), ds.class_names.end()), ds.class_names.end());
  std::sort(ds.snr_levels.begin(), ds.snr_levels.end());
  ds.snr_levels.erase(std::unique(ds.snr_levels.begin(), ds.snr_levels.end()), ds.snr_levels.end());
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    return std::tie(a.name, a.snr) < std::tie(b.name, b.snr);
  });
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (cells[i].name == cells[i - 1].name && cells[i].snr == cells[i - 1].snr) {
      throw DatasetIoError("archive key ('" + cells[i].name + "', " + std::to_string(cells[i].snr) +
                           ") appears twice");
    }
  }

  std::uint64_t id = 0;
  for (const auto& c : cells) {
    const auto label = static_cast<int>(
        std::lower_bound(ds.class_names.begin(), ds.class_names.end(), c.name) - ds.class_names.begin());
    const auto count = c.array.shape[0];
    for (std::size_t r = 0; r < count; ++r) {
      IqMatrix x(2, static_cast<Eigen::Index>(length));
      for (std::size_t row = 0; row < 2; ++row) {
        for (std::size_t t = 0; t < length; ++t) {
          x(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(t)) =
              c.array.data[(r * 2 + row) * length + t];
        }
      }
      ds.instances.emplace_back(std::move(x), label, static_cast<double>(c.snr), id++);
    }
  }
  if (ds.instances.empty()) throw DatasetIoError("archive contains no records");
  return ds;
}

void convert_radioml_archive(const fs::path& source, const fs::path& dest_dir) {
  save_dataset(read_radioml_archive(source), dest_dir);
}

}  // namespace modcl
