#pragma once

#include "modcl/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace modcl {

class DatasetIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class VersionMismatchError : public DatasetIoError {
 public:
  using DatasetIoError::DatasetIoError;
};
class TruncatedFileError : public DatasetIoError {
 public:
  using DatasetIoError::DatasetIoError;
};
class ManifestError : public DatasetIoError {
 public:
  using DatasetIoError::DatasetIoError;
};
class InsufficientCellError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kContainerVersion = 1;

struct DatasetManifest {
  int version = kContainerVersion;
  std::size_t num_instances = 0;
  int length = 0;
  std::vector<std::string> class_names;
  std::vector<int> snr_levels;
  std::optional<std::uint64_t> creation_seed;
};

DatasetManifest manifest_of(const Dataset& dataset);

/// Directory container:
///   manifest.txt  key=value lines
///   samples.f32   float32 (num_instances, 2, T), row-major, little-endian
///   labels.i32    int32 (num_instances)
///   snr.i16       int16 (num_instances)
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);
DatasetManifest read_manifest(const std::filesystem::path& dir);

struct SplitSpec {
  double train = 0.6;
  double val = 0.1;
  double test = 0.3;
  std::uint64_t split_seed = 0;
  std::optional<int> label_budget;  // per class per SNR; nullopt means "all"
};

struct SplitResult {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::vector<std::size_t> labeled;  // subset of train
  bool budget_shortfall = false;     // some cell had fewer than N train instances
};

/// Per-(class, SNR) stratified split. Every cell is shuffled with its own stream
/// derived from split_seed, then cut into train/val/test by rounding the ratios.
SplitResult stratified_split(const Dataset& dataset, const SplitSpec& spec);

/// Converts an upstream RadioML 2016 pickle, a mapping (modulation, snr) ->
/// float array (count, 2, T), into a Dataset with sorted class names and
/// ascending SNR levels.
Dataset read_radioml_archive(const std::filesystem::path& source);
void convert_radioml_archive(const std::filesystem::path& source,
                             const std::filesystem::path& dest_dir);

}  // namespace modcl
