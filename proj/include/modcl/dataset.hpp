#pragma once

#include "modcl/channel.hpp"
#include "modcl/common.hpp"
#include "modcl/modulation.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace modcl {

/// Counts label dereferences on the current thread. Pretraining asserts the
/// count does not move while it runs.
class LabelAudit {
 public:
  static std::uint64_t total_reads() noexcept;
  static void record() noexcept;

  class Scope {
   public:
    Scope() noexcept : start_(total_reads()) {}
    [[nodiscard]] std::uint64_t reads() const noexcept { return total_reads() - start_; }

   private:
    std::uint64_t start_;
  };
};

/// One received record x_n with its class index and SNR tag.
///
/// Class indices are 0-based positions in the owning dataset's class list.
class IqInstance {
 public:
  IqInstance() = default;
  IqInstance(IqMatrix samples, int label, double snr_db, std::uint64_t instance_id)
      : samples(std::move(samples)), snr_db(snr_db), instance_id(instance_id), label_(label) {}

  IqMatrix samples;
  double snr_db = 0.0;
  std::uint64_t instance_id = 0;

  /// Audited accessor; every call is counted by LabelAudit.
  [[nodiscard]] int label() const noexcept {
    LabelAudit::record();
    return label_;
  }
  void set_label(int label) noexcept { label_ = label; }

  [[nodiscard]] int length() const noexcept { return static_cast<int>(samples.cols()); }

 private:
  int label_ = 0;
};

struct Dataset {
  std::vector<IqInstance> instances;
  std::vector<std::string> class_names;
  std::vector<int> snr_levels;  // ascending
  std::optional<std::uint64_t> creation_seed;

  [[nodiscard]] std::size_t size() const noexcept { return instances.size(); }
  [[nodiscard]] int length() const noexcept {
    return instances.empty() ? 0 : instances.front().length();
  }
  [[nodiscard]] int num_classes() const noexcept { return static_cast<int>(class_names.size()); }

  /// Throws std::invalid_argument on NaN/Inf samples, ragged lengths or out-of-range labels.
  void validate() const;
};

class InvalidGridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SynthOptions {
  PulseShape pulse = PulseShape::RootRaisedCosine;
  int samples_per_symbol = 8;
  double rolloff = 0.35;
  bool random_phase = true;
  double max_freq_offset = 0.0;  // cycles/sample, drawn uniformly in [-max, max]
  Fading fading = Fading::None;
  bool random_timing = true;
};

/// Converts a complex baseband block to the 2xT float layout.
IqMatrix to_iq(const ComplexSignal& signal);

/// One instance: random bits, modulation, timing crop, channel. Everything is
/// drawn from the stream (master_seed, instance_id).
IqInstance synth_instance(const ModulationScheme& scheme, int label, double snr_db, int length,
                          std::uint64_t master_seed, std::uint64_t instance_id,
                          const SynthOptions& options = {});

/// |schemes| * |snr_grid| * per_cell instances ordered by (scheme, snr, k) with
/// instance ids 0, 1, 2, ... Bit-exactly reproducible from master_seed.
Dataset synth_dataset(std::span<const ModulationScheme> schemes, std::span<const double> snr_grid,
                      int per_cell, int length, std::uint64_t master_seed,
                      const SynthOptions& options = {});

}  // namespace modcl
