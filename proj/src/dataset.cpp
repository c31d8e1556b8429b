#include "modcl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

namespace modcl {
namespace {
thread_local std::uint64_t label_reads = 0;
}

std::uint64_t LabelAudit::total_reads() noexcept { return label_reads; }
void LabelAudit::record() noexcept { ++label_reads; }

void Dataset::validate() const {
  if (instances.empty()) throw std::invalid_argument("dataset is empty");
  const int len = length();
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    if (inst.length() != len) {
      throw std::invalid_argument("instance " + std::to_string(i) + " has length " +
                                  std::to_string(inst.length()) + ", expected " +
                                  std::to_string(len));
    }
    if (!inst.samples.allFinite()) {
      throw std::invalid_argument("instance " + std::to_string(i) + " contains NaN/Inf");
    }
    const int y = inst.label();
    if (y < 0 || y >= num_classes()) {
      throw std::invalid_argument("instance " + std::to_string(i) + " has label " +
                                  std::to_string(y) + " outside the class list");
    }
  }
}

IqMatrix to_iq(const ComplexSignal& signal) {
  IqMatrix m(2, static_cast<Eigen::Index>(signal.size()));
  for (std::size_t t = 0; t < signal.size(); ++t) {
    m(0, static_cast<Eigen::Index>(t)) = static_cast<float>(signal[t].real());
    m(1, static_cast<Eigen::Index>(t)) = static_cast<float>(signal[t].imag());
  }
  return m;
}

IqInstance synth_instance(const ModulationScheme& scheme, int label, double snr_db, int length,
                          std::uint64_t master_seed, std::uint64_t instance_id,
                          const SynthOptions& options) {
  Rng rng = make_stream(master_seed, instance_id);
  const int sps = scheme.samples_per_symbol;
  // Guard symbols on both sides keep the cropped window clear of the circular wrap.
  const int guard = kRrcSpanSymbols;
  const int num_symbols = (length + sps - 1) / sps + 2 * guard;
  const auto bits = SymbolRealization::random(
      rng, static_cast<std::size_t>(num_symbols) * static_cast<std::size_t>(scheme.bits_per_symbol));
  const ComplexSignal baseband = modulate(bits, scheme);

  const int offset = guard * sps + (options.random_timing ? static_cast<int>(uniform_int(rng, 0, sps - 1)) : 0);
  ComplexSignal window(baseband.begin() + offset, baseband.begin() + offset + length);

  ChannelSpec channel;
  channel.snr_db = snr_db;
  channel.phase_offset_rad = options.random_phase ? uniform(rng, 0.0, 2.0 * std::numbers::pi) : 0.0;
  channel.freq_offset_cycles_per_sample =
      options.max_freq_offset > 0.0 ? uniform(rng, -options.max_freq_offset, options.max_freq_offset)
                                    : 0.0;
  channel.fading = options.fading;
  channel.rng_seed = rng();

  return IqInstance(to_iq(apply_channel(window, channel)), label, snr_db, instance_id);
}

Dataset synth_dataset(std::span<const ModulationScheme> schemes, std::span<const double> snr_grid,
                      int per_cell, int length, std::uint64_t master_seed,
                      const SynthOptions& options) {
  if (schemes.empty()) throw InvalidGridError("synth_dataset: scheme list is empty");
  if (snr_grid.empty()) throw InvalidGridError("synth_dataset: SNR grid is empty");
  if (per_cell < 1) throw std::invalid_argument("synth_dataset: per_cell must be >= 1");
  if (length < 2) throw std::invalid_argument("synth_dataset: T must be >= 2");

  Dataset ds;
  std::set<std::string> seen;
  for (const auto& s : schemes) {
    if (!seen.insert(std::string(s.name())).second) {
      throw InvalidGridError("synth_dataset: duplicate scheme " + std::string(s.name()));
    }
    ds.class_names.emplace_back(s.name());
  }
  for (double snr : snr_grid) {
    if (!std::isfinite(snr)) throw InvalidGridError("synth_dataset: non-finite SNR in grid");
    ds.snr_levels.push_back(static_cast<int>(std::lround(snr)));
  }
  std::sort(ds.snr_levels.begin(), ds.snr_levels.end());
  ds.snr_levels.erase(std::unique(ds.snr_levels.begin(), ds.snr_levels.end()), ds.snr_levels.end());
  ds.creation_seed = master_seed;

  ds.instances.reserve(schemes.size() * snr_grid.size() * static_cast<std::size_t>(per_cell));
  std::uint64_t id = 0;
  for (std::size_t c = 0; c < schemes.size(); ++c) {
    ModulationScheme scheme = schemes[c];
    scheme.pulse = options.pulse;
    scheme.samples_per_symbol = options.samples_per_symbol;
    scheme.rolloff = options.rolloff;
    for (double snr : snr_grid) {
      for (int k = 0; k < per_cell; ++k) {
        ds.instances.push_back(
            synth_instance(scheme, static_cast<int>(c), snr, length, master_seed, id++, options));
      }
    }
  }
  return ds;
}

}  // namespace modcl
