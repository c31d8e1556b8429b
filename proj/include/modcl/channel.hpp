#pragma once

#include "modcl/common.hpp"

#include <optional>
#include <stdexcept>

namespace modcl {

enum class Fading { None, SingleTapRayleigh };

class NonFiniteSignalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Effective channel H_n plus additive noise w_n.
///
/// `snr_db == std::nullopt` is the "noise off" sentinel; it is never an infinite
/// float fed into arithmetic. Noise power is referenced to the clean signal after
/// fading and offsets have been applied.
struct ChannelSpec {
  std::optional<double> snr_db = 10.0;
  double phase_offset_rad = 0.0;
  double freq_offset_cycles_per_sample = 0.0;  // must lie in (-0.5, 0.5)
  Fading fading = Fading::None;
  std::uint64_t rng_seed = 0;

  static ChannelSpec noiseless() {
    ChannelSpec spec;
    spec.snr_db.reset();
    return spec;
  }
};

void validate_channel(const ChannelSpec& spec);

double mean_power(const ComplexSignal& signal) noexcept;

/// fading(freq_offset(phase_offset(signal))) + noise; deterministic in spec.rng_seed.
ComplexSignal apply_channel(const ComplexSignal& signal, const ChannelSpec& spec);

}  // namespace modcl
