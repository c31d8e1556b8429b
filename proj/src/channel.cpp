#include "modcl/channel.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace modcl {

void validate_channel(const ChannelSpec& spec) {
  if (spec.snr_db && !std::isfinite(*spec.snr_db)) {
    throw std::invalid_argument("snr_db must be finite; use ChannelSpec::noiseless() to disable noise");
  }
  if (!(spec.freq_offset_cycles_per_sample > -0.5 && spec.freq_offset_cycles_per_sample < 0.5)) {
    throw std::invalid_argument("freq_offset_cycles_per_sample must lie in (-0.5, 0.5)");
  }
  if (!std::isfinite(spec.phase_offset_rad)) throw std::invalid_argument("phase offset must be finite");
}

double mean_power(const ComplexSignal& signal) noexcept {
  if (signal.empty()) return 0.0;
  double p = 0.0;
  for (const auto& c : signal) p += std::norm(c);
  return p / static_cast<double>(signal.size());
}

ComplexSignal apply_channel(const ComplexSignal& signal, const ChannelSpec& spec) {
  validate_channel(spec);
  if (signal.empty()) throw std::invalid_argument("apply_channel: empty signal");
  for (std::size_t i = 0; i < signal.size(); ++i) {
    if (!std::isfinite(signal[i].real()) || !std::isfinite(signal[i].imag())) {
      throw NonFiniteSignalError("apply_channel: non-finite sample at index " + std::to_string(i));
    }
  }

  Rng rng(spec.rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Complex gain = std::polar(1.0, spec.phase_offset_rad);
  if (spec.fading == Fading::SingleTapRayleigh) {
    // CN(0, 1) tap: unit mean power.
    const double re = gauss(rng) / std::numbers::sqrt2;
    const double im = gauss(rng) / std::numbers::sqrt2;
    gain *= Complex{re, im};
  }

  ComplexSignal out(signal.size());
  const double w = 2.0 * std::numbers::pi * spec.freq_offset_cycles_per_sample;
  for (std::size_t t = 0; t < signal.size(); ++t) {
    const Complex rot = w == 0.0 ? Complex{1.0, 0.0} : std::polar(1.0, w * static_cast<double>(t));
    out[t] = gain * rot * signal[t];
  }

  if (!spec.snr_db) return out;

  const double signal_power = mean_power(out);
  const double noise_power = signal_power / std::pow(10.0, *spec.snr_db / 10.0);
  const double sigma = std::sqrt(noise_power / 2.0);
  for (auto& c : out) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    c += Complex{sigma * re, sigma * im};
  }
  return out;
}

}  // namespace modcl
