#pragma once

#include "modcl/common.hpp"

#include <cstdint>
#include <string>
#include <utility>

namespace modcl {

enum class Augmentation : unsigned {
  Mask = 1U << 0,
  Scale = 1U << 1,
  Shift = 1U << 2,
  Rotate = 1U << 3,
  Invert = 1U << 4,
};

inline constexpr unsigned kAllAugmentations = 0x1F;

/// Stochastic view generator a_v(.). Each enabled augmentation fires
/// independently with `activation_prob`, in the order
/// mask -> scale -> shift -> rotate -> invert.
struct AugmentPolicy {
  double activation_prob = 0.5;
  std::pair<double, double> mask_fraction_range{0.0, 0.25};
  std::pair<double, double> scale_range{0.5, 2.0};
  int max_shift = -1;  // samples; negative means T/4 of the input
  unsigned enabled = kAllAugmentations;
  std::uint64_t rng_seed = 0;

  [[nodiscard]] bool has(Augmentation a) const noexcept {
    return (enabled & static_cast<unsigned>(a)) != 0;
  }
  static AugmentPolicy identity() {
    AugmentPolicy p;
    p.activation_prob = 0.0;
    return p;
  }
};

/// Throws ContractViolation when ranges are inverted or out of bounds for length T.
void validate_policy(const AugmentPolicy& policy, int length);

/// Parses "mask,scale,shift,rotate,invert" (any subset, or "all"/"none").
unsigned parse_augmentation_set(const std::string& text);
std::string format_augmentation_set(unsigned set);

/// Zeroes exactly floor(fraction*T) columns, laid down as contiguous runs of
/// 4..16 samples; the last run is truncated to hit the count.
IqMatrix random_mask(const IqMatrix& x, double fraction, Rng& rng);
IqMatrix amplitude_scale(const IqMatrix& x, double factor);
/// Circular shift: column t of the output is column (t - k) mod T of the input.
IqMatrix time_shift(const IqMatrix& x, int k);
IqMatrix phase_rotate(const IqMatrix& x, double theta);
IqMatrix sign_invert(const IqMatrix& x);

IqMatrix apply_policy(const IqMatrix& x, const AugmentPolicy& policy, Rng& rng);

}  // namespace modcl
