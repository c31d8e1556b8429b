#include "modcl/augment.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string_view>
#include <vector>

namespace modcl {
namespace {

constexpr std::array<std::pair<Augmentation, std::string_view>, 5> kNames{{
    {Augmentation::Mask, "mask"},
    {Augmentation::Scale, "scale"},
    {Augmentation::Shift, "shift"},
    {Augmentation::Rotate, "rotate"},
    {Augmentation::Invert, "invert"},
}};

constexpr int kMinRun = 4;
constexpr int kMaxRun = 16;

int effective_max_shift(const AugmentPolicy& policy, int length) {
  return policy.max_shift >= 0 ? policy.max_shift : length / 4;
}

}  // namespace

void validate_policy(const AugmentPolicy& policy, int length) {
  if (!(policy.activation_prob >= 0.0 && policy.activation_prob <= 1.0)) {
    throw ContractViolation("activation_prob must lie in [0, 1]");
  }
  const auto [mlo, mhi] = policy.mask_fraction_range;
  if (!(mlo >= 0.0 && mlo <= mhi && mhi <= 1.0)) {
    throw ContractViolation("mask_fraction_range must satisfy 0 <= lo <= hi <= 1");
  }
  const auto [slo, shi] = policy.scale_range;
  if (!(slo > 0.0 && slo <= shi)) throw ContractViolation("scale_range must satisfy 0 < lo <= hi");
  if (length > 0 && effective_max_shift(policy, length) >= length) {
    throw ContractViolation("max_shift must be smaller than T");
  }
  if ((policy.enabled & ~kAllAugmentations) != 0) throw ContractViolation("unknown augmentation bit");
}

unsigned parse_augmentation_set(const std::string& text) {
  if (text == "all") return kAllAugmentations;
  if (text == "none" || text.empty()) return 0;
  unsigned set = 0;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    bool found = false;
    for (const auto& [bit, name] : kNames) {
      if (item == name) {
        set |= static_cast<unsigned>(bit);
        found = true;
      }
    }
    if (!found) throw std::invalid_argument("unknown augmentation '" + item + "'");
  }
  return set;
}

std::string format_augmentation_set(unsigned set) {
  if (set == 0) return "none";
  std::string out;
  for (const auto& [bit, name] : kNames) {
    if (set & static_cast<unsigned>(bit)) {
      if (!out.empty()) out += ',';
      out += name;
    }
  }
  return out;
}

IqMatrix random_mask(const IqMatrix& x, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ContractViolation("random_mask: fraction must lie in [0, 1]");
  }
  const auto length = static_cast<int>(x.cols());
  int remaining = static_cast<int>(std::floor(fraction * length));
  IqMatrix out = x;
  std::vector<bool> masked(static_cast<std::size_t>(length), false);
  while (remaining > 0) {
    const int run = static_cast<int>(uniform_int(rng, kMinRun, kMaxRun));
    int t = static_cast<int>(uniform_int(rng, 0, length - 1));
    for (int placed = 0; placed < run && t < length && remaining > 0; ++t) {
      if (!masked[static_cast<std::size_t>(t)]) {
        masked[static_cast<std::size_t>(t)] = true;
        out.col(t).setZero();
        --remaining;
        ++placed;
      }
    }
  }
  return out;
}

IqMatrix amplitude_scale(const IqMatrix& x, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw ContractViolation("amplitude_scale: factor must be positive and finite");
  }
  return x * static_cast<float>(factor);
}

IqMatrix time_shift(const IqMatrix& x, int k) {
  const auto length = static_cast<int>(x.cols());
  if (std::abs(k) >= length) throw ContractViolation("time_shift: |k| must be smaller than T");
  IqMatrix out(2, length);
  for (int t = 0; t < length; ++t) out.col(t) = x.col(((t - k) % length + length) % length);
  return out;
}

IqMatrix phase_rotate(const IqMatrix& x, double theta) {
  if (!std::isfinite(theta)) throw ContractViolation("phase_rotate: angle must be finite");
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  IqMatrix out(2, x.cols());
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    const double i = x(0, t);
    const double q = x(1, t);
    out(0, t) = static_cast<float>(i * c - q * s);
    out(1, t) = static_cast<float>(i * s + q * c);
  }
  return out;
}

IqMatrix sign_invert(const IqMatrix& x) { return -x; }

IqMatrix apply_policy(const IqMatrix& x, const AugmentPolicy& policy, Rng& rng) {
  if (x.rows() != 2 || x.cols() < 1) throw ContractViolation("apply_policy: input must be 2xT");
  const auto length = static_cast<int>(x.cols());
  validate_policy(policy, length);

  // Every step draws its activation coin and its parameter whether or not it
  // fires, so the stream position does not depend on which steps fired.
  IqMatrix out = x;

  const bool mask_on = bernoulli(rng, policy.activation_prob) && policy.has(Augmentation::Mask);
  const double fraction =
      uniform(rng, policy.mask_fraction_range.first, policy.mask_fraction_range.second);
  const std::uint64_t mask_seed = rng();
  if (mask_on) {
    Rng mask_rng(mask_seed);
    out = random_mask(out, fraction, mask_rng);
  }

  const bool scale_on = bernoulli(rng, policy.activation_prob) && policy.has(Augmentation::Scale);
  const double factor = uniform(rng, policy.scale_range.first, policy.scale_range.second);
  if (scale_on) out = amplitude_scale(out, factor);

  const bool shift_on = bernoulli(rng, policy.activation_prob) && policy.has(Augmentation::Shift);
  const int max_shift = effective_max_shift(policy, length);
  const int k = static_cast<int>(uniform_int(rng, -max_shift, max_shift));
  if (shift_on) out = time_shift(out, k);

  const bool rotate_on = bernoulli(rng, policy.activation_prob) && policy.has(Augmentation::Rotate);
  const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  if (rotate_on) out = phase_rotate(out, theta);

  const bool invert_on = bernoulli(rng, policy.activation_prob) && policy.has(Augmentation::Invert);
  if (invert_on) out = sign_invert(out);

  return out;
}

}  // namespace modcl
