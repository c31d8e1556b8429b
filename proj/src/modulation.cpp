#include "modcl/modulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

namespace modcl {
namespace {

constexpr std::array<std::pair<SchemeId, std::string_view>, 8> kNames{{
    {SchemeId::BPSK, "BPSK"},
    {SchemeId::QPSK, "QPSK"},
    {SchemeId::PSK8, "8PSK"},
    {SchemeId::QAM16, "QAM16"},
    {SchemeId::QAM64, "QAM64"},
    {SchemeId::GFSK, "GFSK"},
    {SchemeId::CPFSK, "CPFSK"},
    {SchemeId::PAM4, "PAM4"},
}};

void normalize_energy(std::vector<Complex>& points) {
  double energy = 0.0;
  for (const auto& p : points) energy += std::norm(p);
  energy /= static_cast<double>(points.size());
  const double scale = 1.0 / std::sqrt(energy);
  for (auto& p : points) p *= scale;
}

std::vector<Complex> square_qam(int bits_per_symbol) {
  const int half = bits_per_symbol / 2;
  const unsigned m = 1U << half;
  std::vector<Complex> points(std::size_t{1} << bits_per_symbol);
  for (unsigned pattern = 0; pattern < points.size(); ++pattern) {
    const unsigned i_bits = pattern >> half;
    const unsigned q_bits = pattern & (m - 1);
    points[pattern] = {gray_pam_level(i_bits, m), gray_pam_level(q_bits, m)};
  }
  normalize_energy(points);
  return points;
}

std::vector<Complex> constellation_for(SchemeId id) {
  switch (id) {
    case SchemeId::BPSK:
      return {{1.0, 0.0}, {-1.0, 0.0}};
    case SchemeId::QPSK:
      return square_qam(2);
    case SchemeId::QAM16:
      return square_qam(4);
    case SchemeId::QAM64:
      return square_qam(6);
    case SchemeId::PSK8: {
      std::vector<Complex> points(8);
      for (unsigned g = 0; g < 8; ++g) {
        points[g] = std::polar(1.0, 2.0 * std::numbers::pi * gray_inverse(g) / 8.0);
      }
      return points;
    }
    case SchemeId::PAM4: {
      std::vector<Complex> points(4);
      for (unsigned g = 0; g < 4; ++g) points[g] = {gray_pam_level(g, 4), 0.0};
      normalize_energy(points);
      return points;
    }
    case SchemeId::GFSK:
    case SchemeId::CPFSK:
      return {};
  }
  throw UnknownSchemeError("unknown modulation scheme id");
}

int bits_for(SchemeId id) {
  switch (id) {
    case SchemeId::BPSK:
    case SchemeId::GFSK:
    case SchemeId::CPFSK:
      return 1;
    case SchemeId::QPSK:
    case SchemeId::PAM4:
      return 2;
    case SchemeId::PSK8:
      return 3;
    case SchemeId::QAM16:
      return 4;
    case SchemeId::QAM64:
      return 6;
  }
  throw UnknownSchemeError("unknown modulation scheme id");
}

// Frequency pulse for phase-accumulating schemes; sums to one over its support.
std::vector<double> frequency_pulse(SchemeId id, int sps) {
  std::vector<double> rect(static_cast<std::size_t>(sps), 1.0 / sps);
  if (id == SchemeId::CPFSK) return rect;

  // Gaussian-filtered rectangle, truncated to three symbols either side.
  const int half = 3 * sps;
  const double sigma = std::sqrt(std::log(2.0)) / (2.0 * std::numbers::pi * kGfskBandwidthTime);
  std::vector<double> gauss(static_cast<std::size_t>(2 * half + 1));
  for (int i = -half; i <= half; ++i) {
    const double t = static_cast<double>(i) / sps;
    gauss[static_cast<std::size_t>(i + half)] = std::exp(-t * t / (2.0 * sigma * sigma));
  }
  std::vector<double> pulse(rect.size() + gauss.size() - 1, 0.0);
  for (std::size_t a = 0; a < rect.size(); ++a) {
    for (std::size_t b = 0; b < gauss.size(); ++b) pulse[a + b] += rect[a] * gauss[b];
  }
  const double total = std::accumulate(pulse.begin(), pulse.end(), 0.0);
  for (auto& v : pulse) v /= total;
  return pulse;
}

ComplexSignal modulate_fsk(const SymbolRealization& bits, const ModulationScheme& scheme) {
  const int sps = scheme.samples_per_symbol;
  const std::size_t n = bits.bits.size() * static_cast<std::size_t>(sps);
  const auto pulse = frequency_pulse(scheme.id, sps);
  const std::size_t centre = (pulse.size() - static_cast<std::size_t>(sps)) / 2;

  std::vector<double> freq(n, 0.0);
  for (std::size_t k = 0; k < bits.bits.size(); ++k) {
    const double a = bits.bits[k] ? -1.0 : 1.0;
    const std::size_t start = k * static_cast<std::size_t>(sps) + n - centre;
    for (std::size_t j = 0; j < pulse.size(); ++j) freq[(start + j) % n] += a * pulse[j];
  }
  ComplexSignal out(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    phase += std::numbers::pi * kFskModulationIndex * freq[i];
    out[i] = std::polar(1.0, phase);
  }
  return out;
}

}  // namespace

std::string_view scheme_name(SchemeId id) noexcept {
  for (const auto& [sid, name] : kNames) {
    if (sid == id) return name;
  }
  return "UNKNOWN";
}

std::string_view ModulationScheme::name() const noexcept { return scheme_name(id); }

SchemeId scheme_id_from_name(std::string_view name) {
  for (const auto& [sid, n] : kNames) {
    if (n == name) return sid;
  }
  if (name == "PSK8") return SchemeId::PSK8;
  throw UnknownSchemeError("unknown modulation scheme '" + std::string(name) + "'");
}

const std::vector<SchemeId>& all_schemes() noexcept {
  static const std::vector<SchemeId> ids = [] {
    std::vector<SchemeId> v;
    for (const auto& entry : kNames) v.push_back(entry.first);
    return v;
  }();
  return ids;
}

unsigned gray_inverse(unsigned g) noexcept {
  unsigned b = 0;
  for (; g != 0; g >>= 1) b ^= g;
  return b;
}

double gray_pam_level(unsigned bits, unsigned m) noexcept {
  return static_cast<double>(m - 1) - 2.0 * static_cast<double>(gray_inverse(bits));
}

ModulationScheme make_scheme(SchemeId id, PulseShape pulse, int samples_per_symbol,
                             double rolloff) {
  ModulationScheme scheme;
  scheme.id = id;
  scheme.bits_per_symbol = bits_for(id);
  scheme.constellation = constellation_for(id);
  scheme.pulse = pulse;
  scheme.rolloff = rolloff;
  scheme.samples_per_symbol = samples_per_symbol;
  validate_scheme(scheme);
  return scheme;
}

void validate_scheme(const ModulationScheme& scheme) {
  if (scheme_name(scheme.id) == "UNKNOWN") throw UnknownSchemeError("unknown modulation scheme id");
  if (scheme.bits_per_symbol != bits_for(scheme.id)) {
    throw std::invalid_argument("bits_per_symbol does not match scheme " +
                                std::string(scheme.name()));
  }
  if (scheme.samples_per_symbol < 1) throw std::invalid_argument("samples_per_symbol must be >= 1");
  if (scheme.rolloff < 0.0 || scheme.rolloff > 1.0) {
    throw std::invalid_argument("root-raised-cosine roll-off must lie in [0, 1]");
  }
  const bool fsk = scheme.id == SchemeId::GFSK || scheme.id == SchemeId::CPFSK;
  if (!fsk && scheme.constellation.size() != (std::size_t{1} << scheme.bits_per_symbol)) {
    throw std::invalid_argument("constellation size must be 2^bits_per_symbol");
  }
}

std::span<const std::uint8_t> SymbolRealization::segment(std::size_t s,
                                                         std::size_t bits_per_segment) const {
  const std::size_t begin = s * bits_per_segment;
  if (begin + bits_per_segment > bits.size()) {
    throw std::out_of_range("symbol realization has no segment " + std::to_string(s));
  }
  return std::span<const std::uint8_t>(bits).subspan(begin, bits_per_segment);
}

SymbolRealization SymbolRealization::random(Rng& rng, std::size_t num_bits) {
  SymbolRealization r;
  r.bits.resize(num_bits);
  for (auto& b : r.bits) b = static_cast<std::uint8_t>(rng() >> 63);
  return r;
}

std::vector<double> rrc_taps(double rolloff, int samples_per_symbol, int span_symbols) {
  const int half = span_symbols * samples_per_symbol / 2;
  const double beta = rolloff;
  std::vector<double> taps(static_cast<std::size_t>(2 * half + 1));
  for (int i = -half; i <= half; ++i) {
    const double t = static_cast<double>(i) / samples_per_symbol;
    double h;
    if (i == 0) {
      h = 1.0 - beta + 4.0 * beta / std::numbers::pi;
    } else if (beta > 0.0 && std::abs(std::abs(4.0 * beta * t) - 1.0) < 1e-12) {
      h = beta / std::sqrt(2.0) *
          ((1.0 + 2.0 / std::numbers::pi) * std::sin(std::numbers::pi / (4.0 * beta)) +
           (1.0 - 2.0 / std::numbers::pi) * std::cos(std::numbers::pi / (4.0 * beta)));
    } else {
      const double num = std::sin(std::numbers::pi * t * (1.0 - beta)) +
                         4.0 * beta * t * std::cos(std::numbers::pi * t * (1.0 + beta));
      const double den = std::numbers::pi * t * (1.0 - 16.0 * beta * beta * t * t);
      h = num / den;
    }
    taps[static_cast<std::size_t>(i + half)] = h;
  }
  double energy = 0.0;
  for (double h : taps) energy += h * h;
  const double scale = std::sqrt(samples_per_symbol / energy);
  for (auto& h : taps) h *= scale;
  return taps;
}

ComplexSignal modulate(const SymbolRealization& bits, const ModulationScheme& scheme) {
  validate_scheme(scheme);
  const auto bps = static_cast<std::size_t>(scheme.bits_per_symbol);
  if (bits.bits.size() % bps != 0) {
    throw BitLengthError("bit count " + std::to_string(bits.bits.size()) +
                         " is not divisible by bits_per_symbol " + std::to_string(bps) + " for " +
                         std::string(scheme.name()));
  }
  if (!scheme.is_linear()) return modulate_fsk(bits, scheme);

  const std::size_t num_symbols = bits.bits.size() / bps;
  std::vector<Complex> symbols(num_symbols);
  for (std::size_t k = 0; k < num_symbols; ++k) {
    unsigned pattern = 0;
    for (std::size_t j = 0; j < bps; ++j) pattern = (pattern << 1) | (bits.bits[k * bps + j] & 1U);
    symbols[k] = scheme.constellation[pattern];
  }

  const auto sps = static_cast<std::size_t>(scheme.samples_per_symbol);
  const std::size_t n = num_symbols * sps;
  ComplexSignal out(n, Complex{0.0, 0.0});
  if (scheme.pulse == PulseShape::Rectangular) {
    for (std::size_t i = 0; i < n; ++i) out[i] = symbols[i / sps];
    return out;
  }

  const auto taps = rrc_taps(scheme.rolloff, scheme.samples_per_symbol, kRrcSpanSymbols);
  const std::size_t centre = taps.size() / 2;
  for (std::size_t k = 0; k < num_symbols; ++k) {
    const std::size_t start = (k * sps + n * taps.size() - centre) % n;
    for (std::size_t j = 0; j < taps.size(); ++j) out[(start + j) % n] += symbols[k] * taps[j];
  }
  return out;
}

}  // namespace modcl
