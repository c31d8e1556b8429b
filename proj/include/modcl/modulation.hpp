#pragma once

#include "modcl/common.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace modcl {

enum class SchemeId { BPSK, QPSK, PSK8, QAM16, QAM64, GFSK, CPFSK, PAM4 };

enum class PulseShape { Rectangular, RootRaisedCosine };

class UnknownSchemeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class BitLengthError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Symbol mapping and pulse shaping for one modulation type.
///
/// Linear schemes (PSK/QAM/PAM) carry an explicit Gray-coded constellation
/// with unit mean symbol energy. Frequency-shift schemes (GFSK, CPFSK) carry
/// no constellation; they are synthesized by phase accumulation with
/// modulation index `kFskModulationIndex`.
struct ModulationScheme {
  SchemeId id = SchemeId::BPSK;
  int bits_per_symbol = 1;
  std::vector<Complex> constellation;  // indexed by the symbol's bit pattern (MSB first)
  PulseShape pulse = PulseShape::RootRaisedCosine;
  double rolloff = 0.35;
  int samples_per_symbol = 8;

  [[nodiscard]] bool is_linear() const noexcept { return !constellation.empty(); }
  [[nodiscard]] std::string_view name() const noexcept;
};

inline constexpr double kFskModulationIndex = 0.5;
inline constexpr double kGfskBandwidthTime = 0.35;
inline constexpr int kRrcSpanSymbols = 8;

/// Stable name table; the position of a scheme in a dataset's class list is its label.
std::string_view scheme_name(SchemeId id) noexcept;
SchemeId scheme_id_from_name(std::string_view name);
const std::vector<SchemeId>& all_schemes() noexcept;

ModulationScheme make_scheme(SchemeId id, PulseShape pulse = PulseShape::RootRaisedCosine,
                             int samples_per_symbol = 8, double rolloff = 0.35);

/// Throws UnknownSchemeError or std::invalid_argument when the fields are inconsistent.
void validate_scheme(const ModulationScheme& scheme);

/// Binary symbol sequence b_n. Segment s covers `bits_per_segment` consecutive bits.
struct SymbolRealization {
  std::vector<std::uint8_t> bits;

  [[nodiscard]] std::span<const std::uint8_t> segment(std::size_t s,
                                                      std::size_t bits_per_segment) const;
  static SymbolRealization random(Rng& rng, std::size_t num_bits);
};

/// Gray-coded level for index `bits` of an `m`-ary pulse-amplitude axis, unnormalized:
/// bit pattern g maps to amplitude (m-1) - 2*gray_inverse(g).
double gray_pam_level(unsigned bits, unsigned m) noexcept;
unsigned gray_inverse(unsigned g) noexcept;

/// Root-raised-cosine taps spanning `span_symbols` symbols, scaled so the sum of
/// squared taps equals `samples_per_symbol` (unit output power for unit-energy symbols).
std::vector<double> rrc_taps(double rolloff, int samples_per_symbol, int span_symbols);

/// Pulse-shaped complex baseband s(M, b) of length num_symbols * samples_per_symbol.
/// Pulse shaping is circular over the block so the output carries no edge transient.
ComplexSignal modulate(const SymbolRealization& bits, const ModulationScheme& scheme);

}  // namespace modcl
