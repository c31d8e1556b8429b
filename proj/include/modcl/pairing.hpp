#pragma once

#include "modcl/augment.hpp"
#include "modcl/common.hpp"
#include "modcl/dataset.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace modcl {

/// (instance n, view v, segment s), all 0-based. The flat position inside a
/// SegmentViewBatch is 4n + 2v + s.
struct SegmentIndex {
  int n = 0;
  int v = 0;
  int s = 0;

  [[nodiscard]] constexpr std::size_t flat() const noexcept {
    return static_cast<std::size_t>(4 * n + 2 * v + s);
  }
  static constexpr SegmentIndex from_flat(std::size_t i) noexcept {
    return {static_cast<int>(i / 4), static_cast<int>((i / 2) % 2), static_cast<int>(i % 2)};
  }
  friend constexpr bool operator==(const SegmentIndex&, const SegmentIndex&) = default;
};

/// AC: same segment across views. SC: other segment, same view. JC: other segment, other view.
enum class Tier { AC, SC, JC };

struct PositiveRelation {
  SegmentIndex anchor;
  SegmentIndex positive;
  Tier tier = Tier::AC;
};

struct CorruptionEntry {
  std::size_t relation = 0;     // position in SegmentViewBatch::relations
  SegmentIndex original;        // partner before replacement
  SegmentIndex replacement;     // partner after replacement
};

class HeterogeneousLengthError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The 4B segment views of one mini-batch plus the positive relations that
/// the contrastive loss will use.
struct SegmentViewBatch {
  int batch_size = 0;
  int split = 0;  // L: length of segment s = 0
  std::vector<IqMatrix> segments;
  std::vector<std::uint64_t> origin_ids;
  std::vector<PositiveRelation> relations;
  std::vector<CorruptionEntry> corruption_log;

  [[nodiscard]] const IqMatrix& at(int n, int v, int s) const {
    return segments[SegmentIndex{n, v, s}.flat()];
  }
};

struct ViewOptions {
  /// Segment-length ablation: crop each instance to 2*segment_length samples first.
  std::optional<int> segment_length;
  bool random_crop = false;  // otherwise the first 2*segment_length samples
  bool symmetric_anchors = false;
};

/// Positive relations with the anchor sides of the displayed loss sums:
/// AC anchors (n, view 0, s); SC anchors (n, v, segment 0); JC anchors (n, 0, 0)
/// paired with (n, 1, 1). The symmetric variant adds the mirrored anchors.
std::vector<PositiveRelation> enumerate_positives(int batch_size, bool symmetric = false);

/// Crop (when requested) then return the instance at its working length.
IqMatrix crop_for_segments(const IqMatrix& x, const ViewOptions& options, Rng* rng);

/// Splits at L = floor(T/2): columns [0, L) and [L, T).
std::pair<IqMatrix, IqMatrix> split_segments(const IqMatrix& x);

/// Two augmented views per instance, each split into two segments. Per-instance
/// randomness comes from one draw of `rng` mixed with each policy's seed.
SegmentViewBatch make_views(std::span<const IqInstance* const> batch, const AugmentPolicy& view1,
                            const AugmentPolicy& view2, Rng& rng, const ViewOptions& options = {});

/// Full-length two-view batch for the instance-level baseline; entry 2n + v.
std::vector<IqMatrix> make_instance_views(std::span<const IqInstance* const> batch,
                                          const AugmentPolicy& view1, const AugmentPolicy& view2,
                                          Rng& rng);

}  // namespace modcl
