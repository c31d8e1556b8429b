#include "modcl/pairing.hpp"

#include <string>

namespace modcl {
namespace {

void check_batch(std::span<const IqInstance* const> batch) {
  if (batch.empty()) throw ContractViolation("make_views: batch must contain at least one instance");
  const int length = batch.front()->length();
  for (std::size_t i = 1; i < batch.size(); ++i) {
    if (batch[i]->length() != length) {
      throw HeterogeneousLengthError("make_views: instance " + std::to_string(i) + " has length " +
                                     std::to_string(batch[i]->length()) + ", expected " +
                                     std::to_string(length));
    }
  }
}

}  // namespace

std::vector<PositiveRelation> enumerate_positives(int batch_size, bool symmetric) {
  if (batch_size < 1) throw ContractViolation("enumerate_positives: B must be >= 1");
  std::vector<PositiveRelation> out;
  const int views = symmetric ? 2 : 1;
  for (int n = 0; n < batch_size; ++n) {
    for (int s = 0; s < 2; ++s) {
      for (int v = 0; v < views; ++v) out.push_back({{n, v, s}, {n, 1 - v, s}, Tier::AC});
    }
  }
  for (int v = 0; v < 2; ++v) {
    for (int n = 0; n < batch_size; ++n) {
      for (int s = 0; s < views; ++s) out.push_back({{n, v, s}, {n, v, 1 - s}, Tier::SC});
    }
  }
  for (int n = 0; n < batch_size; ++n) {
    out.push_back({{n, 0, 0}, {n, 1, 1}, Tier::JC});
    if (symmetric) out.push_back({{n, 1, 1}, {n, 0, 0}, Tier::JC});
  }
  return out;
}

IqMatrix crop_for_segments(const IqMatrix& x, const ViewOptions& options, Rng* rng) {
  if (!options.segment_length) return x;
  const int want = 2 * *options.segment_length;
  const auto length = static_cast<int>(x.cols());
  if (*options.segment_length < 1 || want > length) {
    throw ContractViolation("segment_length " + std::to_string(*options.segment_length) +
                            " needs 2L <= T = " + std::to_string(length));
  }
  int offset = 0;
  if (options.random_crop && rng != nullptr) {
    offset = static_cast<int>(uniform_int(*rng, 0, length - want));
  }
  return x.middleCols(offset, want);
}

std::pair<IqMatrix, IqMatrix> split_segments(const IqMatrix& x) {
  const auto length = static_cast<int>(x.cols());
  if (length < 2) throw ContractViolation("split_segments: T must be >= 2");
  const int split = length / 2;
  return {x.leftCols(split), x.rightCols(length - split)};
}

SegmentViewBatch make_views(std::span<const IqInstance* const> batch, const AugmentPolicy& view1,
                            const AugmentPolicy& view2, Rng& rng, const ViewOptions& options) {
  check_batch(batch);
  SegmentViewBatch out;
  out.batch_size = static_cast<int>(batch.size());
  out.segments.resize(4 * batch.size());
  out.origin_ids.reserve(batch.size());

  const AugmentPolicy* policies[2] = {&view1, &view2};
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const std::uint64_t instance_seed = rng();
    Rng crop_rng = make_stream(instance_seed, 0);
    const IqMatrix base = crop_for_segments(batch[n]->samples, options, &crop_rng);
    for (int v = 0; v < 2; ++v) {
      Rng view_rng = make_stream(mix_seed(instance_seed, policies[v]->rng_seed),
                                 static_cast<std::uint64_t>(v + 1));
      auto [first, second] = split_segments(apply_policy(base, *policies[v], view_rng));
      out.segments[SegmentIndex{static_cast<int>(n), v, 0}.flat()] = std::move(first);
      out.segments[SegmentIndex{static_cast<int>(n), v, 1}.flat()] = std::move(second);
    }
    out.origin_ids.push_back(batch[n]->instance_id);
    out.split = static_cast<int>(base.cols()) / 2;
  }
  out.relations = enumerate_positives(out.batch_size, options.symmetric_anchors);
  return out;
}

std::vector<IqMatrix> make_instance_views(std::span<const IqInstance* const> batch,
                                          const AugmentPolicy& view1, const AugmentPolicy& view2,
                                          Rng& rng) {
  check_batch(batch);
  std::vector<IqMatrix> views;
  views.reserve(2 * batch.size());
  const AugmentPolicy* policies[2] = {&view1, &view2};
  for (const auto* inst : batch) {
    const std::uint64_t instance_seed = rng();
    for (int v = 0; v < 2; ++v) {
      Rng view_rng = make_stream(mix_seed(instance_seed, policies[v]->rng_seed),
                                 static_cast<std::uint64_t>(v + 1));
      views.push_back(apply_policy(inst->samples, *policies[v], view_rng));
    }
  }
  return views;
}

}  // namespace modcl
