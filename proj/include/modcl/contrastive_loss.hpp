#pragma once

#include "modcl/pairing.hpp"

#include <Eigen/Core>

#include <span>
#include <stdexcept>

namespace modcl {

class NonPositiveTemperatureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Embeddings are stored one per row; for a SegmentViewBatch row i is the
/// segment with flat index i (4n + 2v + s).
using EmbeddingMatrix = Eigen::MatrixXd;

inline constexpr double kNormFloor = 1e-12;

struct LossBreakdown {
  double l_sc = 0.0;
  double l_ac = 0.0;
  double l_jc = 0.0;
  double l_total = 0.0;
  double tau = 0.0;
};

/// Which terms enter l_total (and its gradient). All three are always evaluated.
struct TierMask {
  bool ac = true;
  bool sc = true;
  bool jc = true;

  [[nodiscard]] bool any() const noexcept { return ac || sc || jc; }
};

/// u.v / tau for unit vectors.
double similarity(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double tau);

/// Row-wise h / max(||h||, 1e-12).
EmbeddingMatrix l2_normalize_rows(const EmbeddingMatrix& h);

/// Backpropagates d/d(h_norm) through the row normalization to d/dh.
EmbeddingMatrix l2_normalize_backward(const EmbeddingMatrix& h, const EmbeddingMatrix& grad_normed);

/// D for one anchor: sum of exp(sim) over every other row, positive included.
double denominator(const EmbeddingMatrix& normed, std::size_t anchor, double tau);

/// Mean of -log(exp(sim(anchor, positive)) / D(anchor)) over each tier's
/// relations, evaluated as logsumexp - sim. When `grad_normed` is non-null it
/// receives d l_total / d normed.
LossBreakdown contrastive_loss(const EmbeddingMatrix& normed,
                               std::span<const PositiveRelation> relations, double tau,
                               const TierMask& mask = {}, EmbeddingMatrix* grad_normed = nullptr);

double loss_ac(const EmbeddingMatrix& normed, double tau);
double loss_sc(const EmbeddingMatrix& normed, double tau);
double loss_jc(const EmbeddingMatrix& normed, double tau);
/// All three terms with the canonical relations of enumerate_positives(B).
LossBreakdown loss_total(const EmbeddingMatrix& normed, double tau);

/// Instance-level two-view NT-Xent: rows 2n and 2n+1 are the views of
/// instance n, every row is an anchor, candidates are the other 2B-1 rows.
double instance_nt_xent(const EmbeddingMatrix& normed, double tau,
                        EmbeddingMatrix* grad_normed = nullptr);

}  // namespace modcl
