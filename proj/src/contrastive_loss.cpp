#include "modcl/contrastive_loss.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace modcl {
namespace {

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw NonPositiveTemperatureError("temperature must be positive and finite, got " +
                                      std::to_string(tau));
  }
}

void check_finite(const EmbeddingMatrix& m, const char* what) {
  if (!m.allFinite()) throw NonFiniteLossError(std::string(what) + " contains NaN/Inf");
}

// Row-wise log-sum-exp of the similarity matrix, skipping the diagonal, and the
// matching softmax rows (diagonal zero).
struct Candidates {
  Eigen::MatrixXd sim;
  Eigen::VectorXd lse;
  Eigen::MatrixXd prob;
};

Candidates candidates(const EmbeddingMatrix& normed, double tau) {
  const auto n = normed.rows();
  Candidates c;
  c.sim = (normed * normed.transpose()) / tau;
  c.lse.resize(n);
  c.prob.setZero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != a) top = std::max(top, c.sim(a, j));
    }
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == a) continue;
      const double e = std::exp(c.sim(a, j) - top);
      c.prob(a, j) = e;
      sum += e;
    }
    c.lse(a) = top + std::log(sum);
    c.prob.row(a) /= sum;
  }
  return c;
}

}  // namespace

double similarity(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double tau) {
  check_tau(tau);
  if (u.size() != v.size()) throw ContractViolation("similarity: dimension mismatch");
  if (std::abs(u.norm() - 1.0) > 1e-6 || std::abs(v.norm() - 1.0) > 1e-6) {
    throw ContractViolation("similarity: inputs must be unit vectors");
  }
  return u.dot(v) / tau;
}

EmbeddingMatrix l2_normalize_rows(const EmbeddingMatrix& h) {
  EmbeddingMatrix out(h.rows(), h.cols());
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    out.row(i) = h.row(i) / std::max(h.row(i).norm(), kNormFloor);
  }
  return out;
}

EmbeddingMatrix l2_normalize_backward(const EmbeddingMatrix& h, const EmbeddingMatrix& grad_normed) {
  EmbeddingMatrix out(h.rows(), h.cols());
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    const double norm = h.row(i).norm();
    if (norm <= kNormFloor) {
      // Below the floor the map is linear: h / floor.
      out.row(i) = grad_normed.row(i) / kNormFloor;
      continue;
    }
    const Eigen::RowVectorXd u = h.row(i) / norm;
    out.row(i) = (grad_normed.row(i) - u * u.dot(grad_normed.row(i))) / norm;
  }
  return out;
}

double denominator(const EmbeddingMatrix& normed, std::size_t anchor, double tau) {
  check_tau(tau);
  const auto n = static_cast<std::size_t>(normed.rows());
  if (n < 2) throw ContractViolation("denominator: the candidate set is empty (need at least 2 rows)");
  if (anchor >= n) throw ContractViolation("denominator: anchor out of range");
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == anchor) continue;
    sum += std::exp(normed.row(static_cast<Eigen::Index>(anchor)).dot(normed.row(static_cast<Eigen::Index>(j))) / tau);
  }
  return sum;
}

LossBreakdown contrastive_loss(const EmbeddingMatrix& normed,
                               std::span<const PositiveRelation> relations, double tau,
                               const TierMask& mask, EmbeddingMatrix* grad_normed) {
  check_tau(tau);
  check_finite(normed, "embeddings");
  if (normed.rows() < 2) throw ContractViolation("contrastive_loss: need at least 2 embeddings");

  const auto c = candidates(normed, tau);

  std::size_t counts[3] = {0, 0, 0};
  double sums[3] = {0.0, 0.0, 0.0};
  for (const auto& r : relations) {
    const auto a = static_cast<Eigen::Index>(r.anchor.flat());
    const auto p = static_cast<Eigen::Index>(r.positive.flat());
    if (a >= normed.rows() || p >= normed.rows() || a == p) {
      throw ContractViolation("contrastive_loss: relation indexes outside the batch or onto itself");
    }
    const auto t = static_cast<std::size_t>(r.tier);
    sums[t] += c.lse(a) - c.sim(a, p);
    ++counts[t];
  }

  LossBreakdown out;
  out.tau = tau;
  const auto mean = [&](Tier t) {
    const auto i = static_cast<std::size_t>(t);
    return counts[i] ? sums[i] / static_cast<double>(counts[i]) : 0.0;
  };
  out.l_ac = mean(Tier::AC);
  out.l_sc = mean(Tier::SC);
  out.l_jc = mean(Tier::JC);
  out.l_total = (mask.sc ? out.l_sc : 0.0) + (mask.ac ? out.l_ac : 0.0) + (mask.jc ? out.l_jc : 0.0);
  if (!std::isfinite(out.l_total) || !std::isfinite(out.l_ac) || !std::isfinite(out.l_sc) ||
      !std::isfinite(out.l_jc)) {
    throw NonFiniteLossError("contrastive loss evaluated to NaN/Inf");
  }

  if (grad_normed != nullptr) {
    Eigen::MatrixXd dsim = Eigen::MatrixXd::Zero(normed.rows(), normed.rows());
    const bool on[3] = {mask.ac, mask.sc, mask.jc};
    for (const auto& r : relations) {
      const auto t = static_cast<std::size_t>(r.tier);
      if (!on[t]) continue;
      const double w = 1.0 / static_cast<double>(counts[t]);
      const auto a = static_cast<Eigen::Index>(r.anchor.flat());
      const auto p = static_cast<Eigen::Index>(r.positive.flat());
      dsim.row(a) += w * c.prob.row(a);
      dsim(a, p) -= w;
    }
    *grad_normed = ((dsim + dsim.transpose()) * normed) / tau;
  }
  return out;
}

double loss_ac(const EmbeddingMatrix& normed, double tau) { return loss_total(normed, tau).l_ac; }
double loss_sc(const EmbeddingMatrix& normed, double tau) { return loss_total(normed, tau).l_sc; }
double loss_jc(const EmbeddingMatrix& normed, double tau) { return loss_total(normed, tau).l_jc; }

LossBreakdown loss_total(const EmbeddingMatrix& normed, double tau) {
  if (normed.rows() < 4 || normed.rows() % 4 != 0) {
    throw ContractViolation("loss_total: expected 4B embeddings, got " + std::to_string(normed.rows()));
  }
  const auto relations = enumerate_positives(static_cast<int>(normed.rows() / 4));
  return contrastive_loss(normed, relations, tau);
}

double instance_nt_xent(const EmbeddingMatrix& normed, double tau, EmbeddingMatrix* grad_normed) {
  check_tau(tau);
  check_finite(normed, "embeddings");
  const auto n = normed.rows();
  if (n < 2 || n % 2 != 0) throw ContractViolation("instance_nt_xent: expected 2B embeddings");

  const auto c = candidates(normed, tau);
  double total = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) total += c.lse(a) - c.sim(a, a ^ 1);
  const double loss = total / static_cast<double>(n);
  if (!std::isfinite(loss)) throw NonFiniteLossError("instance NT-Xent evaluated to NaN/Inf");

  if (grad_normed != nullptr) {
    Eigen::MatrixXd dsim = c.prob / static_cast<double>(n);
    for (Eigen::Index a = 0; a < n; ++a) dsim(a, a ^ 1) -= 1.0 / static_cast<double>(n);
    *grad_normed = ((dsim + dsim.transpose()) * normed) / tau;
  }
  return loss;
}

}  // namespace modcl
