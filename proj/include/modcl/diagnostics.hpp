#pragma once

#include "modcl/common.hpp"
#include "modcl/config.hpp"
#include "modcl/pairing.hpp"
#include "modcl/pipelines.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace modcl {

// ------------------------------------------------------------------ corruption

class InfeasibleCorruptionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CorruptionSpec {
  CorruptionMode mode = CorruptionMode::Random;
  double p = 0.0;
  std::uint64_t rng_seed = 0;
  /// When set, whether a relation is corrupted depends only on
  /// (rng_seed, origin id, relation slot), so it stays fixed across epochs.
  bool freeze = false;
};

/// Replaces the positive partner of each relation with probability p. Random
/// mode draws uniformly among all in-batch segments except the anchor; semantic
/// mode draws among segments whose instance label differs from the anchor's.
/// `labels[n]` is the class of instance n. Segment data is never modified.
SegmentViewBatch corrupt_positive_pairs(SegmentViewBatch batch, std::span<const int> labels,
                                        const CorruptionSpec& spec, Rng& rng);

// ------------------------------------------------------------------ mutual information

class NonNormalizedTableError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EnumerationSizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// I(A;B) in nats from a joint probability table (rows A, columns B).
double exact_mutual_information(const Eigen::MatrixXd& joint);

inline constexpr double kNatsToBits = 1.4426950408889634;  // 1 / ln 2

/// Finite factorized generator: the observation of segment slot s is
/// g[s][(m * nb + b) * nc + c]. The two slots draw B independently from the
/// same prior; M and C are shared.
struct DiscreteToyModel {
  int nm = 4;
  int nb = 4;
  int nc = 2;
  int n_obs = 32;
  std::vector<double> prior_m;
  std::vector<double> prior_b;
  std::vector<double> prior_c;
  std::vector<int> g[2];

  [[nodiscard]] int obs(int slot, int m, int b, int c) const {
    return g[slot][static_cast<std::size_t>((m * nb + b) * nc + c)];
  }
  void validate() const;

  /// Random priors (Dirichlet(1)) and uniform random generator tables.
  static DiscreteToyModel random(Rng& rng, int nm, int nb, int nc, int n_obs);
  /// |M|=2, |B|=2, |C|=1, uniform priors, G(m, b) = 2m + b in both slots.
  static DiscreteToyModel strict_b_dependence();
};

/// Joint tables by exact enumeration.
Eigen::MatrixXd segment_joint(const DiscreteToyModel& model);            // x1 x x2
Eigen::MatrixXd instance_joint(const DiscreteToyModel& model);           // x(1) x x(2), shared B
Eigen::MatrixXd observation_semantic_joint(const DiscreteToyModel& model, int slot);  // x_s x (M, C)
/// Pushes both marginals of a joint table through f (size = rows = cols).
Eigen::MatrixXd push_forward(const Eigen::MatrixXd& joint, std::span<const int> f, int n_out);

struct BoundCheck {
  std::string name;
  double lhs = 0.0;  // nats
  double rhs = 0.0;  // nats
  bool asserted = true;
  bool pass = false;
};

struct InformationReport {
  double i_x1_x2 = 0.0;
  double i_x1_mc = 0.0;
  double i_x2_mc = 0.0;
  double i_instance = 0.0;
  std::optional<double> i_z1_z2;
  std::vector<BoundCheck> checks;

  [[nodiscard]] bool pass() const;
  /// One line per check, values in bits.
  [[nodiscard]] std::string format() const;
};

inline constexpr double kBoundTolerance = 1e-9;

/// (a) I(x1;x2) <= min(I(x1;MC), I(x2;MC)); (b) I(f(x1);f(x2)) <= I(x1;x2)
/// when a map is given; (c) instance-level I >= segment-level I, asserted only
/// when `strict_b` is set and reported otherwise.
InformationReport verify_information_bounds(const DiscreteToyModel& model,
                                            std::optional<std::span<const int>> representation_map = {},
                                            int map_outputs = 0, bool strict_b = false);

/// Batch run of verify_information_bounds over random toy models (alphabets up
/// to 4 x 4 x 2, at most 32 observations), each with several random maps f,
/// followed by the strict B-dependence model.
struct InformationSuite {
  int models = 0;
  int maps = 0;
  int asserted = 0;
  int failures = 0;
  bool strict_gap = false;
  std::string report;  // plain text, bits

  [[nodiscard]] bool pass() const noexcept { return failures == 0 && strict_gap; }
};

InformationSuite run_information_suite(std::uint64_t seed, int models, int maps_per_model);

// ------------------------------------------------------------------ corruption sweep

struct SweepRow {
  CorruptionMode mode = CorruptionMode::Random;
  double p = 0.0;
  std::uint64_t seed = 0;
  double acc_overall = 0.0;
};

inline constexpr const char* kSweepHeader = "mode,p,seed,acc_overall";
std::string format_sweep_row(const SweepRow& row);

/// Pretrains with each (mode, p, seed), probes, and records test accuracy. The
/// p = 0 run is shared by every mode of a seed since corruption is then a no-op.
std::vector<SweepRow> corruption_sweep(const ExperimentConfig& config, const Dataset& dataset,
                                       const SplitResult& split, std::span<const double> p_grid,
                                       std::span<const CorruptionMode> modes,
                                       const std::function<void(const SweepRow&)>& on_row = {});

}  // namespace modcl
