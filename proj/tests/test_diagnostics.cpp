#include "modcl/diagnostics.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <utility>

using namespace modcl;

namespace {

SegmentViewBatch dummy_batch(int batch_size) {
  SegmentViewBatch b;
  b.batch_size = batch_size;
  b.split = 2;
  b.segments.assign(4 * static_cast<std::size_t>(batch_size), IqMatrix::Zero(2, 2));
  for (int n = 0; n < batch_size; ++n) b.origin_ids.push_back(static_cast<std::uint64_t>(1000 + n));
  b.relations = enumerate_positives(batch_size);
  return b;
}

// Entropy form H(A) + H(B) - H(A, B) over a sparse joint.
double oracle_mi(const std::map<std::pair<int, int>, double>& joint) {
  std::map<int, double> pa, pb;
  for (const auto& [k, p] : joint) {
    pa[k.first] += p;
    pb[k.second] += p;
  }
  auto h = [](const auto& dist) {
    double out = 0.0;
    for (const auto& [k, p] : dist) {
      if (p > 0.0) out -= p * std::log(p);
    }
    return out;
  };
  return h(pa) + h(pb) - h(joint);
}

Eigen::MatrixXd dense(const std::map<std::pair<int, int>, double>& joint, int rows, int cols) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
  for (const auto& [k, p] : joint) out(k.first, k.second) += p;
  return out;
}

// Brute force over (m, b1, b2, c) with the slot-2 nuisance either shared or independent.
std::map<std::pair<int, int>, double> oracle_pair_joint(const DiscreteToyModel& t, bool shared_b) {
  std::map<std::pair<int, int>, double> out;
  for (int m = 0; m < t.nm; ++m) {
    for (int b1 = 0; b1 < t.nb; ++b1) {
      for (int b2 = 0; b2 < t.nb; ++b2) {
        if (shared_b && b1 != b2) continue;
        for (int c = 0; c < t.nc; ++c) {
          double p = t.prior_m[m] * t.prior_b[b1] * t.prior_c[c];
          if (!shared_b) p *= t.prior_b[b2];
          out[{t.g[0][(m * t.nb + b1) * t.nc + c], t.g[1][(m * t.nb + b2) * t.nc + c]}] += p;
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("diagnostics") {
  TEST_CASE("p = 0 leaves the batch unchanged") {
    auto batch = dummy_batch(4);
    const std::vector<int> labels{0, 1, 2, 3};
    Rng rng = make_stream(1, 0);
    const auto out = corrupt_positive_pairs(batch, labels, {CorruptionMode::Random, 0.0, 1, false}, rng);
    REQUIRE(out.relations.size() == batch.relations.size());
    for (std::size_t i = 0; i < out.relations.size(); ++i) CHECK(out.relations[i].positive == batch.relations[i].positive);
    CHECK(out.corruption_log.empty());
  }

  TEST_CASE("random corruption at p = 1 replaces every positive with a non-anchor segment") {
    Rng rng = make_stream(2, 0);
    const std::vector<int> labels{0, 0, 1};
    for (int trial = 0; trial < 200; ++trial) {
      const auto batch = dummy_batch(3);
      const auto out = corrupt_positive_pairs(batch, labels, {CorruptionMode::Random, 1.0, 0, false}, rng);
      CHECK(out.corruption_log.size() == batch.relations.size());
      for (std::size_t i = 0; i < out.relations.size(); ++i) {
        const auto& r = out.relations[i];
        CHECK(r.anchor == batch.relations[i].anchor);
        CHECK(r.tier == batch.relations[i].tier);
        CHECK_FALSE(r.positive == r.anchor);
        CHECK(r.positive.flat() < 12U);
      }
    }
  }

  TEST_CASE("semantic corruption draws from other classes only") {
    Rng rng = make_stream(3, 0);
    const std::vector<int> labels{0, 1, 0, 2};
    for (int trial = 0; trial < 200; ++trial) {
      const auto out = corrupt_positive_pairs(dummy_batch(4), labels, {CorruptionMode::Semantic, 1.0, 0, false}, rng);
      for (const auto& r : out.relations) CHECK(labels[r.positive.n] != labels[r.anchor.n]);
      for (const auto& e : out.corruption_log) CHECK(labels[e.replacement.n] != labels[out.relations[e.relation].anchor.n]);
    }
  }

  TEST_CASE("semantic corruption needs two classes") {
    Rng rng = make_stream(4, 0);
    const std::vector<int> labels{1, 1, 1};
    CHECK_THROWS_AS(corrupt_positive_pairs(dummy_batch(3), labels, {CorruptionMode::Semantic, 0.5, 0, false}, rng),
                    InfeasibleCorruptionError);
    CHECK_NOTHROW(corrupt_positive_pairs(dummy_batch(3), labels, {CorruptionMode::Random, 0.5, 0, false}, rng));
    CHECK_THROWS(corrupt_positive_pairs(dummy_batch(3), labels, {CorruptionMode::Random, 1.5, 0, false}, rng));
    const std::vector<int> short_labels{0};
    CHECK_THROWS(corrupt_positive_pairs(dummy_batch(3), short_labels, {CorruptionMode::Random, 0.5, 0, false}, rng));
  }

  TEST_CASE("corruption rate matches p within a binomial bound") {
    Rng rng = make_stream(5, 0);
    const std::vector<int> labels{0, 1, 2, 3, 0, 1, 2, 3};
    for (double p : {0.1, 0.5, 0.9}) {
      std::size_t seen = 0, hit = 0;
      for (int trial = 0; trial < 400; ++trial) {
        const auto out = corrupt_positive_pairs(dummy_batch(8), labels, {CorruptionMode::Random, p, 0, false}, rng);
        seen += out.relations.size();
        hit += out.corruption_log.size();
      }
      const double n = static_cast<double>(seen);
      CHECK(seen >= 10000U);
      CHECK(std::abs(static_cast<double>(hit) - p * n) <= 4.0 * std::sqrt(n * p * (1 - p)));
    }
  }

  TEST_CASE("p = 0.5 over 10^4 pairs replaces between 48% and 52%") {
    Rng rng = make_stream(5, 1);
    const std::vector<int> labels{0, 1, 2, 3, 0, 1, 2, 3, 0, 1};
    std::size_t seen = 0, hit = 0;
    while (seen < 10000) {
      const auto out = corrupt_positive_pairs(dummy_batch(10), labels, {CorruptionMode::Semantic, 0.5, 0, false}, rng);
      seen += out.relations.size();
      hit += out.corruption_log.size();
    }
    const double rate = static_cast<double>(hit) / static_cast<double>(seen);
    CHECK(rate >= 0.48);
    CHECK(rate <= 0.52);
  }

  TEST_CASE("frozen corruption picks the same relations every epoch") {
    const std::vector<int> labels{0, 1, 2, 3};
    const CorruptionSpec spec{CorruptionMode::Random, 0.5, 17, true};
    Rng a = make_stream(6, 0), b = make_stream(6, 99);
    const auto x = corrupt_positive_pairs(dummy_batch(4), labels, spec, a);
    const auto y = corrupt_positive_pairs(dummy_batch(4), labels, spec, b);
    REQUIRE(x.corruption_log.size() == y.corruption_log.size());
    for (std::size_t i = 0; i < x.corruption_log.size(); ++i) CHECK(x.corruption_log[i].relation == y.corruption_log[i].relation);
  }

  TEST_CASE("mutual information agrees with the entropy identity") {
    Rng rng = make_stream(7, 0);
    for (int trial = 0; trial < 200; ++trial) {
      const int r = 1 + static_cast<int>(uniform_int(rng, 0, 7));
      const int c = 1 + static_cast<int>(uniform_int(rng, 0, 7));
      std::map<std::pair<int, int>, double> joint;
      double total = 0.0;
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
          const double w = uniform(rng, 0.0, 1.0) < 0.3 ? 0.0 : uniform(rng, 0.0, 1.0);
          joint[{i, j}] = w;
          total += w;
        }
      }
      if (total == 0.0) continue;
      for (auto& [k, p] : joint) p /= total;
      CHECK(std::abs(exact_mutual_information(dense(joint, r, c)) - oracle_mi(joint)) <= 1e-12);
    }
  }

  TEST_CASE("mutual information of independent and identical variables") {
    Eigen::VectorXd pa(3), pb(4);
    pa << 0.2, 0.5, 0.3;
    pb << 0.1, 0.2, 0.3, 0.4;
    CHECK(exact_mutual_information(pa * pb.transpose()) == doctest::Approx(0.0).epsilon(1e-12));
    for (int n : {1, 2, 5, 32}) {
      const Eigen::MatrixXd diag = Eigen::MatrixXd::Identity(n, n) / n;
      CHECK(std::abs(exact_mutual_information(diag) - std::log(n)) <= 1e-12);
    }
    CHECK(kNatsToBits * std::log(2.0) == doctest::Approx(1.0));
  }

  TEST_CASE("malformed joint tables are rejected") {
    Eigen::MatrixXd j = Eigen::MatrixXd::Constant(2, 2, 0.3);
    CHECK_THROWS_AS(exact_mutual_information(j), NonNormalizedTableError);
    j << 0.5, 0.5, 0.1, -0.1;
    CHECK_THROWS_AS(exact_mutual_information(j), NonNormalizedTableError);
    CHECK_THROWS_AS(exact_mutual_information(Eigen::MatrixXd()), NonNormalizedTableError);
  }

  TEST_CASE("joint tables match brute-force enumeration") {
    Rng rng = make_stream(8, 0);
    for (int trial = 0; trial < 100; ++trial) {
      const int nm = 1 + static_cast<int>(uniform_int(rng, 0, 3));
      const int nb = 1 + static_cast<int>(uniform_int(rng, 0, 3));
      const int nc = 1 + static_cast<int>(uniform_int(rng, 0, 1));
      const int n_obs = 2 + static_cast<int>(uniform_int(rng, 0, 30));
      const auto t = DiscreteToyModel::random(rng, nm, nb, nc, n_obs);
      const auto seg = oracle_pair_joint(t, false);
      const auto inst = oracle_pair_joint(t, true);
      CHECK((segment_joint(t) - dense(seg, n_obs, n_obs)).cwiseAbs().maxCoeff() <= 1e-15);
      CHECK((instance_joint(t) - dense(inst, n_obs, n_obs)).cwiseAbs().maxCoeff() <= 1e-15);
      CHECK(std::abs(exact_mutual_information(segment_joint(t)) - oracle_mi(seg)) <= 1e-9);
      CHECK(std::abs(exact_mutual_information(instance_joint(t)) - oracle_mi(inst)) <= 1e-9);
      for (int slot = 0; slot < 2; ++slot) {
        const auto sem = observation_semantic_joint(t, slot);
        CHECK(sem.sum() == doctest::Approx(1.0));
        CHECK(sem.cols() == nm * nc);
      }
    }
  }

  TEST_CASE("strict B-dependence separates instance and segment information") {
    const auto t = DiscreteToyModel::strict_b_dependence();
    CHECK(exact_mutual_information(instance_joint(t)) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(exact_mutual_information(segment_joint(t)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    const auto report = verify_information_bounds(t, {}, 0, true);
    CHECK(report.pass());
    CHECK(report.i_instance > report.i_x1_x2);
  }

  TEST_CASE("push-forward sums mass over preimages") {
    Eigen::MatrixXd j(3, 3);
    j << 0.1, 0.0, 0.2, 0.05, 0.15, 0.0, 0.3, 0.1, 0.1;
    const int f[] = {1, 0, 1};
    const auto out = push_forward(j, f, 2);
    // expect(a, b) sums j(x, y) with f(x) = a and f(y) = b.
    Eigen::MatrixXd expect(2, 2);
    expect(0, 0) = j(1, 1);
    expect(0, 1) = j(1, 0) + j(1, 2);
    expect(1, 0) = j(0, 1) + j(2, 1);
    expect(1, 1) = j(0, 0) + j(0, 2) + j(2, 0) + j(2, 2);
    CHECK((out - expect).cwiseAbs().maxCoeff() <= 1e-15);
    const int bad[] = {0, 2, 1};
    CHECK_THROWS(push_forward(j, bad, 2));
  }

  TEST_CASE("random toy models satisfy the information bounds") {
    Rng rng = make_stream(9, 0);
    for (int trial = 0; trial < 50; ++trial) {
      const auto t = DiscreteToyModel::random(rng, 4, 4, 2, 32);
      std::vector<int> f(32);
      const int outputs = 1 + static_cast<int>(uniform_int(rng, 0, 31));
      for (auto& v : f) v = static_cast<int>(uniform_int(rng, 0, outputs - 1));
      const auto report = verify_information_bounds(t, std::span<const int>(f), outputs);
      CHECK(report.pass());
      CHECK(report.i_x1_x2 <= std::min(report.i_x1_mc, report.i_x2_mc) + kBoundTolerance);
      REQUIRE(report.i_z1_z2.has_value());
      CHECK(*report.i_z1_z2 <= report.i_x1_x2 + kBoundTolerance);
    }
  }

  TEST_CASE("oversized toy models are refused") {
    DiscreteToyModel t;
    t.nm = 1000;
    t.nb = 100;
    t.nc = 1;
    t.n_obs = 2;
    t.prior_m.assign(1000, 1e-3);
    t.prior_b.assign(100, 1e-2);
    t.prior_c = {1.0};
    t.g[0].assign(100000, 0);
    t.g[1].assign(100000, 1);
    CHECK_THROWS_AS(t.validate(), EnumerationSizeError);
  }

  TEST_CASE("information suite passes on a small run") {
    const auto suite = run_information_suite(3, 10, 3);
    CHECK(suite.models == 10);
    CHECK(suite.maps == 30);
    CHECK(suite.failures == 0);
    CHECK(suite.strict_gap);
    CHECK(suite.pass());
    CHECK(suite.report.find("result=") != std::string::npos);
  }

  TEST_CASE("sweep rows use the CSV column order") {
    CHECK(std::string(kSweepHeader) == "mode,p,seed,acc_overall");
    CHECK(format_sweep_row({CorruptionMode::Semantic, 0.5, 3, 0.25}) == "semantic,0.5,3,0.25");
    CHECK(format_sweep_row({CorruptionMode::Random, 1.0, 0, 0.75}) == "random,1,0,0.75");
  }
}
