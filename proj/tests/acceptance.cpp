// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any selected criterion fails.

#include "modcl/augment.hpp"
#include "modcl/config.hpp"
#include "modcl/contrastive_loss.hpp"
#include "modcl/diagnostics.hpp"
#include "modcl/pairing.hpp"
#include "modcl/pipelines.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace modcl;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

Eigen::MatrixXd gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

IqMatrix random_iq(Rng& rng, int length) {
  std::normal_distribution<float> n(0.0F, 1.0F);
  IqMatrix x(2, length);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  return x;
}

Eigen::MatrixXd unit_rows(const Eigen::MatrixXd& h) {
  Eigen::MatrixXd out = h;
  for (Eigen::Index i = 0; i < h.rows(); ++i) out.row(i) /= h.row(i).norm();
  return out;
}

// Straight from the definition: explicit loops over anchors and candidates,
// exp/log without any stabilization, flat row index 4n + 2v + s.
struct Oracle {
  const Eigen::MatrixXd& e;
  double tau;
  int b;

  [[nodiscard]] int at(int n, int v, int s) const { return 4 * n + 2 * v + s; }

  [[nodiscard]] double term(int anchor, int positive) const {
    double d = 0.0;
    for (int j = 0; j < 4 * b; ++j) {
      if (j != anchor) d += std::exp(e.row(anchor).dot(e.row(j)) / tau);
    }
    return -std::log(std::exp(e.row(anchor).dot(e.row(positive)) / tau) / d);
  }

  [[nodiscard]] double ac() const {
    double sum = 0.0;
    for (int n = 0; n < b; ++n) {
      for (int s = 0; s < 2; ++s) sum += term(at(n, 0, s), at(n, 1, s));
    }
    return sum / (2.0 * b);
  }
  [[nodiscard]] double sc() const {
    double sum = 0.0;
    for (int n = 0; n < b; ++n) {
      for (int v = 0; v < 2; ++v) sum += term(at(n, v, 0), at(n, v, 1));
    }
    return sum / (2.0 * b);
  }
  [[nodiscard]] double jc() const {
    double sum = 0.0;
    for (int n = 0; n < b; ++n) sum += term(at(n, 0, 0), at(n, 1, 1));
    return sum / b;
  }
};

// Two views per instance in rows 2n and 2n + 1; every row anchors.
double instance_oracle(const Eigen::MatrixXd& e, double tau) {
  const auto rows = static_cast<int>(e.rows());
  double sum = 0.0;
  for (int i = 0; i < rows; ++i) {
    const int pos = i ^ 1;
    double d = 0.0;
    for (int j = 0; j < rows; ++j) {
      if (j != i) d += std::exp(e.row(i).dot(e.row(j)) / tau);
    }
    sum += -std::log(std::exp(e.row(i).dot(e.row(pos)) / tau) / d);
  }
  return sum / rows;
}

// ------------------------------------------------------------------ criteria

Verdict loss_oracle() {
  const auto t0 = Clock::now();
  Rng rng = make_stream(101, 0);
  double worst = 0.0;
  int batches = 0;
  for (int b : {1, 2, 4, 8}) {
    const auto rel = enumerate_positives(b);
    for (int k = 0; k < 100; ++k, ++batches) {
      const double tau = std::vector<double>{0.05, 0.07, 0.1, 0.2, 0.5}[static_cast<std::size_t>(k % 5)];
      const Eigen::MatrixXd e = unit_rows(gaussian(rng, 4 * b, 32));
      const auto got = contrastive_loss(e, rel, tau);
      const Oracle o{e, tau, b};
      const double ac = o.ac(), sc = o.sc(), jc = o.jc();
      worst = std::max({worst, std::abs(got.l_ac - ac), std::abs(got.l_sc - sc), std::abs(got.l_jc - jc),
                        std::abs(got.l_total - (ac + sc + jc))});
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10.0,
          fmt("%d batches, max |diff| = %.3g (limit 1e-9), %.2f s (limit 10 s)", batches, worst, secs)};
}

Verdict degenerate_values() {
  double worst = 0.0;
  for (int b : {1, 2, 4, 8, 16}) {
    for (double tau : {0.05, 0.07, 0.5}) {
      Eigen::MatrixXd e = Eigen::MatrixXd::Zero(4 * b, 8);
      e.col(3).setOnes();
      const auto l = contrastive_loss(e, enumerate_positives(b), tau);
      const double expect = std::log(4.0 * b - 1.0);
      worst = std::max({worst, std::abs(l.l_ac - expect), std::abs(l.l_sc - expect), std::abs(l.l_jc - expect)});
      Eigen::MatrixXd inst = Eigen::MatrixXd::Zero(2 * b, 8);
      inst.col(3).setOnes();
      worst = std::max(worst, std::abs(instance_nt_xent(inst, tau) - std::log(2.0 * b - 1.0)));
    }
  }
  return {worst <= 1e-12, fmt("max |diff| from ln(4B-1) / ln(2B-1) = %.3g over B in {1,2,4,8,16}", worst)};
}

Verdict gradient_check() {
  Rng rng = make_stream(103, 0);
  const auto rel = enumerate_positives(2);
  const double step = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double tau = k % 2 ? 0.07 : 0.2;
    Eigen::MatrixXd h = gaussian(rng, 8, 12);
    auto f = [&](const Eigen::MatrixXd& x) { return contrastive_loss(l2_normalize_rows(x), rel, tau).l_total; };
    EmbeddingMatrix g_norm;
    contrastive_loss(l2_normalize_rows(h), rel, tau, {}, &g_norm);
    const Eigen::MatrixXd analytic = l2_normalize_backward(h, g_norm);
    Eigen::MatrixXd numeric(h.rows(), h.cols());
    for (Eigen::Index i = 0; i < h.size(); ++i) {
      const double keep = h.data()[i];
      h.data()[i] = keep + step;
      const double up = f(h);
      h.data()[i] = keep - step;
      const double down = f(h);
      h.data()[i] = keep;
      numeric.data()[i] = (up - down) / (2.0 * step);
    }
    worst = std::max(worst, (numeric - analytic).norm() / std::max(numeric.norm(), analytic.norm()));
  }
  return {worst <= 1e-4, fmt("20 batches, B = 2, step 1e-5, max relative error %.3g (limit 1e-4)", worst)};
}

Verdict invariants() {
  Rng rng = make_stream(104, 0);
  int violations = 0;
  int checked = 0;
  auto expect = [&](bool ok) {
    ++checked;
    violations += ok ? 0 : 1;
  };
  for (int trial = 0; trial < 300; ++trial) {
    const int length = 2 + static_cast<int>(uniform_int(rng, 0, 254));
    const IqMatrix x = random_iq(rng, length);

    // Segmentation: contiguous halves that concatenate back to x.
    const auto [a, b] = split_segments(x);
    expect(a.cols() == length / 2 && b.cols() == length - length / 2);
    expect(a == x.leftCols(length / 2) && b == x.rightCols(length - length / 2));

    // Mask: exactly floor(f T) zeroed columns, others untouched.
    const double frac = uniform(rng, 0.0, 1.0);
    const IqMatrix m = random_mask(x, frac, rng);
    int zeros = 0;
    bool others = true;
    for (int t = 0; t < length; ++t) {
      if (m(0, t) == 0.0F && m(1, t) == 0.0F) {
        ++zeros;
      } else {
        others = others && m.col(t) == x.col(t);
      }
    }
    expect(zeros == static_cast<int>(std::floor(frac * length)) && others);

    // Circular shift: out[t] = in[(t - k) mod T].
    const int k = static_cast<int>(uniform_int(rng, -(length - 1), length - 1));
    const IqMatrix s = time_shift(x, k);
    bool shifted = true;
    for (int t = 0; t < length; ++t) shifted = shifted && s.col(t) == x.col(((t - k) % length + length) % length);
    expect(shifted);

    // Sign inversion is an exact involution.
    expect(sign_invert(sign_invert(x)) == x && sign_invert(x) == -x);

    // Rotation by a multiple of pi/2 permutes and negates components exactly.
    const IqMatrix r = phase_rotate(x, std::numbers::pi);
    expect(((r + x).cwiseAbs().maxCoeff()) <= 1e-6F * std::max(1.0F, x.cwiseAbs().maxCoeff()));
  }

  // View batches: 4B segments, 5B canonical relations, no label reads.
  std::vector<IqInstance> pool;
  for (int n = 0; n < 6; ++n) pool.emplace_back(random_iq(rng, 64), n % 3, 0.0, n);
  std::vector<const IqInstance*> batch;
  for (const auto& p : pool) batch.push_back(&p);
  const LabelAudit::Scope audit;
  Rng views_rng = make_stream(104, 1);
  const auto v = make_views(batch, AugmentPolicy{.rng_seed = 1}, AugmentPolicy{.rng_seed = 2}, views_rng);
  expect(v.segments.size() == 24U && v.relations.size() == 30U && audit.reads() == 0);
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& rel : v.relations) {
    expect(rel.anchor.n == rel.positive.n && !(rel.anchor == rel.positive));
    pairs.emplace(rel.anchor.flat(), rel.positive.flat());
  }
  expect(pairs.size() == v.relations.size());
  return {violations == 0, fmt("%d invariant checks, %d violations", checked, violations)};
}

Verdict information_bounds() {
  const auto t0 = Clock::now();
  const auto suite = run_information_suite(105, 100, 10);
  const double secs = seconds_since(t0);
  return {suite.pass() && suite.models == 100 && suite.maps == 1000 && secs < 60.0,
          fmt("%d models, %d maps, %d asserted bounds, %d failures, strict instance > segment gap %s, %.2f s "
              "(limit 60 s)",
              suite.models, suite.maps, suite.asserted, suite.failures, suite.strict_gap ? "yes" : "no", secs)};
}

struct DeskSetup {
  ExperimentConfig config = ExperimentConfig::desk_scale();
  Dataset dataset;
  SplitResult split;

  DeskSetup() : dataset(prepare_dataset(config)), split(stratified_split(dataset, config.split)) {}
};

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string list(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : "/") + fmt("%.3f", x);
  return out;
}

Verdict desk_scale() {
  const auto t0 = Clock::now();
  DeskSetup desk;
  std::map<Method, std::vector<double>> acc;
  for (Method m : {Method::ModCl, Method::RandomInit, Method::InstanceBaseline}) {
    ExperimentConfig c = desk.config;
    c.method = m;
    for (auto seed : c.seeds) {
      const auto run = pretrain_and_probe(c, desk.dataset, desk.split, seed);
      acc[m].push_back(run.probe.test.acc_overall);
      std::fprintf(stderr, "  c6 %s seed %llu acc %.4f (%.0f s)\n", method_name(m).c_str(),
                   static_cast<unsigned long long>(seed), run.probe.test.acc_overall, seconds_since(t0));
    }
  }
  const double secs = seconds_since(t0);
  const double mod = mean(acc[Method::ModCl]), rnd = mean(acc[Method::RandomInit]),
               base = mean(acc[Method::InstanceBaseline]);
  const bool ok = mod >= rnd + 0.15 && mod >= base && secs <= 15 * 60.0;
  return {ok, fmt("N=5 probe accuracy mod-cl %.4f [%s], random-init %.4f [%s], instance %.4f [%s]; "
                  "margin over random %+.1f pts (need >= 15), over instance %+.1f pts (need >= 0), %.0f s (limit 900 s)",
                  mod, list(acc[Method::ModCl]).c_str(), rnd, list(acc[Method::RandomInit]).c_str(), base,
                  list(acc[Method::InstanceBaseline]).c_str(), 100 * (mod - rnd), 100 * (mod - base), secs)};
}

Verdict corruption() {
  const auto t0 = Clock::now();
  DeskSetup desk;
  const std::vector<double> grid{0.0, 1.0};
  const std::vector<CorruptionMode> modes{CorruptionMode::Random, CorruptionMode::Semantic};
  std::map<std::pair<CorruptionMode, double>, std::vector<double>> acc;
  std::vector<double> clean;
  corruption_sweep(desk.config, desk.dataset, desk.split, grid, modes, [&](const SweepRow& row) {
    std::fprintf(stderr, "  c7 %s p=%g seed %llu acc %.4f (%.0f s)\n", corruption_mode_name(row.mode).c_str(), row.p,
                 static_cast<unsigned long long>(row.seed), row.acc_overall, seconds_since(t0));
    if (row.p == 0.0) {
      // The clean run is shared between modes; count it once per seed.
      if (row.mode == CorruptionMode::Random) clean.push_back(row.acc_overall);
    } else {
      acc[{row.mode, row.p}].push_back(row.acc_overall);
    }
  });
  const double secs = seconds_since(t0);
  const double p0 = mean(clean);
  const double sem = mean(acc[{CorruptionMode::Semantic, 1.0}]);
  const double rnd = mean(acc[{CorruptionMode::Random, 1.0}]);
  const bool drop = sem <= p0 - 0.05;
  const bool order = sem <= rnd;
  const bool ok = drop && order && secs <= 30 * 60.0;
  return {ok, fmt("p=0 %.4f [%s]; semantic p=1 %.4f [%s]; random p=1 %.4f [%s]; semantic drop %.1f pts (need >= 5) "
                  "%s; semantic <= random %s; %.0f s (limit 1800 s)",
                  p0, list(clean).c_str(), sem, list(acc[{CorruptionMode::Semantic, 1.0}]).c_str(), rnd,
                  list(acc[{CorruptionMode::Random, 1.0}]).c_str(), 100 * (p0 - sem), drop ? "ok" : "FAILED",
                  order ? "ok" : "FAILED", secs)};
}

Verdict integrity() {
  DeskSetup desk;
  std::vector<std::string> problems;

  // Pretraining is label-blind for both self-supervised methods.
  for (Method m : {Method::ModCl, Method::InstanceBaseline}) {
    ExperimentConfig c = desk.config;
    c.method = m;
    c.pretrain_epochs = 2;
    const LabelAudit::Scope audit;
    const auto r = pretrain(c, desk.dataset, desk.split.train, 0);
    if (audit.reads() != 0 || r.label_reads != 0) problems.push_back(method_name(m) + " pretraining read labels");
  }

  // Full desk pipeline twice with the same seed: bitwise-identical losses,
  // encoder and probe; the probe leaves the encoder hash unchanged.
  std::uint64_t hashes[2] = {0, 0};
  std::vector<double> losses[2];
  double accs[2] = {0, 0};
  for (int rep = 0; rep < 2; ++rep) {
    auto pre = pretrain(desk.config, desk.dataset, desk.split.train, 0);
    for (const auto& rec : pre.history) losses[rep].push_back(rec.loss->l_total);
    hashes[rep] = pre.model->encoder_hash();
    const auto probe = linear_probe(*pre.model, desk.dataset, desk.split, desk.config, 0);
    if (pre.model->encoder_hash() != hashes[rep]) problems.push_back("probe changed the encoder hash");
    accs[rep] = probe.test.acc_overall;
  }
  if (hashes[0] != hashes[1]) problems.push_back("encoder hashes differ between identical runs");
  if (losses[0] != losses[1]) problems.push_back("loss trajectories differ between identical runs");
  if (accs[0] != accs[1]) problems.push_back("probe accuracy differs between identical runs");

  std::string detail = fmt("label reads 0 for mod-cl and instance pretraining; encoder %s; %zu loss values and probe "
                           "accuracy %.4f reproduced",
                           format_hash(hashes[0]).c_str(), losses[0].size(), accs[0]);
  if (!problems.empty()) {
    detail.clear();
    for (const auto& p : problems) detail += (detail.empty() ? "" : "; ") + p;
  }
  return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria (1-8)")->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"loss matches an independent oracle", loss_oracle},
      {"degenerate embeddings give ln(4B-1) and ln(2B-1)", degenerate_values},
      {"gradient through normalization matches central differences", gradient_check},
      {"augmentation and segmentation invariants", invariants},
      {"information bounds on toy models", information_bounds},
      {"desk-scale probe accuracy", desk_scale},
      {"positive-pair corruption", corruption},
      {"label blindness, frozen probe, reproducibility", integrity},
  };

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    all = all && v.pass;
    std::printf("criterion %d %s: %s: %s\n", id, v.pass ? "PASS" : "FAIL", criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
