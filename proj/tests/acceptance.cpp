// Acceptance suite: runs every criterion and prints one PASS/FAIL line each.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "semfuse/config.hpp"
#include "semfuse/experiment.hpp"
#include "semfuse/fusion.hpp"
#include "semfuse/metrics.hpp"

namespace {

namespace fs = std::filesystem;
using namespace semfuse;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t k, double floor = 0.0) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> raw(k);
  double total = 0.0;
  for (double& v : raw) total += (v = e(rng));
  // Mix with uniform so every component is at least `floor`.
  const double w = floor * static_cast<double>(k);
  for (double& v : raw) v = (1.0 - w) * v / total + floor;
  const auto p = normalize(raw);
  return {p.begin(), p.end()};
}

PixelMoments random_pixel(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> lv(std::log(1e-7), std::log(0.3));
  std::vector<double> var(k);
  for (double& v : var) v = std::exp(lv(rng));
  return {ClassProbabilityVector(random_simplex(rng, k)), var};
}

double max_diff(const ClassProbabilityVector& a, const ClassProbabilityVector& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("semfuse_acceptance_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Outcome reduction_equivalence() {
  std::mt19937_64 rng(101);
  const FusionConfig cfg;
  double worst = 0.0;
  for (int h = 0; h < 200; ++h) {
    const std::size_t k = 2 + static_cast<std::size_t>(h % 11);
    const std::size_t n = 1 + rng() % 50;
    VoxelState classic = init_voxel(k, StrategyKind::kBayesian);
    VoxelState robust = init_voxel(k, StrategyKind::kRobust);
    std::size_t done = 0;
    while (done < n) {
      const std::size_t batch = std::min<std::size_t>(n - done, 1 + rng() % 4);
      std::vector<PixelMoments> px;
      for (std::size_t j = 0; j < batch; ++j) px.push_back(random_pixel(rng, k));
      fuse_frame(classic, FusionStrategy::bayesian(), px, cfg);
      fuse_frame(robust, FusionStrategy::robust(false, false), px, cfg);
      done += batch;
    }
    worst = std::max(worst, max_diff(posterior(classic), posterior(robust)));
  }
  return {worst <= 1e-9, "max diff " + fmt(worst)};
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(103);
  FusionConfig cfg;
  cfg.beta = 0.0;
  double worst = 0.0;
  for (int h = 0; h < 100; ++h) {
    const std::size_t k = 2 + static_cast<std::size_t>(h % 7);
    const std::size_t n = 1 + rng() % 15;
    const bool weighted = h % 2 == 1;
    VoxelState s = init_voxel(k, weighted ? StrategyKind::kRobust : StrategyKind::kBayesian);
    std::vector<long double> direct(k, 1.0L / static_cast<long double>(k));
    std::vector<long double> bar(k, static_cast<long double>(FusionConfig::alpha_min()));
    std::uniform_real_distribution<double> alpha_dist(1.0, 14.0);
    for (std::size_t j = 0; j < n; ++j) {
      const ClassProbabilityVector p(random_simplex(rng, k, 1e-3));
      if (!weighted) {
        fuse_classic(s, std::vector<ClassProbabilityVector>{p}, cfg);
        for (std::size_t i = 0; i < k; ++i) direct[i] *= p[i];
      } else {
        std::vector<double> alpha(k);
        for (double& a : alpha) a = alpha_dist(rng);
        fuse_robust(s, std::vector<DirichletObservation>{{p, alpha}}, cfg);
        for (std::size_t i = 0; i < k; ++i) {
          const long double nb = std::max(bar[i], static_cast<long double>(alpha[i]));
          direct[i] = std::pow(direct[i], bar[i] / nb) * std::pow(static_cast<long double>(p[i]), alpha[i] / nb);
          bar[i] = nb;
        }
      }
      long double total = 0.0L;
      for (auto v : direct) total += v;
      for (auto& v : direct) v /= total;
    }
    const auto post = posterior(s);
    for (std::size_t i = 0; i < k; ++i) {
      worst = std::max(worst, static_cast<double>(std::abs(static_cast<long double>(post[i]) - direct[i])));
    }
  }
  return {worst <= 1e-9, "max diff " + fmt(worst)};
}

Outcome outlier_scenario() {
  FusionConfig cfg;
  cfg.beta = 0.3;
  const ClassProbabilityVector outlier({0.01, 0.99});

  VoxelState classic = init_voxel(2, StrategyKind::kBayesian);
  classic.log_score = {std::log(0.7), std::log(0.3)};
  fuse_classic(classic, std::vector<ClassProbabilityVector>{outlier}, cfg);

  VoxelState robust = init_voxel(2, StrategyKind::kRobust);
  robust.log_score = {std::log(0.7), std::log(0.3)};
  robust.alpha_bar = {2.0, 2.0};
  fuse_robust(robust, std::vector<DirichletObservation>{build_observation(outlier, std::vector<double>{0.2, 0.2}, cfg)}, cfg);

  // Extended-precision oracle of the weighted update.
  const long double e = std::log(5.0L) / 2.0L;
  const long double a = 0.7L * std::pow(0.157L, e);
  const long double b = 0.3L * std::pow(0.843L, e);
  const double oracle = static_cast<double>(a / (a + b));

  const double pc = posterior(classic)[0];
  const double pr = posterior(robust)[0];
  const bool flips = argmax_class(posterior(classic)) == 1;
  const bool ok = flips && std::abs(pc - 0.023) <= 1e-3 && std::abs(pr - 0.376) <= 1e-3 &&
                  std::abs(pr - oracle) <= 1e-9 && pr >= 16.0 * pc;
  return {ok, "classic " + fmt(pc, 4) + ", robust " + fmt(pr, 4) + ", ratio " + fmt(pr / pc)};
}

Outcome bounds_fuzz() {
  std::mt19937_64 rng(107);
  const FusionConfig cfg;
  const auto strategies = FusionStrategy::all_with_reduction();
  std::size_t updates = 0;
  double worst_sum = 0.0;
  bool exponents_ok = true;
  bool monotone = true;
  while (updates < 100000) {
    const auto strategy = strategies[rng() % strategies.size()];
    const std::size_t k = 2 + rng() % 11;
    VoxelState s = init_voxel(k, strategy.kind);
    for (int f = 0; f < 50 && updates < 100000; ++f, ++updates) {
      const std::size_t n = 1 + rng() % 3;
      if (strategy.kind == StrategyKind::kRobust) {
        std::vector<DirichletObservation> obs;
        for (std::size_t j = 0; j < n; ++j) obs.push_back(robust_observation(random_pixel(rng, k), strategy, cfg));
        const auto before = s.alpha_bar;
        const ExponentRange r = fuse_robust(s, obs, cfg);
        exponents_ok = exponents_ok && r.min > 0.0 && r.max <= 1.0;
        for (std::size_t i = 0; i < k; ++i) monotone = monotone && s.alpha_bar[i] >= before[i];
      } else {
        std::vector<PixelMoments> px;
        for (std::size_t j = 0; j < n; ++j) px.push_back(random_pixel(rng, k));
        fuse_frame(s, strategy, px, cfg);
      }
      double total = 0.0;
      for (double v : posterior(s)) total += v;
      worst_sum = std::max(worst_sum, std::abs(total - 1.0));
    }
  }
  return {worst_sum <= 1e-9 && exponents_ok && monotone,
          std::to_string(updates) + " updates, max |sum-1| " + fmt(worst_sum) +
              (exponents_ok ? "" : ", exponent out of (0,1]") + (monotone ? "" : ", alpha_bar decreased")};
}

Outcome permutation_invariance() {
  std::mt19937_64 rng(109);
  const FusionConfig cfg;
  double worst = 0.0;
  const FusionStrategy strategies[] = {FusionStrategy::bayesian(), FusionStrategy::robust(true, true)};
  for (int frame = 0; frame < 100; ++frame) {
    const std::size_t k = 2 + static_cast<std::size_t>(frame % 9);
    std::vector<PixelMoments> px;
    for (int j = 0; j < 2 + frame % 20; ++j) px.push_back(random_pixel(rng, k));
    for (const auto& strategy : strategies) {
      VoxelState prior = init_voxel(k, strategy.kind);
      fuse_frame(prior, strategy, std::vector<PixelMoments>{random_pixel(rng, k)}, cfg);
      VoxelState ref = prior;
      fuse_frame(ref, strategy, px, cfg);
      for (int shuffle = 0; shuffle < 10; ++shuffle) {
        auto perm = px;
        std::shuffle(perm.begin(), perm.end(), rng);
        VoxelState s = prior;
        fuse_frame(s, strategy, perm, cfg);
        worst = std::max(worst, max_diff(posterior(ref), posterior(s)));
      }
    }
  }
  return {worst < 1e-9, "max diff " + fmt(worst)};
}

Outcome calibration_floor() {
  const ExperimentConfig cfg = load_config(fs::path(SEMFUSE_CONFIG_DIR) / "noiseless.json");
  const auto r = run_compare(cfg, scratch_dir("noiseless"));
  bool ok = r.rows.size() == cfg.strategies.size();
  double worst = 1.0;
  for (const auto& row : r.rows) {
    ok = ok && row.miou == 1.0 && row.accuracy == 1.0;
    worst = std::min({worst, row.miou, row.accuracy});
  }
  return {ok, std::to_string(r.rows.size()) + " strategies, " + std::to_string(cfg.trajectory.frames) + " frames " +
                  std::to_string(cfg.camera.width) + "x" + std::to_string(cfg.camera.height) +
                  ", min mIoU/accuracy " + fmt(worst, 6)};
}

Outcome robustness_benchmark() {
  const ExperimentConfig base = load_config(fs::path(SEMFUSE_CONFIG_DIR) / "benchmark.json");
  std::map<std::string, double> mean;
  const std::uint64_t seeds[] = {1, 2, 3};
  for (std::uint64_t seed : seeds) {
    ExperimentConfig cfg = base;
    cfg.seed = seed;
    const auto r = run_compare(cfg, scratch_dir("benchmark_" + std::to_string(seed)));
    for (const auto& row : r.rows) mean[row.strategy] += 100.0 * row.miou / std::size(seeds);
  }
  const double dr = mean["D+R"];
  const double bayes = mean["Bayesian"];
  const double sp = mean["SumProbs"];
  const bool ok = dr >= bayes && dr >= sp && dr - bayes >= 2.0;
  std::string detail = "mean mIoU over 3 seeds:";
  for (const auto& name : {"SumProbs", "SumLabels", "Bayesian", "R", "D", "D+R"}) {
    if (mean.contains(name)) detail += std::string(" ") + name + " " + fmt(mean[name], 4);
  }
  return {ok, detail};
}

Outcome metric_oracle() {
  std::mt19937_64 rng(113);
  std::size_t exact = 0;
  for (int m = 0; m < 50; ++m) {
    const std::size_t k = 2 + static_cast<std::size_t>(m % 10);
    const std::int64_t extent = 4 + m % 7;
    std::vector<VoxelLabel> gt;
    std::vector<VoxelLabel> pred;
    for (std::int64_t x = 0; x < extent; ++x) {
      for (std::int64_t y = 0; y < extent; ++y) {
        for (std::int64_t z = 0; z < extent; ++z) {
          if (gt.size() >= 1000) break;
          if (rng() % 3 != 0) gt.push_back({{x, y, z}, rng() % k});
          if (rng() % 3 != 0) pred.push_back({{x, y, z}, rng() % k});
        }
      }
    }
    if (gt.empty()) gt.push_back({{0, 0, 0}, 0});
    const EvalReport r = evaluate(pred, gt, k);

    // Brute-force confusion counts from sorted parallel scans.
    std::map<VoxelKey, long> g;
    std::map<VoxelKey, long> p;
    for (const auto& [key, l] : gt) g[key] = static_cast<long>(l);
    for (const auto& [key, l] : pred) p[key] = static_cast<long>(l);
    std::set<VoxelKey> keys;
    for (const auto& [key, l] : g) keys.insert(key);
    for (const auto& [key, l] : p) keys.insert(key);
    std::vector<std::vector<std::uint64_t>> confusion(k, std::vector<std::uint64_t>(k, 0));
    std::vector<std::uint64_t> tp(k, 0), fp(k, 0), fn(k, 0);
    std::uint64_t correct = 0;
    for (const auto& key : keys) {
      const long gl = g.contains(key) ? g[key] : -1;
      const long pl = p.contains(key) ? p[key] : -1;
      if (gl >= 0 && pl >= 0) ++confusion[gl][pl];
      for (std::size_t c = 0; c < k; ++c) {
        const bool in_g = gl == static_cast<long>(c);
        const bool in_p = pl == static_cast<long>(c);
        tp[c] += in_g && in_p;
        fp[c] += !in_g && in_p;
        fn[c] += in_g && !in_p;
      }
      correct += gl >= 0 && gl == pl;
    }
    double sum = 0.0;
    int present = 0;
    bool same = r.confusion == confusion && r.true_positive == tp && r.false_positive == fp && r.false_negative == fn;
    for (std::size_t c = 0; c < k; ++c) {
      const std::uint64_t denom = tp[c] + fp[c] + fn[c];
      if (denom == 0) {
        same = same && !r.per_class_iou[c].has_value();
        continue;
      }
      const double iou = static_cast<double>(tp[c]) / static_cast<double>(denom);
      same = same && r.per_class_iou[c] == iou;
      sum += iou;
      ++present;
    }
    same = same && r.miou == sum / present && r.accuracy == static_cast<double>(correct) / static_cast<double>(g.size());
    exact += same;
  }
  return {exact == 50, std::to_string(exact) + "/50 maps exact"};
}

Outcome determinism() {
  const fs::path dir = scratch_dir("determinism");
  const fs::path cfg = fs::path(SEMFUSE_CONFIG_DIR) / "benchmark.json";
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string(SEMFUSE_CLI) + " compare --config '" + cfg.string() + "' --seed 7 --out '" +
                            (dir / run).string() + "' > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "compare failed"};
  }
  std::size_t compared = 0;
  std::size_t differing = 0;
  std::vector<fs::path> files{"comparison.csv"};
  for (const auto& e : fs::directory_iterator(dir / "a" / "maps")) files.push_back(fs::path("maps") / e.path().filename());
  for (const auto& f : files) {
    ++compared;
    if (!fs::exists(dir / "b" / f) || io::read_file(dir / "a" / f) != io::read_file(dir / "b" / f)) ++differing;
  }
  return {differing == 0 && compared == 7, std::to_string(compared) + " files compared, " +
                                               std::to_string(differing) + " differ"};
}

Outcome monotonic_concentration() {
  std::mt19937_64 rng(127);
  std::uniform_real_distribution<double> lv(std::log(1e-6), std::log(0.25));
  std::size_t violations = 0;
  std::size_t pairs = 0;
  for (int i = 0; i < 100000; ++i) {
    double a = std::clamp(std::exp(lv(rng)), 1e-6, 0.25);
    double b = std::clamp(std::exp(lv(rng)), 1e-6, 0.25);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    ++pairs;
    const auto c = concentration({{a, b}});
    violations += !(c[0] > c[1]);
  }
  // Adjacent doubles can share a rounded logarithm; require no increase there.
  std::size_t increases = 0;
  for (int i = 0; i < 10000; ++i) {
    const double a = std::clamp(std::exp(lv(rng)), 1e-6, 0.25);
    const double b = std::nextafter(a, 1.0);
    if (b > 0.25) continue;
    const auto c = concentration({{a, b}});
    increases += c[0] < c[1];
  }
  return {violations == 0 && increases == 0, std::to_string(pairs) + " sampled pairs strictly decreasing, " +
                                                 std::to_string(violations) + " violations; " +
                                                 std::to_string(increases) + " increases on adjacent doubles"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"reduction equivalence", reduction_equivalence},
      {"oracle equivalence", oracle_equivalence},
      {"single outlier scenario", outlier_scenario},
      {"normalization and exponent bounds", bounds_fuzz},
      {"within-frame permutation invariance", permutation_invariance},
      {"calibration floor", calibration_floor},
      {"robustness benchmark", robustness_benchmark},
      {"metric oracle", metric_oracle},
      {"determinism", determinism},
      {"monotonic concentration", monotonic_concentration},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first << ": " << o.detail
              << " (" << fmt(secs, 3) << " s)" << std::endl;
  }
  fs::remove_all(fs::temp_directory_path() / ("semfuse_acceptance_" + std::to_string(::getpid())));
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
