// Per-voxel semantic fusion strategies: probability summation, label voting,
// the classic Bayesian product, and robust Dirichlet-weighted fusion with its
// regularization / concentration ablations.
#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semfuse/core.hpp"
#include "semfuse/observation.hpp"

namespace semfuse {

enum class StrategyKind { kSumProbs, kSumLabels, kBayesian, kRobust };

struct FusionStrategy {
  StrategyKind kind = StrategyKind::kBayesian;
  bool regularize = false;  ///< robust only: mix observations with the uniform distribution
  bool dirichlet = false;   ///< robust only: weight observations by their concentration

  friend bool operator==(const FusionStrategy&, const FusionStrategy&) = default;

  static constexpr FusionStrategy sum_probs() { return {StrategyKind::kSumProbs}; }
  static constexpr FusionStrategy sum_labels() { return {StrategyKind::kSumLabels}; }
  static constexpr FusionStrategy bayesian() { return {StrategyKind::kBayesian}; }
  static constexpr FusionStrategy robust(bool regularize, bool dirichlet) {
    return {StrategyKind::kRobust, regularize, dirichlet};
  }

  bool log_space() const { return kind == StrategyKind::kBayesian || kind == StrategyKind::kRobust; }

  /// Command-line token.
  std::string_view name() const {
    switch (kind) {
      case StrategyKind::kSumProbs: return "sum_probs";
      case StrategyKind::kSumLabels: return "sum_labels";
      case StrategyKind::kBayesian: return "bayesian";
      case StrategyKind::kRobust:
        if (regularize && dirichlet) return "robust_dr";
        if (regularize) return "robust_r";
        if (dirichlet) return "robust_d";
        return "robust_none";
    }
    return "";
  }

  /// Label used in comparison tables.
  std::string_view display_name() const {
    switch (kind) {
      case StrategyKind::kSumProbs: return "SumProbs";
      case StrategyKind::kSumLabels: return "SumLabels";
      case StrategyKind::kBayesian: return "Bayesian";
      case StrategyKind::kRobust:
        if (regularize && dirichlet) return "D+R";
        if (regularize) return "R";
        if (dirichlet) return "D";
        return "Robust(none)";
    }
    return "";
  }

  /// Position in the comparison table: SumProbs, SumLabels, Bayesian, R, D, D+R.
  int rank() const {
    switch (kind) {
      case StrategyKind::kSumProbs: return 0;
      case StrategyKind::kSumLabels: return 1;
      case StrategyKind::kBayesian: return 2;
      case StrategyKind::kRobust:
        if (regularize && dirichlet) return 5;
        if (regularize) return 3;
        if (dirichlet) return 4;
        return 6;
    }
    return 7;
  }

  static FusionStrategy parse(std::string_view token) {
    for (const auto& s : all_with_reduction()) {
      if (s.name() == token || s.display_name() == token) return s;
    }
    throw Error(ErrorCode::kInvalidArgument, "unknown fusion strategy '" + std::string(token) + "'");
  }

  /// The six strategies of the benchmark table, in table order.
  static std::vector<FusionStrategy> benchmark_set() {
    return {sum_probs(), sum_labels(), bayesian(), robust(true, false), robust(false, true),
            robust(true, true)};
  }

  static std::vector<FusionStrategy> all_with_reduction() {
    auto v = benchmark_set();
    v.push_back(robust(false, false));
    return v;
  }
};

/// Fused state of one voxel. Log-space strategies keep log_score as a
/// normalized log posterior; alpha_bar holds the running per-class maximum
/// concentration.
struct VoxelState {
  StrategyKind kind = StrategyKind::kBayesian;
  std::vector<double> log_score;
  std::vector<double> alpha_bar;
  std::vector<double> prob_sum;
  std::vector<std::uint64_t> vote_count;
  std::uint64_t obs_count = 0;

  std::size_t num_classes() const noexcept { return alpha_bar.size(); }
};

/// Smallest and largest exponent applied during one robust update.
struct ExponentRange {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  void include(double e) {
    min = std::min(min, e);
    max = std::max(max, e);
  }
  bool within_unit_interval() const { return min > 0.0 && max <= 1.0; }
};

inline VoxelState init_voxel(std::size_t num_classes, StrategyKind kind) {
  if (num_classes < 2) throw Error(ErrorCode::kInvalidArgument, "voxel needs at least 2 classes");
  VoxelState s;
  s.kind = kind;
  const double log_uniform = -std::log(static_cast<double>(num_classes));
  s.alpha_bar.assign(num_classes, FusionConfig::alpha_min());
  switch (kind) {
    case StrategyKind::kSumProbs: s.prob_sum.assign(num_classes, 0.0); break;
    case StrategyKind::kSumLabels: s.vote_count.assign(num_classes, 0); break;
    case StrategyKind::kBayesian:
    case StrategyKind::kRobust: s.log_score.assign(num_classes, log_uniform); break;
  }
  return s;
}

inline double log_sum_exp(std::span<const double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - m);
  return m + std::log(acc);
}

namespace detail {

inline void renormalize_log(std::vector<double>& log_score) {
  const double lse = log_sum_exp(log_score);
  for (double& v : log_score) v -= lse;
}

inline void require_kind(const VoxelState& s, StrategyKind kind, const char* op) {
  if (s.kind != kind) throw Error(ErrorCode::kInvalidArgument, std::string(op) + " on a voxel of another strategy");
}

inline void require_classes(const VoxelState& s, std::size_t k) {
  if (k != s.num_classes()) throw Error(ErrorCode::kInvalidArgument, "observation class count differs from voxel");
}

}  // namespace detail

/// Product of the frame's likelihoods with the prior, in log space.
/// Probabilities are floored at cfg.p_min.
inline void fuse_classic(VoxelState& s, std::span<const ClassProbabilityVector> obs, const FusionConfig& cfg) {
  detail::require_kind(s, StrategyKind::kBayesian, "fuse_classic");
  if (obs.empty()) return;
  for (const auto& p : obs) {
    detail::require_classes(s, p.size());
    for (std::size_t i = 0; i < p.size(); ++i) s.log_score[i] += std::log(std::max(p[i], cfg.p_min));
  }
  detail::renormalize_log(s.log_score);
  s.obs_count += obs.size();
}

/// One frame of concentration-weighted fusion. The normalizer alpha_bar
/// includes the current frame's concentrations, so every exponent is in (0,1].
inline ExponentRange fuse_robust(VoxelState& s, std::span<const DirichletObservation> obs,
                                 const FusionConfig& cfg) {
  detail::require_kind(s, StrategyKind::kRobust, "fuse_robust");
  ExponentRange range;
  if (obs.empty()) return range;
  const std::size_t k = s.num_classes();
  std::vector<double> new_alpha_bar = s.alpha_bar;
  for (const auto& o : obs) {
    detail::require_classes(s, o.p_tilde.size());
    if (o.alpha.size() != k) throw Error(ErrorCode::kInvalidArgument, "alpha has wrong class count");
    for (std::size_t i = 0; i < k; ++i) {
      if (!(o.alpha[i] > 0.0) || !std::isfinite(o.alpha[i])) {
        throw Error(ErrorCode::kInvalidArgument, "concentration must be finite and positive");
      }
      new_alpha_bar[i] = std::max(new_alpha_bar[i], o.alpha[i]);
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    const double prior_exponent = s.alpha_bar[i] / new_alpha_bar[i];
    range.include(prior_exponent);
    double acc = prior_exponent * s.log_score[i];
    for (const auto& o : obs) {
      const double e = o.alpha[i] / new_alpha_bar[i];
      range.include(e);
      acc += e * std::log(std::max(o.p_tilde[i], cfg.p_min));
    }
    s.log_score[i] = acc;
  }
  assert(range.within_unit_interval());
  s.alpha_bar = std::move(new_alpha_bar);
  detail::renormalize_log(s.log_score);
  s.obs_count += obs.size();
  return range;
}

inline void fuse_sum_probs(VoxelState& s, std::span<const ClassProbabilityVector> obs) {
  detail::require_kind(s, StrategyKind::kSumProbs, "fuse_sum_probs");
  for (const auto& p : obs) {
    detail::require_classes(s, p.size());
    for (std::size_t i = 0; i < p.size(); ++i) s.prob_sum[i] += p[i];
  }
  s.obs_count += obs.size();
}

inline void fuse_sum_labels(VoxelState& s, std::span<const ClassProbabilityVector> obs) {
  detail::require_kind(s, StrategyKind::kSumLabels, "fuse_sum_labels");
  for (const auto& p : obs) {
    detail::require_classes(s, p.size());
    ++s.vote_count[argmax_class(p)];
  }
  s.obs_count += obs.size();
}

inline ClassProbabilityVector posterior(const VoxelState& s) {
  const std::size_t k = s.num_classes();
  switch (s.kind) {
    case StrategyKind::kSumProbs:
      if (s.obs_count == 0) return ClassProbabilityVector::uniform(k);
      return normalize(s.prob_sum);
    case StrategyKind::kSumLabels: {
      if (s.obs_count == 0) return ClassProbabilityVector::uniform(k);
      std::vector<double> votes(s.vote_count.begin(), s.vote_count.end());
      return normalize(votes);
    }
    case StrategyKind::kBayesian:
    case StrategyKind::kRobust: {
      const double lse = log_sum_exp(s.log_score);
      std::vector<double> p(k);
      for (std::size_t i = 0; i < k; ++i) p[i] = std::exp(s.log_score[i] - lse);
      return normalize(p);
    }
  }
  return ClassProbabilityVector::uniform(k);
}

/// One pixel's network output summarized by its moments.
struct PixelMoments {
  ClassProbabilityVector mean;
  std::vector<double> raw_variance;
};

/// Observation fed to the robust strategy for the given ablation: beta is
/// applied only with regularization; without the Dirichlet term every
/// concentration is the constant alpha_min, which makes all exponents 1.
inline DirichletObservation robust_observation(const PixelMoments& px, const FusionStrategy& strategy,
                                               const FusionConfig& cfg) {
  const std::size_t k = px.mean.size();
  ClassProbabilityVector p = strategy.regularize ? regularize(px.mean, cfg.beta) : px.mean;
  std::vector<double> alpha = strategy.dirichlet ? concentration(clamp_variance(px.raw_variance, cfg))
                                                 : std::vector<double>(k, FusionConfig::alpha_min());
  return {std::move(p), std::move(alpha)};
}

/// Applies one frame's batch of pixel observations with the given strategy.
inline void fuse_frame(VoxelState& s, const FusionStrategy& strategy, std::span<const PixelMoments> pixels,
                       const FusionConfig& cfg) {
  if (pixels.empty()) return;
  if (strategy.kind == StrategyKind::kRobust) {
    std::vector<DirichletObservation> obs;
    obs.reserve(pixels.size());
    for (const auto& px : pixels) obs.push_back(robust_observation(px, strategy, cfg));
    fuse_robust(s, obs, cfg);
    return;
  }
  std::vector<ClassProbabilityVector> means;
  means.reserve(pixels.size());
  for (const auto& px : pixels) means.push_back(px.mean);
  switch (strategy.kind) {
    case StrategyKind::kSumProbs: fuse_sum_probs(s, means); break;
    case StrategyKind::kSumLabels: fuse_sum_labels(s, means); break;
    case StrategyKind::kBayesian: fuse_classic(s, means, cfg); break;
    case StrategyKind::kRobust: break;
  }
}

}  // namespace semfuse
