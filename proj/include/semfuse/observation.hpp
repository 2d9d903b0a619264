// Conversion of Monte-Carlo network samples into fusion-ready observations:
// predictive mean, marginal epistemic variance, uniform regularization and
// per-class Dirichlet concentrations.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "semfuse/core.hpp"

namespace semfuse {

/// Largest variance a [0,1]-valued variable can have.
inline constexpr double kMaxProbabilityVariance = 0.25;

struct FusionConfig {
  double beta = 0.3;      ///< weight of the uniform component in regularize()
  double eps_var = 1e-6;  ///< variance floor; caps concentrations at -ln(eps_var)
  double p_min = 1e-6;    ///< probability floor for unregularized log-space fusion
  std::size_t mc_samples = 32;

  friend bool operator==(const FusionConfig&, const FusionConfig&) = default;

  void validate(std::size_t num_classes) const {
    if (!(beta >= 0.0 && beta <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "beta must lie in [0,1]");
    }
    if (!(eps_var > 0.0 && eps_var <= kMaxProbabilityVariance)) {
      throw Error(ErrorCode::kInvalidArgument, "eps_var must lie in (0, 0.25]");
    }
    if (!(p_min > 0.0 && p_min < 1.0 / static_cast<double>(num_classes))) {
      throw Error(ErrorCode::kInvalidArgument, "p_min must lie in (0, 1/K)");
    }
    if (mc_samples == 0) throw Error(ErrorCode::kInvalidArgument, "mc_samples must be >= 1");
  }

  /// Smallest attainable concentration, -ln(0.25).
  static double alpha_min() { return -std::log(kMaxProbabilityVariance); }
  /// Largest attainable concentration, -ln(eps_var).
  double alpha_max() const { return -std::log(eps_var); }
};

/// M Monte-Carlo softmax outputs for one pixel, stored row-major (M x K).
class McSampleSet {
 public:
  explicit McSampleSet(std::size_t num_classes) : k_(num_classes) {
    if (k_ < 2) throw Error(ErrorCode::kInvalidArgument, "sample set needs at least 2 classes");
  }

  McSampleSet(std::size_t num_classes, std::initializer_list<std::vector<double>> samples)
      : McSampleSet(num_classes) {
    for (const auto& s : samples) add(s);
  }

  /// Appends one sample; it must be a valid simplex vector of length K.
  void add(std::span<const double> sample) {
    if (sample.size() != k_) throw Error(ErrorCode::kInvalidArgument, "sample has wrong class count");
    ClassProbabilityVector checked(std::vector<double>(sample.begin(), sample.end()));
    data_.insert(data_.end(), checked.begin(), checked.end());
  }

  std::size_t num_classes() const noexcept { return k_; }
  std::size_t size() const noexcept { return data_.size() / k_; }
  std::span<const double> sample(std::size_t i) const { return {data_.data() + i * k_, k_}; }

 private:
  std::size_t k_;
  std::vector<double> data_;
};

/// Diagonal of the epistemic covariance, clamped to [eps_var, 0.25].
struct EpistemicVariance {
  std::vector<double> values;
};

struct DirichletObservation {
  ClassProbabilityVector p_tilde;
  std::vector<double> alpha;
};

inline ClassProbabilityVector predictive_mean(const McSampleSet& s) {
  if (s.size() == 0) throw Error(ErrorCode::kInvalidArgument, "empty sample set");
  const std::size_t k = s.num_classes();
  std::vector<double> mean(k, 0.0);
  for (std::size_t m = 0; m < s.size(); ++m) {
    const auto row = s.sample(m);
    for (std::size_t i = 0; i < k; ++i) mean[i] += row[i];
  }
  for (double& v : mean) v /= static_cast<double>(s.size());
  return normalize(mean);
}

/// Clamps raw per-class variances into [eps_var, 0.25].
inline EpistemicVariance clamp_variance(std::span<const double> raw, const FusionConfig& cfg) {
  EpistemicVariance out;
  out.values.reserve(raw.size());
  for (double v : raw) {
    if (std::isnan(v)) throw Error(ErrorCode::kInvalidArgument, "variance is NaN");
    out.values.push_back(std::clamp(v, cfg.eps_var, kMaxProbabilityVariance));
  }
  return out;
}

/// Per-class population variance (divides by M) before clamping.
inline std::vector<double> raw_epistemic_variance(const McSampleSet& s) {
  if (s.size() == 0) throw Error(ErrorCode::kInvalidArgument, "empty sample set");
  const std::size_t k = s.num_classes();
  const auto m = static_cast<double>(s.size());
  std::vector<double> mean(k, 0.0);
  for (std::size_t j = 0; j < s.size(); ++j) {
    for (std::size_t i = 0; i < k; ++i) mean[i] += s.sample(j)[i];
  }
  for (double& v : mean) v /= m;
  std::vector<double> var(k, 0.0);
  for (std::size_t j = 0; j < s.size(); ++j) {
    for (std::size_t i = 0; i < k; ++i) {
      const double d = s.sample(j)[i] - mean[i];
      var[i] += d * d;
    }
  }
  for (double& v : var) v /= m;
  return var;
}

inline EpistemicVariance epistemic_variance(const McSampleSet& s, const FusionConfig& cfg) {
  return clamp_variance(raw_epistemic_variance(s), cfg);
}

/// Shannon entropy in nats, with 0 ln 0 = 0. Diagnostic only.
inline double aleatoric_entropy(const ClassProbabilityVector& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

/// Mixes p with the uniform distribution: (1 - beta) p + beta / K.
inline ClassProbabilityVector regularize(const ClassProbabilityVector& p, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "beta must lie in [0,1]");
  const double u = beta / static_cast<double>(p.size());
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = (1.0 - beta) * p[i] + u;
  return ClassProbabilityVector(std::move(out));
}

/// Dirichlet concentration per class: alpha_i = -ln(v_i).
inline std::vector<double> concentration(const EpistemicVariance& v) {
  std::vector<double> alpha(v.values.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] = -std::log(v.values[i]);
  return alpha;
}

/// Builds an observation from precomputed moments (mean, raw variance).
inline DirichletObservation build_observation(const ClassProbabilityVector& mean,
                                              std::span<const double> raw_variance,
                                              const FusionConfig& cfg) {
  if (raw_variance.size() != mean.size()) {
    throw Error(ErrorCode::kInvalidArgument, "variance and mean differ in class count");
  }
  return {regularize(mean, cfg.beta), concentration(clamp_variance(raw_variance, cfg))};
}

inline DirichletObservation build_observation(const McSampleSet& s, const FusionConfig& cfg) {
  return {regularize(predictive_mean(s), cfg.beta), concentration(epistemic_variance(s, cfg))};
}

}  // namespace semfuse
