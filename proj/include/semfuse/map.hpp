// Sparse semantic voxel map: pinhole back-projection of labeled depth pixels,
// per-frame grouping of pixels by voxel, and map-level queries.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "semfuse/core.hpp"
#include "semfuse/fusion.hpp"
#include "semfuse/observation.hpp"

namespace semfuse {

/// Storage tolerance for probabilities read back from single precision.
inline constexpr double kStoredSimplexTolerance = 1e-5;

enum class ObservationLayout {
  kSamples,  ///< [M, K, H, W] Monte-Carlo softmax samples
  kMoments,  ///< [2, K, H, W] predictive mean then raw variance
};

/// Per-pixel network output for a whole image, row-major [lead, K, H, W].
struct ObservationTensor {
  ObservationLayout layout = ObservationLayout::kMoments;
  std::size_t lead = 2;  ///< M for samples, 2 for moments
  std::size_t classes = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  ObservationTensor() = default;
  ObservationTensor(ObservationLayout layout, std::size_t lead, std::size_t classes, std::size_t height,
                    std::size_t width)
      : layout(layout), lead(lead), classes(classes), height(height), width(width),
        data(lead * classes * height * width, 0.0f) {}

  std::size_t index(std::size_t l, std::size_t k, std::size_t v, std::size_t u) const {
    return ((l * classes + k) * height + v) * width + u;
  }
  float at(std::size_t l, std::size_t k, std::size_t v, std::size_t u) const { return data[index(l, k, v, u)]; }
  float& at(std::size_t l, std::size_t k, std::size_t v, std::size_t u) { return data[index(l, k, v, u)]; }

  /// Converts one pixel to moments. Single-precision vectors are checked at
  /// kStoredSimplexTolerance and renormalized in double precision.
  PixelMoments pixel(std::size_t v, std::size_t u) const {
    std::vector<double> row(classes);
    auto load_simplex = [&](std::size_t l) {
      for (std::size_t k = 0; k < classes; ++k) row[k] = at(l, k, v, u);
      double sum = 0.0;
      for (double x : row) {
        if (!std::isfinite(x) || x < 0.0) {
          throw Error(ErrorCode::kMalformedFrame, "negative or non-finite probability at pixel (" +
                                                      std::to_string(u) + "," + std::to_string(v) + ")");
        }
        sum += x;
      }
      if (std::abs(sum - 1.0) > kStoredSimplexTolerance) {
        throw Error(ErrorCode::kMalformedFrame, "probabilities do not sum to 1 at pixel (" + std::to_string(u) +
                                                    "," + std::to_string(v) + ")");
      }
      return normalize(row);
    };
    if (layout == ObservationLayout::kMoments) {
      ClassProbabilityVector mean = load_simplex(0);
      std::vector<double> var(classes);
      for (std::size_t k = 0; k < classes; ++k) {
        var[k] = at(1, k, v, u);
        if (!std::isfinite(var[k]) || var[k] < 0.0) {
          throw Error(ErrorCode::kMalformedFrame, "invalid variance at pixel (" + std::to_string(u) + "," +
                                                      std::to_string(v) + ")");
        }
      }
      return {std::move(mean), std::move(var)};
    }
    McSampleSet samples(classes);
    for (std::size_t m = 0; m < lead; ++m) samples.add(load_simplex(m).values());
    return {predictive_mean(samples), raw_epistemic_variance(samples)};
  }
};

struct Frame {
  std::uint64_t id = 0;
  double timestamp = 0.0;
  Pose pose;
  CameraIntrinsics intrinsics;
  std::vector<float> depth;  ///< H x W meters; 0 or non-finite marks invalid
  ObservationTensor observations;

  void validate() const {
    const auto fail = [&](const std::string& why) {
      throw Error(ErrorCode::kMalformedFrame, "frame " + std::to_string(id) + ": " + why);
    };
    try {
      intrinsics.validate();
      pose.validate();
    } catch (const Error& e) {
      fail(e.what());
    }
    if (depth.size() != intrinsics.pixel_count()) fail("depth size does not match intrinsics");
    const auto& o = observations;
    if (o.height != intrinsics.height || o.width != intrinsics.width) {
      fail("observation tensor size does not match depth");
    }
    if (o.classes < 2 || o.lead == 0) fail("observation tensor has too few classes or samples");
    if (o.layout == ObservationLayout::kMoments && o.lead != 2) fail("moment tensors need a leading dimension of 2");
    if (o.data.size() != o.lead * o.classes * o.height * o.width) fail("observation payload size mismatch");
  }
};

/// Camera-to-world back-projection of pixel (u, v) at depth d.
inline Vec3 back_project(double u, double v, double depth, const CameraIntrinsics& intr, const Pose& pose) {
  const Vec3 p_cam{(u - intr.cx) * depth / intr.fx, (v - intr.cy) * depth / intr.fy, depth};
  return pose.transform(p_cam);
}

inline bool valid_depth(float d) { return std::isfinite(d) && d > 0.0f; }

struct IntegrationSummary {
  std::size_t voxels_touched = 0;
  std::size_t voxels_created = 0;
  std::size_t pixels_considered = 0;  ///< pixels on the stride grid
  std::size_t pixels_used = 0;
  std::size_t pixels_skipped = 0;  ///< stride-grid pixels with invalid depth
};

struct VoxelQuery {
  ClassProbabilityVector posterior;
  std::size_t label = 0;
  std::vector<double> alpha_bar;
  std::uint64_t obs_count = 0;
};

struct LabelledVoxel {
  VoxelKey key;
  std::size_t label = 0;
  double max_probability = 0.0;

  friend bool operator==(const LabelledVoxel&, const LabelledVoxel&) = default;
};

struct MapConfig {
  double voxel_size = 0.1;
  std::size_t stride = 1;

  friend bool operator==(const MapConfig&, const MapConfig&) = default;
};

/// Hash map from voxel keys to fused states. Only voxels hit by at least one
/// valid pixel are stored.
class SemanticVoxelMap {
 public:
  SemanticVoxelMap(std::size_t num_classes, FusionStrategy strategy, FusionConfig cfg, MapConfig map_cfg = {})
      : num_classes_(num_classes), strategy_(strategy), cfg_(cfg), map_cfg_(map_cfg) {
    cfg_.validate(num_classes_);
    if (!(map_cfg_.voxel_size > 0.0)) throw Error(ErrorCode::kInvalidArgument, "voxel size must be positive");
    if (map_cfg_.stride == 0) throw Error(ErrorCode::kInvalidArgument, "stride must be >= 1");
  }

  std::size_t num_classes() const noexcept { return num_classes_; }
  const FusionStrategy& strategy() const noexcept { return strategy_; }
  const FusionConfig& config() const noexcept { return cfg_; }
  const MapConfig& map_config() const noexcept { return map_cfg_; }
  std::size_t size() const noexcept { return cells_.size(); }
  double last_timestamp() const noexcept { return last_timestamp_; }

  IntegrationSummary integrate(const Frame& frame) {
    if (frame.timestamp < last_timestamp_) {
      throw Error(ErrorCode::kOrderViolation, "frame " + std::to_string(frame.id) + " at t=" +
                                                  std::to_string(frame.timestamp) + " precedes t=" +
                                                  std::to_string(last_timestamp_));
    }
    frame.validate();
    if (frame.observations.classes != num_classes_) {
      throw Error(ErrorCode::kMalformedFrame, "frame " + std::to_string(frame.id) + " has " +
                                                  std::to_string(frame.observations.classes) +
                                                  " classes, map has " + std::to_string(num_classes_));
    }

    IntegrationSummary summary;
    std::unordered_map<VoxelKey, std::vector<PixelMoments>, VoxelKeyHash> batches;
    const auto& intr = frame.intrinsics;
    for (std::size_t v = 0; v < intr.height; v += map_cfg_.stride) {
      for (std::size_t u = 0; u < intr.width; u += map_cfg_.stride) {
        ++summary.pixels_considered;
        const float d = frame.depth[v * intr.width + u];
        if (!valid_depth(d)) {
          ++summary.pixels_skipped;
          continue;
        }
        const Vec3 p = back_project(static_cast<double>(u), static_cast<double>(v), d, intr, frame.pose);
        batches[voxelize(p, map_cfg_.voxel_size)].push_back(frame.observations.pixel(v, u));
        ++summary.pixels_used;
      }
    }

    for (auto& [key, pixels] : batches) {
      auto it = cells_.find(key);
      if (it == cells_.end()) {
        it = cells_.emplace(key, init_voxel(num_classes_, strategy_.kind)).first;
        ++summary.voxels_created;
      }
      fuse_frame(it->second, strategy_, pixels, cfg_);
    }
    summary.voxels_touched = batches.size();
    last_timestamp_ = frame.timestamp;
    return summary;
  }

  std::optional<VoxelQuery> query(const VoxelKey& key) const {
    const auto it = cells_.find(key);
    if (it == cells_.end()) return std::nullopt;
    ClassProbabilityVector p = posterior(it->second);
    const std::size_t label = argmax_class(p);
    return VoxelQuery{std::move(p), label, it->second.alpha_bar, it->second.obs_count};
  }

  /// Every stored voxel with its label, sorted by key.
  std::vector<LabelledVoxel> export_labels() const {
    std::vector<LabelledVoxel> rows;
    rows.reserve(cells_.size());
    for (const auto& [key, state] : cells_) {
      const ClassProbabilityVector p = posterior(state);
      const std::size_t label = argmax_class(p);
      rows.push_back({key, label, p[label]});
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
    return rows;
  }

  const std::unordered_map<VoxelKey, VoxelState, VoxelKeyHash>& cells() const noexcept { return cells_; }

 private:
  std::size_t num_classes_;
  FusionStrategy strategy_;
  FusionConfig cfg_;
  MapConfig map_cfg_;
  std::unordered_map<VoxelKey, VoxelState, VoxelKeyHash> cells_;
  double last_timestamp_ = -std::numeric_limits<double>::infinity();
};

}  // namespace semfuse
