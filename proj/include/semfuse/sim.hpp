// Synthetic box-world data source: labeled axis-aligned box scenes, orbit
// trajectories, ray-cast depth, surface ground truth, and a Bayesian sensor
// that emits Monte-Carlo softmax samples with controllable outliers.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "semfuse/core.hpp"
#include "semfuse/map.hpp"
#include "semfuse/observation.hpp"
#include "semfuse/rng.hpp"

namespace semfuse {

struct Box {
  Vec3 min;
  Vec3 max;
  std::size_t label = 0;

  friend bool operator==(const Box&, const Box&) = default;
};

/// Horizontal slab standing in for the ground plane; its top face is at `height`.
struct FloorSpec {
  std::size_t label = 0;
  double height = 0.0;
  double half_extent = 5.0;
  double thickness = 0.1;
  double center_x = 0.0;
  double center_y = 0.0;

  friend bool operator==(const FloorSpec&, const FloorSpec&) = default;
};

struct SceneSpec {
  std::vector<Box> boxes;
  std::optional<FloorSpec> floor;

  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

struct Scene {
  std::vector<Box> boxes;  ///< list order decides ties; the floor, if any, is last
  std::optional<std::size_t> background;
};

inline Scene generate_scene(const SceneSpec& spec, std::size_t num_classes) {
  if (spec.boxes.empty() && !spec.floor) {
    throw Error(ErrorCode::kInvalidScene, "scene has no boxes and no background");
  }
  Scene scene;
  for (const auto& b : spec.boxes) {
    if (b.label >= num_classes) throw Error(ErrorCode::kInvalidScene, "box label outside the label set");
    for (int a = 0; a < 3; ++a) {
      if (!(b.min[a] < b.max[a]) || !std::isfinite(b.min[a]) || !std::isfinite(b.max[a])) {
        throw Error(ErrorCode::kInvalidScene, "box corners must satisfy min < max on every axis");
      }
    }
    scene.boxes.push_back(b);
  }
  if (spec.floor) {
    const auto& f = *spec.floor;
    if (f.label >= num_classes) throw Error(ErrorCode::kInvalidScene, "floor label outside the label set");
    if (!(f.half_extent > 0.0) || !(f.thickness > 0.0)) {
      throw Error(ErrorCode::kInvalidScene, "floor needs positive extent and thickness");
    }
    scene.boxes.push_back({{f.center_x - f.half_extent, f.center_y - f.half_extent, f.height - f.thickness},
                           {f.center_x + f.half_extent, f.center_y + f.half_extent, f.height},
                           f.label});
    scene.background = f.label;
  }
  return scene;
}

/// Entry distance of a ray into a box (slab method), if the box lies ahead
/// of the origin.
inline std::optional<double> ray_box_entry(Vec3 origin, Vec3 dir, const Box& box) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double o = origin[a];
    const double d = dir[a];
    const double lo = box.min[a];
    const double hi = box.max[a];
    if (std::abs(d) < 1e-300) {
      if (o < lo || o > hi) return std::nullopt;
      continue;
    }
    double t0 = (lo - o) / d;
    double t1 = (hi - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  if (t_near <= 0.0) return std::nullopt;
  return t_near;
}

struct DepthRender {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> depth;  ///< camera z in meters, 0 where nothing is hit
  std::vector<int> label;     ///< true class, -1 where nothing is hit
};

inline DepthRender render_depth(const Scene& scene, const Pose& pose, const CameraIntrinsics& intr) {
  intr.validate();
  pose.validate();
  DepthRender out;
  out.width = intr.width;
  out.height = intr.height;
  out.depth.assign(intr.pixel_count(), 0.0);
  out.label.assign(intr.pixel_count(), -1);
  for (std::size_t v = 0; v < intr.height; ++v) {
    for (std::size_t u = 0; u < intr.width; ++u) {
      // Camera-frame ray with unit z, so the hit parameter is the depth.
      const Vec3 ray_cam{(static_cast<double>(u) - intr.cx) / intr.fx, (static_cast<double>(v) - intr.cy) / intr.fy,
                         1.0};
      const Vec3 dir = pose.rotation.rotate(ray_cam);
      double best = std::numeric_limits<double>::infinity();
      int best_label = -1;
      for (const auto& box : scene.boxes) {
        const auto t = ray_box_entry(pose.translation, dir, box);
        if (t && *t < best) {
          best = *t;
          best_label = static_cast<int>(box.label);
        }
      }
      if (best_label >= 0) {
        out.depth[v * intr.width + u] = best;
        out.label[v * intr.width + u] = best_label;
      }
    }
  }
  return out;
}

/// Surface voxels of every box, labeled by the first box whose surface
/// touches them. Sorted by key.
inline std::vector<std::pair<VoxelKey, std::size_t>> rasterize_gt(const Scene& scene, double voxel_size) {
  if (!(voxel_size > 0.0)) throw Error(ErrorCode::kInvalidArgument, "voxel size must be positive");
  std::map<VoxelKey, std::size_t> cells;
  for (const auto& box : scene.boxes) {
    const VoxelKey lo = voxelize(box.min, voxel_size);
    const VoxelKey hi = voxelize(box.max, voxel_size);
    for (std::int64_t ix = lo.ix; ix <= hi.ix; ++ix) {
      for (std::int64_t iy = lo.iy; iy <= hi.iy; ++iy) {
        const bool side = ix == lo.ix || ix == hi.ix || iy == lo.iy || iy == hi.iy;
        if (side) {
          for (std::int64_t iz = lo.iz; iz <= hi.iz; ++iz) cells.try_emplace({ix, iy, iz}, box.label);
        } else {
          cells.try_emplace({ix, iy, lo.iz}, box.label);
          cells.try_emplace({ix, iy, hi.iz}, box.label);
        }
      }
    }
  }
  return {cells.begin(), cells.end()};
}

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectorySpec {
  Vec3 center;             ///< point the camera looks at
  double radius = 3.0;     ///< horizontal distance to the center
  double height = 1.5;     ///< camera height above the center
  std::size_t frames = 60;
  double start_angle = 0.0;                  ///< radians
  double sweep = 2.0 * std::numbers::pi;     ///< total angle covered by the frames
  double dt = 0.1;                           ///< seconds between frames
  double t0 = 0.0;

  friend bool operator==(const TrajectorySpec&, const TrajectorySpec&) = default;
};

struct TimedPose {
  double timestamp = 0.0;
  Pose pose;
};

/// Camera-to-world pose at `eye` looking at `target`, world z up.
inline Pose look_at(Vec3 eye, Vec3 target) {
  const Vec3 forward = normalized(target - eye);
  Vec3 right = cross(forward, Vec3{0.0, 0.0, 1.0});
  if (right.norm() < 1e-12) throw Error(ErrorCode::kInvalidArgument, "look_at direction is vertical");
  right = normalized(right);
  const Vec3 down = cross(forward, right);
  return {eye, Quaternion::from_columns(right, down, forward)};
}

/// Orbit around the center with frames equally spaced in angle.
inline std::vector<TimedPose> generate_trajectory(const TrajectorySpec& spec) {
  if (spec.frames == 0) throw Error(ErrorCode::kInvalidArgument, "trajectory needs at least one frame");
  if (!(spec.radius > 0.0)) throw Error(ErrorCode::kInvalidArgument, "orbit radius must be positive");
  if (!(spec.dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "frame interval must be positive");
  std::vector<TimedPose> poses;
  poses.reserve(spec.frames);
  const double step = spec.sweep / static_cast<double>(spec.frames);
  for (std::size_t k = 0; k < spec.frames; ++k) {
    const double theta = spec.start_angle + step * static_cast<double>(k);
    const Vec3 eye = spec.center + Vec3{spec.radius * std::cos(theta), spec.radius * std::sin(theta), spec.height};
    poses.push_back({spec.t0 + spec.dt * static_cast<double>(k), look_at(eye, spec.center)});
  }
  return poses;
}

// ---------------------------------------------------------------------------
// Bayesian sensor

/// Synthetic segmentation network. Spreads are dispersions: MC samples are
/// Dirichlet draws with concentration 1/spread around the pixel mean, and a
/// spread of 0 returns the mean itself.
struct SensorModel {
  double p_correct = 0.85;           ///< mass on the true class for regular pixels
  double outlier_rate = 0.15;        ///< probability that a pixel is an outlier
  double outlier_confidence = 0.99;  ///< mass on the wrong class for outliers
  double epistemic_spread_correct = 0.001;
  double epistemic_spread_outlier = 1.0;
  double uncertainty_error_correlation = 0.8;  ///< fraction of outliers given the outlier spread
  std::size_t outlier_patch = 1;               ///< side in pixels of the square tiles sharing an outlier draw
  std::uint64_t seed = 0;

  friend bool operator==(const SensorModel&, const SensorModel&) = default;

  void validate() const {
    const auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in01(p_correct) || !in01(outlier_rate) || !in01(outlier_confidence) ||
        !in01(uncertainty_error_correlation)) {
      throw Error(ErrorCode::kInvalidArgument, "sensor probabilities must lie in [0,1]");
    }
    if (!(epistemic_spread_correct >= 0.0) || !(epistemic_spread_outlier >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "sensor spreads must be nonnegative");
    }
    if (outlier_patch == 0) throw Error(ErrorCode::kInvalidArgument, "outlier_patch must be >= 1");
  }
};

struct OutlierDraw {
  bool outlier = false;
  std::size_t wrong_offset = 1;  ///< wrong class = (true + offset) mod K, offset in [1, K-1]
  bool high_dispersion = false;
};

inline OutlierDraw draw_outlier(const SensorModel& model, std::size_t num_classes, CounterRng& rng) {
  OutlierDraw d;
  d.outlier = rng.bernoulli(model.outlier_rate);
  d.wrong_offset = 1 + static_cast<std::size_t>(rng.below(num_classes - 1));
  d.high_dispersion = rng.bernoulli(model.uncertainty_error_correlation);
  return d;
}

/// Dirichlet draw with the given mean and concentration; zero-mass classes stay zero.
inline std::vector<double> sample_dirichlet(std::span<const double> mean, double concentration, CounterRng& rng) {
  std::vector<double> g(mean.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    g[i] = rng.gamma(concentration * mean[i]);
    sum += g[i];
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) return {mean.begin(), mean.end()};
  for (double& x : g) x /= sum;
  return g;
}

struct SensorDraw {
  McSampleSet samples;
  bool outlier = false;
  bool high_dispersion = false;
};

inline SensorDraw sample_sensor(std::size_t true_class, std::size_t num_classes, const SensorModel& model,
                                std::size_t num_samples, const OutlierDraw& draw, CounterRng& rng) {
  if (true_class >= num_classes) throw Error(ErrorCode::kInvalidArgument, "true class outside the label set");
  if (num_samples == 0) throw Error(ErrorCode::kInvalidArgument, "need at least one MC sample");
  const double k_rest = static_cast<double>(num_classes - 1);
  std::vector<double> mean(num_classes);
  std::size_t peak = true_class;
  double peak_mass = model.p_correct;
  if (draw.outlier) {
    peak = (true_class + draw.wrong_offset) % num_classes;
    peak_mass = model.outlier_confidence;
  }
  for (std::size_t i = 0; i < num_classes; ++i) mean[i] = i == peak ? peak_mass : (1.0 - peak_mass) / k_rest;

  const bool high = draw.outlier && draw.high_dispersion;
  const double spread = high ? model.epistemic_spread_outlier : model.epistemic_spread_correct;
  SensorDraw out{McSampleSet(num_classes), draw.outlier, high};
  for (std::size_t m = 0; m < num_samples; ++m) {
    if (spread <= 0.0) {
      out.samples.add(mean);
    } else {
      out.samples.add(normalize(sample_dirichlet(mean, 1.0 / spread, rng)).values());
    }
  }
  return out;
}

/// Per-pixel variant drawing the outlier decision from the same stream.
inline SensorDraw sample_sensor(std::size_t true_class, std::size_t num_classes, const SensorModel& model,
                                std::size_t num_samples, CounterRng& rng) {
  const OutlierDraw draw = draw_outlier(model, num_classes, rng);
  return sample_sensor(true_class, num_classes, model, num_samples, draw, rng);
}

// ---------------------------------------------------------------------------
// Frame synthesis

struct SimulatedFrame {
  Frame frame;
  std::vector<float> outlier_flag;  ///< 1 outlier, 0 regular, -1 no surface
  std::vector<float> true_label;    ///< -1 where nothing is hit
};

/// Renders one frame and runs the sensor on every hit pixel. Each pixel uses
/// its own substream keyed by (seed, frame id, pixel index).
inline SimulatedFrame simulate_frame(const Scene& scene, const TimedPose& pose, std::uint64_t frame_id,
                                     const CameraIntrinsics& intr, const SensorModel& model, std::size_t num_classes,
                                     std::size_t num_samples, ObservationLayout layout) {
  model.validate();
  const DepthRender render = render_depth(scene, pose.pose, intr);
  const std::size_t w = intr.width;
  const std::size_t h = intr.height;
  SimulatedFrame out;
  out.frame.id = frame_id;
  out.frame.timestamp = pose.timestamp;
  out.frame.pose = pose.pose;
  out.frame.intrinsics = intr;
  out.frame.depth.assign(w * h, 0.0f);
  const std::size_t lead = layout == ObservationLayout::kMoments ? 2 : num_samples;
  out.frame.observations = ObservationTensor(layout, lead, num_classes, h, w);
  out.outlier_flag.assign(w * h, -1.0f);
  out.true_label.assign(w * h, -1.0f);

  const std::size_t patch = model.outlier_patch;
  const std::size_t tiles_x = (w + patch - 1) / patch;
  auto& obs = out.frame.observations;
  for (std::size_t v = 0; v < h; ++v) {
    for (std::size_t u = 0; u < w; ++u) {
      const std::size_t idx = v * w + u;
      const int label = render.label[idx];
      if (label < 0) {
        // Placeholder output for pixels without a surface; never integrated.
        for (std::size_t l = 0; l < lead; ++l) {
          for (std::size_t k = 0; k < num_classes; ++k) {
            const bool variance_row = layout == ObservationLayout::kMoments && l == 1;
            obs.at(l, k, v, u) = variance_row ? 0.0f : static_cast<float>(1.0 / static_cast<double>(num_classes));
          }
        }
        continue;
      }
      out.frame.depth[idx] = static_cast<float>(render.depth[idx]);
      CounterRng pixel_rng = CounterRng::substream(model.seed, {frame_id, idx, 0});
      OutlierDraw draw;
      if (patch == 1) {
        draw = draw_outlier(model, num_classes, pixel_rng);
      } else {
        const std::size_t tile = (v / patch) * tiles_x + (u / patch);
        CounterRng tile_rng = CounterRng::substream(model.seed, {frame_id, tile, 1});
        draw = draw_outlier(model, num_classes, tile_rng);
      }
      const SensorDraw s =
          sample_sensor(static_cast<std::size_t>(label), num_classes, model, num_samples, draw, pixel_rng);
      out.outlier_flag[idx] = s.outlier ? 1.0f : 0.0f;
      out.true_label[idx] = static_cast<float>(label);
      if (layout == ObservationLayout::kMoments) {
        const ClassProbabilityVector mean = predictive_mean(s.samples);
        const std::vector<double> var = raw_epistemic_variance(s.samples);
        for (std::size_t k = 0; k < num_classes; ++k) {
          obs.at(0, k, v, u) = static_cast<float>(mean[k]);
          obs.at(1, k, v, u) = static_cast<float>(var[k]);
        }
      } else {
        for (std::size_t m = 0; m < num_samples; ++m) {
          const auto row = s.samples.sample(m);
          for (std::size_t k = 0; k < num_classes; ++k) obs.at(m, k, v, u) = static_cast<float>(row[k]);
        }
      }
    }
  }
  return out;
}

}  // namespace semfuse
