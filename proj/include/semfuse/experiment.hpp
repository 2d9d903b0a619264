// End-to-end experiment steps shared by the command-line tool and the
// acceptance suite: dataset synthesis, map fusion from a dataset directory,
// file-based evaluation and multi-strategy comparison.
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "semfuse/config.hpp"
#include "semfuse/core.hpp"
#include "semfuse/fusion.hpp"
#include "semfuse/io.hpp"
#include "semfuse/map.hpp"
#include "semfuse/metrics.hpp"
#include "semfuse/sim.hpp"

namespace semfuse {

namespace fs = std::filesystem;

/// dataset.json: what a reader needs besides the raw tensors.
struct DatasetManifest {
  std::vector<std::string> labels;
  CameraIntrinsics camera;
  ObservationLayout layout = ObservationLayout::kMoments;
  std::size_t frames = 0;

  nlohmann::json to_json() const {
    return {{"labels", labels},
            {"camera",
             {{"width", camera.width},
              {"height", camera.height},
              {"fx", camera.fx},
              {"fy", camera.fy},
              {"cx", camera.cx},
              {"cy", camera.cy}}},
            {"observation_layout", layout == ObservationLayout::kMoments ? "moments" : "samples"},
            {"frames", frames}};
  }

  static DatasetManifest from_json(const nlohmann::json& j) {
    try {
      DatasetManifest m;
      m.labels = j.at("labels").get<std::vector<std::string>>();
      const auto& c = j.at("camera");
      m.camera = {c.at("fx").get<double>(),        c.at("fy").get<double>(),
                  c.at("cx").get<double>(),        c.at("cy").get<double>(),
                  c.at("width").get<std::size_t>(), c.at("height").get<std::size_t>()};
      const auto layout = j.at("observation_layout").get<std::string>();
      if (layout != "moments" && layout != "samples") throw std::runtime_error("bad layout");
      m.layout = layout == "moments" ? ObservationLayout::kMoments : ObservationLayout::kSamples;
      m.frames = j.at("frames").get<std::size_t>();
      return m;
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kMalformedFrame, std::string("dataset.json: ") + e.what());
    }
  }
};

inline std::string frame_file(std::string_view prefix, std::uint64_t id) {
  return std::string(prefix) + "_" + std::to_string(id) + ".ten";
}

struct SimulationSummary {
  std::size_t frames = 0;
  std::size_t valid_pixels = 0;
  std::size_t outlier_pixels = 0;
  std::size_t gt_voxels = 0;
};

/// Writes poses.txt, depth_<id>.ten, obs_<id>.ten, gt_voxels.txt,
/// dataset.json and (optionally) debug_<id>.ten sidecars holding the
/// outlier flag and true class per pixel.
inline SimulationSummary simulate_dataset(const ExperimentConfig& cfg, const fs::path& dir) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());

  const LabelSet labels = cfg.label_set();
  const std::size_t k = labels.size();
  const Scene scene = generate_scene(cfg.scene, k);
  const auto trajectory = generate_trajectory(cfg.trajectory);
  const SensorModel sensor = cfg.seeded_sensor();
  const auto& cam = cfg.camera;

  SimulationSummary summary;
  std::vector<io::PoseRecord> poses;
  for (std::size_t f = 0; f < trajectory.size(); ++f) {
    const auto id = static_cast<std::uint64_t>(f);
    const SimulatedFrame sim =
        simulate_frame(scene, trajectory[f], id, cam, sensor, k, cfg.fusion.mc_samples, cfg.observation_layout);
    const auto& obs = sim.frame.observations;
    const auto h = static_cast<std::uint32_t>(cam.height);
    const auto w = static_cast<std::uint32_t>(cam.width);
    io::write_tensor(dir / frame_file("depth", id), {{h, w}, sim.frame.depth});
    io::write_tensor(dir / frame_file("obs", id),
                     {{static_cast<std::uint32_t>(obs.lead), static_cast<std::uint32_t>(k), h, w}, obs.data});
    if (cfg.write_debug) {
      std::vector<float> debug(sim.outlier_flag);
      debug.insert(debug.end(), sim.true_label.begin(), sim.true_label.end());
      io::write_tensor(dir / frame_file("debug", id), {{2, h, w}, std::move(debug)});
    }
    for (float flag : sim.outlier_flag) {
      if (flag >= 0.0f) ++summary.valid_pixels;
      if (flag > 0.0f) ++summary.outlier_pixels;
    }
    poses.push_back({id, trajectory[f].timestamp, trajectory[f].pose});
  }
  io::write_file(dir / "poses.txt", io::encode_poses(poses));

  const auto gt = rasterize_gt(scene, cfg.map.voxel_size);
  io::write_voxel_labels(dir / "gt_voxels.txt", {labels.names(), {gt.begin(), gt.end()}});
  const DatasetManifest manifest{labels.names(), cam, cfg.observation_layout, trajectory.size()};
  io::write_file(dir / "dataset.json", manifest.to_json().dump(2) + "\n");

  summary.frames = trajectory.size();
  summary.gt_voxels = gt.size();
  return summary;
}

struct FuseSummary {
  std::size_t frames = 0;
  std::size_t voxels = 0;
  std::size_t pixels_considered = 0;
  std::size_t pixels_used = 0;
  std::size_t pixels_skipped = 0;
};

struct FuseResult {
  std::vector<std::string> labels;
  std::vector<LabelledVoxel> voxels;
  FuseSummary summary;
};

/// Loads one frame of a dataset directory.
inline Frame load_frame(const fs::path& dir, const io::PoseRecord& record, const CameraIntrinsics& cam,
                        std::optional<ObservationLayout> layout) {
  const auto depth = io::read_tensor(dir / frame_file("depth", record.frame_id));
  const auto obs = io::read_tensor(dir / frame_file("obs", record.frame_id));
  const auto fail = [&](const std::string& why) -> Frame {
    throw Error(ErrorCode::kMalformedFrame, "frame " + std::to_string(record.frame_id) + ": " + why);
  };
  if (depth.dims.size() != 2 || depth.dims[0] != cam.height || depth.dims[1] != cam.width) {
    return fail("depth tensor must be [H, W] matching the camera");
  }
  if (obs.dims.size() != 4) return fail("observation tensor must be [M or 2, K, H, W]");
  Frame f;
  f.id = record.frame_id;
  f.timestamp = record.timestamp;
  f.pose = record.pose;
  f.intrinsics = cam;
  f.depth = depth.data;
  const ObservationLayout l =
      layout.value_or(obs.dims[0] == 2 ? ObservationLayout::kMoments : ObservationLayout::kSamples);
  f.observations.layout = l;
  f.observations.lead = obs.dims[0];
  f.observations.classes = obs.dims[1];
  f.observations.height = obs.dims[2];
  f.observations.width = obs.dims[3];
  f.observations.data = obs.data;
  f.validate();
  return f;
}

/// Integrates every frame listed in poses.txt, in file order.
inline FuseResult fuse_dataset(const fs::path& dir, const FusionStrategy& strategy, const ExperimentConfig& cfg) {
  std::optional<DatasetManifest> manifest;
  if (fs::exists(dir / "dataset.json")) {
    try {
      manifest = DatasetManifest::from_json(nlohmann::json::parse(io::read_file(dir / "dataset.json")));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedFrame, std::string("dataset.json: ") + e.what());
    }
  }
  const CameraIntrinsics cam = manifest ? manifest->camera : cfg.camera;
  const std::vector<std::string> labels = manifest ? manifest->labels : cfg.labels;
  const auto poses = io::decode_poses(io::read_file(dir / "poses.txt"));

  SemanticVoxelMap map(labels.size(), strategy, cfg.fusion, cfg.map);
  FuseResult result;
  result.labels = labels;
  for (const auto& record : poses) {
    if (record.timestamp < map.last_timestamp()) {
      throw Error(ErrorCode::kOrderViolation, "frame " + std::to_string(record.frame_id) + " is out of order");
    }
    const Frame frame =
        load_frame(dir, record, cam, manifest ? std::optional<ObservationLayout>(manifest->layout) : std::nullopt);
    const IntegrationSummary s = map.integrate(frame);
    result.summary.pixels_considered += s.pixels_considered;
    result.summary.pixels_used += s.pixels_used;
    result.summary.pixels_skipped += s.pixels_skipped;
    ++result.summary.frames;
  }
  result.voxels = map.export_labels();
  result.summary.voxels = result.voxels.size();
  return result;
}

inline void write_map(const fs::path& path, const FuseResult& result) {
  io::write_voxel_labels(path, {result.labels, io::to_voxel_labels(result.voxels)});
}

/// Resolves the class count shared by a map and a ground-truth file.
inline std::vector<std::string> common_labels(const io::VoxelLabelFile& pred, const io::VoxelLabelFile& gt,
                                              const std::optional<std::vector<std::string>>& expected) {
  std::optional<std::vector<std::string>> labels = expected;
  for (const auto* f : {&pred, &gt}) {
    if (!f->labels) continue;
    if (labels && *labels != *f->labels) {
      throw Error(ErrorCode::kLabelSetMismatch, "map and ground truth use different label sets");
    }
    labels = f->labels;
  }
  if (labels) return *labels;
  std::size_t k = 2;
  for (const auto* f : {&pred, &gt}) {
    for (const auto& row : f->rows) k = std::max(k, row.second + 1);
  }
  return LabelSet::numbered(k).names();
}

struct FileEvaluation {
  LabelSet labels;
  EvalReport report;
};

inline FileEvaluation evaluate_files(const fs::path& map_path, const fs::path& gt_path, bool observed_only,
                                     const std::optional<std::vector<std::string>>& expected = std::nullopt) {
  const auto pred = io::read_voxel_labels(map_path);
  const auto gt = io::read_voxel_labels(gt_path);
  LabelSet labels(common_labels(pred, gt, expected));
  if (gt.rows.empty()) throw Error(ErrorCode::kEmptyGroundTruth, gt_path.string() + " has no voxels");
  if (observed_only) {
    const auto restricted = restrict_to_observed(gt.rows, pred.rows);
    return {labels, evaluate(pred.rows, restricted, labels.size())};
  }
  return {labels, evaluate(pred.rows, gt.rows, labels.size())};
}

inline nlohmann::json report_json(const EvalReport& r, const LabelSet& labels, std::string_view strategy) {
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t c = 0; c < r.num_classes; ++c) {
    per_class[labels.name(c)] = r.per_class_iou[c] ? nlohmann::json(*r.per_class_iou[c]) : nlohmann::json(nullptr);
  }
  return {{"strategy", strategy},
          {"labels", labels.names()},
          {"per_class_iou", per_class},
          {"miou", r.miou},
          {"accuracy", r.accuracy},
          {"confusion", r.confusion},
          {"gt_voxels", r.gt_voxels},
          {"predicted_voxels", r.predicted_voxels},
          {"matched_voxels", r.matched_voxels}};
}

struct CompareResult {
  LabelSet labels;
  SimulationSummary simulation;
  std::vector<ComparisonRow> rows;
  std::string csv;
};

/// Simulates one dataset, then fuses and evaluates it with every configured
/// strategy. Writes dataset/, maps/<strategy>.txt, reports/<strategy>.json
/// and comparison.csv under out_dir.
inline CompareResult run_compare(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const fs::path dataset = out_dir / "dataset";
  const SimulationSummary sim = simulate_dataset(cfg, dataset);
  std::error_code ec;
  fs::create_directories(out_dir / "maps", ec);
  fs::create_directories(out_dir / "reports", ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create output directories under " + out_dir.string());

  const LabelSet labels = cfg.label_set();
  std::vector<std::pair<std::string, EvalReport>> reports;
  for (const auto& strategy : cfg.strategies) {
    const FuseResult fused = fuse_dataset(dataset, strategy, cfg);
    const fs::path map_path = out_dir / "maps" / (std::string(strategy.name()) + ".txt");
    write_map(map_path, fused);
    FileEvaluation eval = evaluate_files(map_path, dataset / "gt_voxels.txt", cfg.evaluate_observed_only, cfg.labels);
    io::write_file(out_dir / "reports" / (std::string(strategy.name()) + ".json"),
                   report_json(eval.report, labels, strategy.display_name()).dump(2) + "\n");
    reports.emplace_back(std::string(strategy.display_name()), std::move(eval.report));
  }
  CompareResult result{labels, sim, compare_strategies(reports), {}};
  result.csv = io::encode_comparison(labels, result.rows);
  io::write_file(out_dir / "comparison.csv", result.csv);
  return result;
}

}  // namespace semfuse
