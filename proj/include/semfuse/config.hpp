// Experiment configuration: a strict JSON document (unknown keys are fatal).
#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "semfuse/core.hpp"
#include "semfuse/fusion.hpp"
#include "semfuse/io.hpp"
#include "semfuse/map.hpp"
#include "semfuse/observation.hpp"
#include "semfuse/sim.hpp"

namespace semfuse {

struct ExperimentConfig {
  std::vector<std::string> labels;
  std::uint64_t seed = 0;
  MapConfig map;
  FusionConfig fusion;
  std::vector<FusionStrategy> strategies = FusionStrategy::benchmark_set();
  SceneSpec scene;
  TrajectorySpec trajectory;
  CameraIntrinsics camera{160.0, 160.0, 79.5, 59.5, 160, 120};
  SensorModel sensor;  ///< sensor.seed is taken from `seed`
  ObservationLayout observation_layout = ObservationLayout::kMoments;
  bool write_debug = true;
  bool evaluate_observed_only = true;
  std::string output_dir = "semfuse_out";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

  LabelSet label_set() const { return LabelSet(labels); }

  /// Sensor model with the experiment seed applied.
  SensorModel seeded_sensor() const {
    SensorModel s = sensor;
    s.seed = seed;
    return s;
  }

  void validate() const {
    try {
      const LabelSet ls = label_set();
      for (const auto& n : labels) {
        if (n.empty() || n.find_first_of(" \t\r\n,#") != std::string::npos) {
          throw Error(ErrorCode::kInvalidArgument, "class name '" + n + "' must be a single token");
        }
      }
      fusion.validate(ls.size());
      if (!(map.voxel_size > 0.0)) throw Error(ErrorCode::kInvalidArgument, "voxel_size must be positive");
      if (map.stride == 0) throw Error(ErrorCode::kInvalidArgument, "stride must be >= 1");
      if (strategies.empty()) throw Error(ErrorCode::kInvalidArgument, "strategy list is empty");
      camera.validate();
      sensor.validate();
      (void)generate_scene(scene, ls.size());
      (void)generate_trajectory(trajectory);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInvalidScene) throw;
      throw Error(ErrorCode::kInvalidConfig, e.what());
    }
  }
};

namespace config_detail {

using nlohmann::json;

inline void expect_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw Error(ErrorCode::kInvalidConfig, "unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, std::string_view where) {
  if (!j.contains(key)) return;
  try {
    if constexpr (std::is_floating_point_v<T>) {
      if (!j.at(key).is_number()) throw Error(ErrorCode::kInvalidConfig, "");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!j.at(key).is_number_unsigned()) throw Error(ErrorCode::kInvalidConfig, "");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!j.at(key).is_boolean()) throw Error(ErrorCode::kInvalidConfig, "");
    }
    out = j.at(key).get<T>();
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidConfig, "'" + std::string(key) + "' in " + std::string(where) + " has the wrong type");
  }
}

inline Vec3 read_vec3(const json& j, std::string_view where) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number()) {
    throw Error(ErrorCode::kInvalidConfig, std::string(where) + " must be an array of 3 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json vec3_json(Vec3 v) { return json::array({v.x, v.y, v.z}); }

inline std::size_t read_label(const json& j, const std::vector<std::string>& labels, std::string_view where) {
  if (j.is_number_unsigned()) return j.get<std::size_t>();
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == name) return i;
    }
    throw Error(ErrorCode::kInvalidConfig, "unknown class '" + name + "' in " + std::string(where));
  }
  throw Error(ErrorCode::kInvalidConfig, std::string(where) + " label must be a class name or index");
}

inline json label_json(std::size_t label, const std::vector<std::string>& labels) {
  if (label < labels.size()) return labels[label];
  return label;
}

}  // namespace config_detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using namespace config_detail;
  ExperimentConfig c;
  expect_keys(j, "config", {"labels", "seed", "voxel_size", "stride", "fusion", "strategies", "scene", "trajectory",
                            "camera", "sensor", "observation_layout", "write_debug", "evaluate_observed_only",
                            "output_dir"});
  if (!j.contains("labels") || !j["labels"].is_array()) {
    throw Error(ErrorCode::kInvalidConfig, "'labels' must be an array of class names");
  }
  for (const auto& n : j["labels"]) {
    if (!n.is_string()) throw Error(ErrorCode::kInvalidConfig, "'labels' entries must be strings");
    c.labels.push_back(n.get<std::string>());
  }
  read(j, "seed", c.seed, "config");
  read(j, "voxel_size", c.map.voxel_size, "config");
  read(j, "stride", c.map.stride, "config");
  read(j, "write_debug", c.write_debug, "config");
  read(j, "evaluate_observed_only", c.evaluate_observed_only, "config");
  read(j, "output_dir", c.output_dir, "config");

  if (j.contains("fusion")) {
    const auto& f = j["fusion"];
    expect_keys(f, "fusion", {"beta", "eps_var", "p_min", "mc_samples"});
    read(f, "beta", c.fusion.beta, "fusion");
    read(f, "eps_var", c.fusion.eps_var, "fusion");
    read(f, "p_min", c.fusion.p_min, "fusion");
    read(f, "mc_samples", c.fusion.mc_samples, "fusion");
  }

  if (j.contains("strategies")) {
    if (!j["strategies"].is_array()) throw Error(ErrorCode::kInvalidConfig, "'strategies' must be an array");
    c.strategies.clear();
    for (const auto& s : j["strategies"]) {
      if (!s.is_string()) throw Error(ErrorCode::kInvalidConfig, "strategy names must be strings");
      try {
        c.strategies.push_back(FusionStrategy::parse(s.get<std::string>()));
      } catch (const Error& e) {
        throw Error(ErrorCode::kInvalidConfig, e.what());
      }
    }
  }

  if (j.contains("scene")) {
    const auto& s = j["scene"];
    expect_keys(s, "scene", {"boxes", "floor"});
    if (s.contains("boxes")) {
      if (!s["boxes"].is_array()) throw Error(ErrorCode::kInvalidConfig, "'boxes' must be an array");
      for (const auto& b : s["boxes"]) {
        expect_keys(b, "box", {"min", "max", "label"});
        if (!b.contains("min") || !b.contains("max") || !b.contains("label")) {
          throw Error(ErrorCode::kInvalidConfig, "box needs min, max and label");
        }
        c.scene.boxes.push_back({read_vec3(b["min"], "box.min"), read_vec3(b["max"], "box.max"),
                                 read_label(b["label"], c.labels, "box")});
      }
    }
    if (s.contains("floor")) {
      const auto& f = s["floor"];
      expect_keys(f, "floor", {"label", "height", "half_extent", "thickness", "center_x", "center_y"});
      FloorSpec floor;
      if (f.contains("label")) floor.label = read_label(f["label"], c.labels, "floor");
      read(f, "height", floor.height, "floor");
      read(f, "half_extent", floor.half_extent, "floor");
      read(f, "thickness", floor.thickness, "floor");
      read(f, "center_x", floor.center_x, "floor");
      read(f, "center_y", floor.center_y, "floor");
      c.scene.floor = floor;
    }
  }

  if (j.contains("trajectory")) {
    const auto& t = j["trajectory"];
    expect_keys(t, "trajectory", {"center", "radius", "height", "frames", "start_angle", "sweep", "dt", "t0"});
    if (t.contains("center")) c.trajectory.center = read_vec3(t["center"], "trajectory.center");
    read(t, "radius", c.trajectory.radius, "trajectory");
    read(t, "height", c.trajectory.height, "trajectory");
    read(t, "frames", c.trajectory.frames, "trajectory");
    read(t, "start_angle", c.trajectory.start_angle, "trajectory");
    read(t, "sweep", c.trajectory.sweep, "trajectory");
    read(t, "dt", c.trajectory.dt, "trajectory");
    read(t, "t0", c.trajectory.t0, "trajectory");
  }

  if (j.contains("camera")) {
    const auto& cam = j["camera"];
    expect_keys(cam, "camera", {"width", "height", "fx", "fy", "cx", "cy"});
    read(cam, "width", c.camera.width, "camera");
    read(cam, "height", c.camera.height, "camera");
    read(cam, "fx", c.camera.fx, "camera");
    read(cam, "fy", c.camera.fy, "camera");
    read(cam, "cx", c.camera.cx, "camera");
    read(cam, "cy", c.camera.cy, "camera");
  }

  if (j.contains("sensor")) {
    const auto& s = j["sensor"];
    expect_keys(s, "sensor", {"p_correct", "outlier_rate", "outlier_confidence", "epistemic_spread_correct",
                              "epistemic_spread_outlier", "uncertainty_error_correlation", "outlier_patch"});
    read(s, "p_correct", c.sensor.p_correct, "sensor");
    read(s, "outlier_rate", c.sensor.outlier_rate, "sensor");
    read(s, "outlier_confidence", c.sensor.outlier_confidence, "sensor");
    read(s, "epistemic_spread_correct", c.sensor.epistemic_spread_correct, "sensor");
    read(s, "epistemic_spread_outlier", c.sensor.epistemic_spread_outlier, "sensor");
    read(s, "uncertainty_error_correlation", c.sensor.uncertainty_error_correlation, "sensor");
    read(s, "outlier_patch", c.sensor.outlier_patch, "sensor");
  }

  if (j.contains("observation_layout")) {
    const auto& l = j["observation_layout"];
    if (l == "moments") {
      c.observation_layout = ObservationLayout::kMoments;
    } else if (l == "samples") {
      c.observation_layout = ObservationLayout::kSamples;
    } else {
      throw Error(ErrorCode::kInvalidConfig, "observation_layout must be \"moments\" or \"samples\"");
    }
  }

  c.validate();
  return c;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  using namespace config_detail;
  json j;
  j["labels"] = c.labels;
  j["seed"] = c.seed;
  j["voxel_size"] = c.map.voxel_size;
  j["stride"] = c.map.stride;
  j["fusion"] = {{"beta", c.fusion.beta},
                 {"eps_var", c.fusion.eps_var},
                 {"p_min", c.fusion.p_min},
                 {"mc_samples", c.fusion.mc_samples}};
  j["strategies"] = json::array();
  for (const auto& s : c.strategies) j["strategies"].push_back(std::string(s.name()));
  json boxes = json::array();
  for (const auto& b : c.scene.boxes) {
    boxes.push_back({{"min", vec3_json(b.min)}, {"max", vec3_json(b.max)}, {"label", label_json(b.label, c.labels)}});
  }
  j["scene"]["boxes"] = boxes;
  if (c.scene.floor) {
    const auto& f = *c.scene.floor;
    j["scene"]["floor"] = {{"label", label_json(f.label, c.labels)},
                           {"height", f.height},
                           {"half_extent", f.half_extent},
                           {"thickness", f.thickness},
                           {"center_x", f.center_x},
                           {"center_y", f.center_y}};
  }
  const auto& t = c.trajectory;
  j["trajectory"] = {{"center", vec3_json(t.center)}, {"radius", t.radius},   {"height", t.height},
                     {"frames", t.frames},            {"start_angle", t.start_angle}, {"sweep", t.sweep},
                     {"dt", t.dt},                    {"t0", t.t0}};
  j["camera"] = {{"width", c.camera.width}, {"height", c.camera.height}, {"fx", c.camera.fx},
                 {"fy", c.camera.fy},       {"cx", c.camera.cx},         {"cy", c.camera.cy}};
  const auto& s = c.sensor;
  j["sensor"] = {{"p_correct", s.p_correct},
                 {"outlier_rate", s.outlier_rate},
                 {"outlier_confidence", s.outlier_confidence},
                 {"epistemic_spread_correct", s.epistemic_spread_correct},
                 {"epistemic_spread_outlier", s.epistemic_spread_outlier},
                 {"uncertainty_error_correlation", s.uncertainty_error_correlation},
                 {"outlier_patch", s.outlier_patch}};
  j["observation_layout"] = c.observation_layout == ObservationLayout::kMoments ? "moments" : "samples";
  j["write_debug"] = c.write_debug;
  j["evaluate_observed_only"] = c.evaluate_observed_only;
  j["output_dir"] = c.output_dir;
  return j;
}

inline ExperimentConfig parse_config_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }
  return parse_config(j);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config_text(io::read_file(path));
}

}  // namespace semfuse
