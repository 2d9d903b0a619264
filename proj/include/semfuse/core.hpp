// Foundational value types shared by every semfuse module: errors, label
// sets, points on the class simplex, voxel keys and pinhole camera geometry.
#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace semfuse {

enum class ErrorCode {
  kInvalidArgument,
  kDegenerateDistribution,
  kOrderViolation,
  kMalformedFrame,
  kInvalidScene,
  kEmptyGroundTruth,
  kLabelSetMismatch,
  kInvalidConfig,
  kIo,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDegenerateDistribution: return "DegenerateDistribution";
    case ErrorCode::kOrderViolation: return "OrderViolation";
    case ErrorCode::kMalformedFrame: return "MalformedFrame";
    case ErrorCode::kInvalidScene: return "InvalidScene";
    case ErrorCode::kEmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorCode::kLabelSetMismatch: return "LabelSetMismatch";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

/// Exception type thrown by every semfuse operation. The code identifies the
/// failure class; the message carries the details.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Simplex validation tolerance.
inline constexpr double kSimplexTolerance = 1e-9;

// ---------------------------------------------------------------------------
// LabelSet

class LabelSet {
 public:
  explicit LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2) {
      throw Error(ErrorCode::kInvalidArgument, "a label set needs at least 2 classes");
    }
    std::unordered_set<std::string> seen;
    for (const auto& n : names_) {
      if (!seen.insert(n).second) {
        throw Error(ErrorCode::kInvalidArgument, "duplicate class name '" + n + "'");
      }
    }
  }

  /// Label set with generated names "class0", "class1", ...
  static LabelSet numbered(std::size_t k) {
    std::vector<std::string> names;
    names.reserve(k);
    for (std::size_t i = 0; i < k; ++i) names.push_back("class" + std::to_string(i));
    return LabelSet(std::move(names));
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  friend bool operator==(const LabelSet&, const LabelSet&) = default;

 private:
  std::vector<std::string> names_;
};

// ---------------------------------------------------------------------------
// ClassProbabilityVector

/// A point on the K-class simplex. Construction validates the components;
/// invalid input is rejected rather than renormalized.
class ClassProbabilityVector {
 public:
  explicit ClassProbabilityVector(std::vector<double> p) : p_(std::move(p)) {
    if (p_.size() < 2) {
      throw Error(ErrorCode::kInvalidArgument, "probability vector needs at least 2 classes");
    }
    double sum = 0.0;
    for (double v : p_) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw Error(ErrorCode::kInvalidArgument, "probability component outside [0,1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance) {
      throw Error(ErrorCode::kInvalidArgument,
                  "probabilities sum to " + std::to_string(sum) + ", expected 1");
    }
  }

  /// Uniform distribution over k classes.
  static ClassProbabilityVector uniform(std::size_t k) {
    return ClassProbabilityVector(std::vector<double>(k, 1.0 / static_cast<double>(k)));
  }

  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  std::span<const double> values() const noexcept { return p_; }
  auto begin() const noexcept { return p_.begin(); }
  auto end() const noexcept { return p_.end(); }

  friend bool operator==(const ClassProbabilityVector&, const ClassProbabilityVector&) = default;

 private:
  std::vector<double> p_;
};

/// Scales nonnegative weights onto the simplex.
inline ClassProbabilityVector normalize(std::span<const double> raw) {
  double sum = 0.0;
  for (double v : raw) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "normalize needs finite nonnegative weights");
    }
    sum += v;
  }
  if (!(sum > 0.0)) {
    throw Error(ErrorCode::kDegenerateDistribution, "all weights are zero");
  }
  std::vector<double> p(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) p[i] = raw[i] / sum;
  return ClassProbabilityVector(std::move(p));
}

inline ClassProbabilityVector normalize(std::initializer_list<double> raw) {
  return normalize(std::span<const double>(raw.begin(), raw.size()));
}

/// Index of the largest component; ties go to the lowest index.
inline std::size_t argmax_class(std::span<const double> p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

inline std::size_t argmax_class(const ClassProbabilityVector& p) { return argmax_class(p.values()); }

// ---------------------------------------------------------------------------
// Geometry

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline Vec3 normalized(Vec3 a) { return (1.0 / a.norm()) * a; }

/// Unit quaternion, Hamilton convention, stored (x, y, z, w).
struct Quaternion {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double w = 1.0;

  friend bool operator==(const Quaternion&, const Quaternion&) = default;

  double norm() const { return std::sqrt(x * x + y * y + z * z + w * w); }

  Vec3 rotate(Vec3 v) const {
    // v' = v + 2w (q x v) + 2 q x (q x v)
    const Vec3 q{x, y, z};
    const Vec3 t = 2.0 * cross(q, v);
    return v + w * t + cross(q, t);
  }

  /// Quaternion for the rotation whose matrix has the given columns.
  static Quaternion from_columns(Vec3 c0, Vec3 c1, Vec3 c2) {
    const double m00 = c0.x, m10 = c0.y, m20 = c0.z;
    const double m01 = c1.x, m11 = c1.y, m21 = c1.z;
    const double m02 = c2.x, m12 = c2.y, m22 = c2.z;
    Quaternion q;
    const double trace = m00 + m11 + m22;
    if (trace > 0.0) {
      const double s = 0.5 / std::sqrt(trace + 1.0);
      q.w = 0.25 / s;
      q.x = (m21 - m12) * s;
      q.y = (m02 - m20) * s;
      q.z = (m10 - m01) * s;
    } else if (m00 > m11 && m00 > m22) {
      const double s = 2.0 * std::sqrt(1.0 + m00 - m11 - m22);
      q.w = (m21 - m12) / s;
      q.x = 0.25 * s;
      q.y = (m01 + m10) / s;
      q.z = (m02 + m20) / s;
    } else if (m11 > m22) {
      const double s = 2.0 * std::sqrt(1.0 + m11 - m00 - m22);
      q.w = (m02 - m20) / s;
      q.x = (m01 + m10) / s;
      q.y = 0.25 * s;
      q.z = (m12 + m21) / s;
    } else {
      const double s = 2.0 * std::sqrt(1.0 + m22 - m00 - m11);
      q.w = (m10 - m01) / s;
      q.x = (m02 + m20) / s;
      q.y = (m12 + m21) / s;
      q.z = 0.25 * s;
    }
    const double n = q.norm();
    return {q.x / n, q.y / n, q.z / n, q.w / n};
  }
};

/// Camera-to-world rigid transform. Camera frame is right-handed with x to
/// the right, y down and z along the optical axis.
struct Pose {
  Vec3 translation;
  Quaternion rotation;

  friend bool operator==(const Pose&, const Pose&) = default;

  void validate() const {
    if (std::abs(rotation.norm() - 1.0) > 1e-9) {
      throw Error(ErrorCode::kInvalidArgument, "pose quaternion is not unit length");
    }
  }

  Vec3 transform(Vec3 p_camera) const { return rotation.rotate(p_camera) + translation; }
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  std::size_t width = 0;
  std::size_t height = 0;

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || width == 0 || height == 0) {
      throw Error(ErrorCode::kInvalidArgument, "camera intrinsics need fx, fy > 0 and a nonempty image");
    }
  }

  std::size_t pixel_count() const noexcept { return width * height; }
};

// ---------------------------------------------------------------------------
// VoxelKey

struct VoxelKey {
  std::int64_t ix = 0;
  std::int64_t iy = 0;
  std::int64_t iz = 0;

  friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    // Large-prime spatial hash
    const auto h = static_cast<std::uint64_t>(k.ix) * 73856093ULL ^
                   static_cast<std::uint64_t>(k.iy) * 19349669ULL ^
                   static_cast<std::uint64_t>(k.iz) * 83492791ULL;
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

/// Grid index of one coordinate. Quotients within 1e-9 (relative) of an
/// integer snap to it, so decimal inputs such as 0.3 / 0.1 land in cell 3.
inline std::int64_t voxel_index(double coordinate, double voxel_size) {
  const double q = coordinate / voxel_size;
  const double r = std::round(q);
  if (std::abs(q - r) <= 1e-9 * std::max(1.0, std::abs(q))) return static_cast<std::int64_t>(r);
  return static_cast<std::int64_t>(std::floor(q));
}

inline VoxelKey voxelize(Vec3 p, double voxel_size) {
  return {voxel_index(p.x, voxel_size), voxel_index(p.y, voxel_size), voxel_index(p.z, voxel_size)};
}

}  // namespace semfuse
