// File formats: raw little-endian tensors, pose lists, voxel label lists and
// report tables. Numbers are written locale-independently.
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "semfuse/core.hpp"
#include "semfuse/map.hpp"
#include "semfuse/metrics.hpp"

namespace semfuse::io {

namespace fs = std::filesystem;

inline constexpr std::array<char, 6> kTensorMagic{'S', 'F', 'T', 'E', 'N', '1'};
inline constexpr std::uint8_t kDtypeF32 = 1;

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

// ---------------------------------------------------------------------------
// number formatting

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

inline std::string format_fixed(double v, int decimals) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, decimals);
  return {buf.data(), res.ptr};
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

// ---------------------------------------------------------------------------
// whole-file helpers

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// tensors

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  auto bits = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.append(bits.data(), bits.size());
}

template <typename T>
T get_le(const char* p) {
  std::array<char, sizeof(T)> bits;
  std::memcpy(bits.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  return std::bit_cast<T>(bits);
}

}  // namespace detail

inline std::string encode_tensor(const Tensor& t) {
  if (t.dims.size() > 255) throw Error(ErrorCode::kInvalidArgument, "tensor has too many dimensions");
  if (t.element_count() != t.data.size()) throw Error(ErrorCode::kInvalidArgument, "tensor dims do not match payload");
  std::string out(kTensorMagic.begin(), kTensorMagic.end());
  out.push_back(static_cast<char>(kDtypeF32));
  out.push_back(static_cast<char>(t.dims.size()));
  for (auto d : t.dims) detail::put_le<std::uint32_t>(out, d);
  out.reserve(out.size() + 4 * t.data.size());
  for (float v : t.data) detail::put_le<float>(out, v);
  return out;
}

/// Parses a tensor file image; `source` names it in error messages.
inline Tensor decode_tensor(std::string_view bytes, const std::string& source) {
  const auto fail = [&](const std::string& why) -> Tensor {
    throw Error(ErrorCode::kMalformedFrame, source + ": " + why);
  };
  if (bytes.size() < 8 || !std::equal(kTensorMagic.begin(), kTensorMagic.end(), bytes.begin())) {
    return fail("missing SFTEN1 header");
  }
  if (static_cast<std::uint8_t>(bytes[6]) != kDtypeF32) return fail("unsupported dtype");
  const std::size_t ndims = static_cast<std::uint8_t>(bytes[7]);
  const std::size_t header = 8 + 4 * ndims;
  if (bytes.size() < header) return fail("truncated dimension list");
  Tensor t;
  for (std::size_t i = 0; i < ndims; ++i) t.dims.push_back(detail::get_le<std::uint32_t>(bytes.data() + 8 + 4 * i));
  const std::size_t n = t.element_count();
  if (bytes.size() != header + 4 * n) return fail("payload size does not match dimensions");
  t.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.data[i] = detail::get_le<float>(bytes.data() + header + 4 * i);
  return t;
}

inline void write_tensor(const fs::path& path, const Tensor& t) { write_file(path, encode_tensor(t)); }
inline Tensor read_tensor(const fs::path& path) { return decode_tensor(read_file(path), path.filename().string()); }

// ---------------------------------------------------------------------------
// poses.txt

struct PoseRecord {
  std::uint64_t frame_id = 0;
  double timestamp = 0.0;
  Pose pose;

  friend bool operator==(const PoseRecord&, const PoseRecord&) = default;
};

inline std::string encode_poses(const std::vector<PoseRecord>& poses) {
  std::string out;
  for (const auto& p : poses) {
    const auto& t = p.pose.translation;
    const auto& q = p.pose.rotation;
    out += std::to_string(p.frame_id);
    for (double v : {p.timestamp, t.x, t.y, t.z, q.x, q.y, q.z, q.w}) {
      out += ' ';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline std::vector<PoseRecord> decode_poses(std::string_view text, const std::string& source = "poses.txt") {
  std::vector<PoseRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto fields = split_ws(line);
    if (fields.empty() || fields[0].starts_with('#')) continue;
    PoseRecord r;
    std::array<double, 8> v{};
    bool ok = fields.size() == 9 && parse_number(fields[0], r.frame_id);
    for (std::size_t i = 0; ok && i < 8; ++i) ok = parse_number(fields[i + 1], v[i]);
    if (!ok) {
      throw Error(ErrorCode::kMalformedFrame, source + " line " + std::to_string(line_no) +
                                                  ": expected 'frame_id timestamp tx ty tz qx qy qz qw'");
    }
    r.timestamp = v[0];
    r.pose.translation = {v[1], v[2], v[3]};
    r.pose.rotation = {v[4], v[5], v[6], v[7]};
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// voxel label files (ground truth and maps): "ix iy iz label" per line, with
// an optional "# labels name0 name1 ..." header.

struct VoxelLabelFile {
  std::optional<std::vector<std::string>> labels;
  std::vector<VoxelLabel> rows;

  friend bool operator==(const VoxelLabelFile&, const VoxelLabelFile&) = default;
};

inline std::string encode_voxel_labels(const VoxelLabelFile& f) {
  std::string out;
  if (f.labels) {
    out += "# labels";
    for (const auto& n : *f.labels) {
      out += ' ';
      out += n;
    }
    out += '\n';
  }
  for (const auto& [key, label] : f.rows) {
    out += std::to_string(key.ix) + ' ' + std::to_string(key.iy) + ' ' + std::to_string(key.iz) + ' ' +
           std::to_string(label) + '\n';
  }
  return out;
}

inline VoxelLabelFile decode_voxel_labels(std::string_view text, const std::string& source) {
  VoxelLabelFile f;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields[0].starts_with('#')) {
      if (fields[0] == "#" && fields.size() >= 2 && fields[1] == "labels") {
        f.labels.emplace(fields.begin() + 2, fields.end());
      }
      continue;
    }
    VoxelKey k;
    std::size_t label = 0;
    if (fields.size() != 4 || !parse_number(fields[0], k.ix) || !parse_number(fields[1], k.iy) ||
        !parse_number(fields[2], k.iz) || !parse_number(fields[3], label)) {
      throw Error(ErrorCode::kInvalidArgument,
                  source + " line " + std::to_string(line_no) + ": expected 'ix iy iz label'");
    }
    f.rows.emplace_back(k, label);
  }
  return f;
}

inline void write_voxel_labels(const fs::path& path, const VoxelLabelFile& f) {
  write_file(path, encode_voxel_labels(f));
}

inline VoxelLabelFile read_voxel_labels(const fs::path& path) {
  return decode_voxel_labels(read_file(path), path.filename().string());
}

inline std::vector<VoxelLabel> to_voxel_labels(const std::vector<LabelledVoxel>& rows) {
  std::vector<VoxelLabel> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.emplace_back(r.key, r.label);
  return out;
}

// ---------------------------------------------------------------------------
// comparison CSV: strategy, iou_<class> x K, miou, accuracy

inline std::string csv_header(const LabelSet& labels) {
  std::string out = "strategy";
  for (const auto& n : labels.names()) out += ",iou_" + n;
  out += ",miou,accuracy\n";
  return out;
}

inline std::string csv_row(const ComparisonRow& row) {
  std::string out = row.strategy;
  for (const auto& iou : row.per_class_iou) out += "," + (iou ? format_fixed(*iou, 4) : std::string("nan"));
  out += "," + format_fixed(row.miou, 4) + "," + format_fixed(row.accuracy, 4) + "\n";
  return out;
}

inline std::string encode_comparison(const LabelSet& labels, const std::vector<ComparisonRow>& rows) {
  std::string out = csv_header(labels);
  for (const auto& r : rows) out += csv_row(r);
  return out;
}

}  // namespace semfuse::io
