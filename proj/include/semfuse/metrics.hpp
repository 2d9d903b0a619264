// Map-space evaluation against a ground-truth voxel labeling.
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semfuse/core.hpp"
#include "semfuse/fusion.hpp"

namespace semfuse {

using VoxelLabel = std::pair<VoxelKey, std::size_t>;

struct EvalReport {
  std::size_t num_classes = 0;
  std::vector<std::optional<double>> per_class_iou;  ///< empty for classes absent from GT and prediction
  double miou = 0.0;
  double accuracy = 0.0;
  std::vector<std::vector<std::uint64_t>> confusion;  ///< [gt][pred], over voxels keyed in both
  std::vector<std::uint64_t> true_positive;
  std::vector<std::uint64_t> false_positive;
  std::vector<std::uint64_t> false_negative;
  std::size_t gt_voxels = 0;
  std::size_t predicted_voxels = 0;
  std::size_t matched_voxels = 0;  ///< GT voxels that also have a prediction
};

namespace detail {

inline std::map<VoxelKey, std::size_t> index_labels(std::span<const VoxelLabel> rows, std::size_t k,
                                                    const char* what) {
  std::map<VoxelKey, std::size_t> out;
  for (const auto& [key, label] : rows) {
    if (label >= k) {
      throw Error(ErrorCode::kLabelSetMismatch, std::string(what) + " label " + std::to_string(label) +
                                                    " outside a " + std::to_string(k) + "-class set");
    }
    if (!out.emplace(key, label).second) {
      throw Error(ErrorCode::kInvalidArgument, std::string("duplicate voxel key in ") + what);
    }
  }
  return out;
}

}  // namespace detail

/// Per-class IoU = TP / (TP + FP + FN) over the union of keyed voxels.
/// Unpredicted GT voxels are false negatives, prediction-only voxels false
/// positives. Accuracy counts correct labels over all GT voxels.
inline EvalReport evaluate(std::span<const VoxelLabel> pred, std::span<const VoxelLabel> gt,
                           std::size_t num_classes) {
  if (gt.empty()) throw Error(ErrorCode::kEmptyGroundTruth, "ground truth has no voxels");
  const auto pred_map = detail::index_labels(pred, num_classes, "prediction");
  const auto gt_map = detail::index_labels(gt, num_classes, "ground truth");

  EvalReport r;
  r.num_classes = num_classes;
  r.confusion.assign(num_classes, std::vector<std::uint64_t>(num_classes, 0));
  r.true_positive.assign(num_classes, 0);
  r.false_positive.assign(num_classes, 0);
  r.false_negative.assign(num_classes, 0);
  r.gt_voxels = gt_map.size();
  r.predicted_voxels = pred_map.size();

  for (const auto& [key, g] : gt_map) {
    const auto it = pred_map.find(key);
    if (it == pred_map.end()) {
      ++r.false_negative[g];
      continue;
    }
    ++r.matched_voxels;
    ++r.confusion[g][it->second];
    if (it->second == g) {
      ++r.true_positive[g];
    } else {
      ++r.false_negative[g];
      ++r.false_positive[it->second];
    }
  }
  for (const auto& [key, p] : pred_map) {
    if (!gt_map.contains(key)) ++r.false_positive[p];
  }

  double sum = 0.0;
  std::size_t present = 0;
  std::uint64_t correct = 0;
  r.per_class_iou.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    correct += r.true_positive[c];
    const std::uint64_t denom = r.true_positive[c] + r.false_positive[c] + r.false_negative[c];
    if (denom == 0) continue;
    const double iou = static_cast<double>(r.true_positive[c]) / static_cast<double>(denom);
    r.per_class_iou[c] = iou;
    sum += iou;
    ++present;
  }
  r.miou = present > 0 ? sum / static_cast<double>(present) : 0.0;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.gt_voxels);
  return r;
}

/// GT rows whose key appears in the prediction.
inline std::vector<VoxelLabel> restrict_to_observed(std::span<const VoxelLabel> gt, std::span<const VoxelLabel> pred) {
  std::vector<VoxelKey> keys;
  keys.reserve(pred.size());
  for (const auto& row : pred) keys.push_back(row.first);
  std::sort(keys.begin(), keys.end());
  std::vector<VoxelLabel> out;
  for (const auto& row : gt) {
    if (std::binary_search(keys.begin(), keys.end(), row.first)) out.push_back(row);
  }
  return out;
}

struct ComparisonRow {
  std::string strategy;
  std::vector<std::optional<double>> per_class_iou;
  double miou = 0.0;
  double accuracy = 0.0;
};

/// One row per report. Known strategy names are placed in table order
/// (SumProbs, SumLabels, Bayesian, R, D, D+R); other names follow in input order.
inline std::vector<ComparisonRow> compare_strategies(const std::vector<std::pair<std::string, EvalReport>>& reports) {
  std::vector<std::pair<int, ComparisonRow>> ranked;
  if (!reports.empty()) {
    const std::size_t k = reports.front().second.num_classes;
    for (const auto& [name, report] : reports) {
      if (report.num_classes != k) {
        throw Error(ErrorCode::kLabelSetMismatch, "report '" + name + "' uses a different label set");
      }
      int rank = 100;
      try {
        rank = FusionStrategy::parse(name).rank();
      } catch (const Error&) {
      }
      ranked.push_back({rank, {name, report.per_class_iou, report.miou, report.accuracy}});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<ComparisonRow> rows;
  rows.reserve(ranked.size());
  for (auto& [rank, row] : ranked) rows.push_back(std::move(row));
  return rows;
}

}  // namespace semfuse
