// semfuse: simulate datasets, fuse them into semantic voxel maps, evaluate
// maps against ground truth and compare fusion strategies.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "semfuse/config.hpp"
#include "semfuse/experiment.hpp"

namespace {

namespace fs = std::filesystem;
using namespace semfuse;

// Documented exit codes; 0 means success.
int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return 3;
    case ErrorCode::kIo: return 4;
    case ErrorCode::kMalformedFrame: return 5;
    case ErrorCode::kOrderViolation: return 6;
    case ErrorCode::kEmptyGroundTruth: return 7;
    case ErrorCode::kLabelSetMismatch: return 8;
    case ErrorCode::kInvalidScene: return 9;
    case ErrorCode::kDegenerateDistribution: return 10;
    case ErrorCode::kInvalidArgument: return 11;
  }
  return 1;
}

struct Options {
  std::string config;
  std::string strategy;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> stride;
  std::string dataset;
  std::string map;
  std::string gt;
  bool observed_only = false;
};

ExperimentConfig load(const Options& o) {
  ExperimentConfig cfg = load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.stride) cfg.map.stride = *o.stride;
  cfg.validate();
  return cfg;
}

int cmd_simulate(const Options& o) {
  const ExperimentConfig cfg = load(o);
  const fs::path out = o.out.empty() ? fs::path(cfg.output_dir) / "dataset" : fs::path(o.out);
  const SimulationSummary s = simulate_dataset(cfg, out);
  std::cout << "frames " << s.frames << "\nvalid_pixels " << s.valid_pixels << "\noutlier_pixels "
            << s.outlier_pixels << "\ngt_voxels " << s.gt_voxels << "\ndataset " << out.string() << "\n";
  return 0;
}

int cmd_fuse(const Options& o) {
  const ExperimentConfig cfg = load(o);
  const FusionStrategy strategy = FusionStrategy::parse(o.strategy);
  const FuseResult r = fuse_dataset(o.dataset, strategy, cfg);
  const fs::path out = o.out.empty() ? fs::path(cfg.output_dir) / (std::string(strategy.name()) + ".txt")
                                     : fs::path(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_map(out, r);
  std::cout << "strategy " << strategy.name() << "\nframes " << r.summary.frames << "\npixels_considered "
            << r.summary.pixels_considered << "\npixels_used " << r.summary.pixels_used << "\npixels_skipped "
            << r.summary.pixels_skipped << "\nvoxels " << r.summary.voxels << "\nmap " << out.string() << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  std::optional<std::vector<std::string>> labels;
  if (!o.config.empty()) labels = load(o).labels;
  const FileEvaluation e = evaluate_files(o.map, o.gt, o.observed_only, labels);
  const std::string name = o.strategy.empty() ? fs::path(o.map).stem().string() : o.strategy;
  const ComparisonRow row{name, e.report.per_class_iou, e.report.miou, e.report.accuracy};
  const std::string json = report_json(e.report, e.labels, name).dump(2) + "\n";
  const std::string csv = io::csv_header(e.labels) + io::csv_row(row);
  if (o.out.empty()) {
    std::cout << json << csv;
  } else {
    io::write_file(o.out + ".json", json);
    io::write_file(o.out + ".csv", csv);
    std::cout << csv;
  }
  return 0;
}

int cmd_compare(const Options& o) {
  const ExperimentConfig cfg = load(o);
  const fs::path out = o.out.empty() ? fs::path(cfg.output_dir) : fs::path(o.out);
  const CompareResult r = run_compare(cfg, out);
  std::cout << r.csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust semantic voxel fusion: simulate, fuse, eval, compare"};
  app.require_subcommand(1);
  Options o;

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset directory");
  simulate->add_option("--config", o.config, "Experiment config (JSON)")->required();
  simulate->add_option("--out", o.out, "Dataset directory (default <output_dir>/dataset)");
  simulate->add_option("--seed", o.seed, "Override the config seed");

  auto* fuse = app.add_subcommand("fuse", "Fuse a dataset into a voxel label map");
  fuse->add_option("dataset", o.dataset, "Dataset directory")->required();
  fuse->add_option("--config", o.config, "Experiment config (JSON)")->required();
  fuse->add_option("--strategy", o.strategy, "sum_probs|sum_labels|bayesian|robust_r|robust_d|robust_dr|robust_none")
      ->required();
  fuse->add_option("--out", o.out, "Map file");
  fuse->add_option("--stride", o.stride, "Integrate every n-th pixel in each direction");
  fuse->add_option("--seed", o.seed, "Override the config seed");

  auto* eval = app.add_subcommand("eval", "Evaluate a map file against ground truth");
  eval->add_option("map", o.map, "Map file")->required();
  eval->add_option("gt", o.gt, "Ground-truth voxel file")->required();
  eval->add_option("--config", o.config, "Config whose label set both files must use");
  eval->add_option("--strategy", o.strategy, "Row name in the CSV output");
  eval->add_option("--out", o.out, "Write <out>.json and <out>.csv instead of printing the JSON");
  eval->add_flag("--observed-only", o.observed_only, "Ignore ground-truth voxels absent from the map");

  auto* compare = app.add_subcommand("compare", "Simulate once and compare every configured strategy");
  compare->add_option("--config", o.config, "Experiment config (JSON)")->required();
  compare->add_option("--out", o.out, "Output directory (default <output_dir>)");
  compare->add_option("--seed", o.seed, "Override the config seed");
  compare->add_option("--stride", o.stride, "Integrate every n-th pixel in each direction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(o);
    if (fuse->parsed()) return cmd_fuse(o);
    if (eval->parsed()) return cmd_eval(o);
    if (compare->parsed()) return cmd_compare(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(ErrorCode::kIo);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
