#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fodwb/csd.hpp"
#include "fodwb/dataset_io.hpp"
#include "fodwb/metrics.hpp"
#include "fodwb/mlp.hpp"
#include "fodwb/phantom.hpp"
#include "fodwb/render.hpp"

namespace fodwb {

struct Paths {
  std::string scheme_bvec = "scheme.bvec";
  std::string scheme_bval = "scheme.bval";
  std::string dataset = "dataset.jsonl";
  std::string dataset_meta = "dataset.meta.json";
  std::string train_split = "train.jsonl";
  std::string test_split = "test.jsonl";
  std::string model = "model.json";
  std::string train_report = "train_report.json";
  std::string dnn_predictions = "pred_dnn.jsonl";
  std::string csd_predictions = "pred_csd.jsonl";
  std::string report = "report.json";
  std::string figure = "glyphs.svg";
};

// Everything a full run needs; one seed governs dataset, split and training
// unless the per-section seeds are set explicitly in the config file.
struct RunConfig {
  uint64_t seed = 42;
  Paths paths;
  DatasetConfig dataset;
  TrainConfig train;
  CsdParams csd;
  double test_fraction = 7272.0 / 57267.0;
  std::vector<int64_t> exclude_groups;
};

RunConfig load_run_config(const std::string& path);
// Applies a JSON config string onto defaults; used by load_run_config.
RunConfig parse_run_config(const std::string& text);

struct GenDataSummary {
  size_t n_samples = 0;
  size_t n_groups = 0;
};

struct SplitSummary {
  size_t n_train_samples = 0;
  size_t n_test_samples = 0;
  size_t n_train_groups = 0;
  size_t n_test_groups = 0;
};

struct MethodSummary {
  std::string name;
  double median_acc = 0.0;
  double rmse_value = 0.0;
  Histogram acc_hist;
};

struct ComparisonReport {
  size_t n_voxels = 0;
  MethodSummary a;
  MethodSummary b;
  SignedRankResult wilcoxon_acc;  // on (acc_a - acc_b)
  bool wilcoxon_degenerate = false;
  std::vector<PairedMetricsRecord> per_voxel;
};

struct RenderOptions {
  std::string field = "fod_sh";  // or "signal_sh" for dataset files
  int n_cols = 0;
  int samples_per_glyph = 128;
  int max_glyphs = 64;
  double cell_px = 48.0;
  GlyphScene::Norm norm = GlyphScene::Norm::per_voxel;
};

GenDataSummary run_gen_data(const RunConfig& cfg);
SplitSummary run_split(const RunConfig& cfg);
TrainResult run_train(const RunConfig& cfg);
size_t run_predict(const std::string& model_path, const std::string& data_path,
                   const std::string& out_path);
size_t run_csd(const RunConfig& cfg, const std::string& data_path,
               const std::string& out_path);
ComparisonReport run_compare(const std::string& truth_path,
                             const std::string& a_path,
                             const std::string& b_path,
                             const std::string& report_path);
void run_render(const std::string& data_path, const std::string& out_path,
                const RenderOptions& options);

// In-memory pieces shared by commands and tests.
std::vector<PredictionRecord> predict_dataset(const MLPModel& model,
                                              const std::vector<VoxelSample>& samples);
std::vector<PredictionRecord> csd_dataset(const std::vector<VoxelSample>& samples,
                                          const ResponseFunction& resp,
                                          const CsdParams& params);
ComparisonReport compare_predictions(const std::vector<VoxelSample>& truth,
                                     const std::vector<PredictionRecord>& a,
                                     const std::vector<PredictionRecord>& b);
std::string report_to_json(const ComparisonReport& report);

void write_dataset_meta(const std::string& path, const DatasetConfig& cfg);
DatasetConfig read_dataset_meta(const std::string& path);

// Group-aware split of samples (all rotations of a group stay together).
void split_by_groups(const std::vector<VoxelSample>& samples,
                     double test_fraction, uint64_t seed,
                     const std::vector<int64_t>& exclude_groups,
                     std::vector<VoxelSample>& train_out,
                     std::vector<VoxelSample>& test_out);

}  // namespace fodwb
