#include "fodwb/workbench.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "fodwb/parallel.hpp"
#include "fodwb/rng.hpp"

namespace fodwb {

using nlohmann::json;

namespace {

constexpr uint64_t kSplitStreamSalt = 0x73706C69745F3031ULL;

json parse_object(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw FormatError(what + " is not a JSON object");
  return j;
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void append_histogram(std::string& out, const Histogram& h) {
  out += "{\"edges\":[";
  for (size_t i = 0; i < h.edges.size(); ++i) {
    if (i) out += ",";
    out += format_double(h.edges[i]);
  }
  out += "],\"counts\":[";
  for (size_t i = 0; i < h.counts.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(h.counts[i]);
  }
  out += "],\"below\":" + std::to_string(h.below);
  out += ",\"above\":" + std::to_string(h.above) + "}";
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  const json j = parse_object(text, "run config");
  RunConfig cfg;
  read_field(j, "seed", cfg.seed);
  cfg.dataset.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  read_field(j, "test_fraction", cfg.test_fraction);
  read_field(j, "exclude_groups", cfg.exclude_groups);
  if (!(cfg.test_fraction > 0.0) || !(cfg.test_fraction < 1.0))
    throw InvalidInput("test_fraction must lie in (0, 1)");

  if (j.contains("paths")) {
    const json& p = j.at("paths");
    read_field(p, "scheme_bvec", cfg.paths.scheme_bvec);
    read_field(p, "scheme_bval", cfg.paths.scheme_bval);
    read_field(p, "dataset", cfg.paths.dataset);
    read_field(p, "dataset_meta", cfg.paths.dataset_meta);
    read_field(p, "train_split", cfg.paths.train_split);
    read_field(p, "test_split", cfg.paths.test_split);
    read_field(p, "model", cfg.paths.model);
    read_field(p, "train_report", cfg.paths.train_report);
    read_field(p, "dnn_predictions", cfg.paths.dnn_predictions);
    read_field(p, "csd_predictions", cfg.paths.csd_predictions);
    read_field(p, "report", cfg.paths.report);
    read_field(p, "figure", cfg.paths.figure);
  }
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    read_field(d, "n_base_voxels", cfg.dataset.n_base_voxels);
    read_field(d, "rotations_per_voxel", cfg.dataset.rotations_per_voxel);
    read_field(d, "n_directions", cfg.dataset.n_directions);
    read_field(d, "bvalue", cfg.dataset.bvalue);
    if (d.contains("snr")) {
      if (d.at("snr").is_null())
        cfg.dataset.snr.reset();
      else
        cfg.dataset.snr = d.at("snr").get<double>();
    }
    read_field(d, "crossing_min_deg", cfg.dataset.crossing_min_deg);
    read_field(d, "crossing_max_deg", cfg.dataset.crossing_max_deg);
    read_field(d, "fraction_floor", cfg.dataset.fraction_floor);
    read_field(d, "axial_diffusivity", cfg.dataset.axial_diffusivity);
    read_field(d, "radial_diffusivity", cfg.dataset.radial_diffusivity);
    read_field(d, "mix_one", cfg.dataset.mix_one);
    read_field(d, "mix_two", cfg.dataset.mix_two);
    if (d.contains("lb_lambda")) cfg.dataset.lb_lambda = d.at("lb_lambda").get<double>();
    read_field(d, "seed", cfg.dataset.seed);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    read_field(t, "hidden_dims", cfg.train.hidden_dims);
    read_field(t, "learning_rate", cfg.train.learning_rate);
    read_field(t, "rms_decay", cfg.train.rms_decay);
    read_field(t, "epsilon", cfg.train.epsilon);
    read_field(t, "batch_size", cfg.train.batch_size);
    read_field(t, "max_epochs", cfg.train.max_epochs);
    read_field(t, "patience", cfg.train.patience);
    read_field(t, "n_folds", cfg.train.n_folds);
    read_field(t, "val_fraction", cfg.train.val_fraction);
    read_field(t, "seed", cfg.train.seed);
  }
  if (j.contains("csd")) {
    const json& c = j.at("csd");
    read_field(c, "n_constraint_dirs", cfg.csd.n_constraint_dirs);
    read_field(c, "tau", cfg.csd.tau);
    read_field(c, "lambda", cfg.csd.lambda);
    read_field(c, "max_iters", cfg.csd.max_iters);
    read_field(c, "init_order", cfg.csd.init_order);
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_file(path));
}

void write_dataset_meta(const std::string& path, const DatasetConfig& cfg) {
  std::string out = "{\n";
  out += "  \"seed\": " + std::to_string(cfg.seed) + ",\n";
  out += "  \"n_base_voxels\": " + std::to_string(cfg.n_base_voxels) + ",\n";
  out += "  \"rotations_per_voxel\": " + std::to_string(cfg.rotations_per_voxel) + ",\n";
  out += "  \"n_directions\": " + std::to_string(cfg.n_directions) + ",\n";
  out += "  \"bvalue\": " + format_double(cfg.bvalue) + ",\n";
  out += "  \"snr\": " + (cfg.snr ? format_double(*cfg.snr) : "null") + ",\n";
  out += "  \"crossing_min_deg\": " + format_double(cfg.crossing_min_deg) + ",\n";
  out += "  \"crossing_max_deg\": " + format_double(cfg.crossing_max_deg) + ",\n";
  out += "  \"fraction_floor\": " + format_double(cfg.fraction_floor) + ",\n";
  out += "  \"axial_diffusivity\": " + format_double(cfg.axial_diffusivity) + ",\n";
  out += "  \"radial_diffusivity\": " + format_double(cfg.radial_diffusivity) + ",\n";
  out += "  \"mix_one\": " + format_double(cfg.mix_one) + ",\n";
  out += "  \"mix_two\": " + format_double(cfg.mix_two) + ",\n";
  out += "  \"lb_lambda\": " + format_double(cfg.effective_lambda()) + "\n";
  out += "}\n";
  atomic_write_file(path, out);
}

DatasetConfig read_dataset_meta(const std::string& path) {
  const json j = parse_object(read_file(path), "dataset meta");
  DatasetConfig cfg;
  read_field(j, "seed", cfg.seed);
  read_field(j, "n_base_voxels", cfg.n_base_voxels);
  read_field(j, "rotations_per_voxel", cfg.rotations_per_voxel);
  read_field(j, "n_directions", cfg.n_directions);
  read_field(j, "bvalue", cfg.bvalue);
  if (j.contains("snr")) {
    if (j.at("snr").is_null())
      cfg.snr.reset();
    else
      cfg.snr = j.at("snr").get<double>();
  }
  read_field(j, "crossing_min_deg", cfg.crossing_min_deg);
  read_field(j, "crossing_max_deg", cfg.crossing_max_deg);
  read_field(j, "fraction_floor", cfg.fraction_floor);
  read_field(j, "axial_diffusivity", cfg.axial_diffusivity);
  read_field(j, "radial_diffusivity", cfg.radial_diffusivity);
  read_field(j, "mix_one", cfg.mix_one);
  read_field(j, "mix_two", cfg.mix_two);
  if (j.contains("lb_lambda")) cfg.lb_lambda = j.at("lb_lambda").get<double>();
  return cfg;
}

GenDataSummary run_gen_data(const RunConfig& cfg) {
  const GradientScheme scheme =
      make_gradient_scheme(cfg.dataset.n_directions, cfg.dataset.bvalue);
  write_scheme(cfg.paths.scheme_bvec, cfg.paths.scheme_bval, scheme);

  const std::vector<VoxelSample> samples = generate_dataset(cfg.dataset);
  write_samples(cfg.paths.dataset, samples);
  write_dataset_meta(cfg.paths.dataset_meta, cfg.dataset);

  GenDataSummary summary;
  summary.n_samples = samples.size();
  std::unordered_set<int64_t> groups;
  for (const auto& s : samples) groups.insert(s.group_id);
  summary.n_groups = groups.size();
  return summary;
}

void split_by_groups(const std::vector<VoxelSample>& samples,
                     double test_fraction, uint64_t seed,
                     const std::vector<int64_t>& exclude_groups,
                     std::vector<VoxelSample>& train_out,
                     std::vector<VoxelSample>& test_out) {
  if (!(test_fraction > 0.0) || !(test_fraction < 1.0))
    throw InvalidInput("test_fraction must lie in (0, 1)");
  const std::unordered_set<int64_t> excluded(exclude_groups.begin(),
                                             exclude_groups.end());

  std::vector<int64_t> groups;
  {
    std::unordered_set<int64_t> seen;
    for (const auto& s : samples) {
      if (excluded.count(s.group_id)) continue;
      if (seen.insert(s.group_id).second) groups.push_back(s.group_id);
    }
  }
  std::sort(groups.begin(), groups.end());
  if (groups.size() < 2) throw TooFewGroups("need at least 2 groups to split");

  RngStream rng(seed, kSplitStreamSalt);
  rng.shuffle(groups.data(), groups.size());

  size_t n_test = static_cast<size_t>(
      std::llround(test_fraction * static_cast<double>(groups.size())));
  n_test = std::clamp<size_t>(n_test, 1, groups.size() - 1);
  const std::unordered_set<int64_t> test_groups(groups.begin(),
                                                groups.begin() + n_test);

  train_out.clear();
  test_out.clear();
  for (const auto& s : samples) {
    if (excluded.count(s.group_id)) continue;
    if (test_groups.count(s.group_id))
      test_out.push_back(s);
    else
      train_out.push_back(s);
  }
}

SplitSummary run_split(const RunConfig& cfg) {
  const std::vector<VoxelSample> samples = read_samples(cfg.paths.dataset);
  std::vector<VoxelSample> train_samples, test_samples;
  split_by_groups(samples, cfg.test_fraction, cfg.seed, cfg.exclude_groups,
                  train_samples, test_samples);
  write_samples(cfg.paths.train_split, train_samples);
  write_samples(cfg.paths.test_split, test_samples);

  SplitSummary summary;
  summary.n_train_samples = train_samples.size();
  summary.n_test_samples = test_samples.size();
  std::unordered_set<int64_t> train_groups, test_groups;
  for (const auto& s : train_samples) train_groups.insert(s.group_id);
  for (const auto& s : test_samples) test_groups.insert(s.group_id);
  summary.n_train_groups = train_groups.size();
  summary.n_test_groups = test_groups.size();
  return summary;
}

TrainResult run_train(const RunConfig& cfg) {
  const std::vector<VoxelSample> samples = read_samples(cfg.paths.train_split);
  TrainResult result = train(samples, cfg.train);
  write_model(cfg.paths.model, result.model, cfg.train);

  std::string report = "{\n  \"best_fold\": " + std::to_string(result.best_fold);
  report += ",\n  \"folds\": [";
  for (size_t f = 0; f < result.histories.size(); ++f) {
    const FoldHistory& h = result.histories[f];
    if (f) report += ",";
    report += "\n    {\"best_epoch\": " + std::to_string(h.best_epoch);
    report += ", \"best_val_mse\": " + format_double(h.best_val_mse);
    report += ", \"train_mse\": [";
    for (size_t e = 0; e < h.train_mse.size(); ++e) {
      if (e) report += ",";
      report += format_double(h.train_mse[e]);
    }
    report += "], \"val_mse\": [";
    for (size_t e = 0; e < h.val_mse.size(); ++e) {
      if (e) report += ",";
      report += format_double(h.val_mse[e]);
    }
    report += "]}";
  }
  report += "\n  ]\n}\n";
  atomic_write_file(cfg.paths.train_report, report);
  return result;
}

std::vector<PredictionRecord> predict_dataset(
    const MLPModel& model, const std::vector<VoxelSample>& samples) {
  std::vector<PredictionRecord> out(samples.size());
  parallel_for_each(samples.size(), [&](size_t i) {
    const std::vector<double> fod = predict(model, samples[i].signal_sh.coeffs);
    PredictionRecord& p = out[i];
    p.group_id = samples[i].group_id;
    p.rotation = samples[i].rotation;
    p.method = "dnn";
    p.fod_sh = SHCoeffs(kFodOrder);
    p.fod_sh.coeffs = fod;
  });
  return out;
}

size_t run_predict(const std::string& model_path, const std::string& data_path,
                   const std::string& out_path) {
  const MLPModel model = read_model(model_path);
  if (model.dims.front() != num_coeffs(kSignalOrder) ||
      model.dims.back() != num_coeffs(kFodOrder))
    throw FormatError("model endpoint widths must be 45 and 66");
  const std::vector<VoxelSample> samples = read_samples(data_path);
  const auto predictions = predict_dataset(model, samples);
  write_predictions(out_path, predictions);
  return predictions.size();
}

std::vector<PredictionRecord> csd_dataset(const std::vector<VoxelSample>& samples,
                                          const ResponseFunction& resp,
                                          const CsdParams& params) {
  std::vector<PredictionRecord> out(samples.size());
  parallel_for_each(samples.size(), [&](size_t i) {
    const CsdResult result = csd_deconvolve(samples[i].signal_sh, resp, params);
    PredictionRecord& p = out[i];
    p.group_id = samples[i].group_id;
    p.rotation = samples[i].rotation;
    p.method = "csd";
    p.fod_sh = result.fod;
  });
  return out;
}

size_t run_csd(const RunConfig& cfg, const std::string& data_path,
               const std::string& out_path) {
  DatasetConfig meta = cfg.dataset;
  try {
    meta = read_dataset_meta(cfg.paths.dataset_meta);
  } catch (const FormatError&) {
    // fall back to the configured values when no meta file exists
  }
  const GradientScheme scheme =
      read_scheme(cfg.paths.scheme_bvec, cfg.paths.scheme_bval);
  const ResponseFunction resp = calibrate_response(
      meta.axial_diffusivity, meta.radial_diffusivity, scheme);
  const std::vector<VoxelSample> samples = read_samples(data_path);
  const auto predictions = csd_dataset(samples, resp, cfg.csd);
  write_predictions(out_path, predictions);
  return predictions.size();
}

ComparisonReport compare_predictions(const std::vector<VoxelSample>& truth,
                                     const std::vector<PredictionRecord>& a,
                                     const std::vector<PredictionRecord>& b) {
  if (truth.empty()) throw EmptyInput("no voxels to compare");
  if (a.size() != truth.size() || b.size() != truth.size())
    throw AlignmentError("line counts differ: truth " +
                         std::to_string(truth.size()) + ", A " +
                         std::to_string(a.size()) + ", B " +
                         std::to_string(b.size()));
  for (size_t i = 0; i < truth.size(); ++i) {
    if (a[i].group_id != truth[i].group_id || b[i].group_id != truth[i].group_id)
      throw AlignmentError("group id mismatch at line " + std::to_string(i));
  }

  ComparisonReport report;
  report.n_voxels = truth.size();
  report.a.name = a.front().method;
  report.b.name = b.front().method;

  report.per_voxel.resize(truth.size());
  parallel_for_each(truth.size(), [&](size_t i) {
    PairedMetricsRecord& r = report.per_voxel[i];
    r.voxel = static_cast<int64_t>(i);
    r.group_id = truth[i].group_id;
    r.acc_a = acc(a[i].fod_sh, truth[i].fod_sh);
    r.acc_b = acc(b[i].fod_sh, truth[i].fod_sh);
    r.mse_a = mse_coeffs(a[i].fod_sh, truth[i].fod_sh);
    r.mse_b = mse_coeffs(b[i].fod_sh, truth[i].fod_sh);
  });

  std::vector<double> acc_a_values(truth.size()), acc_b_values(truth.size());
  std::vector<double> mse_a_values(truth.size()), mse_b_values(truth.size());
  std::vector<std::pair<double, double>> pairs(truth.size());
  for (size_t i = 0; i < truth.size(); ++i) {
    const auto& r = report.per_voxel[i];
    acc_a_values[i] = r.acc_a;
    acc_b_values[i] = r.acc_b;
    mse_a_values[i] = r.mse_a;
    mse_b_values[i] = r.mse_b;
    pairs[i] = {r.acc_a, r.acc_b};
  }

  report.a.median_acc = median(acc_a_values);
  report.b.median_acc = median(acc_b_values);
  report.a.rmse_value = rmse(mse_a_values);
  report.b.rmse_value = rmse(mse_b_values);
  report.a.acc_hist = histogram(acc_a_values, 30, -1.0, 1.0);
  report.b.acc_hist = histogram(acc_b_values, 30, -1.0, 1.0);

  try {
    report.wilcoxon_acc = wilcoxon_signed_rank(pairs);
  } catch (const DegenerateInput&) {
    report.wilcoxon_degenerate = true;
    report.wilcoxon_acc.statistic = 0.0;
    report.wilcoxon_acc.n_effective = 0;
    report.wilcoxon_acc.p_two_sided = 1.0;
    report.wilcoxon_acc.method = "degenerate";
  }
  return report;
}

std::string report_to_json(const ComparisonReport& report) {
  std::string out = "{\n";
  out += "  \"n_voxels\": " + std::to_string(report.n_voxels) + ",\n";
  out += "  \"methods\": [\n";
  for (const MethodSummary* m : {&report.a, &report.b}) {
    out += "    {\"name\": \"" + m->name + "\", \"median_acc\": ";
    out += format_double(m->median_acc);
    out += ", \"rmse\": " + format_double(m->rmse_value) + "}";
    out += (m == &report.a) ? ",\n" : "\n";
  }
  out += "  ],\n";
  out += "  \"wilcoxon_acc\": {\"status\": ";
  out += report.wilcoxon_degenerate ? "\"no difference\"" : "\"ok\"";
  out += ", \"statistic\": " + format_double(report.wilcoxon_acc.statistic);
  out += ", \"n_effective\": " + std::to_string(report.wilcoxon_acc.n_effective);
  out += ", \"p_two_sided\": " + format_double(report.wilcoxon_acc.p_two_sided);
  out += ", \"method\": \"" + report.wilcoxon_acc.method + "\"},\n";
  out += "  \"histograms\": {\n    \"" + report.a.name + "\": ";
  append_histogram(out, report.a.acc_hist);
  out += ",\n    \"" + report.b.name + "\": ";
  append_histogram(out, report.b.acc_hist);
  out += "\n  },\n  \"per_voxel\": [\n";
  for (size_t i = 0; i < report.per_voxel.size(); ++i) {
    const auto& r = report.per_voxel[i];
    out += "    {\"voxel\": " + std::to_string(r.voxel);
    out += ", \"group_id\": " + std::to_string(r.group_id);
    out += ", \"acc_" + report.a.name + "\": " + format_double(r.acc_a);
    out += ", \"acc_" + report.b.name + "\": " + format_double(r.acc_b);
    out += ", \"mse_" + report.a.name + "\": " + format_double(r.mse_a);
    out += ", \"mse_" + report.b.name + "\": " + format_double(r.mse_b);
    out += i + 1 < report.per_voxel.size() ? "},\n" : "}\n";
  }
  out += "  ]\n}\n";
  return out;
}

ComparisonReport run_compare(const std::string& truth_path,
                             const std::string& a_path,
                             const std::string& b_path,
                             const std::string& report_path) {
  const std::vector<VoxelSample> truth = read_samples(truth_path);
  const std::vector<PredictionRecord> a = read_predictions(a_path);
  const std::vector<PredictionRecord> b = read_predictions(b_path);
  const ComparisonReport report = compare_predictions(truth, a, b);
  atomic_write_file(report_path, report_to_json(report));
  return report;
}

void run_render(const std::string& data_path, const std::string& out_path,
                const RenderOptions& options) {
  GlyphScene scene;
  scene.n_cols = options.n_cols;
  scene.samples_per_glyph = options.samples_per_glyph;
  scene.cell_px = options.cell_px;
  scene.norm = options.norm;

  if (options.field != "fod_sh" && options.field != "signal_sh")
    throw InvalidInput("field must be fod_sh or signal_sh");

  // Predictions and datasets share the fod_sh field; fall back between them.
  std::vector<std::string> errors;
  try {
    const auto samples = read_samples(data_path);
    for (const auto& s : samples) {
      scene.cells.push_back(options.field == "signal_sh" ? s.signal_sh
                                                         : s.fod_sh);
      if (static_cast<int>(scene.cells.size()) >= options.max_glyphs) break;
    }
  } catch (const FormatError&) {
    const auto predictions = read_predictions(data_path);
    if (options.field == "signal_sh")
      throw InvalidInput("prediction files carry no signal_sh field");
    for (const auto& p : predictions) {
      scene.cells.push_back(p.fod_sh);
      if (static_cast<int>(scene.cells.size()) >= options.max_glyphs) break;
    }
  }
  atomic_write_file(out_path, render_svg(scene));
}

}  // namespace fodwb
