// fodwb: synthetic FOD workbench driver.
//
// Subcommands: gen-data, split, train, predict, csd, compare, render.
// Exit codes: 0 success, 1 usage/config error, 2 data-format error,
// 3 numerical failure.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fodwb/workbench.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<uint64_t> seed;
};

fodwb::RunConfig resolve_config(const CommonOpts& opts) {
  fodwb::RunConfig cfg;
  if (!opts.config_path.empty()) cfg = fodwb::load_run_config(opts.config_path);
  if (opts.seed) {
    cfg.seed = *opts.seed;
    cfg.dataset.seed = *opts.seed;
    cfg.train.seed = *opts.seed;
  }
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON run configuration");
  cmd->add_option("--seed", opts.seed, "override the run seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic fiber-orientation workbench"};
  app.require_subcommand(1);

  CommonOpts common;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate the phantom dataset");
  add_common(gen, common);
  std::optional<int> gen_base, gen_rot, gen_dirs;
  std::optional<double> gen_snr;
  bool gen_noiseless = false;
  std::string gen_out;
  gen->add_option("--n-base", gen_base, "base voxel count");
  gen->add_option("--rotations", gen_rot, "augmentations per base voxel");
  gen->add_option("--n-directions", gen_dirs, "gradient direction count");
  gen->add_option("--snr", gen_snr, "linear SNR at b=0");
  gen->add_flag("--noiseless", gen_noiseless, "disable Rician noise");
  gen->add_option("--out", gen_out, "dataset path (JSON lines)");

  // split
  auto* split = app.add_subcommand("split", "group-aware train/test split");
  add_common(split, common);
  std::string split_data, split_train_out, split_test_out;
  std::optional<double> split_fraction;
  std::vector<int64_t> split_exclude;
  split->add_option("--data", split_data, "dataset to split");
  split->add_option("--test-fraction", split_fraction, "fraction of groups held out");
  split->add_option("--exclude", split_exclude, "group ids dropped before splitting");
  split->add_option("--train-out", split_train_out, "training split path");
  split->add_option("--test-out", split_test_out, "test split path");

  // train
  auto* tr = app.add_subcommand("train", "train the regression network");
  add_common(tr, common);
  std::string train_data, train_model_out, train_report_out;
  std::optional<int> train_epochs, train_batch, train_patience, train_folds;
  std::optional<double> train_lr;
  tr->add_option("--data", train_data, "training split path");
  tr->add_option("--out", train_model_out, "model output path");
  tr->add_option("--report", train_report_out, "per-fold history output path");
  tr->add_option("--max-epochs", train_epochs, "epoch cap");
  tr->add_option("--batch-size", train_batch, "minibatch size");
  tr->add_option("--patience", train_patience, "early-stop patience");
  tr->add_option("--n-folds", train_folds, "fold count");
  tr->add_option("--learning-rate", train_lr, "RMSprop learning rate");

  // predict
  auto* pr = app.add_subcommand("predict", "apply a trained model");
  add_common(pr, common);
  std::string pred_model, pred_data, pred_out;
  pr->add_option("--model", pred_model, "model path");
  pr->add_option("--data", pred_data, "samples to predict");
  pr->add_option("--out", pred_out, "predictions path");

  // csd
  auto* cs = app.add_subcommand("csd", "constrained spherical deconvolution baseline");
  add_common(cs, common);
  std::string csd_data, csd_out;
  cs->add_option("--data", csd_data, "samples to deconvolve");
  cs->add_option("--out", csd_out, "predictions path");

  // compare
  auto* cmp = app.add_subcommand("compare", "paired metric report for two prediction sets");
  add_common(cmp, common);
  std::string cmp_truth, cmp_a, cmp_b, cmp_out;
  cmp->add_option("--truth", cmp_truth, "truth samples path");
  cmp->add_option("--a", cmp_a, "first predictions path");
  cmp->add_option("--b", cmp_b, "second predictions path");
  cmp->add_option("--out", cmp_out, "report path");

  // render
  auto* rn = app.add_subcommand("render", "SVG glyph field of FODs");
  add_common(rn, common);
  std::string render_data, render_out;
  fodwb::RenderOptions render_opts;
  std::string render_norm = "per-voxel";
  rn->add_option("--data", render_data, "samples or predictions path");
  rn->add_option("--out", render_out, "SVG output path");
  rn->add_option("--field", render_opts.field, "fod_sh or signal_sh");
  rn->add_option("--cols", render_opts.n_cols, "grid columns (0 = square)");
  rn->add_option("--samples", render_opts.samples_per_glyph, "polar samples per glyph");
  rn->add_option("--max-glyphs", render_opts.max_glyphs, "cap on rendered cells");
  rn->add_option("--cell-px", render_opts.cell_px, "cell size in pixels");
  rn->add_option("--norm", render_norm, "per-voxel or global normalization");

  CLI11_PARSE(app, argc, argv);

  try {
    fodwb::RunConfig cfg = resolve_config(common);

    if (gen->parsed()) {
      if (gen_base) cfg.dataset.n_base_voxels = *gen_base;
      if (gen_rot) cfg.dataset.rotations_per_voxel = *gen_rot;
      if (gen_dirs) cfg.dataset.n_directions = *gen_dirs;
      if (gen_snr) cfg.dataset.snr = *gen_snr;
      if (gen_noiseless) cfg.dataset.snr.reset();
      if (!gen_out.empty()) cfg.paths.dataset = gen_out;
      const auto summary = fodwb::run_gen_data(cfg);
      std::printf("wrote %zu samples (%zu groups) to %s\n", summary.n_samples,
                  summary.n_groups, cfg.paths.dataset.c_str());
    } else if (split->parsed()) {
      if (!split_data.empty()) cfg.paths.dataset = split_data;
      if (split_fraction) cfg.test_fraction = *split_fraction;
      if (!split_exclude.empty()) cfg.exclude_groups = split_exclude;
      if (!split_train_out.empty()) cfg.paths.train_split = split_train_out;
      if (!split_test_out.empty()) cfg.paths.test_split = split_test_out;
      const auto summary = fodwb::run_split(cfg);
      std::printf("train: %zu samples (%zu groups); test: %zu samples (%zu groups)\n",
                  summary.n_train_samples, summary.n_train_groups,
                  summary.n_test_samples, summary.n_test_groups);
    } else if (tr->parsed()) {
      if (!train_data.empty()) cfg.paths.train_split = train_data;
      if (!train_model_out.empty()) cfg.paths.model = train_model_out;
      if (!train_report_out.empty()) cfg.paths.train_report = train_report_out;
      if (train_epochs) cfg.train.max_epochs = *train_epochs;
      if (train_batch) cfg.train.batch_size = *train_batch;
      if (train_patience) cfg.train.patience = *train_patience;
      if (train_folds) cfg.train.n_folds = *train_folds;
      if (train_lr) cfg.train.learning_rate = *train_lr;
      const auto result = fodwb::run_train(cfg);
      std::printf("best fold %d (val MSE %.6g); model written to %s\n",
                  result.best_fold,
                  result.histories[result.best_fold].best_val_mse,
                  cfg.paths.model.c_str());
    } else if (pr->parsed()) {
      if (pred_model.empty()) pred_model = cfg.paths.model;
      if (pred_data.empty()) pred_data = cfg.paths.test_split;
      if (pred_out.empty()) pred_out = cfg.paths.dnn_predictions;
      const size_t n = fodwb::run_predict(pred_model, pred_data, pred_out);
      std::printf("wrote %zu predictions to %s\n", n, pred_out.c_str());
    } else if (cs->parsed()) {
      if (csd_data.empty()) csd_data = cfg.paths.test_split;
      if (csd_out.empty()) csd_out = cfg.paths.csd_predictions;
      const size_t n = fodwb::run_csd(cfg, csd_data, csd_out);
      std::printf("wrote %zu predictions to %s\n", n, csd_out.c_str());
    } else if (cmp->parsed()) {
      if (cmp_truth.empty()) cmp_truth = cfg.paths.test_split;
      if (cmp_a.empty()) cmp_a = cfg.paths.dnn_predictions;
      if (cmp_b.empty()) cmp_b = cfg.paths.csd_predictions;
      if (cmp_out.empty()) cmp_out = cfg.paths.report;
      const auto report = fodwb::run_compare(cmp_truth, cmp_a, cmp_b, cmp_out);
      std::printf("%s median ACC %.4f, %s median ACC %.4f, p=%.3g (%s)\n",
                  report.a.name.c_str(), report.a.median_acc,
                  report.b.name.c_str(), report.b.median_acc,
                  report.wilcoxon_acc.p_two_sided,
                  report.wilcoxon_degenerate ? "no difference"
                                             : report.wilcoxon_acc.method.c_str());
    } else if (rn->parsed()) {
      if (render_data.empty()) render_data = cfg.paths.dnn_predictions;
      if (render_out.empty()) render_out = cfg.paths.figure;
      if (render_norm == "global")
        render_opts.norm = fodwb::GlyphScene::Norm::global;
      else if (render_norm != "per-voxel")
        throw fodwb::InvalidInput("--norm must be per-voxel or global");
      fodwb::run_render(render_data, render_out, render_opts);
      std::printf("wrote %s\n", render_out.c_str());
    }
    return 0;
  } catch (const fodwb::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
