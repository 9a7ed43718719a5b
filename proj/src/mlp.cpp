#include "fodwb/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "fodwb/kernels.hpp"
#include "fodwb/parallel.hpp"
#include "fodwb/rng.hpp"

namespace fodwb {

namespace {

constexpr uint64_t kInitStreamSalt = 0x696E69745F6D6C70ULL;
constexpr uint64_t kFoldStreamSalt = 0x666F6C645F726E67ULL;
constexpr uint64_t kShuffleStreamSalt = 0x73687566666C6531ULL;

void check_model(const MLPModel& model) {
  if (model.dims.size() < 2) throw InvalidInput("model needs >= 2 dims");
  const size_t layers = model.dims.size() - 1;
  if (model.weights.size() != layers || model.biases.size() != layers)
    throw InvalidInput("layer count mismatch");
}

// Row-partitioned GEMMs. Ranges are aligned to a multiple of 8 rows so each
// row goes through the same micro-kernel path for any worker count, keeping
// results identical regardless of threading.
constexpr int kRowAlign = 8;

template <typename Fn>
void for_row_blocks(int m, Fn&& fn) {
  const int nblocks = (m + kRowAlign - 1) / kRowAlign;
  parallel_for(static_cast<size_t>(nblocks), [&](size_t b0, size_t b1) {
    const int r0 = static_cast<int>(b0) * kRowAlign;
    const int r1 = std::min(m, static_cast<int>(b1) * kRowAlign);
    if (r0 < r1) fn(r0, r1);
  });
}

void gemm_nn_mt(double* c, const double* a, const double* b, int m, int n,
                int k) {
  for_row_blocks(m, [&](int r0, int r1) {
    kern::gemm_nn(c + size_t(r0) * n, a + size_t(r0) * k, b, r1 - r0, n, k);
  });
}

void gemm_nt_mt(double* c, const double* a, const double* b, int m, int n,
                int k) {
  for_row_blocks(m, [&](int r0, int r1) {
    kern::gemm_nt(c + size_t(r0) * n, a + size_t(r0) * k, b, r1 - r0, n, k);
  });
}

// C = A^T B with A stored (k x m); the A columns for rows r0..r1 start at
// offset r0 within each of A's k rows.
void gemm_tn_mt(double* c, const double* a, const double* b, int m, int n,
                int k) {
  for_row_blocks(m, [&](int r0, int r1) {
    kern::gemm_tn(c + size_t(r0) * n, a + size_t(r0), b, r1 - r0, n, k);
  });
}

struct ForwardCache {
  // acts[0] is the input batch; acts[i] the post-activation of layer i.
  std::vector<std::vector<double>> acts;
};

void forward_batch(const MLPModel& model, const double* x, int count,
                   ForwardCache& cache) {
  const size_t layers = model.dims.size() - 1;
  cache.acts.resize(layers + 1);
  cache.acts[0].assign(x, x + size_t(model.dims[0]) * count);
  for (size_t l = 0; l < layers; ++l) {
    const int in = model.dims[l];
    const int out = model.dims[l + 1];
    auto& z = cache.acts[l + 1];
    z.assign(size_t(out) * count, 0.0);
    gemm_nn_mt(z.data(), model.weights[l].data(), cache.acts[l].data(), out,
               count, in);
    for (int i = 0; i < out; ++i) {
      const double bias = model.biases[l][i];
      double* row = z.data() + size_t(i) * count;
      for (int s = 0; s < count; ++s) row[s] += bias;
    }
    if (l + 1 < layers) kern::relu(z.data(), z.size());
  }
}

// Backpropagation from a filled forward cache; returns the batch loss.
double backward_from_cache(const MLPModel& model, const ForwardCache& cache,
                           const Batch& batch, Gradients& grads) {
  const size_t layers = model.dims.size() - 1;
  const int count = batch.count;
  const int d_out = model.dims.back();

  grads.w.resize(layers);
  grads.b.resize(layers);

  const auto& pred = cache.acts.back();
  const double loss =
      kern::sum_sq_diff(pred.data(), batch.y.data(), pred.size()) /
      static_cast<double>(pred.size());

  std::vector<double> delta(size_t(d_out) * count);
  const double scale = 2.0 / (double(d_out) * count);
  for (size_t i = 0; i < delta.size(); ++i)
    delta[i] = scale * (pred[i] - batch.y[i]);

  std::vector<double> delta_prev;
  for (size_t l = layers; l-- > 0;) {
    const int in = model.dims[l];
    const int out = model.dims[l + 1];

    grads.w[l].assign(size_t(out) * in, 0.0);
    gemm_nt_mt(grads.w[l].data(), delta.data(), cache.acts[l].data(), out, in,
               count);
    grads.b[l].assign(out, 0.0);
    for (int i = 0; i < out; ++i) {
      const double* row = delta.data() + size_t(i) * count;
      double acc = 0.0;
      for (int s = 0; s < count; ++s) acc += row[s];
      grads.b[l][i] = acc;
    }

    if (l == 0) break;
    delta_prev.assign(size_t(in) * count, 0.0);
    gemm_tn_mt(delta_prev.data(), model.weights[l].data(), delta.data(), in,
               count, out);
    kern::relu_backward(delta_prev.data(), cache.acts[l].data(),
                        delta_prev.size());
    delta.swap(delta_prev);
  }
  return loss;
}

double evaluate_mse(const MLPModel& model,
                    const std::vector<VoxelSample>& samples,
                    const std::vector<int>& indices) {
  const int chunk = 512;
  ForwardCache cache;
  double total = 0.0;
  for (size_t at = 0; at < indices.size(); at += chunk) {
    const size_t n = std::min<size_t>(chunk, indices.size() - at);
    const Batch b =
        make_batch(samples, std::span<const int>(indices.data() + at, n));
    forward_batch(model, b.x.data(), b.count, cache);
    total += kern::sum_sq_diff(cache.acts.back().data(), b.y.data(),
                               b.y.size()) /
             model.dims.back();
  }
  return total / indices.size();
}

}  // namespace

MLPModel init_model(const std::vector<int>& dims, uint64_t seed) {
  if (dims.size() < 2) throw InvalidInput("model needs >= 2 dims");
  for (int d : dims)
    if (d < 1) throw InvalidInput("layer width must be positive");

  RngStream rng(seed, kInitStreamSalt);
  MLPModel model;
  model.dims = dims;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    const double std_dev = std::sqrt(2.0 / in);
    std::vector<double> w(size_t(out) * in);
    for (double& v : w) v = std_dev * rng.normal();
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(out, 0.0);
  }
  return model;
}

std::vector<double> forward(const MLPModel& model, std::span<const double> x) {
  check_model(model);
  if (static_cast<int>(x.size()) != model.dims[0])
    throw InvalidInput("input width mismatch");
  const size_t layers = model.dims.size() - 1;
  std::vector<double> a(x.begin(), x.end());
  std::vector<double> z;
  for (size_t l = 0; l < layers; ++l) {
    const int in = model.dims[l];
    const int out = model.dims[l + 1];
    z.assign(out, 0.0);
    for (int i = 0; i < out; ++i)
      z[i] = model.biases[l][i] +
             kern::dot(model.weights[l].data() + size_t(i) * in, a.data(), in);
    if (l + 1 < layers) kern::relu(z.data(), z.size());
    a.swap(z);
  }
  return a;
}

double loss_mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw InvalidInput("length mismatch");
  if (pred.empty()) throw EmptyInput("loss of empty vectors");
  return kern::sum_sq_diff(pred.data(), target.data(), pred.size()) /
         static_cast<double>(pred.size());
}

double batch_loss(const MLPModel& model, const Batch& batch) {
  check_model(model);
  ForwardCache cache;
  forward_batch(model, batch.x.data(), batch.count, cache);
  const auto& pred = cache.acts.back();
  return kern::sum_sq_diff(pred.data(), batch.y.data(), pred.size()) /
         static_cast<double>(pred.size());
}

Gradients backward(const MLPModel& model, const Batch& batch) {
  check_model(model);
  ForwardCache cache;
  forward_batch(model, batch.x.data(), batch.count, cache);
  Gradients grads;
  backward_from_cache(model, cache, batch, grads);
  return grads;
}

RmsState init_rms_state(const MLPModel& model) {
  RmsState state;
  for (const auto& w : model.weights) state.w.emplace_back(w.size(), 0.0);
  for (const auto& b : model.biases) state.b.emplace_back(b.size(), 0.0);
  return state;
}

void rmsprop_step(MLPModel& model, RmsState& state, const Gradients& grads,
                  const TrainConfig& cfg) {
  for (size_t l = 0; l < model.weights.size(); ++l) {
    kern::rmsprop_update(model.weights[l].data(), state.w[l].data(),
                         grads.w[l].data(), model.weights[l].size(),
                         cfg.learning_rate, cfg.rms_decay, cfg.epsilon);
    kern::rmsprop_update(model.biases[l].data(), state.b[l].data(),
                         grads.b[l].data(), model.biases[l].size(),
                         cfg.learning_rate, cfg.rms_decay, cfg.epsilon);
  }
}

std::vector<FoldAssignment> grouped_folds(std::span<const int64_t> group_ids,
                                          int n_folds, double val_fraction,
                                          uint64_t seed) {
  if (n_folds < 2) throw InvalidInput("n_folds must be >= 2");
  if (!(val_fraction > 0.0) || !(val_fraction < 1.0))
    throw InvalidInput("val_fraction must lie in (0, 1)");

  std::vector<int64_t> groups(group_ids.begin(), group_ids.end());
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  const int64_t g = static_cast<int64_t>(groups.size());
  if (g < n_folds)
    throw TooFewGroups(std::to_string(g) + " groups for " +
                       std::to_string(n_folds) + " folds");

  RngStream rng(seed, kFoldStreamSalt);
  rng.shuffle(groups.data(), groups.size());

  // The canonical n_folds * val_fraction = 1 case partitions the shuffled
  // groups; otherwise each fold takes a window starting at its partition
  // boundary.
  std::vector<FoldAssignment> folds(n_folds);
  const bool partition = std::abs(n_folds * val_fraction - 1.0) < 1e-9;
  for (int f = 0; f < n_folds; ++f) {
    const int64_t begin = g * f / n_folds;
    int64_t end;
    if (partition) {
      end = g * (f + 1) / n_folds;
    } else {
      end = std::min<int64_t>(begin + std::llround(val_fraction * double(g)), g);
    }
    auto& fold = folds[f];
    for (int64_t i = 0; i < g; ++i) {
      if (i >= begin && i < end)
        fold.val_groups.push_back(groups[i]);
      else
        fold.train_groups.push_back(groups[i]);
    }
    if (fold.val_groups.empty() || fold.train_groups.empty())
      throw TooFewGroups("empty side in fold " + std::to_string(f));
  }
  return folds;
}

Batch make_batch(const std::vector<VoxelSample>& samples,
                 std::span<const int> indices) {
  Batch batch;
  batch.count = static_cast<int>(indices.size());
  const int d_in = num_coeffs(kSignalOrder);
  const int d_out = num_coeffs(kFodOrder);
  batch.x.resize(size_t(d_in) * batch.count);
  batch.y.resize(size_t(d_out) * batch.count);
  for (int s = 0; s < batch.count; ++s) {
    const VoxelSample& sample = samples[indices[s]];
    for (int f = 0; f < d_in; ++f)
      batch.x[size_t(f) * batch.count + s] = sample.signal_sh.coeffs[f];
    for (int f = 0; f < d_out; ++f)
      batch.y[size_t(f) * batch.count + s] = sample.fod_sh.coeffs[f];
  }
  return batch;
}

TrainResult train(const std::vector<VoxelSample>& dataset,
                  const TrainConfig& cfg) {
  if (dataset.empty()) throw EmptyInput("empty training dataset");
  if (cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.patience < 1)
    throw InvalidInput("batch_size, max_epochs and patience must be >= 1");
  if (!(cfg.rms_decay > 0.0) || !(cfg.rms_decay < 1.0) ||
      !(cfg.learning_rate > 0.0))
    throw InvalidInput("need 0 < rms_decay < 1 and learning_rate > 0");

  std::vector<int64_t> group_ids(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i) group_ids[i] = dataset[i].group_id;
  const auto folds =
      grouped_folds(group_ids, cfg.n_folds, cfg.val_fraction, cfg.seed);

  std::vector<int> dims;
  dims.push_back(num_coeffs(kSignalOrder));
  for (int h : cfg.hidden_dims) dims.push_back(h);
  dims.push_back(num_coeffs(kFodOrder));

  TrainResult result;
  result.histories.resize(folds.size());
  double global_best = INFINITY;

  for (size_t f = 0; f < folds.size(); ++f) {
    std::unordered_set<int64_t> val_set(folds[f].val_groups.begin(),
                                        folds[f].val_groups.end());
    std::vector<int> train_idx, val_idx;
    for (size_t i = 0; i < dataset.size(); ++i) {
      if (val_set.count(dataset[i].group_id))
        val_idx.push_back(static_cast<int>(i));
      else
        train_idx.push_back(static_cast<int>(i));
    }

    MLPModel model = init_model(dims, cfg.seed + f);
    RmsState state = init_rms_state(model);
    RngStream shuffle_rng(cfg.seed, kShuffleStreamSalt ^ f);

    FoldHistory& history = result.histories[f];
    MLPModel fold_best = model;
    double best_val = INFINITY;
    int misses = 0;

    ForwardCache cache;
    Gradients grads;
    std::vector<int> order(train_idx);
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
      shuffle_rng.shuffle(order.data(), order.size());
      double loss_weighted = 0.0;
      for (size_t at = 0; at < order.size(); at += cfg.batch_size) {
        const size_t n = std::min<size_t>(cfg.batch_size, order.size() - at);
        const Batch batch =
            make_batch(dataset, std::span<const int>(order.data() + at, n));
        forward_batch(model, batch.x.data(), batch.count, cache);
        const double loss = backward_from_cache(model, cache, batch, grads);
        rmsprop_step(model, state, grads, cfg);
        loss_weighted += loss * n;
      }
      const double train_mse = loss_weighted / order.size();
      const double val_mse = evaluate_mse(model, dataset, val_idx);
      if (!std::isfinite(train_mse) || !std::isfinite(val_mse))
        throw DivergedTraining(
            epoch, "non-finite loss in fold " + std::to_string(f));
      history.train_mse.push_back(train_mse);
      history.val_mse.push_back(val_mse);

      if (val_mse < best_val) {
        best_val = val_mse;
        fold_best = model;
        history.best_epoch = epoch;
        misses = 0;
      } else if (++misses >= cfg.patience) {
        break;
      }
    }
    history.best_val_mse = best_val;

    if (best_val < global_best) {
      global_best = best_val;
      result.model = std::move(fold_best);
      result.best_fold = static_cast<int>(f);
    }
  }
  return result;
}

std::vector<double> predict(const MLPModel& model,
                            std::span<const double> signal_sh) {
  return forward(model, signal_sh);
}

}  // namespace fodwb
