#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fodwb/sample.hpp"

namespace fodwb {

// Fully connected regression network; hidden layers rectified, output linear.
struct MLPModel {
  std::vector<int> dims;                     // [in, hidden..., out]
  std::vector<std::vector<double>> weights;  // per layer, (out x in) row-major
  std::vector<std::vector<double>> biases;   // per layer, (out)
};

struct TrainConfig {
  std::vector<int> hidden_dims = {400, 400, 400};
  double learning_rate = 1e-3;
  double rms_decay = 0.9;  // rho
  double epsilon = 1e-8;
  int batch_size = 128;
  int max_epochs = 200;
  int patience = 10;  // early-stop epochs without validation improvement
  int n_folds = 5;
  double val_fraction = 0.20;
  uint64_t seed = 42;
};

// Running average of squared gradients, same shapes as the parameters.
struct RmsState {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;
};

struct Gradients {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;
};

// Feature-major batch: x[f * count + s], y[f * count + s].
struct Batch {
  int count = 0;
  std::vector<double> x;
  std::vector<double> y;
};

struct FoldAssignment {
  std::vector<int64_t> train_groups;
  std::vector<int64_t> val_groups;
};

struct FoldHistory {
  std::vector<double> train_mse;  // mean of minibatch losses per epoch
  std::vector<double> val_mse;
  int best_epoch = -1;
  double best_val_mse = 0.0;
};

struct TrainResult {
  MLPModel model;
  int best_fold = -1;
  std::vector<FoldHistory> histories;
};

// He-scaled normal weights (std sqrt(2/fan_in)), zero biases.
MLPModel init_model(const std::vector<int>& dims, uint64_t seed);

std::vector<double> forward(const MLPModel& model, std::span<const double> x);

double loss_mse(std::span<const double> pred, std::span<const double> target);

// Exact gradient of the batch MSE with respect to every weight and bias.
Gradients backward(const MLPModel& model, const Batch& batch);

// Batch MSE at the current parameters (used by gradient checks).
double batch_loss(const MLPModel& model, const Batch& batch);

RmsState init_rms_state(const MLPModel& model);

// v <- rho v + (1-rho) g^2 ; w <- w - lr g / (sqrt(v) + eps)
void rmsprop_step(MLPModel& model, RmsState& state, const Gradients& grads,
                  const TrainConfig& cfg);

// Partitions group ids (never samples) into per-fold train/validation sides.
std::vector<FoldAssignment> grouped_folds(std::span<const int64_t> group_ids,
                                          int n_folds, double val_fraction,
                                          uint64_t seed);

// Grouped k-fold RMSprop training with early stopping; returns the model
// with the best validation MSE across folds plus every fold history.
TrainResult train(const std::vector<VoxelSample>& dataset,
                  const TrainConfig& cfg);

// Forward pass of a signal coefficient vector; the 66 outputs are read as
// order-10 FOD coefficients.
std::vector<double> predict(const MLPModel& model,
                            std::span<const double> signal_sh);

Batch make_batch(const std::vector<VoxelSample>& samples,
                 std::span<const int> indices);

}  // namespace fodwb
