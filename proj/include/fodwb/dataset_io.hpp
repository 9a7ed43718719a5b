#pragma once

#include <string>
#include <vector>

#include "fodwb/mlp.hpp"
#include "fodwb/sample.hpp"
#include "fodwb/sh.hpp"

namespace fodwb {

// One prediction line: the FOD estimate of some method for a sample, carried
// with the sample's group id and rotation so files can be aligned.
struct PredictionRecord {
  int64_t group_id = 0;
  Rotation rotation;
  std::string method;
  SHCoeffs fod_sh;  // zero-padded to order 10 on write
};

// Numbers serialize with 17 significant digits so parse(write(x)) == x.
std::string format_double(double v);

void atomic_write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

std::string sample_to_json_line(const VoxelSample& s);
VoxelSample sample_from_json_line(const std::string& line);

std::string prediction_to_json_line(const PredictionRecord& p);
PredictionRecord prediction_from_json_line(const std::string& line);

void write_samples(const std::string& path,
                   const std::vector<VoxelSample>& samples);
std::vector<VoxelSample> read_samples(const std::string& path);

void write_predictions(const std::string& path,
                       const std::vector<PredictionRecord>& predictions);
std::vector<PredictionRecord> read_predictions(const std::string& path);

// FSL-style text: bvec has three whitespace-separated rows (x, y, z), bval a
// single row of b-values.
void write_scheme(const std::string& bvec_path, const std::string& bval_path,
                  const GradientScheme& scheme);
GradientScheme read_scheme(const std::string& bvec_path,
                           const std::string& bval_path);

void write_model(const std::string& path, const MLPModel& model,
                 const TrainConfig& cfg);
MLPModel read_model(const std::string& path);

}  // namespace fodwb
