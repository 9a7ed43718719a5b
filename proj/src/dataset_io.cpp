#include "fodwb/dataset_io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fodwb {

using nlohmann::json;

namespace {

void append_double(std::string& out, double v) {
  char buf[40];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

void append_array(std::string& out, const double* values, size_t n) {
  out.push_back('[');
  for (size_t i = 0; i < n; ++i) {
    if (i) out.push_back(',');
    append_double(out, values[i]);
  }
  out.push_back(']');
}

json parse_line(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw FormatError("not a JSON object: " +
                      line.substr(0, std::min<size_t>(line.size(), 80)));
  return j;
}

SHCoeffs coeffs_from_json(const json& arr, const char* field) {
  if (!arr.is_array()) throw FormatError(std::string(field) + " not an array");
  const size_t n = arr.size();
  int order = -1;
  for (int l = 0; l <= kMaxOrder; l += 2) {
    if (n == static_cast<size_t>((l + 1) * (l + 2) / 2)) {
      order = l;
      break;
    }
  }
  if (order < 0)
    throw FormatError(std::string(field) + " has invalid length " +
                      std::to_string(n));
  SHCoeffs c(order);
  for (size_t i = 0; i < n; ++i) {
    if (!arr[i].is_number())
      throw FormatError(std::string(field) + " has a non-numeric entry");
    c.coeffs[i] = arr[i].get<double>();
  }
  return c;
}

Rotation rotation_from_json(const json& arr) {
  if (!arr.is_array() || arr.size() != 4)
    throw FormatError("rotation must be a [w,x,y,z] array");
  return {arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>(),
          arr[3].get<double>()};
}

template <typename Record, typename ToLine>
void write_lines(const std::string& path, const std::vector<Record>& records,
                 ToLine&& to_line) {
  std::string out;
  out.reserve(records.size() * 2048);
  for (const auto& r : records) {
    out += to_line(r);
    out.push_back('\n');
  }
  atomic_write_file(path, out);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

std::string format_double(double v) {
  std::string out;
  append_double(out, v);
  return out;
}

void atomic_write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw FormatError("short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw FormatError("rename to " + path + " failed: " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sample_to_json_line(const VoxelSample& s) {
  std::string out;
  out.reserve(2300);
  out += "{\"group_id\":";
  out += std::to_string(s.group_id);
  out += ",\"rotation\":";
  const double q[4] = {s.rotation.w, s.rotation.x, s.rotation.y, s.rotation.z};
  append_array(out, q, 4);
  out += ",\"signal_sh\":";
  append_array(out, s.signal_sh.coeffs.data(), s.signal_sh.coeffs.size());
  out += ",\"fod_sh\":";
  append_array(out, s.fod_sh.coeffs.data(), s.fod_sh.coeffs.size());
  out.push_back('}');
  return out;
}

VoxelSample sample_from_json_line(const std::string& line) {
  const json j = parse_line(line);
  for (const char* key : {"group_id", "rotation", "signal_sh", "fod_sh"}) {
    if (!j.contains(key)) throw FormatError(std::string("missing field ") + key);
  }
  VoxelSample s;
  s.group_id = j["group_id"].get<int64_t>();
  s.rotation = rotation_from_json(j["rotation"]);
  s.signal_sh = coeffs_from_json(j["signal_sh"], "signal_sh");
  s.fod_sh = coeffs_from_json(j["fod_sh"], "fod_sh");
  return s;
}

std::string prediction_to_json_line(const PredictionRecord& p) {
  std::string out;
  out.reserve(1500);
  out += "{\"group_id\":";
  out += std::to_string(p.group_id);
  out += ",\"rotation\":";
  const double q[4] = {p.rotation.w, p.rotation.x, p.rotation.y, p.rotation.z};
  append_array(out, q, 4);
  out += ",\"method\":\"";
  out += p.method;
  out += "\",\"fod_sh\":";
  // zero-pad to the FOD order
  std::vector<double> padded(num_coeffs(kFodOrder), 0.0);
  for (size_t i = 0; i < p.fod_sh.coeffs.size() && i < padded.size(); ++i)
    padded[i] = p.fod_sh.coeffs[i];
  append_array(out, padded.data(), padded.size());
  out.push_back('}');
  return out;
}

PredictionRecord prediction_from_json_line(const std::string& line) {
  const json j = parse_line(line);
  for (const char* key : {"group_id", "rotation", "method", "fod_sh"}) {
    if (!j.contains(key)) throw FormatError(std::string("missing field ") + key);
  }
  PredictionRecord p;
  p.group_id = j["group_id"].get<int64_t>();
  p.rotation = rotation_from_json(j["rotation"]);
  p.method = j["method"].get<std::string>();
  p.fod_sh = coeffs_from_json(j["fod_sh"], "fod_sh");
  return p;
}

void write_samples(const std::string& path,
                   const std::vector<VoxelSample>& samples) {
  write_lines(path, samples, sample_to_json_line);
}

std::vector<VoxelSample> read_samples(const std::string& path) {
  const auto lines = read_lines(path);
  std::vector<VoxelSample> samples;
  samples.reserve(lines.size());
  for (const auto& line : lines) samples.push_back(sample_from_json_line(line));
  return samples;
}

void write_predictions(const std::string& path,
                       const std::vector<PredictionRecord>& predictions) {
  write_lines(path, predictions, prediction_to_json_line);
}

std::vector<PredictionRecord> read_predictions(const std::string& path) {
  const auto lines = read_lines(path);
  std::vector<PredictionRecord> predictions;
  predictions.reserve(lines.size());
  for (const auto& line : lines)
    predictions.push_back(prediction_from_json_line(line));
  return predictions;
}

void write_scheme(const std::string& bvec_path, const std::string& bval_path,
                  const GradientScheme& scheme) {
  std::string bvec;
  for (int axis = 0; axis < 3; ++axis) {
    for (size_t i = 0; i < scheme.directions.size(); ++i) {
      if (i) bvec.push_back(' ');
      const Direction& d = scheme.directions[i];
      append_double(bvec, axis == 0 ? d.x : (axis == 1 ? d.y : d.z));
    }
    bvec.push_back('\n');
  }
  std::string bval;
  for (size_t i = 0; i < scheme.directions.size(); ++i) {
    if (i) bval.push_back(' ');
    append_double(bval, scheme.bvalue);
  }
  bval.push_back('\n');
  atomic_write_file(bvec_path, bvec);
  atomic_write_file(bval_path, bval);
}

GradientScheme read_scheme(const std::string& bvec_path,
                           const std::string& bval_path) {
  const auto parse_row = [](const std::string& line) {
    std::vector<double> row;
    std::istringstream ss(line);
    double v;
    while (ss >> v) row.push_back(v);
    return row;
  };

  const auto bvec_lines = read_lines(bvec_path);
  if (bvec_lines.size() != 3)
    throw FormatError("bvec must have 3 rows, found " +
                      std::to_string(bvec_lines.size()));
  const auto x = parse_row(bvec_lines[0]);
  const auto y = parse_row(bvec_lines[1]);
  const auto z = parse_row(bvec_lines[2]);
  if (x.size() != y.size() || x.size() != z.size())
    throw FormatError("bvec rows have unequal lengths");

  const auto bval_lines = read_lines(bval_path);
  if (bval_lines.size() != 1) throw FormatError("bval must have 1 row");
  const auto b = parse_row(bval_lines[0]);
  if (b.size() != x.size())
    throw FormatError("bval count does not match bvec count");
  if (b.empty()) throw FormatError("empty gradient scheme");

  GradientScheme scheme;
  scheme.bvalue = b[0];
  for (double bv : b) {
    if (bv != scheme.bvalue)
      throw FormatError("multi-shell bval files are not supported");
  }
  scheme.directions.reserve(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    scheme.directions.push_back({x[i], y[i], z[i]});
  return scheme;
}

void write_model(const std::string& path, const MLPModel& model,
                 const TrainConfig& cfg) {
  std::string out;
  out.reserve(model.dims.size() * 4 + 64);
  out += "{\n  \"format_version\": 1,\n  \"dims\": [";
  for (size_t i = 0; i < model.dims.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(model.dims[i]);
  }
  out += "],\n  \"weights\": [";
  for (size_t l = 0; l < model.weights.size(); ++l) {
    if (l) out += ",";
    out += "[";
    const int in = model.dims[l];
    const int rows = model.dims[l + 1];
    for (int r = 0; r < rows; ++r) {
      if (r) out += ",";
      append_array(out, model.weights[l].data() + size_t(r) * in, in);
    }
    out += "]";
  }
  out += "],\n  \"biases\": [";
  for (size_t l = 0; l < model.biases.size(); ++l) {
    if (l) out += ",";
    append_array(out, model.biases[l].data(), model.biases[l].size());
  }
  out += "],\n  \"config\": {";
  out += "\"hidden_dims\": [";
  for (size_t i = 0; i < cfg.hidden_dims.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(cfg.hidden_dims[i]);
  }
  out += "], \"learning_rate\": ";
  append_double(out, cfg.learning_rate);
  out += ", \"rms_decay\": ";
  append_double(out, cfg.rms_decay);
  out += ", \"epsilon\": ";
  append_double(out, cfg.epsilon);
  out += ", \"batch_size\": " + std::to_string(cfg.batch_size);
  out += ", \"max_epochs\": " + std::to_string(cfg.max_epochs);
  out += ", \"patience\": " + std::to_string(cfg.patience);
  out += ", \"n_folds\": " + std::to_string(cfg.n_folds);
  out += ", \"val_fraction\": ";
  append_double(out, cfg.val_fraction);
  out += "},\n  \"seed\": " + std::to_string(cfg.seed);
  out += "\n}\n";
  atomic_write_file(path, out);
}

MLPModel read_model(const std::string& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw FormatError("model file is not a JSON object: " + path);
  for (const char* key : {"dims", "weights", "biases"}) {
    if (!j.contains(key)) throw FormatError(std::string("missing field ") + key);
  }
  MLPModel model;
  for (const auto& d : j["dims"]) model.dims.push_back(d.get<int>());
  if (model.dims.size() < 2) throw FormatError("model needs >= 2 dims");

  const auto& weights = j["weights"];
  const auto& biases = j["biases"];
  if (weights.size() != model.dims.size() - 1 ||
      biases.size() != model.dims.size() - 1)
    throw FormatError("layer count mismatch");
  for (size_t l = 0; l + 1 < model.dims.size(); ++l) {
    const size_t in = static_cast<size_t>(model.dims[l]);
    const size_t out = static_cast<size_t>(model.dims[l + 1]);
    const auto& wl = weights[l];
    if (wl.size() != out) throw FormatError("weight row count mismatch");
    std::vector<double> w;
    w.reserve(in * out);
    for (const auto& row : wl) {
      if (row.size() != in) throw FormatError("weight column count mismatch");
      for (const auto& v : row) w.push_back(v.get<double>());
    }
    model.weights.push_back(std::move(w));
    const auto& bl = biases[l];
    if (bl.size() != out) throw FormatError("bias length mismatch");
    std::vector<double> b;
    b.reserve(out);
    for (const auto& v : bl) b.push_back(v.get<double>());
    model.biases.push_back(std::move(b));
  }
  for (const auto& w : model.weights)
    for (double v : w)
      if (!std::isfinite(v)) throw FormatError("non-finite weight");
  for (const auto& b : model.biases)
    for (double v : b)
      if (!std::isfinite(v)) throw FormatError("non-finite bias");
  return model;
}

}  // namespace fodwb
