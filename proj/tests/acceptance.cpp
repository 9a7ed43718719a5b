// Acceptance suite: runs each numbered criterion and prints one PASS/FAIL
// line. --only N / --skip N select criteria; exit code is nonzero when any
// executed criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fodwb/csd.hpp"
#include "fodwb/dataset_io.hpp"
#include "fodwb/metrics.hpp"
#include "fodwb/mlp.hpp"
#include "fodwb/phantom.hpp"
#include "fodwb/rotation.hpp"
#include "fodwb/workbench.hpp"

using namespace fodwb;

namespace {

struct Criterion {
  int id;
  std::string name;
  std::function<bool(std::string&)> run;
};

std::vector<Direction> fibonacci_dirs(int n) {
  std::vector<Direction> dirs;
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    dirs.push_back({r * std::cos(golden * i), r * std::sin(golden * i), z});
  }
  return dirs;
}

Direction random_direction(RngStream& rng) {
  const double z = 2.0 * rng.uniform() - 1.0;
  const double phi = 2.0 * M_PI * rng.uniform();
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

double angle_deg(const Direction& a, const Direction& b) {
  const double c = std::abs(a.x * b.x + a.y * b.y + a.z * b.z);
  return std::acos(std::min(1.0, c)) * 180.0 / M_PI;
}

Direction dense_peak(const SHCoeffs& c, int n) {
  const auto dirs = fibonacci_dirs(n);
  double best = -INFINITY;
  Direction peak = dirs[0];
  for (const auto& d : dirs) {
    const double a = evaluate_at(c, d);
    if (a > best) {
      best = a;
      peak = d;
    }
  }
  return peak;
}

// ---------------------------------------------------------------------------
// 1: feasibility statement for the published absolute numbers
bool criterion_1(std::string& detail) {
  detail =
      "published absolute metrics (median ACC 0.8165 vs 0.7965, RMSE 0.539 "
      "vs 0.561) require the original histology/MRI data, which is not "
      "available; the methodology is reproduced on the synthetic phantom "
      "instead (criterion 2)";
  return true;
}

// ---------------------------------------------------------------------------
// 2: end-to-end direction-of-effect replication on the default config
bool criterion_2(std::string& detail) {
  namespace fs = std::filesystem;
  const fs::path work = fs::path("acceptance_work");
  fs::create_directories(work);

  RunConfig cfg;  // defaults: 567 x 101, SNR 30, grouped split
  cfg.paths.scheme_bvec = (work / "scheme.bvec").string();
  cfg.paths.scheme_bval = (work / "scheme.bval").string();
  cfg.paths.dataset = (work / "dataset.jsonl").string();
  cfg.paths.dataset_meta = (work / "dataset.meta.json").string();
  cfg.paths.train_split = (work / "train.jsonl").string();
  cfg.paths.test_split = (work / "test.jsonl").string();
  cfg.paths.model = (work / "model.json").string();
  cfg.paths.train_report = (work / "train_report.json").string();
  cfg.paths.dnn_predictions = (work / "pred_dnn.jsonl").string();
  cfg.paths.csd_predictions = (work / "pred_csd.jsonl").string();
  cfg.paths.report = (work / "report.json").string();

  const auto t0 = std::chrono::steady_clock::now();
  const GenDataSummary gen = run_gen_data(cfg);
  const auto t1 = std::chrono::steady_clock::now();
  const SplitSummary split = run_split(cfg);
  const TrainResult trained = run_train(cfg);
  const auto t2 = std::chrono::steady_clock::now();
  run_predict(cfg.paths.model, cfg.paths.test_split, cfg.paths.dnn_predictions);
  run_csd(cfg, cfg.paths.test_split, cfg.paths.csd_predictions);
  const auto t3 = std::chrono::steady_clock::now();
  const ComparisonReport report =
      run_compare(cfg.paths.test_split, cfg.paths.dnn_predictions,
                  cfg.paths.csd_predictions, cfg.paths.report);

  const double margin = report.a.median_acc - report.b.median_acc;
  const double p = report.wilcoxon_acc.p_two_sided;
  // direction: the statistic must favor the DNN side (positive differences)
  const double w_mid =
      report.wilcoxon_acc.n_effective * (report.wilcoxon_acc.n_effective + 1) / 4.0;
  const bool dnn_favored = report.wilcoxon_acc.statistic > w_mid;

  const auto secs = [](auto a, auto b) {
    return std::chrono::duration<double>(b - a).count();
  };
  std::ostringstream ss;
  ss << "n=" << gen.n_samples << " samples, test=" << split.n_test_samples
     << "; median ACC dnn=" << report.a.median_acc
     << " csd=" << report.b.median_acc << " (margin " << margin
     << "); RMSE dnn=" << report.a.rmse_value << " csd=" << report.b.rmse_value
     << "; p=" << p << "; gen " << secs(t0, t1) << "s, train " << secs(t1, t2)
     << "s, predict+csd " << secs(t2, t3) << "s";
  detail = ss.str();
  return report.a.median_acc >= report.b.median_acc && margin >= 0.005 &&
         p < 0.05 && dnn_favored;
}

// ---------------------------------------------------------------------------
// 3: SH synthesize/fit round trip at order 8 on the 100-direction scheme
bool criterion_3(std::string& detail) {
  RngStream rng(301);
  const GradientScheme scheme = make_gradient_scheme(100, 2000.0);
  SHCoeffs truth(8);
  for (double& v : truth.coeffs) v = 2.0 * rng.uniform() - 1.0;
  const auto samples = evaluate(truth, scheme.directions);
  const SHCoeffs fitted = fit_sh(samples, scheme.directions, 8, 0.0);
  double max_err = 0.0;
  for (size_t j = 0; j < truth.coeffs.size(); ++j)
    max_err = std::max(max_err, std::abs(fitted.coeffs[j] - truth.coeffs[j]));
  std::ostringstream ss;
  ss << "max coefficient error " << max_err;
  detail = ss.str();
  return max_err < 1e-8;
}

// ---------------------------------------------------------------------------
// 4: rotation correctness over 100 random rotations
bool criterion_4(std::string& detail) {
  RngStream rng(401);
  double worst_norm = 0.0, worst_equiv = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    SHCoeffs c(10);
    for (double& v : c.coeffs) v = 2.0 * rng.uniform() - 1.0;
    const Rotation q = random_rotation(rng);
    const SHCoeffs r = rotate_sh(c, q);

    for (int l = 0; l <= 10; l += 2) {
      double na = 0.0, nb = 0.0;
      for (int m = -l; m <= l; ++m) {
        na += c.at(l, m) * c.at(l, m);
        nb += r.at(l, m) * r.at(l, m);
      }
      worst_norm = std::max(worst_norm, std::abs(std::sqrt(na) - std::sqrt(nb)));
    }

    const Mat3 rinv = to_matrix(conjugate(q));
    for (int i = 0; i < 50; ++i) {
      const Direction u = random_direction(rng);
      const double lhs = evaluate_at(r, u);
      const double rhs = evaluate_at(c, rotate_dir(rinv, u));
      worst_equiv = std::max(worst_equiv, std::abs(lhs - rhs));
    }
  }
  std::ostringstream ss;
  ss << "max per-degree norm drift " << worst_norm << ", max equivariance error "
     << worst_equiv;
  detail = ss.str();
  return worst_norm < 1e-10 && worst_equiv < 1e-8;
}

// ---------------------------------------------------------------------------
// 5: CSD oracle on noiseless single fiber and 60-degree crossing
bool criterion_5(std::string& detail) {
  const GradientScheme scheme = make_gradient_scheme(100, 2000.0);
  const ResponseFunction resp = calibrate_response(1.7e-3, 0.2e-3, scheme);

  RngStream rng(501);
  const Direction fiber = random_direction(rng);
  FiberPopulation pop;
  pop.fibers.push_back({fiber, 1.0});
  const auto atten = tensor_signal(pop, scheme);
  const SHCoeffs signal = fit_sh(atten, scheme.directions, 8, 0.0);
  const CsdResult single = csd_deconvolve(signal, resp);
  const double peak_err = angle_deg(dense_peak(single.fod, 20000), fiber);
  const double single_acc = acc(single.fod, delta_sh(fiber, 8));

  FiberPopulation two;
  const double s = std::sin(M_PI / 3.0), c = std::cos(M_PI / 3.0);
  const Direction f1{0.0, 0.0, 1.0}, f2{s, 0.0, c};
  two.fibers.push_back({f1, 0.5});
  two.fibers.push_back({f2, 0.5});
  const auto atten2 = tensor_signal(two, scheme);
  const SHCoeffs signal2 = fit_sh(atten2, scheme.directions, 8, 0.0);
  const CsdResult crossing = csd_deconvolve(signal2, resp);

  const auto dirs = fibonacci_dirs(20000);
  std::vector<std::pair<double, Direction>> scored;
  for (const auto& d : dirs) scored.push_back({evaluate_at(crossing.fod, d), d});
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Direction> peaks;
  for (const auto& [amp, d] : scored) {
    bool fresh = true;
    for (const auto& p : peaks)
      if (angle_deg(p, d) < 15.0) fresh = false;
    if (fresh) peaks.push_back(d);
    if (peaks.size() == 2) break;
  }
  const double err1 = std::min(angle_deg(peaks[0], f1), angle_deg(peaks[1], f1));
  const double err2 = std::min(angle_deg(peaks[0], f2), angle_deg(peaks[1], f2));

  std::ostringstream ss;
  ss << "single-fiber peak error " << peak_err << " deg, ACC " << single_acc
     << "; crossing peak errors " << err1 << " / " << err2 << " deg";
  detail = ss.str();
  return peak_err < 2.0 && single_acc >= 0.99 && err1 < 5.0 && err2 < 5.0;
}

// ---------------------------------------------------------------------------
// 6: analytic gradient vs central finite differences on a [45,8,66] model
bool criterion_6(std::string& detail) {
  RngStream rng(601);
  MLPModel model = init_model({45, 8, 66}, 61);
  Batch batch;
  batch.count = 4;
  batch.x.resize(size_t(45) * batch.count);
  batch.y.resize(size_t(66) * batch.count);
  for (double& v : batch.x) v = 2.0 * rng.uniform() - 1.0;
  for (double& v : batch.y) v = 2.0 * rng.uniform() - 1.0;

  const Gradients grads = backward(model, batch);
  const double h = 1e-5;
  double worst = 0.0;
  int checked = 0;
  while (checked < 20) {
    const size_t layer = rng.below(model.weights.size());
    const bool is_bias = rng.uniform() < 0.2;
    auto& params = is_bias ? model.biases[layer] : model.weights[layer];
    const auto& grad = is_bias ? grads.b[layer] : grads.w[layer];
    const size_t idx = rng.below(params.size());
    if (std::abs(grad[idx]) < 1e-12) continue;

    const double saved = params[idx];
    params[idx] = saved + h;
    const double up = batch_loss(model, batch);
    params[idx] = saved - h;
    const double down = batch_loss(model, batch);
    params[idx] = saved;
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - grad[idx]) /
                                std::max(std::abs(fd), std::abs(grad[idx])));
    ++checked;
  }
  std::ostringstream ss;
  ss << "worst relative error " << worst << " over 20 coordinates";
  detail = ss.str();
  return worst < 1e-4;
}

// ---------------------------------------------------------------------------
// 7: Wilcoxon oracle
bool criterion_7(std::string& detail) {
  std::vector<std::pair<double, double>> five = {
      {2.0, 1.0}, {3.0, 1.0}, {4.0, 1.0}, {5.0, 1.0}, {6.0, 1.0}};
  const SignedRankResult five_r = wilcoxon_signed_rank(five);
  if (std::abs(five_r.p_two_sided - 0.0625) > 1e-12 ||
      five_r.statistic != 15.0) {
    detail = "n=5 all-positive case failed";
    return false;
  }

  // brute force over all sign assignments for n <= 10
  RngStream rng(701);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5 + static_cast<int>(rng.below(6));
    std::vector<std::pair<double, double>> pairs;
    std::vector<double> diffs;
    for (int i = 0; i < n; ++i) {
      const double a = std::round(rng.uniform() * 8.0) / 8.0;
      const double b = std::round(rng.uniform() * 8.0) / 8.0;
      pairs.push_back({a, b});
      if (a != b) diffs.push_back(a - b);
    }
    if (diffs.empty()) {
      --trial;
      continue;
    }
    const SignedRankResult got = wilcoxon_signed_rank(pairs);

    const int m = static_cast<int>(diffs.size());
    std::vector<int> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      return std::abs(diffs[a]) < std::abs(diffs[b]);
    });
    std::vector<double> rank(m);
    for (int i = 0; i < m;) {
      int j = i;
      while (j < m && std::abs(diffs[idx[j]]) == std::abs(diffs[idx[i]])) ++j;
      for (int k = i; k < j; ++k) rank[idx[k]] = 0.5 * (i + 1 + j);
      i = j;
    }
    double w_obs = 0.0;
    for (int i = 0; i < m; ++i)
      if (diffs[i] > 0.0) w_obs += rank[i];
    uint64_t le = 0, ge = 0;
    for (uint64_t mask = 0; mask < (uint64_t(1) << m); ++mask) {
      double w = 0.0;
      for (int i = 0; i < m; ++i)
        if (mask & (uint64_t(1) << i)) w += rank[i];
      if (w <= w_obs + 1e-12) ++le;
      if (w >= w_obs - 1e-12) ++ge;
    }
    const double exact =
        std::min(1.0, 2.0 * std::min(le, ge) / std::ldexp(1.0, m));
    if (std::abs(got.p_two_sided - exact) > 1e-12) {
      std::ostringstream ss;
      ss << "mismatch vs enumeration at trial " << trial << ": got "
         << got.p_two_sided << ", enumeration " << exact;
      detail = ss.str();
      return false;
    }
  }

  // normal approximation at the n=26 boundary vs exact distribution
  std::vector<std::pair<double, double>> big;
  RngStream rng26(702);
  for (int i = 0; i < 26; ++i) big.push_back({rng26.uniform(), rng26.uniform()});
  const SignedRankResult approx = wilcoxon_signed_rank(big);

  std::vector<double> diffs;
  for (auto& [a, b] : big) diffs.push_back(a - b);
  std::vector<int> idx(26);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return std::abs(diffs[a]) < std::abs(diffs[b]);
  });
  std::vector<double> rank(26);
  for (int i = 0; i < 26; ++i) rank[idx[i]] = i + 1;
  double w_obs = 0.0;
  for (int i = 0; i < 26; ++i)
    if (diffs[i] > 0.0) w_obs += rank[i];
  const int total2 = 26 * 27;
  std::vector<double> count(total2 + 1, 0.0);
  count[0] = 1.0;
  for (int i = 1; i <= 26; ++i)
    for (int s = total2; s >= 2 * i; --s) count[s] += count[s - 2 * i];
  const int w2 = static_cast<int>(std::llround(2.0 * w_obs));
  double le = 0.0, ge = 0.0, total = 0.0;
  for (int s = 0; s <= total2; ++s) {
    total += count[s];
    if (s <= w2) le += count[s];
    if (s >= w2) ge += count[s];
  }
  const double exact26 = std::min(1.0, 2.0 * std::min(le, ge) / total);
  std::ostringstream ss;
  ss << "n=26 normal approximation " << approx.p_two_sided << " vs exact "
     << exact26;
  detail = ss.str();
  return approx.method == "normal-approximation" &&
         std::abs(approx.p_two_sided - exact26) < 0.01;
}

// ---------------------------------------------------------------------------
// 8: dataset determinism, counts and leak-free split
bool criterion_8(std::string& detail) {
  namespace fs = std::filesystem;
  const fs::path work = fs::path("acceptance_work_c8");
  fs::create_directories(work);

  RunConfig cfg;
  cfg.paths.scheme_bvec = (work / "scheme.bvec").string();
  cfg.paths.scheme_bval = (work / "scheme.bval").string();
  cfg.paths.dataset = (work / "dataset_a.jsonl").string();
  cfg.paths.dataset_meta = (work / "dataset.meta.json").string();
  cfg.paths.train_split = (work / "train.jsonl").string();
  cfg.paths.test_split = (work / "test.jsonl").string();

  const GenDataSummary first = run_gen_data(cfg);
  const std::string bytes_a = read_file(cfg.paths.dataset);

  cfg.paths.dataset = (work / "dataset_b.jsonl").string();
  run_gen_data(cfg);
  const std::string bytes_b = read_file(cfg.paths.dataset);

  const size_t lines =
      static_cast<size_t>(std::count(bytes_a.begin(), bytes_a.end(), '\n'));

  const SplitSummary split = [&] {
    RunConfig split_cfg = cfg;
    split_cfg.paths.dataset = (work / "dataset_a.jsonl").string();
    return run_split(split_cfg);
  }();

  const auto train_samples = read_samples(cfg.paths.train_split);
  const auto test_samples = read_samples(cfg.paths.test_split);
  std::set<int64_t> train_groups, test_groups;
  for (const auto& s : train_samples) train_groups.insert(s.group_id);
  for (const auto& s : test_samples) test_groups.insert(s.group_id);
  std::vector<int64_t> leak;
  std::set_intersection(train_groups.begin(), train_groups.end(),
                        test_groups.begin(), test_groups.end(),
                        std::back_inserter(leak));

  std::ostringstream ss;
  ss << lines << " lines, byte-identical rerun "
     << (bytes_a == bytes_b ? "yes" : "NO") << ", leaked groups "
     << leak.size() << ", test samples " << split.n_test_samples;
  detail = ss.str();
  return first.n_samples == 57267 && lines == 57267 && bytes_a == bytes_b &&
         leak.empty();
}

// ---------------------------------------------------------------------------
// 9: ACC property suite over 1000 random pairs
bool criterion_9(std::string& detail) {
  RngStream rng(901);
  for (int trial = 0; trial < 1000; ++trial) {
    SHCoeffs u(trial % 2 ? 8 : 10), v(10);
    for (double& x : u.coeffs) x = 2.0 * rng.uniform() - 1.0;
    for (double& x : v.coeffs) x = 2.0 * rng.uniform() - 1.0;

    const double uv = acc(u, v);
    if (std::abs(uv) > 1.0 + 1e-12) {
      detail = "Cauchy-Schwarz bound violated";
      return false;
    }
    if (std::abs(uv - acc(v, u)) > 1e-14) {
      detail = "symmetry violated";
      return false;
    }
    if (std::abs(acc(u, u) - 1.0) > 1e-14) {
      detail = "self ACC differs from 1";
      return false;
    }
    SHCoeffs su = u, sv = v;
    const double alpha = 0.25 + rng.uniform(), beta = 0.25 + rng.uniform();
    for (double& x : su.coeffs) x *= alpha;
    for (double& x : sv.coeffs) x *= beta;
    if (std::abs(acc(su, sv) - uv) > 1e-12) {
      detail = "scale invariance violated";
      return false;
    }
    if (trial % 10 == 0) {
      const Rotation q = random_rotation(rng);
      SHCoeffs u10(10);
      for (size_t j = 0; j < u.coeffs.size(); ++j) u10.coeffs[j] = u.coeffs[j];
      const double rotated = acc(rotate_sh(u10, q), rotate_sh(v, q));
      if (std::abs(rotated - uv) > 1e-9) {
        detail = "rotation invariance violated";
        return false;
      }
    }
  }
  detail = "symmetry, scale, rotation invariance and self-ACC over 1000 pairs";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, skip;
  for (int i = 1; i < argc; ++i) {
    const auto parse_list = [&](const char* arg, std::set<int>& into) {
      std::istringstream ss(arg);
      std::string token;
      while (std::getline(ss, token, ',')) into.insert(std::stoi(token));
    };
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc)
      parse_list(argv[++i], only);
    else if (std::strcmp(argv[i], "--skip") == 0 && i + 1 < argc)
      parse_list(argv[++i], skip);
  }

  const std::vector<Criterion> criteria = {
      {1, "paper-number feasibility statement", criterion_1},
      {2, "end-to-end direction-of-effect replication", criterion_2},
      {3, "SH round trip", criterion_3},
      {4, "rotation correctness", criterion_4},
      {5, "CSD oracle", criterion_5},
      {6, "gradient check", criterion_6},
      {7, "Wilcoxon oracle", criterion_7},
      {8, "dataset determinism and counts", criterion_8},
      {9, "ACC properties suite", criterion_9},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    if (!only.empty() && !only.count(criterion.id)) continue;
    if (skip.count(criterion.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = criterion.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%s] criterion %d (%s): %s (%.2f s)\n", ok ? "PASS" : "FAIL",
                criterion.id, criterion.name.c_str(), detail.c_str(), secs);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
