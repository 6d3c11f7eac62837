// Acceptance suite: runs each numbered criterion and prints one PASS/FAIL
// line. Criteria 6 and 7 drive the respscan binary end to end (--bin).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "resp/eval.hpp"
#include "resp/frameio.hpp"
#include "resp/net.hpp"
#include "resp/roi.hpp"
#include "resp/synth.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace resp;

namespace {

std::string g_bin;  // path to respscan, required for criteria 6 and 7

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

int run_cmd(const std::string& cmd) {
  int status = std::system(cmd.c_str());
  return status < 0 ? status : WEXITSTATUS(status);
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool dirs_byte_identical(const fs::path& a, const fs::path& b, std::string& diff) {
  std::vector<std::string> names_a, names_b;
  for (const auto& e : fs::directory_iterator(a)) names_a.push_back(e.path().filename());
  for (const auto& e : fs::directory_iterator(b)) names_b.push_back(e.path().filename());
  std::sort(names_a.begin(), names_a.end());
  std::sort(names_b.begin(), names_b.end());
  if (names_a != names_b) {
    diff = "file lists differ";
    return false;
  }
  for (const auto& name : names_a) {
    if (read_bytes(a / name) != read_bytes(b / name)) {
      diff = "content differs: " + name;
      return false;
    }
  }
  return true;
}

// Default ROI flags used by the CLI: block = mask/5, stride = half block.
roi::RoiSelection select_default(const FrameSequence& seq) {
  int min_w = 1 << 30, min_h = 1 << 30;
  for (std::size_t f = 0; f < seq.size(); ++f) {
    roi::MaskRegion mask = roi::thermal_mask_region(seq, f);
    min_w = std::min(min_w, mask.width());
    min_h = std::min(min_h, mask.height());
  }
  const int bw = std::max(1, min_w / 5);
  const int bh = std::max(1, min_h / 5);
  return roi::select_roi(seq, bw, bh, std::max(1, std::min(bw, bh) / 2));
}

double recovery(const synth::SceneSpec& scene, const synth::WaveformSpec& wave) {
  auto [seq, truth] = synth::gen_sequence(scene, wave);
  RespirationTrace trace = roi::extract_trace(seq, select_default(seq));
  return std::abs(oracle::pearson(trace.values, truth.values));
}

// ---------------------------------------------------------------- criterion 1
bool criterion_roi_oracle(std::string& detail) {
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<int> face_w(16, 64);   // mask width  <= 32
  std::uniform_int_distribution<int> face_h(20, 100);  // mask height <= 30
  std::uniform_int_distribution<int> frames(3, 50);
  std::uniform_int_distribution<int> block(2, 6);

  int mismatches = 0;
  const int cases = 50;
  for (int it = 0; it < cases; ++it) {
    int w = face_w(rng), h = face_h(rng);
    FaceBox box{0, 2, 2, w, h};
    FrameSequence seq = testutil::random_sequence(frames(rng), w + 8, h + 8, box, rng);
    int bw = std::min(block(rng), roi::mask_from_face(box).width());
    int bh = std::min(block(rng), roi::mask_from_face(box).height());

    oracle::BruteRoi want = oracle::brute_force_roi(seq, bw, bh);
    roi::RoiSelection got = roi::select_roi(seq, bw, bh, 1);
    roi::MaskRegion mask = roi::mask_from_face(box);
    long dx = std::lround(got.block.rel_x * mask.width());
    long dy = std::lround(got.block.rel_y * mask.height());
    if (dx != want.dx || dy != want.dy || got.candidates_evaluated != want.candidates)
      ++mismatches;
  }
  detail = std::to_string(cases - mismatches) + "/" + std::to_string(cases) + " matches";
  return mismatches == 0;
}

// ---------------------------------------------------------------- criterion 2
bool criterion_trace_recovery(std::string& detail) {
  synth::SceneSpec clean;
  clean.pixel_noise = 0.0;
  synth::WaveformSpec clean_wave;
  clean_wave.noise_sigma = 0.0;
  const double r_clean = recovery(clean, clean_wave);

  synth::SceneSpec noisy;  // defaults carry the default noise level
  synth::WaveformSpec noisy_wave;
  const double r_noisy = recovery(noisy, noisy_wave);

  char buf[128];
  std::snprintf(buf, sizeof(buf), "noise-free |r|=%.5f (>=0.99), default-noise |r|=%.5f (>=0.95)",
                r_clean, r_noisy);
  detail = buf;
  return r_clean >= 0.99 && r_noisy >= 0.95;
}

// ---------------------------------------------------------------- criterion 3
bool criterion_gradients(std::string& detail) {
  std::mt19937_64 rng(3003);
  std::uniform_int_distribution<int> hidden_dist(2, 4), steps_dist(3, 8);
  double worst = 0.0;
  std::string worst_block;

  for (int it = 0; it < 20; ++it) {
    auto variant = static_cast<net::Variant>(it % 4);
    int hidden = hidden_dist(rng);
    net::ModelParams model = net::init_model(variant, hidden, 2, 1, 9000 + it);
    auto values = testutil::normalized_random_values(steps_dist(rng), rng);
    Label label = it % 2 ? Label::kAbnormal : Label::kNormal;

    net::ModelParams analytic = net::backward(model, values, label);
    net::ModelParams numeric = oracle::finite_difference_grads(model, values, label, 1e-5);
    auto va = net::param_views(analytic);
    auto vn = net::param_views(numeric);
    for (std::size_t b = 0; b < va.size(); ++b) {
      for (long k = 0; k < va[b].size(); ++k) {
        double rel = std::abs(va[b].data[k] - vn[b].data[k]) /
                     std::max(std::abs(va[b].data[k]) + std::abs(vn[b].data[k]), 1e-6);
        if (rel > worst) {
          worst = rel;
          worst_block = va[b].name;
        }
      }
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "20 models, worst relative error %.3g in %s (< 1e-4)",
                worst, worst_block.c_str());
  detail = buf;
  return worst < 1e-4;
}

// ---------------------------------------------------------------- criterion 4
bool criterion_softmax_invariants(std::string& detail) {
  std::mt19937_64 rng(4004);
  std::uniform_real_distribution<double> extreme(-1e3, 1e3);
  std::uniform_int_distribution<int> steps_dist(1, 40);
  double worst_alpha = 0.0, worst_prob = 0.0;

  for (int it = 0; it < 500; ++it) {  // attention layer on raw hidden states
    net::ModelParams m = net::init_model(net::Variant::kGruAt, 4, 3, 1, 5000 + it);
    int steps = steps_dist(rng);
    std::vector<net::VectorXd> hidden(steps, net::VectorXd::Zero(4));
    for (auto& h : hidden)
      for (int i = 0; i < 4; ++i) h[i] = extreme(rng);
    net::AttentionResult res = net::attention(*m.attention, hidden);
    worst_alpha = std::max(worst_alpha, std::abs(res.weights.sum() - 1.0));
    for (int t = 0; t < steps; ++t)
      if (!(res.weights[t] > 0.0) || !std::isfinite(res.weights[t])) return false;
  }

  for (int it = 0; it < 500; ++it) {  // full forward on extreme raw inputs
    auto variant = static_cast<net::Variant>(it % 4);
    net::ModelParams m = net::init_model(variant, 3, 2, 1, 6000 + it);
    std::vector<double> values(steps_dist(rng));
    for (auto& v : values) v = extreme(rng);
    net::ForwardTrace ft = net::forward(m, values, {.check_normalization = false});
    if (!std::isfinite(ft.probs[0]) || !std::isfinite(ft.probs[1])) return false;
    worst_prob = std::max(worst_prob, std::abs(ft.probs.sum() - 1.0));
    if (net::has_attention(variant))
      worst_alpha = std::max(worst_alpha, std::abs(ft.attn_weights.sum() - 1.0));
  }

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "1000 inputs, worst |sum(alpha)-1|=%.2e, worst |sum(p)-1|=%.2e (<=1e-9)",
                worst_alpha, worst_prob);
  detail = buf;
  return worst_alpha <= 1e-9 && worst_prob <= 1e-9;
}

// ---------------------------------------------------------------- criterion 5
bool criterion_classifier(std::string& detail) {
  const std::uint64_t seed = 2024;
  auto dataset = synth::gen_dataset(1925, 2292, 100, seed);

  std::vector<net::LabeledTrace> labeled;
  labeled.reserve(dataset.size());
  for (auto& t : dataset) labeled.push_back({std::move(t.values), *t.label});

  std::vector<net::LabeledTrace> train_set, test_set;
  eval::split(labeled, 0.76, seed, train_set, test_set);
  std::printf("  dataset: %zu train / %zu test\n", train_set.size(), test_set.size());

  net::TrainConfig config{1e-3, 50, 32, seed};
  std::map<net::Variant, double> accuracy;
  for (net::Variant variant : {net::Variant::kBiGruAt, net::Variant::kLstm}) {
    Timer t;
    net::ModelParams model = net::init_model(variant, 32, 8, 1, seed);
    net::TrainResult result = net::train(model, train_set, config,
                                         [&](const net::EpochStats& s) {
      if (s.epoch % 10 == 0)
        std::printf("  %s epoch %d loss %.4f acc %.4f (%.0fs)\n",
                    net::variant_name(variant).c_str(), s.epoch, s.loss, s.accuracy,
                    t.seconds());
    });
    eval::EvalReport report = eval::evaluate(result.model, test_set);
    accuracy[variant] = report.accuracy;
    std::printf("  %s test accuracy %.4f (%.0fs)\n", net::variant_name(variant).c_str(),
                report.accuracy, t.seconds());
  }

  const double bigru = accuracy[net::Variant::kBiGruAt];
  const double lstm = accuracy[net::Variant::kLstm];
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "BiGRU-AT accuracy %.4f (>=0.85), LSTM %.4f, margin %.4f (>=0.02)", bigru,
                lstm, bigru - lstm);
  detail = buf;
  return bigru >= 0.85 && bigru - lstm >= 0.02;
}

// ---------------------------------------------------------------- criterion 6
std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.push_back(field);
    rows.push_back(row);
  }
  return rows;
}

bool criterion_robustness(std::string& detail) {
  testutil::TempDir dir("robust");
  const std::string base = "\"" + g_bin + "\"";

  if (run_cmd(base + " analyze --mode distance --seeds 20 --out " +
              (dir.path / "distance.csv").string() + " > /dev/null") != 0)
    return false;
  if (run_cmd(base + " analyze --mode angle --seeds 20 --out " +
              (dir.path / "angle.csv").string() + " > /dev/null") != 0)
    return false;
  if (run_cmd(base + " analyze --mode mask --seeds 20 --out " +
              (dir.path / "mask.csv").string() + " > /dev/null") != 0)
    return false;

  auto distance = read_csv(dir.path / "distance.csv");
  bool monotone = true;
  for (std::size_t i = 2; i < distance.size(); ++i)
    if (std::stod(distance[i][1]) > std::stod(distance[i - 1][1])) monotone = false;

  auto angle = read_csv(dir.path / "angle.csv");
  double h45 = -1.0, v45 = -1.0;
  for (std::size_t i = 1; i < angle.size(); ++i) {
    if (angle[i][0] == "horizontal" && angle[i][1] == "45") h45 = std::stod(angle[i][2]);
    if (angle[i][0] == "vertical" && angle[i][1] == "45") v45 = std::stod(angle[i][2]);
  }

  auto mask = read_csv(dir.path / "mask.csv");
  double mask_min = 1.0;
  for (std::size_t i = 1; i < mask.size(); ++i)
    mask_min = std::min(mask_min, std::stod(mask[i][1]));

  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "distance monotone=%s, v45 %.3f < h45 %.3f, mask min |r| %.3f (>=0.9)",
                monotone ? "yes" : "no", v45, h45, mask_min);
  detail = buf;
  return monotone && v45 >= 0.0 && h45 >= 0.0 && v45 < h45 && mask_min >= 0.9;
}

// ---------------------------------------------------------------- criterion 7
// Every command is run twice with identical flags; the snapshot of its
// output files must be byte-identical across the two runs.
bool criterion_cli_determinism(std::string& detail) {
  testutil::TempDir dir("determinism");
  const std::string base = "\"" + g_bin + "\"";

  {
    std::ofstream cfg(dir.path / "dataset.cfg");
    cfg << "mode=dataset\nn_normal=30\nn_abnormal=30\nsegment_len=100\nseed=5\n";
  }
  {
    std::ofstream cfg(dir.path / "scene.cfg");
    cfg << "mode=sequence\nseed=6\n";
  }

  const fs::path data = dir.path / "data";
  const fs::path scene = dir.path / "scene";
  const std::vector<std::pair<std::string, std::vector<fs::path>>> commands = {
      {base + " synth --config " + (dir.path / "dataset.cfg").string() + " --out " +
           data.string(),
       {data}},
      {base + " synth --config " + (dir.path / "scene.cfg").string() + " --out " +
           scene.string(),
       {scene}},
      {base + " extract --in " + scene.string() + " --out " +
           (dir.path / "trace.csv").string(),
       {dir.path / "trace.csv"}},
      {base + " train --manifest " + (data / "index.csv").string() +
           " --variant gru-at --hidden 4 --attn 2 --epochs 2 --batch 8 --seed 3 --out " +
           (dir.path / "model.bin").string() + " --log " + (dir.path / "log.csv").string(),
       {dir.path / "model.bin", dir.path / "log.csv"}},
      {base + " eval --manifest " + (data / "index.csv").string() + " --model " +
           (dir.path / "model.bin").string() + " --seed 3 --out " +
           (dir.path / "report.csv").string(),
       {dir.path / "report.csv", dir.path / "confusion_gru-at.csv"}},
      {base + " analyze --mode mask --seeds 2 --out " + (dir.path / "sweep.csv").string(),
       {dir.path / "sweep.csv"}},
  };

  auto snapshot = [](const std::vector<fs::path>& outputs) {
    std::map<std::string, std::string> state;
    for (const fs::path& out : outputs) {
      if (fs::is_directory(out)) {
        for (const auto& e : fs::directory_iterator(out))
          state[e.path().string()] = read_bytes(e.path());
      } else {
        state[out.string()] = read_bytes(out);
      }
    }
    return state;
  };

  for (const auto& [cmd, outputs] : commands) {
    if (run_cmd(cmd + " > /dev/null") != 0) {
      detail = "command failed: " + cmd;
      return false;
    }
    auto first = snapshot(outputs);
    if (run_cmd(cmd + " > /dev/null") != 0) {
      detail = "rerun failed: " + cmd;
      return false;
    }
    if (snapshot(outputs) != first) {
      detail = "rerun changed outputs of: " + cmd;
      return false;
    }
  }
  detail = "synth, extract, train, eval, analyze reruns byte-identical";
  return true;
}

// ---------------------------------------------------------------- criterion 8
bool criterion_round_trips(std::string& detail) {
  testutil::TempDir dir("roundtrips");
  std::mt19937_64 rng(8008);
  std::uniform_real_distribution<double> mag(-1e6, 1e6);
  std::uniform_int_distribution<int> len(1, 200);

  for (int it = 0; it < 100; ++it) {
    RespirationTrace trace;
    trace.sample_rate = std::abs(mag(rng)) + 0.1;
    trace.provenance = "acceptance " + std::to_string(it);
    if (it % 2) trace.label = it % 4 == 1 ? Label::kNormal : Label::kAbnormal;
    int n = len(rng);
    for (int i = 0; i < n; ++i) trace.values.push_back(mag(rng) * std::exp(mag(rng) / 2e5));
    frameio::save_trace(trace, dir.path / "t.csv");
    RespirationTrace back = frameio::load_trace(dir.path / "t.csv");
    if (back.values != trace.values || back.sample_rate != trace.sample_rate ||
        back.label != trace.label) {
      detail = "trace round trip mismatch at case " + std::to_string(it);
      return false;
    }
  }

  std::uniform_int_distribution<int> hidden(1, 6);
  for (int it = 0; it < 100; ++it) {
    auto variant = static_cast<net::Variant>(it % 4);
    net::ModelParams m = net::init_model(variant, hidden(rng), 1 + it % 4, 1, 8100 + it);
    net::save_model(m, dir.path / "m.bin");
    net::ModelParams back = net::load_model(dir.path / "m.bin");
    auto va = net::param_views(m);
    auto vb = net::param_views(back);
    for (std::size_t b = 0; b < va.size(); ++b)
      for (long k = 0; k < va[b].size(); ++k)
        if (va[b].data[k] != vb[b].data[k]) {
          detail = "model round trip mismatch at case " + std::to_string(it);
          return false;
        }
  }
  detail = "100 traces and 100 models, bitwise";
  return true;
}

struct Criterion {
  int id;
  const char* name;
  bool (*fn)(std::string&);
  bool needs_bin;
};

const Criterion kCriteria[] = {
    {1, "ROI selection equals the brute-force argmax", criterion_roi_oracle, false},
    {2, "trace recovery correlation", criterion_trace_recovery, false},
    {3, "analytic gradients vs central differences", criterion_gradients, false},
    {4, "attention/softmax invariants", criterion_softmax_invariants, false},
    {5, "classifier accuracy and ordering", criterion_classifier, false},
    {6, "robustness orderings (distance/angle/mask)", criterion_robustness, true},
    {7, "CLI determinism", criterion_cli_determinism, true},
    {8, "trace and model round trips", criterion_round_trips, false},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) only = std::atoi(argv[++i]);
    else if (arg == "--bin" && i + 1 < argc) g_bin = argv[++i];
  }

  int failures = 0;
  for (const Criterion& criterion : kCriteria) {
    if (only != 0 && criterion.id != only) continue;
    if (criterion.needs_bin && g_bin.empty()) {
      std::printf("[FAIL] criterion %d: %s (missing --bin)\n", criterion.id, criterion.name);
      ++failures;
      continue;
    }
    Timer timer;
    std::string detail;
    bool ok = false;
    try {
      ok = criterion.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] criterion %d: %s — %s (%.1fs)\n", ok ? "PASS" : "FAIL",
                criterion.id, criterion.name, detail.c_str(), timer.seconds());
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
