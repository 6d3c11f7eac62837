// respscan: respiration screening pipeline for masked-face thermal video.
// Subcommands: extract, synth, train, eval, analyze.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "resp/error.hpp"
#include "resp/eval.hpp"
#include "resp/frameio.hpp"
#include "resp/net.hpp"
#include "resp/roi.hpp"
#include "resp/synth.hpp"
#include "resp/types.hpp"

namespace fs = std::filesystem;
using namespace resp;

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va == 0 || vb == 0) return 0.0;
  return cov / std::sqrt(va * vb);
}

struct RoiFlags {
  int block_w = 0;  // 0 = mask_width / 5
  int block_h = 0;  // 0 = mask_height / 5
  int stride = 0;   // 0 = half the smaller block side
};

roi::RoiSelection select_with_flags(const FrameSequence& seq, const RoiFlags& flags) {
  int min_w = 1 << 30, min_h = 1 << 30;
  for (std::size_t f = 0; f < seq.size(); ++f) {
    roi::MaskRegion mask = roi::thermal_mask_region(seq, f);
    min_w = std::min(min_w, mask.width());
    min_h = std::min(min_h, mask.height());
  }
  const int bw = flags.block_w > 0 ? flags.block_w : std::max(1, min_w / 5);
  const int bh = flags.block_h > 0 ? flags.block_h : std::max(1, min_h / 5);
  const int stride = flags.stride > 0 ? flags.stride : std::max(1, std::min(bw, bh) / 2);
  return roi::select_roi(seq, bw, bh, stride);
}

int cmd_extract(const std::string& seq_dir, const std::string& out_trace,
                const RoiFlags& flags) {
  if (!fs::is_directory(seq_dir))
    throw UsageError("input directory not found: " + seq_dir);
  FrameSequence seq = frameio::load_sequence(seq_dir);
  roi::RoiSelection selection = select_with_flags(seq, flags);
  RespirationTrace trace = roi::extract_trace(seq, selection);
  trace.provenance = "extract:" + seq_dir;
  RespirationTrace normalized = roi::normalize_trace(trace);
  frameio::save_trace(normalized, out_trace);
  std::printf("roi: rel=(%.4f,%.4f) block=%dx%d variance=%.6g candidates=%ld\n",
              selection.block.rel_x, selection.block.rel_y, selection.block.block_w,
              selection.block.block_h, selection.variance,
              selection.candidates_evaluated);
  std::printf("trace: %zu samples -> %s\n", normalized.values.size(), out_trace.c_str());
  return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir) {
  synth::SynthConfig config = synth::parse_synth_config(config_path);
  fs::create_directories(out_dir);

  if (config.mode == "dataset") {
    auto traces = synth::gen_dataset(config.n_normal, config.n_abnormal,
                                     config.segment_len, config.seed,
                                     config.wave.sample_rate);
    std::ofstream index(fs::path(out_dir) / "index.csv", std::ios::trunc);
    if (!index) throw IoError("cannot write index.csv in " + out_dir);
    index << "path,label,seed\n";
    char name[32];
    for (std::size_t i = 0; i < traces.size(); ++i) {
      std::snprintf(name, sizeof(name), "trace_%05zu.csv", i);
      frameio::save_trace(traces[i], fs::path(out_dir) / name);
      index << name << "," << label_name(*traces[i].label) << "," << config.seed << "\n";
    }
    std::printf("dataset: %zu traces -> %s\n", traces.size(), out_dir.c_str());
  } else {
    auto [seq, truth] = synth::gen_sequence(config.scene, config.wave);
    frameio::save_sequence(seq, out_dir);
    truth.provenance = "synth:ground-truth";
    frameio::save_trace(truth, fs::path(out_dir) / "ground_truth.csv");
    std::printf("sequence: %zu frames -> %s\n", seq.size(), out_dir.c_str());
  }
  return 0;
}

std::vector<net::LabeledTrace> load_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest " + manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();

  std::string line;
  if (!std::getline(in, line) || line != "path,label,seed")
    throw ParseError(manifest_path + ":1: expected 'path,label,seed' header");

  std::vector<net::LabeledTrace> dataset;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string path, label_str, seed_str;
    if (!std::getline(row, path, ',') || !std::getline(row, label_str, ',') ||
        !std::getline(row, seed_str))
      throw ParseError(manifest_path + ":" + std::to_string(line_no) + ": malformed row");
    RespirationTrace trace = frameio::load_trace(base / path);
    if (!trace.label || *trace.label != parse_label(label_str))
      throw ValidationError(manifest_path + ":" + std::to_string(line_no) +
                            ": label disagrees with trace file " + path);
    dataset.push_back({std::move(trace.values), *trace.label});
  }
  if (dataset.empty()) throw ValidationError(manifest_path + ": empty manifest");
  return dataset;
}

struct TrainFlags {
  std::string variant = "bigru-at";
  int hidden = 32;
  int attn = 8;
  double lr = 1e-3;
  int epochs = 50;
  int batch = 32;
  std::uint64_t seed = 0;
  double train_frac = 0.76;
};

int cmd_train(const std::string& manifest, const std::string& out_model,
              const std::string& log_path, const TrainFlags& flags) {
  auto dataset = load_manifest(manifest);
  std::vector<net::LabeledTrace> train_set, test_set;
  eval::split(dataset, flags.train_frac, flags.seed, train_set, test_set);

  net::Variant variant = net::parse_variant(flags.variant);
  net::ModelParams model = net::init_model(variant, flags.hidden, flags.attn, 1, flags.seed);
  net::TrainConfig config{flags.lr, flags.epochs, flags.batch, flags.seed};

  std::printf("training %s on %zu traces (%zu held out)\n",
              net::variant_name(variant).c_str(), train_set.size(), test_set.size());
  net::TrainResult result = net::train(model, train_set, config, [](const net::EpochStats& s) {
    std::printf("epoch %3d  loss %.4f  accuracy %.4f\n", s.epoch, s.loss, s.accuracy);
  });

  net::save_model(result.model, out_model);
  if (!log_path.empty()) net::write_train_log(result.log, "train", log_path);

  eval::EvalReport report = eval::evaluate(result.model, test_set);
  std::printf("test accuracy %.4f precision %.4f recall %.4f f1 %.4f\n", report.accuracy,
              report.precision, report.recall, report.f1);
  std::printf("model -> %s\n", out_model.c_str());
  return 0;
}

int cmd_eval(const std::string& manifest, const std::vector<std::string>& model_paths,
             const std::string& out_report, std::uint64_t seed, double train_frac) {
  auto dataset = load_manifest(manifest);
  std::vector<net::LabeledTrace> train_set, test_set;
  eval::split(dataset, train_frac, seed, train_set, test_set);

  std::vector<eval::EvalReport> reports;
  for (const std::string& path : model_paths) {
    net::ModelParams model = net::load_model(path);
    reports.push_back(eval::evaluate(model, test_set));
    const eval::EvalReport& r = reports.back();
    std::printf("%-10s accuracy %.4f precision %.4f recall %.4f f1 %.4f\n",
                net::variant_name(r.model_variant).c_str(), r.accuracy, r.precision,
                r.recall, r.f1);
  }
  eval::write_report_csv(reports, out_report);
  const fs::path report_dir = fs::path(out_report).parent_path();
  for (const eval::EvalReport& r : reports) {
    fs::path confusion = report_dir /
        ("confusion_" + net::variant_id(r.model_variant) + ".csv");
    eval::write_confusion_csv(r, confusion);
  }
  std::printf("report -> %s\n", out_report.c_str());
  return 0;
}

// One synthetic render + extraction; returns |Pearson r| against the
// ground-truth hotspot waveform.
double recovery_correlation(const synth::SceneSpec& scene, const synth::WaveformSpec& wave) {
  auto [seq, truth] = synth::gen_sequence(scene, wave);
  roi::RoiSelection selection = select_with_flags(seq, RoiFlags{});
  RespirationTrace extracted = roi::extract_trace(seq, selection);
  return std::abs(pearson(extracted.values, truth.values));
}

int cmd_analyze(const std::string& mode, const std::string& out_csv, int seeds,
                std::uint64_t base_seed) {
  if (mode != "mask" && mode != "distance" && mode != "angle")
    throw UsageError("unknown analyze mode '" + mode + "' (expected mask, distance or angle)");
  if (seeds < 1) throw UsageError("--seeds must be >= 1");

  synth::WaveformSpec wave;  // normal defaults
  std::ofstream out(out_csv, std::ios::trunc);
  if (!out) throw IoError("cannot write " + out_csv);
  char buf[128];

  // Seeds are reused across parameter values so each sweep is paired.
  auto mean_r = [&](const synth::SceneSpec& base) {
    double total = 0.0;
    for (int s = 0; s < seeds; ++s) {
      synth::SceneSpec scene = base;
      scene.seed = base_seed + static_cast<std::uint64_t>(s);
      total += recovery_correlation(scene, wave);
    }
    return total / seeds;
  };

  if (mode == "distance") {
    // Heavier sensor noise than the defaults so the far-range decay is
    // visible above the saturation plateau.
    out << "distance_factor,mean_abs_r\n";
    for (double factor : {1.0, 2.0, 4.0, 8.0, 12.0, 15.0}) {
      synth::SceneSpec scene;
      scene.pixel_noise = 6.0;
      scene.distance_factor = factor;
      double r = mean_r(scene);
      std::snprintf(buf, sizeof(buf), "%g,%.9g\n", factor, r);
      out << buf;
      std::printf("distance %5.1f  mean |r| %.4f\n", factor, r);
    }
  } else if (mode == "angle") {
    out << "axis,angle_deg,mean_abs_r\n";
    for (const char* axis : {"horizontal", "vertical"}) {
      for (double angle : {0.0, 15.0, 30.0, 45.0}) {
        synth::SceneSpec scene;
        scene.pixel_noise = 6.0;
        if (std::string(axis) == "horizontal")
          scene.horizontal_angle = angle;
        else
          scene.vertical_angle = angle;
        double r = mean_r(scene);
        std::snprintf(buf, sizeof(buf), "%s,%g,%.9g\n", axis, angle, r);
        out << buf;
        std::printf("%-10s %4.0f deg  mean |r| %.4f\n", axis, angle, r);
      }
    }
  } else {
    // Three mask analogues with decreasing thermal transmission, at the
    // default sensor noise.
    out << "hotspot_gain,mean_abs_r\n";
    for (double gain : {400.0, 300.0, 220.0}) {
      synth::SceneSpec scene;
      scene.hotspot_gain = gain;
      double r = mean_r(scene);
      std::snprintf(buf, sizeof(buf), "%g,%.9g\n", gain, r);
      out << buf;
      std::printf("gain %5.0f  mean |r| %.4f\n", gain, r);
    }
  }
  std::printf("sweep -> %s\n", out_csv.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"respiration screening pipeline for masked-face thermal video"};
  app.require_subcommand(1);

  // extract
  auto* extract = app.add_subcommand("extract", "extract a respiration trace from a frame directory");
  std::string seq_dir, out_trace;
  RoiFlags roi_flags;
  extract->add_option("--in", seq_dir, "sequence directory")->required();
  extract->add_option("--out", out_trace, "output trace CSV")->required();
  extract->add_option("--block-w", roi_flags.block_w, "ROI block width in px (0 = mask/5)");
  extract->add_option("--block-h", roi_flags.block_h, "ROI block height in px (0 = mask/5)");
  extract->add_option("--stride", roi_flags.stride, "search stride in px (0 = half block)");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset or sequence");
  std::string config_path, synth_out;
  synth_cmd->add_option("--config", config_path, "key=value config file")->required();
  synth_cmd->add_option("--out", synth_out, "output directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train a classifier on a dataset manifest");
  std::string manifest, out_model, log_path;
  TrainFlags train_flags;
  train_cmd->add_option("--manifest", manifest, "index.csv of the dataset")->required();
  train_cmd->add_option("--out", out_model, "output model checkpoint")->required();
  train_cmd->add_option("--log", log_path, "training log CSV");
  train_cmd->add_option("--variant", train_flags.variant,
                        "bigru-at | gru-at | bilstm-at | lstm");
  train_cmd->add_option("--hidden", train_flags.hidden, "recurrent hidden size");
  train_cmd->add_option("--attn", train_flags.attn, "attention size");
  train_cmd->add_option("--lr", train_flags.lr, "Adam learning rate");
  train_cmd->add_option("--epochs", train_flags.epochs, "training epochs");
  train_cmd->add_option("--batch", train_flags.batch, "mini-batch size");
  train_cmd->add_option("--seed", train_flags.seed, "RNG seed (init, shuffle, split)");
  train_cmd->add_option("--train-frac", train_flags.train_frac, "stratified train fraction");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate trained models on the held-out split");
  std::string eval_manifest, out_report;
  std::vector<std::string> model_paths;
  std::uint64_t eval_seed = 0;
  double eval_frac = 0.76;
  eval_cmd->add_option("--manifest", eval_manifest, "index.csv of the dataset")->required();
  eval_cmd->add_option("--model", model_paths, "model checkpoint (repeatable)")->required();
  eval_cmd->add_option("--out", out_report, "report CSV")->required();
  eval_cmd->add_option("--seed", eval_seed, "split seed (must match training)");
  eval_cmd->add_option("--train-frac", eval_frac, "stratified train fraction");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "sweep a degradation parameter");
  std::string mode, analyze_out;
  int analyze_seeds = 20;
  std::uint64_t analyze_seed = 1000;
  analyze->add_option("--mode", mode, "mask | distance | angle")->required();
  analyze->add_option("--out", analyze_out, "sweep CSV")->required();
  analyze->add_option("--seeds", analyze_seeds, "scenes per parameter value");
  analyze->add_option("--seed", analyze_seed, "base RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*extract) return cmd_extract(seq_dir, out_trace, roi_flags);
    if (*synth_cmd) return cmd_synth(config_path, synth_out);
    if (*train_cmd) return cmd_train(manifest, out_model, log_path, train_flags);
    if (*eval_cmd) return cmd_eval(eval_manifest, model_paths, out_report, eval_seed, eval_frac);
    if (*analyze) return cmd_analyze(mode, analyze_out, analyze_seeds, analyze_seed);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
