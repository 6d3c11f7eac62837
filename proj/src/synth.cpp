#include "resp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "resp/error.hpp"
#include "resp/roi.hpp"

namespace resp::synth {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

// Burst events accelerate breathing, pauses nearly stop it.
constexpr double kBurstFreqFactor = 2.5;
constexpr double kBurstAmpFactor = 1.2;
constexpr double kPauseAmpFactor = 0.05;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t v = seed + stream * 0x9e3779b97f4a7c15ULL;
  v ^= v >> 30;
  v *= 0xbf58476d1ce4e5b9ULL;
  v ^= v >> 27;
  v *= 0x94d049bb133111ebULL;
  v ^= v >> 31;
  return v;
}

struct Event {
  double start;
  double end;
  bool burst;  // false = pause
};

std::vector<Event> draw_events(const WaveformSpec& spec, std::mt19937_64& rng) {
  std::vector<Event> events;
  if (spec.event_rate <= 0.0) return events;
  std::exponential_distribution<double> gap(spec.event_rate);
  std::uniform_real_distribution<double> length(1.0, 2.0);
  std::bernoulli_distribution kind(0.5);
  double t = gap(rng);
  while (t < spec.duration) {
    double len = length(rng);
    events.push_back({t, t + len, kind(rng)});
    t += len + gap(rng);
  }
  return events;
}

}  // namespace

WaveformSpec normal_waveform_defaults() { return WaveformSpec{}; }

WaveformSpec abnormal_waveform_defaults() {
  WaveformSpec spec;
  spec.label = Label::kAbnormal;
  spec.base_freq = 0.5;
  spec.freq_jitter = 0.25;
  spec.amp_jitter = 0.25;
  spec.event_rate = 0.2;
  return spec;
}

void validate_waveform_spec(const WaveformSpec& spec) {
  if (spec.base_freq <= 0.0 || spec.sample_rate <= 0.0 || spec.duration <= 0.0 ||
      spec.amp <= 0.0)
    throw ValidationError("waveform frequencies, rate, duration and amplitude must be positive");
  if (spec.freq_jitter < 0.0 || spec.amp_jitter < 0.0 || spec.event_rate < 0.0 ||
      spec.noise_sigma < 0.0)
    throw ValidationError("waveform jitter, event rate and noise must be non-negative");
  if (spec.label == Label::kNormal) {
    if (spec.freq_jitter > 0.05 || spec.amp_jitter > 0.05 || spec.event_rate != 0.0)
      throw ValidationError("normal waveform must have jitter <= 0.05 and no events");
  } else {
    if (spec.base_freq <= kNormalBaseFreq)
      throw ValidationError("abnormal waveform must be faster than the normal default");
    if (spec.freq_jitter <= 0.15 && spec.amp_jitter <= 0.15 && spec.event_rate <= 0.0)
      throw ValidationError("abnormal waveform must be irregular (jitter > 0.15 or events)");
  }
}

void validate_scene_spec(const SceneSpec& scene) {
  if (scene.thermal_w <= 0 || scene.thermal_h <= 0)
    throw ValidationError("thermal dimensions must be positive");
  if (scene.rgb_scale < 0) throw ValidationError("rgb_scale must be >= 0");
  if (scene.distance_factor < 1.0 || scene.distance_factor > 20.0)
    throw ValidationError("distance_factor must lie in [1, 20]");
  if (scene.hotspot_rel_x < 0.0 || scene.hotspot_rel_x >= 1.0 ||
      scene.hotspot_rel_y < 0.0 || scene.hotspot_rel_y >= 1.0)
    throw ValidationError("hotspot escapes the mask region (relative position outside [0,1))");
  if (scene.ambient_level < 0.0 || scene.hotspot_gain < 0.0 || scene.pixel_noise < 0.0)
    throw ValidationError("levels, gain and noise must be non-negative");
  if (scene.vertical_angle < 0.0 || scene.vertical_angle > 90.0 ||
      scene.horizontal_angle < 0.0 || scene.horizontal_angle > 90.0)
    throw ValidationError("angles must lie in [0, 90] degrees");
}

double horizontal_attenuation(double degrees) {
  return std::sqrt(std::cos(degrees * std::numbers::pi / 180.0));
}

double vertical_attenuation(double degrees) {
  // Mild up to 30 degrees, then the nostril hotspot drops out of view.
  if (degrees <= 30.0) return std::sqrt(std::cos(degrees * std::numbers::pi / 180.0));
  return std::sqrt(std::cos(30.0 * std::numbers::pi / 180.0)) *
         std::exp(-(degrees - 30.0) / 3.0);
}

RespirationTrace gen_waveform(const WaveformSpec& spec, std::uint64_t seed) {
  validate_waveform_spec(spec);
  const long samples = std::lround(spec.duration * spec.sample_rate);
  if (samples < 2)
    throw ValidationError("waveform would have fewer than 2 samples");

  std::mt19937_64 event_rng(mix_seed(seed, 1));
  std::mt19937_64 cycle_rng(mix_seed(seed, 2));
  std::mt19937_64 noise_rng(mix_seed(seed, 3));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  const std::vector<Event> events = draw_events(spec, event_rng);

  RespirationTrace trace;
  trace.sample_rate = spec.sample_rate;
  trace.label = spec.label;
  trace.provenance = "synth:" + label_name(spec.label);
  trace.values.reserve(static_cast<std::size_t>(samples));

  const double dt = 1.0 / spec.sample_rate;
  double phase = 0.0;
  double cycle_freq = spec.base_freq * (1.0 + spec.freq_jitter * unit(cycle_rng));
  double cycle_amp = spec.amp * (1.0 + spec.amp_jitter * unit(cycle_rng));
  std::size_t event_cursor = 0;

  for (long i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) * dt;
    while (event_cursor < events.size() && events[event_cursor].end <= t) ++event_cursor;
    bool burst = false, pause = false;
    if (event_cursor < events.size() && events[event_cursor].start <= t) {
      burst = events[event_cursor].burst;
      pause = !burst;
    }

    double amp = cycle_amp * (pause ? kPauseAmpFactor : (burst ? kBurstAmpFactor : 1.0));
    trace.values.push_back(amp * std::sin(phase) +
                           spec.noise_sigma * noise(noise_rng));

    double freq = cycle_freq * (burst ? kBurstFreqFactor : 1.0);
    phase += kTau * freq * dt;
    if (phase >= kTau) {  // new breath cycle: redraw the jittered parameters
      phase -= kTau;
      cycle_freq = spec.base_freq * (1.0 + spec.freq_jitter * unit(cycle_rng));
      cycle_amp = spec.amp * (1.0 + spec.amp_jitter * unit(cycle_rng));
    }
  }
  return trace;
}

std::pair<FrameSequence, RespirationTrace> gen_sequence(const SceneSpec& scene,
                                                        const WaveformSpec& wave) {
  validate_scene_spec(scene);
  validate_waveform_spec(wave);

  RespirationTrace truth = gen_waveform(wave, mix_seed(scene.seed, 11));
  const std::size_t frames = truth.values.size();

  const int scale = scene.rgb_scale;
  const int box_space_w = scale > 0 ? scene.thermal_w * scale : scene.thermal_w;
  const int box_space_h = scale > 0 ? scene.thermal_h * scale : scene.thermal_h;

  // Distance shrinks the face around its center until detection fails.
  const double cx = scene.face_box.x + scene.face_box.w / 2.0;
  const double cy = scene.face_box.y + scene.face_box.h / 2.0;
  const int w = static_cast<int>(std::lround(scene.face_box.w / scene.distance_factor));
  const int h = static_cast<int>(std::lround(scene.face_box.h / scene.distance_factor));
  const int bx = static_cast<int>(std::lround(cx - w / 2.0));
  const int by = static_cast<int>(std::lround(cy - h / 2.0));
  validate_box(FaceBox{0, bx, by, w, h}, box_space_w, box_space_h);

  const double gain = scene.hotspot_gain / scene.distance_factor *
                      vertical_attenuation(scene.vertical_angle) *
                      horizontal_attenuation(scene.horizontal_angle);

  FrameSequence seq;
  seq.sample_rate = wave.sample_rate;
  seq.thermal.reserve(frames);
  if (scale > 0) seq.rgb.reserve(frames);

  std::mt19937_64 noise_rng(mix_seed(scene.seed, 12));
  std::normal_distribution<double> noise(0.0, 1.0);

  for (std::size_t f = 0; f < frames; ++f) {
    FaceBox box;
    box.frame_index = static_cast<int>(f);
    box.x = bx + static_cast<int>(std::lround(scene.drift_dx * static_cast<double>(f)));
    box.y = by + static_cast<int>(std::lround(scene.drift_dy * static_cast<double>(f)));
    box.w = w;
    box.h = h;
    try {
      validate_box(box, box_space_w, box_space_h);
    } catch (const ValidationError&) {
      throw ValidationError("hotspot escapes the mask region: face drift leaves the frame at frame " +
                            std::to_string(f));
    }
    seq.boxes.push_back(box);

    roi::MaskRegion mask = roi::mask_from_face(box);
    if (scale > 0)
      mask = roi::map_to_thermal(mask, box_space_w, box_space_h, scene.thermal_w,
                                 scene.thermal_h);
    const double hx = mask.x0 + scene.hotspot_rel_x * mask.width();
    const double hy = mask.y0 + scene.hotspot_rel_y * mask.height();
    const double sigma = std::max(1.0, std::min(mask.width(), mask.height()) / 6.0);
    const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    const double peak = truth.values[f] * gain;

    Frame thermal;
    thermal.width = scene.thermal_w;
    thermal.height = scene.thermal_h;
    thermal.channel_count = 1;
    thermal.samples.resize(static_cast<std::size_t>(scene.thermal_w) * scene.thermal_h);
    std::size_t idx = 0;
    for (int y = 0; y < scene.thermal_h; ++y) {
      for (int x = 0; x < scene.thermal_w; ++x, ++idx) {
        const double dx2 = (x - hx) * (x - hx) + (y - hy) * (y - hy);
        double value = scene.ambient_level + peak * std::exp(-dx2 * inv_two_sigma2);
        if (scene.pixel_noise > 0.0) value += scene.pixel_noise * noise(noise_rng);
        thermal.samples[idx] = static_cast<std::uint16_t>(
            std::clamp(std::lround(value), 0L, 65535L));
      }
    }
    seq.thermal.push_back(std::move(thermal));

    if (scale > 0) {
      // Flat fill with a brighter face rectangle; the RGB side only
      // carries the box geometry.
      Frame rgb;
      rgb.width = box_space_w;
      rgb.height = box_space_h;
      rgb.channel_count = 3;
      rgb.samples.assign(static_cast<std::size_t>(box_space_w) * box_space_h * 3, 100);
      for (int y = box.y; y < box.y + box.h; ++y)
        for (int x = box.x; x < box.x + box.w; ++x)
          for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = 170;
      seq.rgb.push_back(std::move(rgb));
    }
  }

  validate_sequence(seq);
  return {std::move(seq), std::move(truth)};
}

std::vector<RespirationTrace> gen_dataset(int n_normal, int n_abnormal, int segment_len,
                                          std::uint64_t seed, double sample_rate) {
  if (n_normal < 1 || n_abnormal < 1)
    throw ValidationError("dataset needs at least one trace per class");
  if (segment_len < 2) throw ValidationError("segment length must be >= 2");

  std::mt19937_64 master(mix_seed(seed, 21));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  auto draw = [&](double lo, double hi) { return lo + (hi - lo) * uniform(master); };

  const int stride = std::max(1, segment_len / 2);
  const int segments_per_wave = 4;
  const int wave_samples = segment_len + (segments_per_wave - 1) * stride;

  std::vector<RespirationTrace> dataset;
  dataset.reserve(static_cast<std::size_t>(n_normal) + n_abnormal);

  for (Label label : {Label::kNormal, Label::kAbnormal}) {
    const int wanted = label == Label::kNormal ? n_normal : n_abnormal;
    int collected = 0;
    int wave_index = 0;
    while (collected < wanted) {
      WaveformSpec spec;
      spec.label = label;
      spec.sample_rate = sample_rate;
      spec.duration = wave_samples / sample_rate;
      spec.amp = draw(0.8, 1.2);
      spec.noise_sigma = draw(0.02, 0.08);
      if (label == Label::kNormal) {
        spec.base_freq = draw(0.18, 0.33);
        spec.freq_jitter = draw(0.0, 0.05);
        spec.amp_jitter = draw(0.0, 0.05);
        spec.event_rate = 0.0;
      } else {
        spec.base_freq = draw(0.30, 0.60);
        spec.freq_jitter = draw(0.15, 0.35);
        spec.amp_jitter = draw(0.15, 0.35);
        spec.event_rate = draw(0.08, 0.25);
      }
      RespirationTrace wave = gen_waveform(spec, master());

      for (int s = 0; s < segments_per_wave && collected < wanted; ++s) {
        RespirationTrace segment;
        segment.sample_rate = sample_rate;
        segment.label = label;
        segment.provenance = "synth:" + label_name(label) + ":w" +
                             std::to_string(wave_index) + ":s" + std::to_string(s);
        auto begin = wave.values.begin() + static_cast<long>(s) * stride;
        segment.values.assign(begin, begin + segment_len);
        try {
          dataset.push_back(roi::normalize_trace(segment));
          ++collected;
        } catch (const ValidationError&) {
          // an all-pause segment can come out flat; draw another wave
        }
      }
      ++wave_index;
    }
  }

  std::shuffle(dataset.begin(), dataset.end(), master);
  return dataset;
}

namespace {

long long parse_int_value(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw UsageError("bad integer for config key '" + key + "': '" + value + "'");
  }
}

double parse_double_value(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw UsageError("bad number for config key '" + key + "': '" + value + "'");
  }
}

}  // namespace

SynthConfig parse_synth_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());

  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
      line.pop_back();
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path.string() + ":" + std::to_string(line_no) +
                       ": expected key=value");
    pairs.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }

  SynthConfig config;
  // label switches the waveform defaults, so apply it before the rest
  for (const auto& [key, value] : pairs) {
    if (key == "label" && parse_label(value) == Label::kAbnormal)
      config.wave = abnormal_waveform_defaults();
  }

  for (const auto& [key, value] : pairs) {
    if (key == "mode") config.mode = value;
    else if (key == "n_normal") config.n_normal = static_cast<int>(parse_int_value(key, value));
    else if (key == "n_abnormal") config.n_abnormal = static_cast<int>(parse_int_value(key, value));
    else if (key == "segment_len") config.segment_len = static_cast<int>(parse_int_value(key, value));
    else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(parse_int_value(key, value));
      config.scene.seed = config.seed;
    }
    else if (key == "thermal_w") config.scene.thermal_w = static_cast<int>(parse_int_value(key, value));
    else if (key == "thermal_h") config.scene.thermal_h = static_cast<int>(parse_int_value(key, value));
    else if (key == "rgb_scale") config.scene.rgb_scale = static_cast<int>(parse_int_value(key, value));
    else if (key == "face_x") config.scene.face_box.x = static_cast<int>(parse_int_value(key, value));
    else if (key == "face_y") config.scene.face_box.y = static_cast<int>(parse_int_value(key, value));
    else if (key == "face_w") config.scene.face_box.w = static_cast<int>(parse_int_value(key, value));
    else if (key == "face_h") config.scene.face_box.h = static_cast<int>(parse_int_value(key, value));
    else if (key == "drift_dx") config.scene.drift_dx = parse_double_value(key, value);
    else if (key == "drift_dy") config.scene.drift_dy = parse_double_value(key, value);
    else if (key == "hotspot_rel_x") config.scene.hotspot_rel_x = parse_double_value(key, value);
    else if (key == "hotspot_rel_y") config.scene.hotspot_rel_y = parse_double_value(key, value);
    else if (key == "ambient") config.scene.ambient_level = parse_double_value(key, value);
    else if (key == "gain") config.scene.hotspot_gain = parse_double_value(key, value);
    else if (key == "pixel_noise") config.scene.pixel_noise = parse_double_value(key, value);
    else if (key == "distance") config.scene.distance_factor = parse_double_value(key, value);
    else if (key == "vertical_angle") config.scene.vertical_angle = parse_double_value(key, value);
    else if (key == "horizontal_angle") config.scene.horizontal_angle = parse_double_value(key, value);
    else if (key == "label") config.wave.label = parse_label(value);
    else if (key == "base_freq") config.wave.base_freq = parse_double_value(key, value);
    else if (key == "amp") config.wave.amp = parse_double_value(key, value);
    else if (key == "freq_jitter") config.wave.freq_jitter = parse_double_value(key, value);
    else if (key == "amp_jitter") config.wave.amp_jitter = parse_double_value(key, value);
    else if (key == "event_rate") config.wave.event_rate = parse_double_value(key, value);
    else if (key == "noise_sigma") config.wave.noise_sigma = parse_double_value(key, value);
    else if (key == "duration") config.wave.duration = parse_double_value(key, value);
    else if (key == "sample_rate") config.wave.sample_rate = parse_double_value(key, value);
    else throw UsageError("unknown config key '" + key + "'");
  }

  if (config.mode != "dataset" && config.mode != "sequence")
    throw UsageError("config key 'mode' must be 'dataset' or 'sequence', got '" +
                     config.mode + "'");
  return config;
}

void write_synth_config(const SynthConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write config " + path.string());
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "mode=" << config.mode << "\n";
  out << "seed=" << config.seed << "\n";
  if (config.mode == "dataset") {
    out << "n_normal=" << config.n_normal << "\n";
    out << "n_abnormal=" << config.n_abnormal << "\n";
    out << "segment_len=" << config.segment_len << "\n";
  } else {
    const SceneSpec& s = config.scene;
    out << "thermal_w=" << s.thermal_w << "\nthermal_h=" << s.thermal_h << "\n";
    out << "rgb_scale=" << s.rgb_scale << "\n";
    out << "face_x=" << s.face_box.x << "\nface_y=" << s.face_box.y << "\n";
    out << "face_w=" << s.face_box.w << "\nface_h=" << s.face_box.h << "\n";
    out << "drift_dx=" << num(s.drift_dx) << "\ndrift_dy=" << num(s.drift_dy) << "\n";
    out << "hotspot_rel_x=" << num(s.hotspot_rel_x) << "\n";
    out << "hotspot_rel_y=" << num(s.hotspot_rel_y) << "\n";
    out << "ambient=" << num(s.ambient_level) << "\ngain=" << num(s.hotspot_gain) << "\n";
    out << "pixel_noise=" << num(s.pixel_noise) << "\n";
    out << "distance=" << num(s.distance_factor) << "\n";
    out << "vertical_angle=" << num(s.vertical_angle) << "\n";
    out << "horizontal_angle=" << num(s.horizontal_angle) << "\n";
  }
  const WaveformSpec& w = config.wave;
  out << "label=" << label_name(w.label) << "\n";
  out << "base_freq=" << num(w.base_freq) << "\namp=" << num(w.amp) << "\n";
  out << "freq_jitter=" << num(w.freq_jitter) << "\namp_jitter=" << num(w.amp_jitter) << "\n";
  out << "event_rate=" << num(w.event_rate) << "\nnoise_sigma=" << num(w.noise_sigma) << "\n";
  out << "duration=" << num(w.duration) << "\nsample_rate=" << num(w.sample_rate) << "\n";
}

}  // namespace resp::synth
