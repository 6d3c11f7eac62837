#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <utility>

#include "resp/types.hpp"

namespace resp::synth {

// Default resting respiration rate (15 breaths/min). Abnormal specs must
// sit strictly above this frequency.
constexpr double kNormalBaseFreq = 0.25;

struct WaveformSpec {
  Label label = Label::kNormal;
  double base_freq = kNormalBaseFreq;  // Hz
  double amp = 1.0;                    // intensity units
  double freq_jitter = 0.02;           // fraction, per cycle
  double amp_jitter = 0.02;            // fraction, per cycle
  double event_rate = 0.0;             // bursts/pauses per second
  double noise_sigma = 0.05;           // additive Gaussian, intensity units
  double duration = 10.0;              // seconds
  double sample_rate = 10.0;           // Hz
};

WaveformSpec normal_waveform_defaults();
WaveformSpec abnormal_waveform_defaults();
void validate_waveform_spec(const WaveformSpec& spec);

struct SceneSpec {
  int thermal_w = 160;
  int thermal_h = 120;
  // 0 disables RGB rendering (boxes then refer to thermal coordinates);
  // k > 0 renders flat RGB frames at k times the thermal resolution with
  // boxes in RGB coordinates.
  int rgb_scale = 2;
  FaceBox face_box{0, 100, 60, 120, 120};  // in RGB coords when rgb_scale > 0
  double drift_dx = 0.0;                   // pixels per frame
  double drift_dy = 0.0;
  double hotspot_rel_x = 0.5;   // position within the mask region, [0,1)
  double hotspot_rel_y = 0.35;
  double ambient_level = 2000.0;
  double hotspot_gain = 400.0;
  double pixel_noise = 2.0;     // per-pixel Gaussian sigma, sensor units
  double distance_factor = 1.0; // >= 1; shrinks the face box, lowers gain
  double vertical_angle = 0.0;  // degrees; > 30 suppresses the hotspot sharply
  double horizontal_angle = 0.0;
  std::uint64_t seed = 0;
};

void validate_scene_spec(const SceneSpec& scene);

// Hotspot gain multipliers for camera rotation. Horizontal rotation
// attenuates mildly; vertical rotation collapses past 30 degrees.
double horizontal_attenuation(double degrees);
double vertical_attenuation(double degrees);

// Deterministic labeled waveform: a per-cycle jittered sinusoid, with
// Poisson-placed burst/pause events for abnormal specs, plus additive
// Gaussian noise.
RespirationTrace gen_waveform(const WaveformSpec& spec, std::uint64_t seed);

// Renders thermal (and optionally RGB) frames of a masked face whose
// breathing hotspot follows the waveform. Returns the rendered sequence
// together with the ground-truth trace that drove the hotspot.
std::pair<FrameSequence, RespirationTrace> gen_sequence(const SceneSpec& scene,
                                                        const WaveformSpec& wave);

// Labeled dataset stand-in: draws per-recording parameters from the
// per-class distributions below, cuts each recording into overlapping
// segments (stride = segment_len/2), z-normalizes every segment and
// shuffles deterministically.
//
// Class parameter distributions (uniform):
//   normal:   base_freq 0.18..0.33 Hz, jitter 0..0.05, no events
//   abnormal: base_freq 0.30..0.60 Hz, jitter 0.15..0.35, events 0.08..0.25/s
// Both classes draw amp 0.8..1.2 and noise_sigma 0.02..0.08.
std::vector<RespirationTrace> gen_dataset(int n_normal, int n_abnormal,
                                          int segment_len, std::uint64_t seed,
                                          double sample_rate = 10.0);

// Flat key=value config files for the synth subcommand. Unknown keys are
// rejected by name.
struct SynthConfig {
  std::string mode;  // "dataset" or "sequence"
  int n_normal = 16;
  int n_abnormal = 16;
  int segment_len = 100;
  std::uint64_t seed = 0;
  SceneSpec scene;
  WaveformSpec wave;
};

SynthConfig parse_synth_config(const std::filesystem::path& path);
void write_synth_config(const SynthConfig& config, const std::filesystem::path& path);

}  // namespace resp::synth
