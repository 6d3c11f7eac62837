#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace resp {

enum class Label { kNormal, kAbnormal };

std::string label_name(Label label);
Label parse_label(const std::string& name);

// One image. Thermal frames are single-channel with raw 16-bit sensor
// counts; RGB frames are 3-channel with 8-bit values per channel. Samples
// are row-major, interleaved for RGB.
struct Frame {
  int width = 0;
  int height = 0;
  int channel_count = 1;
  std::vector<std::uint16_t> samples;

  std::uint16_t at(int x, int y, int c = 0) const {
    return samples[static_cast<std::size_t>((y * width + x) * channel_count + c)];
  }
  std::uint16_t& at(int x, int y, int c = 0) {
    return samples[static_cast<std::size_t>((y * width + x) * channel_count + c)];
  }
};

// Validates dimensions and sample-count consistency.
void validate_frame(const Frame& frame);

// Detected face rectangle for one frame, in the coordinate system of the
// frame the detector ran on (RGB when present, thermal otherwise).
struct FaceBox {
  int frame_index = 0;
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

constexpr int kMinFaceSide = 8;

void validate_box(const FaceBox& box, int frame_width, int frame_height);

// Time-ordered paired thermal/RGB frames plus per-frame face boxes.
// rgb may be empty, in which case boxes are in thermal coordinates.
struct FrameSequence {
  std::vector<Frame> thermal;
  std::vector<Frame> rgb;
  std::vector<FaceBox> boxes;
  double sample_rate = 10.0;

  std::size_t size() const { return thermal.size(); }
  bool has_rgb() const { return !rgb.empty(); }
};

void validate_sequence(const FrameSequence& seq);

// ROI mean intensity per frame at a fixed sample rate.
struct RespirationTrace {
  std::vector<double> values;
  double sample_rate = 10.0;
  std::optional<Label> label;
  std::string provenance;
};

void validate_trace(const RespirationTrace& trace);

}  // namespace resp
