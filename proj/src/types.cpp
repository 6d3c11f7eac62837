#include "resp/types.hpp"

#include <cmath>

#include "resp/error.hpp"

namespace resp {

std::string label_name(Label label) {
  return label == Label::kNormal ? "normal" : "abnormal";
}

Label parse_label(const std::string& name) {
  if (name == "normal") return Label::kNormal;
  if (name == "abnormal") return Label::kAbnormal;
  throw ParseError("unknown label '" + name + "'");
}

void validate_frame(const Frame& frame) {
  if (frame.width <= 0 || frame.height <= 0)
    throw ValidationError("frame dimensions must be positive");
  if (frame.channel_count != 1 && frame.channel_count != 3)
    throw ValidationError("frame channel count must be 1 or 3");
  const std::size_t expected = static_cast<std::size_t>(frame.width) * frame.height *
                               frame.channel_count;
  if (frame.samples.size() != expected)
    throw ValidationError("frame sample count " + std::to_string(frame.samples.size()) +
                          " does not match dimensions (expected " +
                          std::to_string(expected) + ")");
}

void validate_box(const FaceBox& box, int frame_width, int frame_height) {
  if (box.w < kMinFaceSide || box.h < kMinFaceSide)
    throw ValidationError("face box at frame " + std::to_string(box.frame_index) +
                          " is smaller than " + std::to_string(kMinFaceSide) + "x" +
                          std::to_string(kMinFaceSide));
  if (box.x < 0 || box.y < 0 || box.x + box.w > frame_width ||
      box.y + box.h > frame_height)
    throw ValidationError("face box at frame " + std::to_string(box.frame_index) +
                          " lies outside the frame");
}

void validate_sequence(const FrameSequence& seq) {
  if (seq.thermal.empty()) throw ValidationError("sequence has no thermal frames");
  if (seq.sample_rate <= 0.0) throw ValidationError("sample rate must be positive");

  const Frame& first = seq.thermal.front();
  for (const Frame& frame : seq.thermal) {
    validate_frame(frame);
    if (frame.channel_count != 1)
      throw ValidationError("thermal frames must be single-channel");
    if (frame.width != first.width || frame.height != first.height)
      throw ValidationError("thermal frame dimensions differ across the sequence");
  }
  if (seq.has_rgb()) {
    if (seq.rgb.size() != seq.thermal.size())
      throw ValidationError("RGB frame count does not match thermal frame count");
    const Frame& rgb_first = seq.rgb.front();
    for (const Frame& frame : seq.rgb) {
      validate_frame(frame);
      if (frame.channel_count != 3) throw ValidationError("RGB frames must have 3 channels");
      if (frame.width != rgb_first.width || frame.height != rgb_first.height)
        throw ValidationError("RGB frame dimensions differ across the sequence");
    }
  }

  if (seq.boxes.size() != seq.thermal.size())
    throw ValidationError("expected one face box per frame, got " +
                          std::to_string(seq.boxes.size()) + " for " +
                          std::to_string(seq.thermal.size()) + " frames");
  const int box_w = seq.has_rgb() ? seq.rgb.front().width : first.width;
  const int box_h = seq.has_rgb() ? seq.rgb.front().height : first.height;
  for (std::size_t i = 0; i < seq.boxes.size(); ++i) {
    if (seq.boxes[i].frame_index != static_cast<int>(i))
      throw ValidationError("face box order mismatch at index " + std::to_string(i));
    validate_box(seq.boxes[i], box_w, box_h);
  }
}

void validate_trace(const RespirationTrace& trace) {
  if (trace.values.empty()) throw ValidationError("trace has no samples");
  if (trace.sample_rate <= 0.0) throw ValidationError("trace sample rate must be positive");
  for (double v : trace.values)
    if (!std::isfinite(v)) throw ValidationError("trace contains a non-finite value");
}

}  // namespace resp
