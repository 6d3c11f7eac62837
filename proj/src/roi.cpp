#include "resp/roi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "resp/error.hpp"

namespace resp::roi {

namespace {

// Round-half-up of v * to / from, exact in integer arithmetic.
int scale_coord(int v, int from, int to) {
  long long num = 2LL * v * to + from;
  long long den = 2LL * from;
  return static_cast<int>(num / den);
}

constexpr int kMinMaskSide = 2;

}  // namespace

MaskRegion mask_from_face(const FaceBox& face) {
  MaskRegion region;
  region.frame_index = face.frame_index;
  region.x0 = face.x + face.w / 4;
  region.y0 = face.y + face.h / 2;
  region.x1 = face.x + (3 * face.w) / 4;
  region.y1 = face.y + (4 * face.h) / 5;
  if (region.width() < kMinMaskSide || region.height() < kMinMaskSide)
    throw ValidationError("face " + std::to_string(face.w) + "x" +
                          std::to_string(face.h) +
                          " yields a degenerate mask region");
  return region;
}

MaskRegion map_to_thermal(const MaskRegion& region, int rgb_w, int rgb_h,
                          int thermal_w, int thermal_h) {
  if (rgb_w <= 0 || rgb_h <= 0 || thermal_w <= 0 || thermal_h <= 0)
    throw ValidationError("map_to_thermal requires positive dimensions");
  MaskRegion out;
  out.frame_index = region.frame_index;
  out.x0 = scale_coord(region.x0, rgb_w, thermal_w);
  out.x1 = scale_coord(region.x1, rgb_w, thermal_w);
  out.y0 = scale_coord(region.y0, rgb_h, thermal_h);
  out.y1 = scale_coord(region.y1, rgb_h, thermal_h);
  if (out.width() <= 0 || out.height() <= 0)
    throw ValidationError("mask region collapsed when mapped to thermal resolution");
  return out;
}

MaskRegion thermal_mask_region(const FrameSequence& seq, std::size_t frame_index) {
  MaskRegion region = mask_from_face(seq.boxes[frame_index]);
  if (seq.has_rgb()) {
    const Frame& rgb = seq.rgb[frame_index];
    const Frame& thermal = seq.thermal[frame_index];
    region = map_to_thermal(region, rgb.width, rgb.height, thermal.width, thermal.height);
  }
  return region;
}

double block_mean(const Frame& frame, int x0, int y0, int x1, int y1) {
  if (frame.channel_count != 1)
    throw ValidationError("block_mean expects a single-channel frame");
  if (x0 < 0 || y0 < 0 || x1 > frame.width || y1 > frame.height)
    throw ValidationError("block lies outside the frame");
  if (x1 <= x0 || y1 <= y0) throw ValidationError("empty block");

  double sum = 0.0;
  for (int y = y0; y < y1; ++y) {
    const std::uint16_t* row = frame.samples.data() + static_cast<std::size_t>(y) * frame.width;
    for (int x = x0; x < x1; ++x) sum += row[x];
  }
  return sum / (static_cast<double>(x1 - x0) * (y1 - y0));
}

double temporal_variance(const std::vector<double>& series) {
  if (series.size() < 2)
    throw ValidationError("temporal variance needs at least 2 samples, got " +
                          std::to_string(series.size()));
  // Welford's online update
  double mean = 0.0, m2 = 0.0;
  long n = 0;
  for (double v : series) {
    ++n;
    double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
  }
  return m2 / static_cast<double>(n);
}

void block_position(const BlockSpec& block, const MaskRegion& mask, int& out_x0,
                    int& out_y0) {
  if (block.block_w > mask.width() || block.block_h > mask.height())
    throw ValidationError("block does not fit inside the mask region");
  int dx = static_cast<int>(std::lround(block.rel_x * mask.width()));
  int dy = static_cast<int>(std::lround(block.rel_y * mask.height()));
  dx = std::min(dx, mask.width() - block.block_w);
  dy = std::min(dy, mask.height() - block.block_h);
  out_x0 = mask.x0 + std::max(dx, 0);
  out_y0 = mask.y0 + std::max(dy, 0);
}

RoiSelection select_roi(const FrameSequence& seq, int block_w, int block_h,
                        int stride) {
  validate_sequence(seq);
  if (seq.size() < 2)
    throw ValidationError("ROI selection needs at least 2 frames");
  if (block_w < 1 || block_h < 1) throw ValidationError("block size must be positive");
  if (stride < 1) throw ValidationError("stride must be >= 1");

  const std::size_t frames = seq.size();
  std::vector<MaskRegion> masks(frames);
  int min_w = std::numeric_limits<int>::max();
  int min_h = std::numeric_limits<int>::max();
  for (std::size_t f = 0; f < frames; ++f) {
    masks[f] = thermal_mask_region(seq, f);
    min_w = std::min(min_w, masks[f].width());
    min_h = std::min(min_h, masks[f].height());
  }
  if (block_w > min_w || block_h > min_h)
    throw ValidationError("no candidate block fits: block " + std::to_string(block_w) +
                          "x" + std::to_string(block_h) + " vs smallest mask " +
                          std::to_string(min_w) + "x" + std::to_string(min_h));

  RoiSelection best;
  best.variance = -1.0;
  std::vector<double> series(frames);
  // Row-major traversal with strict improvement keeps the smallest
  // (rel_y, rel_x) on ties.
  for (int dy = 0; dy + block_h <= min_h; dy += stride) {
    for (int dx = 0; dx + block_w <= min_w; dx += stride) {
      BlockSpec candidate;
      candidate.rel_x = static_cast<double>(dx) / min_w;
      candidate.rel_y = static_cast<double>(dy) / min_h;
      candidate.block_w = block_w;
      candidate.block_h = block_h;
      for (std::size_t f = 0; f < frames; ++f) {
        int bx = 0, by = 0;
        block_position(candidate, masks[f], bx, by);
        series[f] = block_mean(seq.thermal[f], bx, by, bx + block_w, by + block_h);
      }
      double variance = temporal_variance(series);
      ++best.candidates_evaluated;
      if (variance > best.variance) {
        best.variance = variance;
        best.block = candidate;
      }
    }
  }
  return best;
}

RespirationTrace extract_trace(const FrameSequence& seq, const RoiSelection& selection) {
  validate_sequence(seq);
  RespirationTrace trace;
  trace.sample_rate = seq.sample_rate;
  trace.provenance = "roi";
  trace.values.reserve(seq.size());
  for (std::size_t f = 0; f < seq.size(); ++f) {
    MaskRegion mask = thermal_mask_region(seq, f);
    int bx = 0, by = 0;
    block_position(selection.block, mask, bx, by);
    trace.values.push_back(block_mean(seq.thermal[f], bx, by,
                                      bx + selection.block.block_w,
                                      by + selection.block.block_h));
  }
  return trace;
}

RespirationTrace normalize_trace(const RespirationTrace& trace) {
  validate_trace(trace);
  if (trace.values.size() < 2)
    throw ValidationError("normalization needs at least 2 samples");

  double mean = 0.0;
  for (double v : trace.values) mean += v;
  mean /= static_cast<double>(trace.values.size());
  double var = 0.0;
  for (double v : trace.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(trace.values.size());
  // treat rounding residue of a constant trace as zero
  if (var <= 1e-24 * std::max(1.0, mean * mean))
    throw ValidationError("flat trace has zero variance, nothing to normalize");

  RespirationTrace out = trace;
  const double std_dev = std::sqrt(var);
  for (double& v : out.values) v = (v - mean) / std_dev;
  return out;
}

}  // namespace resp::roi
