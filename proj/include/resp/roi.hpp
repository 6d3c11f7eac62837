#pragma once

#include "resp/types.hpp"

namespace resp::roi {

// Inclusive-exclusive rectangle covering the worn mask.
struct MaskRegion {
  int frame_index = 0;
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
};

// A candidate block expressed relative to the mask region, so the same
// selection can be applied to every frame even when the face box moves.
struct BlockSpec {
  double rel_x = 0.0;  // fraction of mask width in [0,1)
  double rel_y = 0.0;  // fraction of mask height in [0,1)
  int block_w = 0;
  int block_h = 0;
};

struct RoiSelection {
  BlockSpec block;
  double variance = 0.0;
  long candidates_evaluated = 0;
};

// Mask rectangle from face box corners (x + w/4, y + h/2) and
// (x + 3w/4, y + 4h/5), integer division truncating toward zero.
// A mask thinner than 2 px in either direction is rejected as degenerate.
MaskRegion mask_from_face(const FaceBox& face);

// Proportional rescale between camera resolutions, round-half-up per
// coordinate. Identity when the dimensions match.
MaskRegion map_to_thermal(const MaskRegion& region, int rgb_w, int rgb_h,
                          int thermal_w, int thermal_h);

// Mask region of one frame in thermal coordinates, combining the two
// operations above when the sequence carries RGB frames.
MaskRegion thermal_mask_region(const FrameSequence& seq, std::size_t frame_index);

// Mean sample value of an x0/y0/x1/y1 rectangle of a single-channel frame.
double block_mean(const Frame& frame, int x0, int y0, int x1, int y1);

// Population variance (divisor T). Requires at least two samples.
double temporal_variance(const std::vector<double>& series);

// Traverses a stride grid of relative block offsets over the per-frame
// mask regions and returns the offset whose per-frame mean intensity has
// the largest temporal variance. Ties break to the smallest (rel_y, rel_x).
RoiSelection select_roi(const FrameSequence& seq, int block_w, int block_h,
                        int stride);

// Per-frame mean intensity at the selected relative offset.
RespirationTrace extract_trace(const FrameSequence& seq, const RoiSelection& selection);

// Z-score normalization with population standard deviation.
RespirationTrace normalize_trace(const RespirationTrace& trace);

// Absolute pixel position of a relative block offset within a mask region.
// Rounding is to nearest, clamped so the block stays inside the region.
void block_position(const BlockSpec& block, const MaskRegion& mask,
                    int& out_x0, int& out_y0);

}  // namespace resp::roi
