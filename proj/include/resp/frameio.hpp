#pragma once

#include <filesystem>

#include "resp/types.hpp"

namespace resp::frameio {

// Binary portable graymap (P5). Thermal frames are written with maxval
// 65535, two bytes per sample, most significant byte first.
Frame read_pgm(const std::filesystem::path& path);
void write_pgm(const Frame& frame, const std::filesystem::path& path);

// Binary portable pixmap (P6), maxval 255.
Frame read_ppm(const std::filesystem::path& path);
void write_ppm(const Frame& frame, const std::filesystem::path& path);

// Loads `thermal_%05d.pgm`, optional `rgb_%05d.ppm` and `boxes.jsonl`
// from a directory. Frames are ordered by numeric filename index; a
// missing interior index is reported as a gap naming that index.
FrameSequence load_sequence(const std::filesystem::path& dir_path,
                            double sample_rate = 10.0);

// Writes a sequence in the layout load_sequence expects.
void save_sequence(const FrameSequence& seq, const std::filesystem::path& dir_path);

// CSV with one `#` metadata comment line, a `t,value` header and one row
// per sample. Values are printed with round-trip precision so that
// load_trace(save_trace(t)) == t bitwise.
void save_trace(const RespirationTrace& trace, const std::filesystem::path& path);
RespirationTrace load_trace(const std::filesystem::path& path);

}  // namespace resp::frameio
