#include "resp/frameio.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "resp/error.hpp"

namespace fs = std::filesystem;

namespace resp::frameio {

namespace {

// Reads one whitespace/comment-delimited header token per the netpbm rules.
std::string next_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  if (token.empty()) throw ParseError("unexpected end of netpbm header");
  return token;
}

int parse_header_int(std::istream& in, const fs::path& path, const char* what) {
  std::string token = next_token(in);
  try {
    std::size_t used = 0;
    int value = std::stoi(token, &used);
    if (used != token.size() || value < 0) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": bad " + std::string(what) + " '" + token + "'");
  }
}

Frame read_netpbm(const fs::path& path, const std::string& expected_magic,
                  int channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  std::string magic = next_token(in);
  if (magic != expected_magic)
    throw ParseError(path.string() + ": expected " + expected_magic + ", got '" +
                     magic + "'");
  Frame frame;
  frame.channel_count = channels;
  frame.width = parse_header_int(in, path, "width");
  frame.height = parse_header_int(in, path, "height");
  int maxval = parse_header_int(in, path, "maxval");
  if (maxval <= 0 || maxval > 65535)
    throw ParseError(path.string() + ": unsupported maxval " + std::to_string(maxval));
  // next_token consumed the single whitespace byte separating header and raster

  const std::size_t count =
      static_cast<std::size_t>(frame.width) * frame.height * channels;
  const int bytes_per_sample = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(count * bytes_per_sample);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw ParseError(path.string() + ": truncated raster");

  frame.samples.resize(count);
  if (bytes_per_sample == 2) {
    for (std::size_t i = 0; i < count; ++i)
      frame.samples[i] =
          static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
  } else {
    for (std::size_t i = 0; i < count; ++i) frame.samples[i] = raw[i];
  }
  validate_frame(frame);
  return frame;
}

void write_netpbm(const Frame& frame, const fs::path& path,
                  const std::string& magic, int maxval) {
  validate_frame(frame);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << magic << "\n" << frame.width << " " << frame.height << "\n" << maxval << "\n";
  if (maxval > 255) {
    std::vector<unsigned char> raw(frame.samples.size() * 2);
    for (std::size_t i = 0; i < frame.samples.size(); ++i) {
      raw[2 * i] = static_cast<unsigned char>(frame.samples[i] >> 8);
      raw[2 * i + 1] = static_cast<unsigned char>(frame.samples[i] & 0xff);
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
  } else {
    std::vector<unsigned char> raw(frame.samples.size());
    for (std::size_t i = 0; i < frame.samples.size(); ++i) {
      if (frame.samples[i] > maxval)
        throw ValidationError(path.string() + ": sample exceeds maxval " +
                              std::to_string(maxval));
      raw[i] = static_cast<unsigned char>(frame.samples[i]);
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
  }
  if (!out) throw IoError("short write to " + path.string());
}

// Maps frame index -> path for files matching prefix_%05d.suffix.
std::map<int, fs::path> indexed_files(const fs::path& dir, const std::string& prefix,
                                      const std::string& suffix) {
  std::regex pattern(prefix + R"(_(\d{5})\.)" + suffix);
  std::map<int, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::smatch match;
    std::string name = entry.path().filename().string();
    if (std::regex_match(name, match, pattern))
      files.emplace(std::stoi(match[1].str()), entry.path());
  }
  return files;
}

void check_contiguous(const std::map<int, fs::path>& files, const std::string& what) {
  int expected = files.begin()->first;
  for (const auto& [index, path] : files) {
    if (index != expected)
      throw ValidationError("gap in " + what + " frames: missing index " +
                            std::to_string(expected));
    ++expected;
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Frame read_pgm(const fs::path& path) { return read_netpbm(path, "P5", 1); }

void write_pgm(const Frame& frame, const fs::path& path) {
  if (frame.channel_count != 1)
    throw ValidationError("write_pgm expects a single-channel frame");
  write_netpbm(frame, path, "P5", 65535);
}

Frame read_ppm(const fs::path& path) { return read_netpbm(path, "P6", 3); }

void write_ppm(const Frame& frame, const fs::path& path) {
  if (frame.channel_count != 3) throw ValidationError("write_ppm expects a 3-channel frame");
  write_netpbm(frame, path, "P6", 255);
}

FrameSequence load_sequence(const fs::path& dir_path, double sample_rate) {
  if (!fs::is_directory(dir_path))
    throw IoError("sequence directory not found: " + dir_path.string());

  auto thermal_files = indexed_files(dir_path, "thermal", "pgm");
  if (thermal_files.empty())
    throw ValidationError("no thermal_%05d.pgm frames in " + dir_path.string());
  check_contiguous(thermal_files, "thermal");

  FrameSequence seq;
  seq.sample_rate = sample_rate;
  const int base_index = thermal_files.begin()->first;
  for (const auto& [index, path] : thermal_files) seq.thermal.push_back(read_pgm(path));

  auto rgb_files = indexed_files(dir_path, "rgb", "ppm");
  if (!rgb_files.empty()) {
    check_contiguous(rgb_files, "rgb");
    if (rgb_files.begin()->first != base_index || rgb_files.size() != thermal_files.size())
      throw ValidationError("rgb frame indices do not match thermal frame indices");
    for (const auto& [index, path] : rgb_files) seq.rgb.push_back(read_ppm(path));
  }

  fs::path boxes_path = dir_path / "boxes.jsonl";
  std::ifstream boxes_in(boxes_path);
  if (!boxes_in) throw IoError("cannot open " + boxes_path.string());
  std::map<int, FaceBox> boxes;
  std::string line;
  int line_no = 0;
  while (std::getline(boxes_in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
      FaceBox box;
      box.frame_index = record.at("frame").get<int>();
      box.x = record.at("x").get<int>();
      box.y = record.at("y").get<int>();
      box.w = record.at("w").get<int>();
      box.h = record.at("h").get<int>();
      if (!boxes.emplace(box.frame_index, box).second)
        throw ValidationError("duplicate box for frame " +
                              std::to_string(box.frame_index));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(boxes_path.string() + ":" + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  for (std::size_t i = 0; i < seq.thermal.size(); ++i) {
    auto it = boxes.find(base_index + static_cast<int>(i));
    if (it == boxes.end())
      throw ValidationError("missing box record for frame " +
                            std::to_string(base_index + static_cast<int>(i)));
    FaceBox box = it->second;
    box.frame_index = static_cast<int>(i);  // rebase to 0 like the frames
    seq.boxes.push_back(box);
  }
  if (boxes.size() != seq.thermal.size())
    throw ValidationError("boxes.jsonl has records for unknown frame indices");

  validate_sequence(seq);
  return seq;
}

void save_sequence(const FrameSequence& seq, const fs::path& dir_path) {
  validate_sequence(seq);
  fs::create_directories(dir_path);
  char name[32];
  for (std::size_t i = 0; i < seq.thermal.size(); ++i) {
    std::snprintf(name, sizeof(name), "thermal_%05zu.pgm", i);
    write_pgm(seq.thermal[i], dir_path / name);
  }
  for (std::size_t i = 0; i < seq.rgb.size(); ++i) {
    std::snprintf(name, sizeof(name), "rgb_%05zu.ppm", i);
    write_ppm(seq.rgb[i], dir_path / name);
  }
  std::ofstream out(dir_path / "boxes.jsonl", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir_path / "boxes.jsonl").string());
  for (const FaceBox& box : seq.boxes) {
    nlohmann::json record{
        {"frame", box.frame_index}, {"x", box.x}, {"y", box.y}, {"w", box.w}, {"h", box.h}};
    out << record.dump() << "\n";
  }
}

void save_trace(const RespirationTrace& trace, const fs::path& path) {
  validate_trace(trace);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# sample_rate=" << format_double(trace.sample_rate) << " label="
      << (trace.label ? label_name(*trace.label) : "none")
      << " provenance=" << trace.provenance << "\n";
  out << "t,value\n";
  for (std::size_t i = 0; i < trace.values.size(); ++i)
    out << i << "," << format_double(trace.values[i]) << "\n";
  if (!out) throw IoError("short write to " + path.string());
}

RespirationTrace load_trace(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  RespirationTrace trace;
  std::string line;
  int line_no = 0;

  if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
    throw ParseError(path.string() + ":1: missing metadata comment line");
  ++line_no;
  std::istringstream meta(line.substr(2));
  std::string field;
  while (meta >> field) {
    auto eq = field.find('=');
    if (eq == std::string::npos)
      throw ParseError(path.string() + ":1: bad metadata field '" + field + "'");
    std::string key = field.substr(0, eq);
    std::string value = field.substr(eq + 1);
    if (key == "sample_rate") {
      trace.sample_rate = std::strtod(value.c_str(), nullptr);
    } else if (key == "label") {
      if (value != "none") trace.label = parse_label(value);
    } else if (key == "provenance") {
      // free text: everything after "provenance=" to end of line
      auto pos = line.find("provenance=");
      trace.provenance = line.substr(pos + std::string("provenance=").size());
      break;
    } else {
      throw ParseError(path.string() + ":1: unknown metadata key '" + key + "'");
    }
  }

  if (!std::getline(in, line) || line != "t,value")
    throw ParseError(path.string() + ":2: expected 't,value' header");
  line_no = 2;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": missing comma");
    char* end = nullptr;
    const char* value_str = line.c_str() + comma + 1;
    double value = std::strtod(value_str, &end);
    if (end == value_str || *end != '\0')
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": malformed value '" + std::string(value_str) + "'");
    trace.values.push_back(value);
  }

  validate_trace(trace);
  return trace;
}

}  // namespace resp::frameio
