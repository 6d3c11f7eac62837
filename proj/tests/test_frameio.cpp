#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "resp/error.hpp"
#include "resp/frameio.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace resp;

TEST_CASE("pgm round trip preserves 16-bit samples") {
  testutil::TempDir dir("pgm");
  std::mt19937_64 rng(1);
  Frame frame = testutil::random_thermal_frame(17, 9, rng, 0, 65535);
  frameio::write_pgm(frame, dir.path / "f.pgm");
  Frame back = frameio::read_pgm(dir.path / "f.pgm");
  CHECK(back.width == frame.width);
  CHECK(back.height == frame.height);
  CHECK(back.samples == frame.samples);
}

TEST_CASE("pgm parser accepts comments and rejects junk") {
  testutil::TempDir dir("pgmhdr");
  {
    std::ofstream out(dir.path / "c.pgm", std::ios::binary);
    out << "P5\n# a comment\n2 1\n255\n";
    out.put(7);
    out.put(250);
  }
  Frame frame = frameio::read_pgm(dir.path / "c.pgm");
  CHECK(frame.at(0, 0) == 7);
  CHECK(frame.at(1, 0) == 250);

  {
    std::ofstream out(dir.path / "bad.pgm", std::ios::binary);
    out << "P6\n2 1\n255\n";
  }
  CHECK_THROWS_AS(frameio::read_pgm(dir.path / "bad.pgm"), ParseError);

  {
    std::ofstream out(dir.path / "trunc.pgm", std::ios::binary);
    out << "P5\n4 4\n65535\n";
    out.put(1);
  }
  CHECK_THROWS_AS(frameio::read_pgm(dir.path / "trunc.pgm"), ParseError);
}

namespace {

FrameSequence make_sequence(int frames) {
  std::mt19937_64 rng(99);
  return testutil::random_sequence(frames, 64, 48, FaceBox{0, 10, 4, 40, 40}, rng);
}

}  // namespace

TEST_CASE("load_sequence preserves frame and box counts") {
  testutil::TempDir dir("seq");
  frameio::save_sequence(make_sequence(100), dir.path);
  FrameSequence seq = frameio::load_sequence(dir.path);
  CHECK(seq.size() == 100);
  CHECK(seq.boxes.size() == 100);
  CHECK(!seq.has_rgb());
}

TEST_CASE("missing frame index is reported as a gap naming the index") {
  testutil::TempDir dir("gap");
  frameio::save_sequence(make_sequence(60), dir.path);
  fs::remove(dir.path / "thermal_00057.pgm");
  try {
    frameio::load_sequence(dir.path);
    FAIL("expected a gap error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("gap") != std::string::npos);
    CHECK(std::string(e.what()).find("57") != std::string::npos);
  }
}

TEST_CASE("box outside the frame fails validation") {
  testutil::TempDir dir("badbox");
  FrameSequence seq = make_sequence(3);
  seq.boxes[1].x = 30;  // 30 + 40 > 64
  CHECK_THROWS_AS(frameio::save_sequence(seq, dir.path), ValidationError);
}

TEST_CASE("dimension mismatch across frames fails validation") {
  testutil::TempDir dir("dims");
  frameio::save_sequence(make_sequence(3), dir.path);
  std::mt19937_64 rng(5);
  frameio::write_pgm(testutil::random_thermal_frame(32, 48, rng), dir.path / "thermal_00001.pgm");
  CHECK_THROWS_AS(frameio::load_sequence(dir.path), ValidationError);
}

TEST_CASE("missing and duplicate box records are rejected") {
  testutil::TempDir dir("boxes");
  frameio::save_sequence(make_sequence(3), dir.path);
  {
    std::ofstream out(dir.path / "boxes.jsonl", std::ios::trunc);
    out << R"({"frame":0,"x":10,"y":4,"w":40,"h":40})" << "\n";
    out << R"({"frame":2,"x":10,"y":4,"w":40,"h":40})" << "\n";
  }
  CHECK_THROWS_AS(frameio::load_sequence(dir.path), ValidationError);
}

TEST_CASE("trace file layout: one comment, one header, one row per sample") {
  testutil::TempDir dir("tracefmt");
  RespirationTrace trace;
  trace.values = {1.5, -2.25, 3.75};
  trace.sample_rate = 10.0;
  trace.label = Label::kNormal;
  trace.provenance = "unit test";
  frameio::save_trace(trace, dir.path / "t.csv");

  std::ifstream in(dir.path / "t.csv");
  std::string line;
  int comments = 0, rows = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) ++comments;
    else if (line == "t,value") header = true;
    else ++rows;
  }
  CHECK(comments == 1);
  CHECK(header);
  CHECK(rows == 3);
}

TEST_CASE("trace save/load round trip is bitwise exact") {
  testutil::TempDir dir("roundtrip");
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mag(-50.0, 50.0);
  std::uniform_int_distribution<int> len(1, 40);

  for (int it = 0; it < 30; ++it) {
    RespirationTrace trace;
    trace.sample_rate = 10.0 + it;
    trace.label = it % 3 == 0 ? std::optional<Label>{}
                              : std::optional<Label>{it % 2 ? Label::kAbnormal : Label::kNormal};
    trace.provenance = "case " + std::to_string(it);
    int n = len(rng);
    for (int i = 0; i < n; ++i) trace.values.push_back(std::exp(mag(rng) / 10.0) * mag(rng));
    frameio::save_trace(trace, dir.path / "t.csv");
    RespirationTrace back = frameio::load_trace(dir.path / "t.csv");
    CHECK(back.values == trace.values);  // bitwise
    CHECK(back.sample_rate == trace.sample_rate);
    CHECK(back.label == trace.label);
    CHECK(back.provenance == trace.provenance);
  }
}

TEST_CASE("empty trace is rejected before writing") {
  testutil::TempDir dir("empty");
  RespirationTrace trace;
  CHECK_THROWS_AS(frameio::save_trace(trace, dir.path / "t.csv"), ValidationError);
  CHECK(!fs::exists(dir.path / "t.csv"));
}

TEST_CASE("malformed trace row reports its line number") {
  testutil::TempDir dir("badrow");
  {
    std::ofstream out(dir.path / "t.csv");
    out << "# sample_rate=10 label=none provenance=x\n";
    out << "t,value\n";
    out << "0,1.0\n";
    out << "1,not-a-number\n";
  }
  try {
    frameio::load_trace(dir.path / "t.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":4") != std::string::npos);
  }
}

TEST_CASE("unwritable trace path raises an io error") {
  RespirationTrace trace;
  trace.values = {1.0};
  CHECK_THROWS_AS(frameio::save_trace(trace, "/nonexistent-dir/t.csv"), IoError);
}
