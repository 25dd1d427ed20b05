#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "egoflow/io.hpp"
#include "egoflow/synthetic.hpp"

using namespace egoflow;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("egoflow_io_" + std::to_string(::testing::UnitTest::GetInstance()
                                               ->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()
                      ->current_test_info()
                      ->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const {
    return (dir_ / name).string();
  }

  static std::string file_bytes(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
  }

  static void write_bytes(const std::string& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }

  fs::path dir_;
};

PgmImage random_pgm(int width, int height, std::uint32_t seed) {
  std::mt19937 rng(seed);
  PgmImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(static_cast<std::size_t>(width) * height);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xFF);
  return img;
}

std::string u32le(std::uint32_t v) {
  std::string s(4, '\0');
  s[0] = static_cast<char>(v & 0xFF);
  s[1] = static_cast<char>((v >> 8) & 0xFF);
  s[2] = static_cast<char>((v >> 16) & 0xFF);
  s[3] = static_cast<char>((v >> 24) & 0xFF);
  return s;
}

}  // namespace

TEST_F(IoTest, PgmRoundTripsPixels) {
  for (auto [w, h] : {std::pair{1, 1}, {7, 3}, {64, 48}}) {
    const PgmImage img = random_pgm(w, h, static_cast<std::uint32_t>(w * 100 + h));
    const std::string p = path("img.pgm");
    write_pgm(p, img);
    const PgmImage back = read_pgm(p);
    EXPECT_EQ(back.width, img.width);
    EXPECT_EQ(back.height, img.height);
    EXPECT_EQ(back.pixels, img.pixels);
  }
}

TEST_F(IoTest, PgmHeaderCommentsAreSkipped) {
  const std::string p = path("commented.pgm");
  std::string body = "P5 # binary grayscale\n# full-line comment\n3 2\n# another\n255\n";
  body += std::string("\x10\x20\x30\x40\x50\x60", 6);
  write_bytes(p, body);
  const PgmImage img = read_pgm(p);
  EXPECT_EQ(img.width, 3);
  EXPECT_EQ(img.height, 2);
  EXPECT_EQ(img.pixels[0], 0x10);
  EXPECT_EQ(img.pixels[5], 0x60);
}

TEST_F(IoTest, PgmRejectsBadInputs) {
  const std::string p = path("bad.pgm");

  write_bytes(p, "P2\n2 2\n255\n0 0 0 0\n");  // ASCII variant unsupported
  EXPECT_THROW(read_pgm(p), FormatError);

  write_bytes(p, "P5\n2 2\n65535\n....");  // 16-bit depth unsupported
  EXPECT_THROW(read_pgm(p), FormatError);

  write_bytes(p, "P5\n2 2\n255\nab");  // pixel payload cut short
  EXPECT_THROW(read_pgm(p), FormatError);

  write_bytes(p, "P5\n2");  // header cut short
  EXPECT_THROW(read_pgm(p), FormatError);

  write_bytes(p, "P5\n-2 2\n255\n");  // negative dimension
  EXPECT_THROW(read_pgm(p), FormatError);

  EXPECT_THROW(read_pgm(path("nonexistent.pgm")), MissingInput);
}

TEST_F(IoTest, PgmFrameConversionRoundTripsBytes) {
  const PgmImage img = random_pgm(16, 16, 42);
  const Frame f = frame_from_pgm(img, 0.5);
  EXPECT_DOUBLE_EQ(f.source_timestamp, 0.5);
  for (float v : f.luma) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  const PgmImage back = pgm_from_frame(f);
  EXPECT_EQ(back.pixels, img.pixels);
}

TEST_F(IoTest, FrameDirLoadsInFilenameOrder) {
  // uppercase extensions count; ASCII ordering puts "C.PGM" before "a.pgm"
  PgmImage tag = random_pgm(4, 4, 1);
  tag.pixels[0] = 10;
  write_pgm(path("b.pgm"), tag);
  tag.pixels[0] = 20;
  write_pgm(path("a.pgm"), tag);
  tag.pixels[0] = 30;
  write_pgm(path("C.PGM"), tag);
  write_bytes(path("notes.txt"), "not a frame");

  const std::vector<Frame> frames = load_frame_dir(dir_.string(), 10.0);
  ASSERT_EQ(frames.size(), 3u);
  EXPECT_FLOAT_EQ(frames[0].luma[0], 30.0f / 255.0f);  // C.PGM
  EXPECT_FLOAT_EQ(frames[1].luma[0], 20.0f / 255.0f);  // a.pgm
  EXPECT_FLOAT_EQ(frames[2].luma[0], 10.0f / 255.0f);  // b.pgm
  EXPECT_DOUBLE_EQ(frames[0].source_timestamp, 0.0);
  EXPECT_DOUBLE_EQ(frames[1].source_timestamp, 0.1);
  EXPECT_DOUBLE_EQ(frames[2].source_timestamp, 0.2);
}

TEST_F(IoTest, FrameDirRejectsBadInputs) {
  EXPECT_THROW(load_frame_dir(path("missing_subdir"), 15.0), MissingInput);
  fs::create_directories(path("empty_subdir"));
  EXPECT_THROW(load_frame_dir(path("empty_subdir"), 15.0), EmptyInput);
  write_pgm(path("x.pgm"), random_pgm(2, 2, 3));
  EXPECT_THROW(load_frame_dir(dir_.string(), 0.0), InvalidTimestamps);
}

TEST_F(IoTest, FrameFileRoundTripsQuantizedLuma) {
  std::vector<Frame> frames;
  for (int k = 0; k < 4; ++k) {
    frames.push_back(frame_from_pgm(random_pgm(20, 12, 100 + k),
                                    static_cast<double>(k) / 29.97));
  }
  const std::string p = path("seq.egfr");
  write_frame_file(p, frames, 29.97);

  const FrameSequence seq = read_frame_file(p);
  ASSERT_EQ(seq.frames.size(), frames.size());
  EXPECT_FLOAT_EQ(static_cast<float>(seq.native_fps), 29.97f);
  for (std::size_t k = 0; k < frames.size(); ++k) {
    EXPECT_EQ(seq.frames[k].width, 20);
    EXPECT_EQ(seq.frames[k].height, 12);
    EXPECT_EQ(seq.frames[k].luma, frames[k].luma);  // source was 8-bit already
    EXPECT_NEAR(seq.frames[k].source_timestamp, k / 29.97, 1e-6);
  }

  // a second write of the loaded sequence reproduces the file byte for byte
  const std::string p2 = path("seq2.egfr");
  write_frame_file(p2, seq.frames, seq.native_fps);
  EXPECT_EQ(file_bytes(p), file_bytes(p2));
}

TEST_F(IoTest, FrameFileRejectsBadInputs) {
  const Frame f = frame_from_pgm(random_pgm(4, 4, 7), 0.0);
  EXPECT_THROW(write_frame_file(path("x.egfr"), {}, 15.0), EmptyInput);
  EXPECT_THROW(write_frame_file(path("x.egfr"), {f}, 0.0), InvalidTimestamps);
  std::vector<Frame> mixed = {f, frame_from_pgm(random_pgm(5, 4, 8), 0.1)};
  EXPECT_THROW(write_frame_file(path("x.egfr"), mixed, 15.0), DimensionMismatch);

  const std::string p = path("good.egfr");
  write_frame_file(p, {f}, 15.0);
  std::string bytes = file_bytes(p);

  write_bytes(path("trail.egfr"), bytes + "x");
  EXPECT_THROW(read_frame_file(path("trail.egfr")), FormatError);

  write_bytes(path("short.egfr"), bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_frame_file(path("short.egfr")), FormatError);

  std::string wrong = bytes;
  wrong[0] = 'X';
  write_bytes(path("magic.egfr"), wrong);
  EXPECT_THROW(read_frame_file(path("magic.egfr")), FormatError);

  // zero fps in the header
  write_bytes(path("fps.egfr"),
              "EGFR" + u32le(2) + u32le(2) + u32le(0) + u32le(0));
  EXPECT_THROW(read_frame_file(path("fps.egfr")), FormatError);

  EXPECT_THROW(read_frame_file(path("absent.egfr")), MissingInput);
}

TEST_F(IoTest, FlowFileRoundTripsBitwise) {
  std::mt19937 rng(99);
  std::uniform_real_distribution<float> dist(-8.0f, 8.0f);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<FlowField> fields(rep % 4);
    int frame = rep;
    for (FlowField& f : fields) {
      f.frame_index = frame++;
      for (auto& x : f.u) x = dist(rng);
      for (auto& x : f.v) x = dist(rng);
    }
    const std::string p = path("flow.egfl");
    write_flow_file(p, fields);
    const std::vector<FlowField> back = read_flow_file(p);
    ASSERT_EQ(back.size(), fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      EXPECT_EQ(back[i].frame_index, fields[i].frame_index);
      EXPECT_EQ(back[i].u, fields[i].u);
      EXPECT_EQ(back[i].v, fields[i].v);
      // loaded fields carry no failure marks
      for (std::uint8_t c : back[i].converged) EXPECT_EQ(c, 1);
    }
    const std::string p2 = path("flow2.egfl");
    write_flow_file(p2, back);
    EXPECT_EQ(file_bytes(p), file_bytes(p2));
  }
}

TEST_F(IoTest, FlowFileRejectsBadInputs) {
  FlowField f;
  f.frame_index = -1;
  EXPECT_THROW(write_flow_file(path("x.egfl"), {f}), FormatError);

  // wrong grid shape in the header
  write_bytes(path("grid.egfl"),
              "EGFL" + u32le(1) + u32le(16) + u32le(32) + u32le(0));
  EXPECT_THROW(read_flow_file(path("grid.egfl")), FormatError);

  // unknown version
  write_bytes(path("ver.egfl"),
              "EGFL" + u32le(2) + u32le(32) + u32le(32) + u32le(0));
  EXPECT_THROW(read_flow_file(path("ver.egfl")), FormatError);

  f.frame_index = 3;
  const std::string p = path("good.egfl");
  write_flow_file(p, {f});
  const std::string bytes = file_bytes(p);
  write_bytes(path("trail.egfl"), bytes + "zz");
  EXPECT_THROW(read_flow_file(path("trail.egfl")), FormatError);
  write_bytes(path("short.egfl"), bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(read_flow_file(path("short.egfl")), FormatError);
}

TEST_F(IoTest, VolumeDatasetRoundTripsBitwise) {
  const std::vector<MotionClassSpec> classes = default_motion_classes(0.2, 5);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<FlowVolume> volumes;
    for (int i = 0; i <= rep; ++i) {
      FlowVolume vol = generate_volume(classes[i % classes.size()], rep);
      vol.label = (i % 3 == 0) ? -1 : i;  // mix labeled and unlabeled
      volumes.push_back(std::move(vol));
    }
    const std::string p = path("vols.egvd");
    write_volume_dataset(p, volumes);
    const std::vector<FlowVolume> back = read_volume_dataset(p);
    ASSERT_EQ(back.size(), volumes.size());
    for (std::size_t i = 0; i < volumes.size(); ++i) {
      EXPECT_EQ(back[i].label, volumes[i].label);
      EXPECT_EQ(back[i].start_frame, volumes[i].start_frame);
      EXPECT_EQ(back[i].data, volumes[i].data);
    }
    const std::string p2 = path("vols2.egvd");
    write_volume_dataset(p2, back);
    EXPECT_EQ(file_bytes(p), file_bytes(p2));
  }
}

TEST_F(IoTest, VolumeDatasetRejectsBadInputs) {
  FlowVolume vol;
  vol.start_frame = -4;
  EXPECT_THROW(write_volume_dataset(path("x.egvd"), {vol}), FormatError);

  // a label below -1 round-trips through the writer but the reader refuses it
  vol.start_frame = 0;
  vol.label = -5;
  const std::string p = path("label.egvd");
  write_volume_dataset(p, {vol});
  EXPECT_THROW(read_volume_dataset(p), FormatError);

  // wrong geometry in the header
  write_bytes(path("dims.egvd"),
              "EGVD" + u32le(1) + u32le(0) + u32le(32) + u32le(32) + u32le(60));
  EXPECT_THROW(read_volume_dataset(path("dims.egvd")), FormatError);

  write_bytes(path("ver.egvd"),
              "EGVD" + u32le(3) + u32le(0) + u32le(32) + u32le(32) + u32le(120));
  EXPECT_THROW(read_volume_dataset(path("ver.egvd")), FormatError);

  vol.label = 2;
  const std::string good = path("good.egvd");
  write_volume_dataset(good, {vol});
  const std::string bytes = file_bytes(good);
  write_bytes(path("trail.egvd"), bytes + "!");
  EXPECT_THROW(read_volume_dataset(path("trail.egvd")), FormatError);
  write_bytes(path("short.egvd"), bytes.substr(0, bytes.size() - 10));
  EXPECT_THROW(read_volume_dataset(path("short.egvd")), FormatError);
}
