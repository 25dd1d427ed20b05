// File formats.  All multi-byte fields are little-endian regardless of host.
//
//   PGM   P5 grayscale image, maxval 255.
//   EGFR  frame sequence: "EGFR", u32 width, u32 height, f32 native_fps,
//         u32 frame_count, then width*height bytes per frame (row-major).
//   EGFL  flow fields: "EGFL", u32 version=1, u32 rows=32, u32 cols=32,
//         u32 field_count, then per field u32 frame_index, 1024 f32 u values
//         (row-major), 1024 f32 v values.
//   EGVD  volume dataset: "EGVD", u32 version=1, u32 count, u32 rows=32,
//         u32 cols=32, u32 depth=120, then per volume i32 label (-1 means
//         unlabeled), u32 start_frame, 32*32*120 f32 in (row, col, depth)
//         order with depth fastest.
#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "egoflow/errors.hpp"
#include "egoflow/flow.hpp"
#include "egoflow/frame.hpp"
#include "egoflow/volume.hpp"

namespace egoflow {

namespace io {

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw MissingInput("cannot open '" + path + "' for writing");
  return out;
}

inline std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("cannot open '" + path + "' for reading");
  return in;
}

inline void read_exact(std::istream& in, void* buf, std::size_t n,
                       const char* what) {
  in.read(static_cast<char*>(buf), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw FormatError(std::string("unexpected end of file while reading ") + what);
  }
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& in, const char* what = "u32") {
  unsigned char b[4];
  read_exact(in, b, 4, what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_i32(std::ostream& out, std::int32_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
}

inline std::int32_t get_i32(std::istream& in, const char* what = "i32") {
  return static_cast<std::int32_t>(get_u32(in, what));
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint64_t get_u64(std::istream& in, const char* what = "u64") {
  const std::uint64_t lo = get_u32(in, what);
  const std::uint64_t hi = get_u32(in, what);
  return lo | (hi << 32);
}

inline void put_f32(std::ostream& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

inline float get_f32(std::istream& in, const char* what = "f32") {
  return std::bit_cast<float>(get_u32(in, what));
}

inline void put_f32_array(std::ostream& out, const float* values, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values),
              static_cast<std::streamsize>(n * sizeof(float)));
  } else {
    for (std::size_t i = 0; i < n; ++i) put_f32(out, values[i]);
  }
}

inline void get_f32_array(std::istream& in, float* values, std::size_t n,
                          const char* what) {
  if constexpr (std::endian::native == std::endian::little) {
    read_exact(in, values, n * sizeof(float), what);
  } else {
    for (std::size_t i = 0; i < n; ++i) values[i] = get_f32(in, what);
  }
}

inline void put_magic(std::ostream& out, const char magic[5]) {
  out.write(magic, 4);
}

inline void expect_magic(std::istream& in, const char* expected) {
  char got[5] = {0, 0, 0, 0, 0};
  read_exact(in, got, 4, "file magic");
  if (std::memcmp(got, expected, 4) != 0) {
    throw FormatError(std::string("file magic '") + got +
                      "' does not match expected '" + expected + "'");
  }
}

inline void expect_no_trailing(std::istream& in, const char* format) {
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(std::string("trailing data after ") + format + " payload");
  }
}

}  // namespace io

// ---------------------------------------------------------------------------
// PGM images

struct PgmImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

inline PgmImage read_pgm(const std::string& path) {
  std::ifstream in = io::open_for_read(path);
  auto next_token = [&in, &path]() -> std::string {
    std::string token;
    int ch;
    while ((ch = in.get()) != std::char_traits<char>::eof()) {
      if (ch == '#') {  // comment runs to end of line
        while ((ch = in.get()) != std::char_traits<char>::eof() && ch != '\n') {
        }
        continue;
      }
      if (std::isspace(ch)) {
        if (!token.empty()) return token;
        continue;
      }
      token.push_back(static_cast<char>(ch));
    }
    if (token.empty()) throw FormatError("truncated PGM header in '" + path + "'");
    return token;
  };

  if (next_token() != "P5") {
    throw FormatError("'" + path + "' is not a binary (P5) PGM file");
  }
  auto parse_int = [&path](const std::string& token) {
    for (char c : token) {
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        throw FormatError("malformed PGM header field '" + token + "' in '" +
                          path + "'");
      }
    }
    return std::stoi(token);
  };
  PgmImage img;
  img.width = parse_int(next_token());
  img.height = parse_int(next_token());
  const int maxval = parse_int(next_token());
  if (img.width <= 0 || img.height <= 0) {
    throw FormatError("PGM dimensions must be positive in '" + path + "'");
  }
  if (maxval != 255) {
    throw FormatError("PGM maxval must be 255, got " + std::to_string(maxval) +
                      " in '" + path + "'");
  }
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  io::read_exact(in, img.pixels.data(), img.pixels.size(), "PGM pixel data");
  return img;
}

inline void write_pgm(const std::string& path, const PgmImage& img) {
  std::ofstream out = io::open_for_write(path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw MissingInput("failed writing '" + path + "'");
}

inline Frame frame_from_pgm(const PgmImage& img, double timestamp) {
  Frame f = make_frame(img.width, img.height, timestamp);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    f.luma[i] = static_cast<float>(img.pixels[i]) / 255.0f;
  }
  return f;
}

inline PgmImage pgm_from_frame(const Frame& frame) {
  PgmImage img;
  img.width = frame.width;
  img.height = frame.height;
  img.pixels.resize(frame.luma.size());
  for (std::size_t i = 0; i < frame.luma.size(); ++i) {
    const float scaled = frame.luma[i] * 255.0f + 0.5f;
    img.pixels[i] = static_cast<std::uint8_t>(
        scaled < 0.0f ? 0.0f : (scaled > 255.0f ? 255.0f : scaled));
  }
  return img;
}

// Loads every *.pgm in a directory in lexicographic filename order; frame k
// gets timestamp k / fps.
inline std::vector<Frame> load_frame_dir(const std::string& dir, double fps) {
  if (!(fps > 0.0)) throw InvalidTimestamps("frame rate must be positive");
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw MissingInput("'" + dir + "' is not a directory");
  }
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm") paths.push_back(entry.path());
  }
  if (paths.empty()) throw EmptyInput("no .pgm frames in '" + dir + "'");
  std::sort(paths.begin(), paths.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.filename().string() < b.filename().string();
            });
  std::vector<Frame> frames;
  frames.reserve(paths.size());
  for (std::size_t k = 0; k < paths.size(); ++k) {
    frames.push_back(
        frame_from_pgm(read_pgm(paths[k].string()), static_cast<double>(k) / fps));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// EGFR frame sequences

inline void write_frame_file(const std::string& path, const std::vector<Frame>& frames,
                             double native_fps) {
  if (frames.empty()) throw EmptyInput("no frames to write");
  if (!(native_fps > 0.0)) throw InvalidTimestamps("frame rate must be positive");
  for (const Frame& f : frames) {
    if (f.width != frames[0].width || f.height != frames[0].height) {
      throw DimensionMismatch("all frames in a sequence must share dimensions");
    }
  }
  std::ofstream out = io::open_for_write(path);
  io::put_magic(out, "EGFR");
  io::put_u32(out, static_cast<std::uint32_t>(frames[0].width));
  io::put_u32(out, static_cast<std::uint32_t>(frames[0].height));
  io::put_f32(out, static_cast<float>(native_fps));
  io::put_u32(out, static_cast<std::uint32_t>(frames.size()));
  for (const Frame& f : frames) {
    const PgmImage img = pgm_from_frame(f);
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
  }
  if (!out) throw MissingInput("failed writing '" + path + "'");
}

struct FrameSequence {
  std::vector<Frame> frames;
  double native_fps = 0.0;
};

inline FrameSequence read_frame_file(const std::string& path) {
  std::ifstream in = io::open_for_read(path);
  io::expect_magic(in, "EGFR");
  const int width = static_cast<int>(io::get_u32(in, "width"));
  const int height = static_cast<int>(io::get_u32(in, "height"));
  const float fps = io::get_f32(in, "native fps");
  const std::uint32_t count = io::get_u32(in, "frame count");
  if (width <= 0 || height <= 0) {
    throw FormatError("frame dimensions must be positive");
  }
  if (!(fps > 0.0f)) throw FormatError("native fps must be positive");
  FrameSequence seq;
  seq.native_fps = fps;
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(width) * height);
  for (std::uint32_t k = 0; k < count; ++k) {
    io::read_exact(in, pixels.data(), pixels.size(), "frame pixels");
    Frame f = make_frame(width, height, static_cast<double>(k) / fps);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      f.luma[i] = static_cast<float>(pixels[i]) / 255.0f;
    }
    seq.frames.push_back(std::move(f));
  }
  io::expect_no_trailing(in, "EGFR");
  return seq;
}

// ---------------------------------------------------------------------------
// EGFL flow fields

inline void write_flow_file(const std::string& path,
                            const std::vector<FlowField>& fields) {
  std::ofstream out = io::open_for_write(path);
  io::put_magic(out, "EGFL");
  io::put_u32(out, 1);  // version
  io::put_u32(out, FlowField::kRows);
  io::put_u32(out, FlowField::kCols);
  io::put_u32(out, static_cast<std::uint32_t>(fields.size()));
  for (const FlowField& f : fields) {
    if (f.frame_index < 0) {
      throw FormatError("flow field frame_index must be non-negative");
    }
    io::put_u32(out, static_cast<std::uint32_t>(f.frame_index));
    io::put_f32_array(out, f.u.data(), f.u.size());
    io::put_f32_array(out, f.v.data(), f.v.size());
  }
  if (!out) throw MissingInput("failed writing '" + path + "'");
}

inline std::vector<FlowField> read_flow_file(const std::string& path) {
  std::ifstream in = io::open_for_read(path);
  io::expect_magic(in, "EGFL");
  const std::uint32_t version = io::get_u32(in, "version");
  if (version != 1) {
    throw FormatError("unsupported flow file version " + std::to_string(version));
  }
  const std::uint32_t rows = io::get_u32(in, "rows");
  const std::uint32_t cols = io::get_u32(in, "cols");
  if (rows != FlowField::kRows || cols != FlowField::kCols) {
    throw FormatError("flow grid must be 32x32, got " + std::to_string(rows) +
                      "x" + std::to_string(cols));
  }
  const std::uint32_t count = io::get_u32(in, "field count");
  std::vector<FlowField> fields(count);
  for (FlowField& f : fields) {
    f.frame_index = static_cast<int>(io::get_u32(in, "frame index"));
    io::get_f32_array(in, f.u.data(), f.u.size(), "u values");
    io::get_f32_array(in, f.v.data(), f.v.size(), "v values");
    std::fill(f.converged.begin(), f.converged.end(), std::uint8_t{1});
  }
  io::expect_no_trailing(in, "EGFL");
  return fields;
}

// ---------------------------------------------------------------------------
// EGVD volume datasets

inline void write_volume_dataset(const std::string& path,
                                 const std::vector<FlowVolume>& volumes) {
  std::ofstream out = io::open_for_write(path);
  io::put_magic(out, "EGVD");
  io::put_u32(out, 1);  // version
  io::put_u32(out, static_cast<std::uint32_t>(volumes.size()));
  io::put_u32(out, FlowVolume::kRows);
  io::put_u32(out, FlowVolume::kCols);
  io::put_u32(out, FlowVolume::kDepth);
  for (const FlowVolume& vol : volumes) {
    io::put_i32(out, vol.label);
    if (vol.start_frame < 0) {
      throw FormatError("volume start_frame must be non-negative");
    }
    io::put_u32(out, static_cast<std::uint32_t>(vol.start_frame));
    io::put_f32_array(out, vol.data.data(), vol.data.size());
  }
  if (!out) throw MissingInput("failed writing '" + path + "'");
}

inline std::vector<FlowVolume> read_volume_dataset(const std::string& path) {
  std::ifstream in = io::open_for_read(path);
  io::expect_magic(in, "EGVD");
  const std::uint32_t version = io::get_u32(in, "version");
  if (version != 1) {
    throw FormatError("unsupported volume dataset version " +
                      std::to_string(version));
  }
  const std::uint32_t count = io::get_u32(in, "volume count");
  const std::uint32_t rows = io::get_u32(in, "rows");
  const std::uint32_t cols = io::get_u32(in, "cols");
  const std::uint32_t depth = io::get_u32(in, "depth");
  if (rows != FlowVolume::kRows || cols != FlowVolume::kCols ||
      depth != FlowVolume::kDepth) {
    throw FormatError("volume dims must be 32x32x120, got " +
                      std::to_string(rows) + "x" + std::to_string(cols) + "x" +
                      std::to_string(depth));
  }
  std::vector<FlowVolume> volumes(count);
  for (FlowVolume& vol : volumes) {
    vol.label = io::get_i32(in, "label");
    if (vol.label < -1) {
      throw FormatError("volume label must be -1 (unlabeled) or a class id");
    }
    vol.start_frame = static_cast<int>(io::get_u32(in, "start frame"));
    io::get_f32_array(in, vol.data.data(), vol.data.size(), "volume data");
  }
  io::expect_no_trailing(in, "EGVD");
  return volumes;
}

}  // namespace egoflow
