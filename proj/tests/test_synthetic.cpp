#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "egoflow/synthetic.hpp"

using namespace egoflow;

TEST(MotionClasses, SixDistinctDefaults) {
  const std::vector<MotionClassSpec> classes = default_motion_classes(0.2, 0);
  ASSERT_EQ(classes.size(), 6u);
  std::set<std::string> names;
  std::set<std::uint64_t> seeds;
  for (const MotionClassSpec& c : classes) {
    names.insert(c.name);
    seeds.insert(c.seed);
    EXPECT_GT(c.noise_sigma, 0.0);
  }
  EXPECT_EQ(names.size(), 6u);
  EXPECT_EQ(seeds.size(), 6u);
  // noise scales with the requested ratio
  const std::vector<MotionClassSpec> loud = default_motion_classes(0.4, 0);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    EXPECT_NEAR(loud[i].noise_sigma, 2.0 * classes[i].noise_sigma, 1e-12);
  }
}

TEST(Volumes, DeterministicPerClassAndIndex) {
  const std::vector<MotionClassSpec> classes = default_motion_classes(0.2, 7);
  const FlowVolume a = generate_volume(classes[0], 3);
  const FlowVolume b = generate_volume(classes[0], 3);
  const FlowVolume c = generate_volume(classes[0], 4);
  EXPECT_EQ(a.data, b.data);
  EXPECT_NE(a.data, c.data);
  EXPECT_EQ(a.start_frame, 90);
  EXPECT_EQ(c.start_frame, 120);
  EXPECT_THROW(generate_volume(classes[0], -1), IndexError);
}

TEST(Volumes, TranslationIsUniformFlow) {
  MotionClassSpec spec;
  spec.kind = MotionKind::translate;
  spec.amplitude = 2.0;
  spec.dir_u = 0.8;
  spec.dir_v = 0.6;
  spec.noise_sigma = 0.0;
  const FlowVolume vol = generate_volume(spec, 0);
  for (int tau = 0; tau < 60; ++tau) {
    EXPECT_FLOAT_EQ(vol.at(5, 9, 2 * tau), 1.6f);
    EXPECT_FLOAT_EQ(vol.at(5, 9, 2 * tau + 1), 1.2f);
  }
}

TEST(Volumes, RotationIsDivergenceFreeWithSignedCurl) {
  MotionClassSpec spec;
  spec.kind = MotionKind::rotate_z;
  spec.amplitude = 0.2;
  spec.noise_sigma = 0.0;
  const FlowVolume vol = generate_volume(spec, 0);
  // u = -w*y, v = +w*x around the grid center 15.5
  EXPECT_FLOAT_EQ(vol.at(0, 16, 0), static_cast<float>(-0.2 * (0 - 15.5)));
  EXPECT_FLOAT_EQ(vol.at(16, 0, 1), static_cast<float>(0.2 * (0 - 15.5)));
  // flow magnitude grows with distance from the center
  const float near = std::hypot(vol.at(15, 15, 0), vol.at(15, 15, 1));
  const float far = std::hypot(vol.at(0, 0, 0), vol.at(0, 0, 1));
  EXPECT_GT(far, near);
}

TEST(Volumes, ZoomPointsOutward) {
  MotionClassSpec spec;
  spec.kind = MotionKind::radial_zoom;
  spec.amplitude = 0.2;
  spec.noise_sigma = 0.0;
  const FlowVolume vol = generate_volume(spec, 0);
  // right of center: u > 0; below center: v > 0
  EXPECT_GT(vol.at(15, 31, 0), 0.0f);
  EXPECT_LT(vol.at(15, 0, 0), 0.0f);
  EXPECT_GT(vol.at(31, 15, 1), 0.0f);
  EXPECT_LT(vol.at(0, 15, 1), 0.0f);
  // radial: u proportional to x offset, v to y offset
  EXPECT_FLOAT_EQ(vol.at(15, 31, 0), static_cast<float>(0.2 * (31 - 15.5)));
}

TEST(Volumes, BobAlternatesVerticalSignEverySevenFields) {
  MotionClassSpec spec;
  spec.kind = MotionKind::vertical_bob;
  spec.amplitude = 2.4;
  spec.noise_sigma = 0.0;
  const FlowVolume vol = generate_volume(spec, 0);
  for (int tau = 0; tau < 60; ++tau) {
    const float expected =
        ((tau / 7) % 2 == 0) ? 2.4f : -2.4f;
    EXPECT_FLOAT_EQ(vol.at(10, 10, 2 * tau + 1), expected) << "tau " << tau;
    EXPECT_FLOAT_EQ(vol.at(10, 10, 2 * tau), 0.0f);
  }
}

TEST(Volumes, StaticIsZeroMeanNoise) {
  const std::vector<MotionClassSpec> classes = default_motion_classes(0.2, 1);
  const FlowVolume vol = generate_volume(classes[4], 0);
  double sum = 0.0, abs_sum = 0.0;
  for (float v : vol.data) {
    sum += v;
    abs_sum += std::fabs(v);
  }
  const double mean = sum / static_cast<double>(vol.data.size());
  EXPECT_LT(std::fabs(mean), 0.02);
  EXPECT_GT(abs_sum / static_cast<double>(vol.data.size()), 0.1);
}

TEST(Volumes, WindowHasStillCenterAndMovingBorder) {
  MotionClassSpec spec;
  spec.kind = MotionKind::mixed_window;
  spec.amplitude = 2.4;
  spec.noise_sigma = 0.0;
  const FlowVolume vol = generate_volume(spec, 0);
  // center box |x|,|y| <= 8 around 15.5 is still
  EXPECT_FLOAT_EQ(vol.at(15, 15, 0), 0.0f);
  EXPECT_FLOAT_EQ(vol.at(15, 15, 1), 0.0f);
  EXPECT_FLOAT_EQ(vol.at(10, 20, 0), 0.0f);
  // border moves
  const float border = std::hypot(vol.at(0, 0, 0), vol.at(0, 0, 1));
  EXPECT_GT(border, 0.5f);
}

TEST(Volumes, ClassesArePairwiseDistinguishable) {
  const std::vector<MotionClassSpec> classes = default_motion_classes(0.2, 3);
  std::vector<FlowVolume> reps;
  for (const MotionClassSpec& c : classes) reps.push_back(generate_volume(c, 0));
  for (std::size_t a = 0; a < reps.size(); ++a) {
    for (std::size_t b = a + 1; b < reps.size(); ++b) {
      double dist = 0.0;
      for (std::size_t i = 0; i < reps[a].data.size(); ++i) {
        dist += std::fabs(reps[a].data[i] - reps[b].data[i]);
      }
      dist /= static_cast<double>(reps[a].data.size());
      EXPECT_GT(dist, 0.25) << classes[a].name << " vs " << classes[b].name;
    }
  }
}

TEST(Dataset, LabelsFollowClassOrder) {
  const std::vector<MotionClassSpec> classes = default_motion_classes(0.2, 4);
  const std::vector<FlowVolume> data = generate_dataset(classes, 3);
  ASSERT_EQ(data.size(), 18u);
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(data[i].label, static_cast<int>(i / 3));
  }
  EXPECT_THROW(generate_dataset({}, 3), EmptyInput);
  EXPECT_THROW(generate_dataset(classes, 0), IndexError);
}

TEST(Texture, DeterministicNormalizedFrames) {
  const Frame a = generate_texture_frame(128, 96, 9);
  const Frame b = generate_texture_frame(128, 96, 9);
  const Frame c = generate_texture_frame(128, 96, 10);
  EXPECT_EQ(a.luma, b.luma);
  EXPECT_NE(a.luma, c.luma);
  EXPECT_EQ(a.width, 128);
  EXPECT_EQ(a.height, 96);

  float lo = 1.0f, hi = 0.0f;
  for (float v : a.luma) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_FLOAT_EQ(lo, 0.0f);  // contrast-stretched to the full range
  EXPECT_FLOAT_EQ(hi, 1.0f);
}

TEST(FramePairs, CyclicShiftMatchesRequestedDisplacement) {
  const int dx = 3, dy = -2;
  const auto [a, b] = generate_frame_pair(dx, dy, 123, 64, 64);
  // a feature at (x, y) in the first frame appears at (x+dx, y+dy) in the
  // second; verify away from the wrap seam
  for (int y = 10; y < 50; ++y) {
    for (int x = 10; x < 50; ++x) {
      EXPECT_FLOAT_EQ(b.at(x + dx, y + dy), a.at(x, y));
    }
  }
}

TEST(FramePairs, ShiftingSequenceHasUniformTimestamps) {
  const std::vector<Frame> frames = generate_shifting_frames(5, 1, 1, 8, 64, 64);
  ASSERT_EQ(frames.size(), 5u);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    EXPECT_DOUBLE_EQ(frames[i].source_timestamp, static_cast<double>(i) / 15.0);
  }
  // consecutive frames are shifted copies of each other
  for (int y = 10; y < 50; ++y) {
    for (int x = 10; x < 50; ++x) {
      EXPECT_FLOAT_EQ(frames[1].at(x + 1, y + 1), frames[0].at(x, y));
    }
  }
}
