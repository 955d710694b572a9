#include <gtest/gtest.h>

#include "gcnseg/synthetic.hpp"
#include "test_support.hpp"

namespace gcnseg {
namespace {

TEST(Synthetic, CorpusShapeAndDeterminism) {
  SyntheticOptions o;
  o.count = 20;
  const std::vector<SourceRaster> a = make_synthetic_sources(o);
  const std::vector<SourceRaster> b = make_synthetic_sources(o);
  ASSERT_EQ(a.size(), 20u);
  EXPECT_EQ(a[0].id, "synth_0000");
  EXPECT_EQ(a[19].id, "synth_0019");
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].image, b[i].image);
    EXPECT_EQ(a[i].mask, b[i].mask);
    EXPECT_EQ(a[i].image.width, 64u);
    EXPECT_EQ(a[i].image.channels, 3u);
  }
  o.seed = 8;
  EXPECT_NE(make_synthetic_sources(o)[0].image, a[0].image);
}

TEST(Synthetic, IntensitiesFollowMask) {
  SyntheticOptions o;
  o.count = 30;
  double fg = 0.0, bg = 0.0;
  std::size_t nf = 0, nb = 0;
  for (const SourceRaster& s : make_synthetic_sources(o)) {
    std::size_t building = 0;
    for (std::size_t i = 0; i < s.mask.values.size(); ++i) {
      const double v = s.image.pixels[i * 3] / 255.0;
      if (s.mask.values[i]) {
        fg += v;
        ++nf;
        ++building;
      } else {
        bg += v;
        ++nb;
      }
    }
    EXPECT_GE(building, 64u);  // at least one 8×8 rectangle
  }
  EXPECT_NEAR(fg / nf, 0.8, 0.02);
  EXPECT_NEAR(bg / nb, 0.2, 0.02);
}

TEST(Synthetic, SamplesMatchSources) {
  SyntheticOptions o;
  o.count = 3;
  o.size = 16;
  o.min_side = 3;
  o.max_side = 6;
  const std::vector<SourceRaster> src = make_synthetic_sources(o);
  const std::vector<Sample> samples = make_synthetic_samples(o);
  ASSERT_EQ(samples.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(samples[i].mask, src[i].mask.values);
    EXPECT_EQ(samples[i].origin.source_id, src[i].id);
    EXPECT_EQ(samples[i].image.at(1, 4, 5), src[i].image.at(4, 5, 1) / 255.0);
  }
}

}  // namespace
}  // namespace gcnseg
