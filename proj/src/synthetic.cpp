#include "gcnseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "gcnseg/error.hpp"

namespace gcnseg {

namespace {

// Portable draws on top of mt19937_64 (whose output sequence is fixed by the
// standard, unlike the distribution classes).
class Draws {
 public:
  explicit Draws(std::uint64_t seed) : rng_(seed) {}

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::size_t integer(std::size_t lo, std::size_t hi) {  // inclusive
    return lo + static_cast<std::size_t>(rng_() % (hi - lo + 1));
  }

  // Box–Muller; uses one pair per call and discards the second value.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

std::vector<SourceRaster> make_synthetic_sources(const SyntheticOptions& o) {
  if (o.size == 0 || o.min_side == 0 || o.min_side > o.max_side || o.max_side > o.size) {
    throw Error(ErrorKind::kInvalidArgument, "synthetic rectangle sizes do not fit the patch");
  }
  Draws draws(o.seed);
  std::vector<SourceRaster> out;
  out.reserve(o.count);
  for (std::size_t k = 0; k < o.count; ++k) {
    BinaryMask mask{o.size, o.size, std::vector<std::uint8_t>(o.size * o.size, 0)};
    const std::size_t rects = draws.integer(1, 3);
    for (std::size_t r = 0; r < rects; ++r) {
      const std::size_t h = draws.integer(o.min_side, o.max_side);
      const std::size_t w = draws.integer(o.min_side, o.max_side);
      const std::size_t y0 = draws.integer(0, o.size - h);
      const std::size_t x0 = draws.integer(0, o.size - w);
      for (std::size_t y = y0; y < y0 + h; ++y)
        for (std::size_t x = x0; x < x0 + w; ++x) mask.values[y * o.size + x] = 1;
    }
    RasterImage img{o.size, o.size, 3, std::vector<std::uint8_t>(o.size * o.size * 3)};
    for (std::size_t p = 0; p < o.size * o.size; ++p) {
      const double base = mask.values[p] ? o.foreground : o.background;
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(base + o.noise_sigma * draws.normal(), 0.0, 1.0);
        img.pixels[p * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
    char id[32];
    std::snprintf(id, sizeof id, "synth_%04zu", k);
    out.push_back({id, std::move(img), std::move(mask)});
  }
  return out;
}

std::vector<Sample> make_synthetic_samples(const SyntheticOptions& options) {
  std::vector<Sample> out;
  for (const SourceRaster& src : make_synthetic_sources(options)) {
    auto patches = slice_patches(src.image, src.mask, options.size, options.size, src.id);
    out.push_back(std::move(patches.front()));
  }
  return out;
}

}  // namespace gcnseg
