#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gcnseg/dataset.hpp"

namespace gcnseg {

// Toy building-footprint corpus: dark background (~0.2) with 1–3 bright
// axis-aligned rectangles (~0.8), Gaussian noise on every channel, quantized
// to bytes like a real raster.
struct SyntheticOptions {
  std::size_t count = 200;
  std::size_t size = 64;
  double background = 0.2;
  double foreground = 0.8;
  double noise_sigma = 0.1;
  std::size_t min_side = 8;
  std::size_t max_side = 24;
  std::uint64_t seed = 7;
};

// One raster pair per patch, ids "synth_0000", "synth_0001", ...
std::vector<SourceRaster> make_synthetic_sources(const SyntheticOptions& options = {});

// The same corpus as size×size samples.
std::vector<Sample> make_synthetic_samples(const SyntheticOptions& options = {});

}  // namespace gcnseg
