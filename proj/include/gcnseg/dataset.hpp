#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gcnseg/model.hpp"

namespace gcnseg {

// 8-bit raster, interleaved channels, row-major.
struct RasterImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;  // 1 or 3
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c = 0) const {
    return pixels[(y * width + x) * channels + c];
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

// Values in {0, 1}; 1 marks building pixels.
struct BinaryMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> values;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

struct PatchOrigin {
  std::string source_id;
  std::size_t row = 0;
  std::size_t col = 0;

  friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

struct Sample {
  Tensor3 image;                    // 3 × size × size, entries byte / 255
  std::vector<std::uint8_t> mask;   // size × size, row-major
  PatchOrigin origin;
};

// Binary P6 (RGB) or P5 (grey) with maxval 255. Comments are accepted in the
// header. Throws kFormat with the byte offset of the problem.
RasterImage load_raster(const std::filesystem::path& path);
RasterImage parse_raster(const std::string& bytes);
void save_raster(const RasterImage& image, const std::filesystem::path& path);
std::string encode_raster(const RasterImage& image);

// Writes a P5 image with 1 → 255 and 0 → 0.
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);
// load_raster + binarize_mask.
BinaryMask load_mask(const std::filesystem::path& path, std::uint8_t threshold = 128);

// value >= threshold → 1. Throws kInvalidDataset for multi-channel input.
BinaryMask binarize_mask(const RasterImage& raster, std::uint8_t threshold = 128);

// Window count along one axis: ⌊(extent − size) / stride⌋ + 1, or 0 if the
// window does not fit.
std::size_t windows_along(std::size_t extent, std::size_t size, std::size_t stride);
std::size_t patch_count(std::size_t height, std::size_t width, std::size_t size,
                        std::size_t stride);

// Sliding-window patches at offsets (r·stride, c·stride), row-major, no
// padding. Grey images are replicated to three channels. Throws
// kInvalidDataset if the rasters disagree in size or are smaller than the
// window.
std::vector<Sample> slice_patches(const RasterImage& image, const BinaryMask& mask,
                                  std::size_t size = 64, std::size_t stride = 19,
                                  const std::string& source_id = "");

struct SourceRaster {
  std::string id;
  RasterImage image;
  BinaryMask mask;
};

struct SpatialSplit {
  std::vector<Sample> train;
  std::vector<Sample> test;
  std::vector<std::string> warnings;
};

// Column where split_spatial cuts a raster of the given width: ⌊ratio·W⌋
// rounded down to a multiple of the stride, or W itself when ratio·W ≥ W.
std::size_t split_column(std::size_t width, double ratio, std::size_t stride);

// Each source is cut vertically at ⌊ratio·W⌋ rounded down to a multiple of
// the stride. The left part is sliced into train patches, the right part into
// test patches, so no pixel lands in both. A part narrower than the window
// contributes nothing and adds a warning.
SpatialSplit split_spatial(const std::vector<SourceRaster>& sources, double ratio = 0.8,
                           std::size_t size = 64, std::size_t stride = 19);

// Pairs every `<images_dir>/<id>.ppm` with `<masks_dir>/<id>.pgm`, sorted by
// id. Throws kInvalidDataset naming the stem when a mask is missing or there
// are no images.
std::vector<SourceRaster> load_source_pairs(const std::filesystem::path& images_dir,
                                            const std::filesystem::path& masks_dir);
// load_source_pairs(dir / "images", dir / "masks")
std::vector<SourceRaster> load_dataset_dir(const std::filesystem::path& dir);

// Whole raster as a channels × height × width tensor of byte / 255 values;
// grey rasters are replicated to `channels`.
Tensor3 raster_to_tensor(const RasterImage& image, std::size_t channels = 3);

// Raster view of a sample: image bytes recovered from [0, 1] values and the
// mask as a binary raster.
RasterImage sample_image_raster(const Sample& sample);
BinaryMask sample_mask(const Sample& sample, std::size_t size);

}  // namespace gcnseg
