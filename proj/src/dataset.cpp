#include "gcnseg/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "gcnseg/error.hpp"

namespace gcnseg {

namespace {

[[noreturn]] void format_error(std::size_t offset, const std::string& msg) {
  throw Error(ErrorKind::kFormat, msg + " at byte " + std::to_string(offset));
}

[[noreturn]] void dataset_error(const std::string& msg) {
  throw Error(ErrorKind::kInvalidDataset, msg);
}

class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

  std::size_t offset() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (value > (1u << 24)) format_error(start, std::string(what) + " is too large");
      ++pos_;
    }
    if (pos_ == start) format_error(start, std::string("expected ") + what);
    return value;
  }

  // Exactly one whitespace byte separates maxval from the payload.
  void expect_single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      format_error(pos_, "expected whitespace after maxval");
    }
    ++pos_;
  }

 private:
  const std::string& bytes_;
  std::size_t pos_;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kFormat, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kFormat, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kFormat, "short write to " + path.string());
}

}  // namespace

RasterImage parse_raster(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    format_error(0, "expected P5 or P6 magic");
  }
  RasterImage img;
  img.channels = bytes[1] == '6' ? 3 : 1;
  HeaderReader reader(bytes, 2);
  img.width = reader.read_uint("width");
  img.height = reader.read_uint("height");
  const std::size_t maxval_offset = reader.offset();
  const std::size_t maxval = reader.read_uint("maxval");
  if (maxval != 255) {
    format_error(maxval_offset, "maxval " + std::to_string(maxval) + " is not 255");
  }
  if (img.width == 0 || img.height == 0) format_error(maxval_offset, "zero image dimension");
  reader.expect_single_space();

  const std::size_t payload = img.width * img.height * img.channels;
  const std::size_t start = reader.offset();
  if (bytes.size() - start < payload) {
    format_error(bytes.size(), "truncated payload: expected " + std::to_string(payload) +
                                   " bytes, found " + std::to_string(bytes.size() - start));
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                    bytes.begin() + static_cast<std::ptrdiff_t>(start + payload));
  return img;
}

RasterImage load_raster(const std::filesystem::path& path) {
  try {
    return parse_raster(read_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string encode_raster(const RasterImage& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw Error(ErrorKind::kInvalidArgument, "raster must have 1 or 3 channels");
  }
  if (image.pixels.size() != image.width * image.height * image.channels) {
    throw Error(ErrorKind::kInvalidDimension, "raster pixel count does not match its shape");
  }
  std::string out = image.channels == 3 ? "P6\n" : "P5\n";
  out += std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(image.pixels.begin(), image.pixels.end());
  return out;
}

void save_raster(const RasterImage& image, const std::filesystem::path& path) {
  write_file(path, encode_raster(image));
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  RasterImage r{mask.width, mask.height, 1, std::vector<std::uint8_t>(mask.values.size())};
  for (std::size_t i = 0; i < mask.values.size(); ++i) {
    if (mask.values[i] > 1) throw Error(ErrorKind::kInvalidInput, "mask is not binary");
    r.pixels[i] = mask.values[i] ? 255 : 0;
  }
  save_raster(r, path);
}

BinaryMask binarize_mask(const RasterImage& raster, std::uint8_t threshold) {
  if (raster.channels != 1) dataset_error("mask raster must be single-channel");
  BinaryMask m{raster.width, raster.height, std::vector<std::uint8_t>(raster.pixels.size())};
  for (std::size_t i = 0; i < raster.pixels.size(); ++i)
    m.values[i] = raster.pixels[i] >= threshold ? 1 : 0;
  return m;
}

BinaryMask load_mask(const std::filesystem::path& path, std::uint8_t threshold) {
  return binarize_mask(load_raster(path), threshold);
}

std::size_t windows_along(std::size_t extent, std::size_t size, std::size_t stride) {
  if (size == 0 || stride == 0 || extent < size) return 0;
  return (extent - size) / stride + 1;
}

std::size_t patch_count(std::size_t height, std::size_t width, std::size_t size,
                        std::size_t stride) {
  return windows_along(height, size, stride) * windows_along(width, size, stride);
}

namespace {

// Slices the column band [col_begin, col_end) of a source.
std::vector<Sample> slice_band(const RasterImage& image, const BinaryMask& mask,
                               std::size_t col_begin, std::size_t col_end, std::size_t size,
                               std::size_t stride, const std::string& source_id) {
  std::vector<Sample> out;
  const std::size_t rows = windows_along(image.height, size, stride);
  const std::size_t cols = windows_along(col_end - col_begin, size, stride);
  out.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t y0 = r * stride;
      const std::size_t x0 = col_begin + c * stride;
      Sample s{Tensor3(3, size, size), std::vector<std::uint8_t>(size * size),
               PatchOrigin{source_id, y0, x0}};
      for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
          for (std::size_t ch = 0; ch < 3; ++ch) {
            const std::size_t src_ch = image.channels == 3 ? ch : 0;
            s.image.at(ch, y, x) = image.at(y0 + y, x0 + x, src_ch) / 255.0;
          }
          s.mask[y * size + x] = mask.values[(y0 + y) * mask.width + x0 + x];
        }
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

void check_source(const RasterImage& image, const BinaryMask& mask) {
  if (image.channels != 1 && image.channels != 3) dataset_error("image must have 1 or 3 channels");
  if (image.width != mask.width || image.height != mask.height) {
    dataset_error("image is " + std::to_string(image.width) + "x" +
                  std::to_string(image.height) + " but mask is " + std::to_string(mask.width) +
                  "x" + std::to_string(mask.height));
  }
  for (std::uint8_t v : mask.values)
    if (v > 1) dataset_error("mask is not binary");
}

}  // namespace

std::vector<Sample> slice_patches(const RasterImage& image, const BinaryMask& mask,
                                  std::size_t size, std::size_t stride,
                                  const std::string& source_id) {
  if (size == 0 || stride == 0) dataset_error("window size and stride must be >= 1");
  check_source(image, mask);
  if (image.width < size || image.height < size) {
    dataset_error("raster " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                  " is smaller than the " + std::to_string(size) + "px window");
  }
  return slice_band(image, mask, 0, image.width, size, stride, source_id);
}

std::size_t split_column(std::size_t width, double ratio, std::size_t stride) {
  const auto raw = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(width)));
  if (raw >= width) return width;
  return raw / stride * stride;
}

SpatialSplit split_spatial(const std::vector<SourceRaster>& sources, double ratio,
                           std::size_t size, std::size_t stride) {
  if (sources.empty()) dataset_error("split_spatial needs at least one source");
  if (!(ratio >= 0.0 && ratio <= 1.0)) dataset_error("split ratio must lie in [0, 1]");
  if (size == 0 || stride == 0) dataset_error("window size and stride must be >= 1");

  SpatialSplit split;
  for (const SourceRaster& src : sources) {
    check_source(src.image, src.mask);
    const std::size_t cut = split_column(src.image.width, ratio, stride);
    auto side = [&](std::size_t begin, std::size_t end, const char* name,
                    std::vector<Sample>& dst) {
      if (end - begin < size || src.image.height < size) {
        if (end > begin) {
          split.warnings.push_back("source '" + src.id + "': " + name + " side is " +
                                   std::to_string(end - begin) + "px wide, below the " +
                                   std::to_string(size) + "px window; no patches");
        }
        return;
      }
      auto patches = slice_band(src.image, src.mask, begin, end, size, stride, src.id);
      std::move(patches.begin(), patches.end(), std::back_inserter(dst));
    };
    side(0, cut, "train", split.train);
    side(cut, src.image.width, "test", split.test);
  }
  return split;
}

std::vector<SourceRaster> load_source_pairs(const std::filesystem::path& images_dir,
                                            const std::filesystem::path& masks_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(images_dir)) dataset_error("missing directory " + images_dir.string());

  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(images_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm")
      stems.push_back(entry.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());
  if (stems.empty()) dataset_error("no .ppm images under " + images_dir.string());

  std::vector<SourceRaster> out;
  for (const std::string& stem : stems) {
    const fs::path mask_path = masks_dir / (stem + ".pgm");
    if (!fs::is_regular_file(mask_path)) dataset_error("no mask for image stem '" + stem + "'");
    out.push_back({stem, load_raster(images_dir / (stem + ".ppm")), load_mask(mask_path)});
  }
  return out;
}

std::vector<SourceRaster> load_dataset_dir(const std::filesystem::path& dir) {
  return load_source_pairs(dir / "images", dir / "masks");
}

Tensor3 raster_to_tensor(const RasterImage& image, std::size_t channels) {
  if (image.channels != 1 && image.channels != channels) {
    dataset_error("raster has " + std::to_string(image.channels) + " channels, expected " +
                  std::to_string(channels));
  }
  Tensor3 t(channels, image.height, image.width);
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x)
      for (std::size_t c = 0; c < channels; ++c)
        t.at(c, y, x) = image.at(y, x, image.channels == 1 ? 0 : c) / 255.0;
  return t;
}

RasterImage sample_image_raster(const Sample& sample) {
  const Tensor3& t = sample.image;
  RasterImage r{t.width, t.height, t.channels,
                std::vector<std::uint8_t>(t.width * t.height * t.channels)};
  for (std::size_t y = 0; y < t.height; ++y)
    for (std::size_t x = 0; x < t.width; ++x)
      for (std::size_t c = 0; c < t.channels; ++c)
        r.pixels[(y * t.width + x) * t.channels + c] =
            static_cast<std::uint8_t>(std::lround(std::clamp(t.at(c, y, x), 0.0, 1.0) * 255.0));
  return r;
}

BinaryMask sample_mask(const Sample& sample, std::size_t size) {
  return BinaryMask{size, size, sample.mask};
}

}  // namespace gcnseg
