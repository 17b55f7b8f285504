#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace covspd {

/// A stack of `maps` 2-D feature maps of size height x width, stored
/// map-major then row-major. Values are kept in the 32-bit precision of the
/// on-disk format; everything downstream promotes to double.
class FeatureTensor {
 public:
  FeatureTensor() = default;
  /// Throws UsageError on zero dims or a length mismatch, TensorFormatError on
  /// non-finite values.
  FeatureTensor(std::uint32_t maps, std::uint32_t height, std::uint32_t width,
                std::vector<float> data);

  std::uint32_t maps() const noexcept { return maps_; }
  std::uint32_t height() const noexcept { return height_; }
  std::uint32_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }

  float at(std::uint32_t map, std::uint32_t row, std::uint32_t col) const {
    return data_[(static_cast<std::size_t>(map) * height_ + row) * width_ + col];
  }
  std::span<const float> map(std::uint32_t index) const {
    const std::size_t plane = static_cast<std::size_t>(height_) * width_;
    return std::span<const float>(data_).subspan(index * plane, plane);
  }
  std::span<const float> data() const noexcept { return data_; }

  friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;

 private:
  std::uint32_t maps_ = 0;
  std::uint32_t height_ = 0;
  std::uint32_t width_ = 0;
  std::vector<float> data_;
};

/// Reads an FMT1 file: "FMT1", three little-endian u32 (m, h, w), then
/// m*h*w little-endian IEEE-754 float32 values.
FeatureTensor load_feature_tensor(const std::filesystem::path& path);

/// Writes an FMT1 file, replacing any existing file at `path`.
void save_feature_tensor(const FeatureTensor& tensor, const std::filesystem::path& path);

/// Resizes every map independently with bilinear, corner-aligned sampling.
FeatureTensor resize_feature_maps(const FeatureTensor& tensor, std::uint32_t out_h,
                                  std::uint32_t out_w);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Pixel rectangle in input-image coordinates, half-open: [x0, x1) x [y0, y1).
struct RegionBox {
  std::string name;
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  friend bool operator==(const RegionBox&, const RegionBox&) = default;
};

struct SampleRecord {
  std::string sample_id;
  std::filesystem::path tensor_path;  // resolved against the manifest directory
  int label = 0;
  std::string subject_id;
  std::string video_id;
  int frame_index = 0;
  std::optional<std::vector<Point2>> landmarks;
  std::optional<std::vector<RegionBox>> regions;
};

/// Input image extent, width then height.
struct ImageExtent {
  int width = 0;
  int height = 0;
  bool contains(const Point2& p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.x < width && p.y < height;
  }
  friend bool operator==(const ImageExtent&, const ImageExtent&) = default;
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  ImageExtent input_extent;
  std::vector<SampleRecord> samples;
};

/// Parses and validates a JSON manifest. Tensor files are not opened.
DatasetManifest load_dataset_manifest(const std::filesystem::path& path);

/// Validates all manifest invariants; throws ManifestError.
void validate_manifest(const DatasetManifest& manifest);

/// Writes a manifest; tensor paths are written relative to the manifest
/// directory when possible.
void save_dataset_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace covspd
