#pragma once

#include <span>
#include <string>
#include <vector>

#include "covspd/tensorio.hpp"

namespace covspd {

namespace region_names {
inline constexpr const char* kGlobal = "global";
inline constexpr const char* kEyes = "eyes";
inline constexpr const char* kMouth = "mouth";
inline constexpr const char* kCheekLeft = "cheek_left";
inline constexpr const char* kCheekRight = "cheek_right";
}  // namespace region_names

/// The four facial regions, in canonical order.
std::vector<std::string> default_region_names();

struct Pixel {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Feature-map cell, (col, row). Ordered row-major so cell sets enumerate
/// observations in the same order as a full map.
struct Cell {
  int col = 0;
  int row = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell& a, const Cell& b) {
    if (auto c = a.row <=> b.row; c != 0) return c;
    return a.col <=> b.col;
  }
};

struct MapDims {
  int width = 0;
  int height = 0;
};

/// A named pixel set in input-image coordinates.
struct Region {
  std::string name;
  std::vector<Pixel> pixels;
};

struct MappedRegion {
  std::string name;
  std::vector<Cell> cells;  // sorted, unique
  double source_ratio = 0.0;
};

/// Maps an input-image point onto a feature map: (round(s*x), round(s*y)) with
/// round-half-up, clamped into the map.
Cell map_point(Point2 p, double s, MapDims map_dims);

/// Image of the region's pixels under map_point, deduplicated and sorted.
MappedRegion map_region(const Region& region, double s, MapDims map_dims);

/// All pixels of a half-open box. Throws DegenerateRegionError on empty boxes.
Region region_from_box(const RegionBox& box);

/// Builds eyes, mouth, cheek_left and cheek_right boxes from 49 landmarks in
/// the usual 49-point layout (brows 0-9, nose 10-18, eyes 19-30, mouth
/// 31-48). "left"/"right" refer to image sides.
///
/// - eyes: bounding box of brow and eye landmarks, padded by 10% of the
///   inter-ocular distance;
/// - mouth: bounding box of mouth landmarks, same padding;
/// - cheeks: from the outer eye corner to the mouth box horizontally, and
///   from below the eyes box to the mouth corner vertically.
///
/// Boxes are clipped to the extent. Throws DegenerateRegionError if any box
/// ends up with zero area.
std::vector<RegionBox> build_default_region_boxes(std::span<const Point2> landmarks,
                                                  ImageExtent extent);

std::vector<Region> build_default_regions(std::span<const Point2> landmarks, ImageExtent extent);

/// A synthetic frontal 49-point landmark template scaled to the extent.
std::vector<Point2> frontal_landmark_template(ImageExtent extent);

}  // namespace covspd
