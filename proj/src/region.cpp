#include "covspd/region.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "covspd/errors.hpp"

namespace covspd {
namespace {

// 49-point layout.
constexpr int kBrowFirst = 0, kBrowLast = 9;
constexpr int kEyeFirst = 19, kEyeLast = 30;
constexpr int kLeftEyeFirst = 19, kLeftEyeLast = 24;
constexpr int kRightEyeFirst = 25, kRightEyeLast = 30;
constexpr int kLeftEyeOuter = 19, kRightEyeOuter = 28;
constexpr int kMouthFirst = 31, kMouthLast = 48;
constexpr int kMouthLeftCorner = 31, kMouthRightCorner = 37;
constexpr std::size_t kLandmarkCount = 49;
constexpr double kPadFraction = 0.1;

struct Box {
  double x0, y0, x1, y1;
  bool degenerate() const { return !(x1 > x0) || !(y1 > y0); }
};

Box bounding_box(std::span<const Point2> pts, int first, int last) {
  Box b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
        -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (int i = first; i <= last; ++i) {
    b.x0 = std::min(b.x0, pts[i].x);
    b.y0 = std::min(b.y0, pts[i].y);
    b.x1 = std::max(b.x1, pts[i].x);
    b.y1 = std::max(b.y1, pts[i].y);
  }
  return b;
}

Point2 centroid(std::span<const Point2> pts, int first, int last) {
  Point2 c;
  for (int i = first; i <= last; ++i) {
    c.x += pts[i].x;
    c.y += pts[i].y;
  }
  const double n = last - first + 1;
  return {c.x / n, c.y / n};
}

Box pad(Box b, double amount) { return {b.x0 - amount, b.y0 - amount, b.x1 + amount, b.y1 + amount}; }

RegionBox discretize(const std::string& name, const Box& b, ImageExtent extent) {
  if (b.degenerate()) throw DegenerateRegionError("region \"" + name + "\" has zero area");
  RegionBox out{name, static_cast<int>(std::floor(b.x0)), static_cast<int>(std::floor(b.y0)),
                static_cast<int>(std::ceil(b.x1)), static_cast<int>(std::ceil(b.y1))};
  out.x0 = std::clamp(out.x0, 0, extent.width);
  out.x1 = std::clamp(out.x1, 0, extent.width);
  out.y0 = std::clamp(out.y0, 0, extent.height);
  out.y1 = std::clamp(out.y1, 0, extent.height);
  if (out.x1 <= out.x0 || out.y1 <= out.y0) {
    throw DegenerateRegionError("region \"" + name + "\" falls outside the image");
  }
  return out;
}

}  // namespace

std::vector<std::string> default_region_names() {
  return {region_names::kEyes, region_names::kMouth, region_names::kCheekLeft,
          region_names::kCheekRight};
}

Cell map_point(Point2 p, double s, MapDims map_dims) {
  if (!(s > 0.0) || !std::isfinite(s)) throw UsageError("map ratio must be positive");
  if (map_dims.width <= 0 || map_dims.height <= 0) throw UsageError("map dims must be positive");
  if (!(p.x >= 0.0) || !(p.y >= 0.0)) throw UsageError("point outside input extent");
  auto round_half_up = [](double v) { return static_cast<long long>(std::floor(v + 0.5)); };
  const long long col = round_half_up(s * p.x);
  const long long row = round_half_up(s * p.y);
  return {static_cast<int>(std::min<long long>(col, map_dims.width - 1)),
          static_cast<int>(std::min<long long>(row, map_dims.height - 1))};
}

MappedRegion map_region(const Region& region, double s, MapDims map_dims) {
  if (region.pixels.empty()) throw DegenerateRegionError("region \"" + region.name + "\" is empty");
  MappedRegion out{region.name, {}, s};
  out.cells.reserve(region.pixels.size());
  for (const auto& px : region.pixels) {
    out.cells.push_back(map_point({static_cast<double>(px.x), static_cast<double>(px.y)}, s, map_dims));
  }
  std::sort(out.cells.begin(), out.cells.end());
  out.cells.erase(std::unique(out.cells.begin(), out.cells.end()), out.cells.end());
  return out;
}

Region region_from_box(const RegionBox& box) {
  if (box.x1 <= box.x0 || box.y1 <= box.y0) {
    throw DegenerateRegionError("region \"" + box.name + "\" is empty");
  }
  Region r{box.name, {}};
  r.pixels.reserve(static_cast<std::size_t>(box.x1 - box.x0) * (box.y1 - box.y0));
  for (int y = box.y0; y < box.y1; ++y) {
    for (int x = box.x0; x < box.x1; ++x) r.pixels.push_back({x, y});
  }
  return r;
}

std::vector<RegionBox> build_default_region_boxes(std::span<const Point2> landmarks,
                                                  ImageExtent extent) {
  if (landmarks.size() != kLandmarkCount) {
    throw DataError("expected 49 landmarks, got " + std::to_string(landmarks.size()));
  }
  for (const auto& p : landmarks) {
    if (!extent.contains(p)) throw DataError("landmark outside input extent");
  }

  const Point2 left_eye = centroid(landmarks, kLeftEyeFirst, kLeftEyeLast);
  const Point2 right_eye = centroid(landmarks, kRightEyeFirst, kRightEyeLast);
  const double iod = std::hypot(right_eye.x - left_eye.x, right_eye.y - left_eye.y);
  if (!(iod > 0.0)) throw DegenerateRegionError("inter-ocular distance is zero");
  const double padding = kPadFraction * iod;

  Box eyes = bounding_box(landmarks, kBrowFirst, kBrowLast);
  const Box eye_only = bounding_box(landmarks, kEyeFirst, kEyeLast);
  eyes = pad({std::min(eyes.x0, eye_only.x0), std::min(eyes.y0, eye_only.y0),
              std::max(eyes.x1, eye_only.x1), std::max(eyes.y1, eye_only.y1)},
             padding);
  const Box mouth = pad(bounding_box(landmarks, kMouthFirst, kMouthLast), padding);

  const RegionBox eyes_box = discretize(region_names::kEyes, eyes, extent);
  const RegionBox mouth_box = discretize(region_names::kMouth, mouth, extent);

  const Point2 lo = landmarks[kLeftEyeOuter];
  const Point2 ro = landmarks[kRightEyeOuter];
  const Point2 lm = landmarks[kMouthLeftCorner];
  const Point2 rm = landmarks[kMouthRightCorner];
  const Box cheek_left{lo.x, eyes.y1, mouth.x0, lm.y};
  const Box cheek_right{mouth.x1, eyes.y1, ro.x, rm.y};

  return {eyes_box, mouth_box, discretize(region_names::kCheekLeft, cheek_left, extent),
          discretize(region_names::kCheekRight, cheek_right, extent)};
}

std::vector<Region> build_default_regions(std::span<const Point2> landmarks, ImageExtent extent) {
  std::vector<Region> out;
  for (const auto& box : build_default_region_boxes(landmarks, extent)) {
    out.push_back(region_from_box(box));
  }
  return out;
}

std::vector<Point2> frontal_landmark_template(ImageExtent extent) {
  // Normalized (x, y) in [0, 1].
  static constexpr std::array<std::array<double, 2>, kLandmarkCount> kTemplate = {{
      // brows
      {0.22, 0.34}, {0.27, 0.31}, {0.33, 0.30}, {0.39, 0.31}, {0.44, 0.33},
      {0.56, 0.33}, {0.61, 0.31}, {0.67, 0.30}, {0.73, 0.31}, {0.78, 0.34},
      // nose bridge and base
      {0.50, 0.40}, {0.50, 0.46}, {0.50, 0.52}, {0.50, 0.58},
      {0.42, 0.63}, {0.46, 0.64}, {0.50, 0.65}, {0.54, 0.64}, {0.58, 0.63},
      // image-left eye, outer corner first
      {0.27, 0.42}, {0.31, 0.40}, {0.36, 0.40}, {0.40, 0.42}, {0.36, 0.44}, {0.31, 0.44},
      // image-right eye, inner corner first
      {0.60, 0.42}, {0.64, 0.40}, {0.69, 0.40}, {0.73, 0.42}, {0.69, 0.44}, {0.64, 0.44},
      // outer lip
      {0.36, 0.76}, {0.40, 0.73}, {0.45, 0.72}, {0.50, 0.725}, {0.55, 0.72}, {0.60, 0.73},
      {0.64, 0.76}, {0.60, 0.80}, {0.55, 0.82}, {0.50, 0.825}, {0.45, 0.82}, {0.40, 0.80},
      // inner lip
      {0.40, 0.76}, {0.50, 0.75}, {0.60, 0.76}, {0.55, 0.78}, {0.50, 0.785}, {0.45, 0.78},
  }};
  std::vector<Point2> out;
  out.reserve(kTemplate.size());
  for (const auto& [x, y] : kTemplate) {
    out.push_back({x * extent.width, y * extent.height});
  }
  return out;
}

}  // namespace covspd
