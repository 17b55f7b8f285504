#include "covspd/tensorio.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <utility>

#include <json.hpp>

#include "covspd/errors.hpp"

namespace covspd {
namespace {

constexpr std::array<char, 4> kMagic = {'F', 'M', 'T', '1'};
constexpr std::size_t kHeaderBytes = 16;

std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u32_le(std::uint32_t v, unsigned char* p) {
  p[0] = static_cast<unsigned char>(v & 0xffu);
  p[1] = static_cast<unsigned char>((v >> 8) & 0xffu);
  p[2] = static_cast<unsigned char>((v >> 16) & 0xffu);
  p[3] = static_cast<unsigned char>((v >> 24) & 0xffu);
}

bool all_finite(std::span<const float> values) {
  for (float v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

FeatureTensor::FeatureTensor(std::uint32_t maps, std::uint32_t height, std::uint32_t width,
                             std::vector<float> data)
    : maps_(maps), height_(height), width_(width), data_(std::move(data)) {
  if (maps == 0 || height == 0 || width == 0) {
    throw UsageError("feature tensor dims must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(maps) * height * width) {
    throw UsageError("feature tensor data length does not equal m*h*w");
  }
  if (!all_finite(data_)) {
    throw TensorFormatError(TensorFormatError::Kind::kNonFinite,
                            "feature tensor contains non-finite values");
  }
}

FeatureTensor load_feature_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open tensor file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = " in " + path.string();

  if (bytes.size() < 4 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin(),
                                      [](char a, unsigned char b) { return a == static_cast<char>(b); })) {
    throw TensorFormatError(TensorFormatError::Kind::kBadMagic, "missing FMT1 magic" + where);
  }
  if (bytes.size() < kHeaderBytes) {
    throw TensorFormatError(TensorFormatError::Kind::kBadDims, "truncated FMT1 header" + where);
  }
  const std::uint32_t m = read_u32_le(bytes.data() + 4);
  const std::uint32_t h = read_u32_le(bytes.data() + 8);
  const std::uint32_t w = read_u32_le(bytes.data() + 12);
  if (m == 0 || h == 0 || w == 0) {
    throw TensorFormatError(TensorFormatError::Kind::kBadDims, "zero tensor dimension" + where);
  }
  const std::uint64_t count = static_cast<std::uint64_t>(m) * h * w;
  if (count > (std::numeric_limits<std::uint64_t>::max() - kHeaderBytes) / 4) {
    throw TensorFormatError(TensorFormatError::Kind::kBadDims, "tensor dims overflow" + where);
  }
  const std::uint64_t expected = kHeaderBytes + count * 4;
  if (bytes.size() < expected) {
    throw TensorFormatError(TensorFormatError::Kind::kTruncated,
                            "payload holds " + std::to_string((bytes.size() - kHeaderBytes) / 4) +
                                " values, expected " + std::to_string(count) + where);
  }
  if (bytes.size() > expected) {
    throw TensorFormatError(TensorFormatError::Kind::kTrailingBytes,
                            "trailing bytes after payload" + where);
  }

  std::vector<float> data(count);
  const unsigned char* p = bytes.data() + kHeaderBytes;
  for (std::size_t i = 0; i < count; ++i, p += 4) {
    data[i] = std::bit_cast<float>(read_u32_le(p));
  }
  if (!all_finite(data)) {
    throw TensorFormatError(TensorFormatError::Kind::kNonFinite, "non-finite value" + where);
  }
  return FeatureTensor(m, h, w, std::move(data));
}

void save_feature_tensor(const FeatureTensor& tensor, const std::filesystem::path& path) {
  std::vector<unsigned char> bytes(kHeaderBytes + tensor.size() * 4);
  std::copy(kMagic.begin(), kMagic.end(), bytes.begin());
  write_u32_le(tensor.maps(), bytes.data() + 4);
  write_u32_le(tensor.height(), bytes.data() + 8);
  write_u32_le(tensor.width(), bytes.data() + 12);
  unsigned char* p = bytes.data() + kHeaderBytes;
  for (float v : tensor.data()) {
    write_u32_le(std::bit_cast<std::uint32_t>(v), p);
    p += 4;
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

FeatureTensor resize_feature_maps(const FeatureTensor& tensor, std::uint32_t out_h,
                                  std::uint32_t out_w) {
  if (out_h == 0 || out_w == 0) throw UsageError("resize target must be at least 1x1");
  const std::uint32_t in_h = tensor.height();
  const std::uint32_t in_w = tensor.width();

  // Corner-aligned: output corners sample input corners exactly.
  auto source_coord = [](std::uint32_t i, std::uint32_t in, std::uint32_t out) {
    if (out == 1 || in == 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
  };

  std::vector<float> out(static_cast<std::size_t>(tensor.maps()) * out_h * out_w);
  std::size_t k = 0;
  for (std::uint32_t m = 0; m < tensor.maps(); ++m) {
    for (std::uint32_t r = 0; r < out_h; ++r) {
      const double sy = source_coord(r, in_h, out_h);
      const auto y0 = std::min(static_cast<std::uint32_t>(sy), in_h - 1);
      const std::uint32_t y1 = std::min(y0 + 1, in_h - 1);
      const double fy = sy - y0;
      for (std::uint32_t c = 0; c < out_w; ++c) {
        const double sx = source_coord(c, in_w, out_w);
        const auto x0 = std::min(static_cast<std::uint32_t>(sx), in_w - 1);
        const std::uint32_t x1 = std::min(x0 + 1, in_w - 1);
        const double fx = sx - x0;
        const double top = (1.0 - fx) * tensor.at(m, y0, x0) + fx * tensor.at(m, y0, x1);
        const double bottom = (1.0 - fx) * tensor.at(m, y1, x0) + fx * tensor.at(m, y1, x1);
        out[k++] = static_cast<float>((1.0 - fy) * top + fy * bottom);
      }
    }
  }
  return FeatureTensor(tensor.maps(), out_h, out_w, std::move(out));
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

using nlohmann::json;

template <typename T>
T require(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ManifestError(ctx + ": missing key \"" + key + "\"");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ManifestError(ctx + ": bad value for \"" + key + "\": " + e.what());
  }
}

}  // namespace

void validate_manifest(const DatasetManifest& manifest) {
  const auto& extent = manifest.input_extent;
  if (extent.width <= 0 || extent.height <= 0) {
    throw ManifestError("input_extent must be positive");
  }
  if (manifest.class_names.empty()) throw ManifestError("class_names is empty");
  std::set<std::pair<std::string, int>> frames;
  std::set<std::string> ids;
  for (const auto& s : manifest.samples) {
    const std::string ctx = "sample \"" + s.sample_id + "\"";
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= manifest.class_names.size()) {
      throw ManifestError(ctx + ": unknown label " + std::to_string(s.label));
    }
    if (!ids.insert(s.sample_id).second) throw ManifestError(ctx + ": duplicate sample_id");
    if (!frames.emplace(s.video_id, s.frame_index).second) {
      throw ManifestError(ctx + ": duplicate (video_id, frame_index)");
    }
    if (s.landmarks) {
      for (const auto& p : *s.landmarks) {
        if (!extent.contains(p)) throw ManifestError(ctx + ": landmark outside input extent");
      }
    }
    if (s.regions) {
      for (const auto& b : *s.regions) {
        if (b.x0 < 0 || b.y0 < 0 || b.x1 > extent.width || b.y1 > extent.height) {
          throw ManifestError(ctx + ": region \"" + b.name + "\" outside input extent");
        }
        if (b.x1 <= b.x0 || b.y1 <= b.y0) {
          throw ManifestError(ctx + ": region \"" + b.name + "\" is empty");
        }
      }
    }
  }
}

DatasetManifest load_dataset_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ManifestError("manifest is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.is_object()) throw ManifestError("manifest must be a JSON object");

  DatasetManifest manifest;
  manifest.class_names = require<std::vector<std::string>>(doc, "class_names", "manifest");
  const auto extent = require<std::vector<int>>(doc, "input_extent", "manifest");
  if (extent.size() != 2) throw ManifestError("input_extent must be [width, height]");
  manifest.input_extent = {extent[0], extent[1]};

  const auto base = path.parent_path();
  const json& samples = doc.contains("samples") ? doc.at("samples") : json();
  if (!samples.is_array()) throw ManifestError("manifest: \"samples\" must be an array");
  manifest.samples.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const json& js = samples[i];
    const std::string ctx = "samples[" + std::to_string(i) + "]";
    SampleRecord rec;
    rec.sample_id = require<std::string>(js, "sample_id", ctx);
    const std::filesystem::path tensor = require<std::string>(js, "tensor_path", ctx);
    rec.tensor_path = tensor.is_absolute() ? tensor : base / tensor;
    rec.label = require<int>(js, "label", ctx);
    rec.subject_id = require<std::string>(js, "subject_id", ctx);
    rec.video_id = require<std::string>(js, "video_id", ctx);
    rec.frame_index = require<int>(js, "frame_index", ctx);
    if (js.contains("landmarks") && !js.at("landmarks").is_null()) {
      const auto pts = require<std::vector<std::array<double, 2>>>(js, "landmarks", ctx);
      std::vector<Point2> landmarks;
      landmarks.reserve(pts.size());
      for (const auto& p : pts) landmarks.push_back({p[0], p[1]});
      rec.landmarks = std::move(landmarks);
    }
    if (js.contains("regions") && !js.at("regions").is_null()) {
      const json& jr = js.at("regions");
      if (!jr.is_array()) throw ManifestError(ctx + ": \"regions\" must be an array");
      std::vector<RegionBox> boxes;
      for (const json& b : jr) {
        boxes.push_back({require<std::string>(b, "name", ctx), require<int>(b, "x0", ctx),
                         require<int>(b, "y0", ctx), require<int>(b, "x1", ctx),
                         require<int>(b, "y1", ctx)});
      }
      rec.regions = std::move(boxes);
    }
    manifest.samples.push_back(std::move(rec));
  }
  validate_manifest(manifest);
  return manifest;
}

void save_dataset_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  json doc;
  doc["class_names"] = manifest.class_names;
  doc["input_extent"] = {manifest.input_extent.width, manifest.input_extent.height};
  json samples = json::array();
  const auto base = path.parent_path();
  for (const auto& s : manifest.samples) {
    json js;
    js["sample_id"] = s.sample_id;
    std::error_code ec;
    auto rel = std::filesystem::relative(s.tensor_path, base.empty() ? "." : base, ec);
    js["tensor_path"] = (ec || rel.empty()) ? s.tensor_path.generic_string() : rel.generic_string();
    js["label"] = s.label;
    js["subject_id"] = s.subject_id;
    js["video_id"] = s.video_id;
    js["frame_index"] = s.frame_index;
    if (s.landmarks) {
      json pts = json::array();
      for (const auto& p : *s.landmarks) pts.push_back({p.x, p.y});
      js["landmarks"] = std::move(pts);
    }
    if (s.regions) {
      json boxes = json::array();
      for (const auto& b : *s.regions) {
        boxes.push_back({{"name", b.name}, {"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1}});
      }
      js["regions"] = std::move(boxes);
    }
    samples.push_back(std::move(js));
  }
  doc["samples"] = std::move(samples);

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace covspd
