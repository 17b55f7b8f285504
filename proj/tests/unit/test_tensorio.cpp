#include <doctest.h>

#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

#include "covspd/errors.hpp"
#include "covspd/tensorio.hpp"
#include "support.hpp"

using namespace covspd;
using covspd::testing::Rng;
using covspd::testing::TempDir;

namespace {

void write_raw(const std::filesystem::path& path, const char magic[4], std::uint32_t m, std::uint32_t h,
               std::uint32_t w, const std::vector<float>& payload) {
  std::ofstream out(path, std::ios::binary);
  out.write(magic, 4);
  for (std::uint32_t v : {m, h, w}) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  }
  for (float f : payload) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                static_cast<unsigned char>(bits >> 16),
                                static_cast<unsigned char>(bits >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  }
}

TensorFormatError::Kind load_error_kind(const std::filesystem::path& path) {
  try {
    load_feature_tensor(path);
  } catch (const TensorFormatError& e) {
    return e.kind();
  }
  FAIL("expected a TensorFormatError");
  return TensorFormatError::Kind::kBadMagic;
}

DatasetManifest small_manifest() {
  DatasetManifest m;
  m.class_names = {"happy", "sad"};
  m.input_extent = {224, 224};
  for (int i = 0; i < 3; ++i) {
    SampleRecord r;
    r.sample_id = "s" + std::to_string(i);
    r.tensor_path = "t" + std::to_string(i) + ".fmt1";
    r.label = i % 2;
    r.subject_id = "subj" + std::to_string(i);
    r.video_id = "v" + std::to_string(i);
    m.samples.push_back(r);
  }
  return m;
}

}  // namespace

TEST_CASE("smallest FMT1 file loads") {
  TempDir dir("tio");
  write_raw(dir / "a.fmt1", "FMT1", 1, 1, 1, {3.5f});
  const FeatureTensor t = load_feature_tensor(dir / "a.fmt1");
  CHECK(t == FeatureTensor(1, 1, 1, {3.5f}));
}

TEST_CASE("512x7x7 tensor loads with its dims") {
  TempDir dir("tio");
  Rng rng(1);
  std::vector<float> data(512 * 7 * 7);
  for (float& v : data) v = static_cast<float>(rng.normal());
  write_raw(dir / "a.fmt1", "FMT1", 512, 7, 7, data);
  const FeatureTensor t = load_feature_tensor(dir / "a.fmt1");
  CHECK(t.maps() == 512);
  CHECK(t.height() == 7);
  CHECK(t.width() == 7);
  CHECK(t.size() == 25088);
  CHECK(t.at(511, 6, 6) == data.back());
  CHECK(t.at(3, 2, 5) == data[(3 * 7 + 2) * 7 + 5]);
}

TEST_CASE("malformed FMT1 files are rejected") {
  TempDir dir("tio");
  write_raw(dir / "short.fmt1", "FMT1", 2, 3, 4, std::vector<float>(23, 1.0f));
  CHECK(load_error_kind(dir / "short.fmt1") == TensorFormatError::Kind::kTruncated);

  write_raw(dir / "long.fmt1", "FMT1", 1, 1, 2, std::vector<float>(3, 1.0f));
  CHECK(load_error_kind(dir / "long.fmt1") == TensorFormatError::Kind::kTrailingBytes);

  write_raw(dir / "magic.fmt1", "FMT2", 1, 1, 1, {1.0f});
  CHECK(load_error_kind(dir / "magic.fmt1") == TensorFormatError::Kind::kBadMagic);

  write_raw(dir / "zero.fmt1", "FMT1", 0, 1, 1, {});
  CHECK(load_error_kind(dir / "zero.fmt1") == TensorFormatError::Kind::kBadDims);

  write_raw(dir / "nan.fmt1", "FMT1", 1, 1, 2, {1.0f, std::numeric_limits<float>::quiet_NaN()});
  CHECK(load_error_kind(dir / "nan.fmt1") == TensorFormatError::Kind::kNonFinite);

  CHECK_THROWS_AS(load_feature_tensor(dir / "missing.fmt1"), IoError);
}

TEST_CASE("save then load round trips and overwrites") {
  TempDir dir("tio");
  std::vector<float> data(8);
  std::iota(data.begin(), data.end(), 0.0f);
  const FeatureTensor t(2, 2, 2, data);
  save_feature_tensor(t, dir / "t.fmt1");
  CHECK(load_feature_tensor(dir / "t.fmt1") == t);

  const FeatureTensor u(1, 1, 3, {-1.0f, 0.25f, 1e30f});
  save_feature_tensor(u, dir / "t.fmt1");
  CHECK(load_feature_tensor(dir / "t.fmt1") == u);

  CHECK_THROWS_AS(save_feature_tensor(t, dir / "no_such_dir" / "t.fmt1"), IoError);
}

TEST_CASE("round trip property on random tensors") {
  TempDir dir("tio");
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = static_cast<std::uint32_t>(rng.integer(1, 6));
    const auto h = static_cast<std::uint32_t>(rng.integer(1, 9));
    const auto w = static_cast<std::uint32_t>(rng.integer(1, 9));
    std::vector<float> data(m * h * w);
    for (float& v : data) v = static_cast<float>(rng.normal() * 1e3);
    const FeatureTensor t(m, h, w, data);
    save_feature_tensor(t, dir / "r.fmt1");
    CHECK(load_feature_tensor(dir / "r.fmt1") == t);
  }
}

TEST_CASE("file bytes are little-endian with the documented header") {
  TempDir dir("tio");
  save_feature_tensor(FeatureTensor(1, 1, 1, {1.0f}), dir / "b.fmt1");
  std::ifstream in(dir / "b.fmt1", std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  const std::vector<unsigned char> expected = {'F', 'M', 'T', '1', 1, 0, 0, 0, 1, 0, 0, 0,
                                               1,   0,   0,   0,   0, 0, 0x80, 0x3f};
  CHECK(bytes == expected);
}

TEST_CASE("constructor enforces tensor invariants") {
  CHECK_THROWS_AS(FeatureTensor(1, 2, 2, {1.0f, 2.0f, 3.0f}), UsageError);
  CHECK_THROWS_AS(FeatureTensor(0, 1, 1, {}), UsageError);
  CHECK_THROWS_AS(FeatureTensor(1, 1, 1, {std::numeric_limits<float>::infinity()}), TensorFormatError);
}

TEST_CASE("resize keeps constants and identity") {
  const FeatureTensor constant(1, 7, 7, std::vector<float>(49, 2.0f));
  const FeatureTensor big = resize_feature_maps(constant, 14, 14);
  REQUIRE(big.height() == 14);
  for (float v : big.data()) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));

  Rng rng(3);
  std::vector<float> data(3 * 49);
  for (float& v : data) v = static_cast<float>(rng.normal());
  const FeatureTensor t(3, 7, 7, data);
  CHECK(resize_feature_maps(t, 7, 7) == t);
}

TEST_CASE("resize 2x2 to 4x4 matches a scalar bilinear oracle") {
  const FeatureTensor t(1, 2, 2, {0.0f, 1.0f, 2.0f, 3.0f});
  const FeatureTensor r = resize_feature_maps(t, 4, 4);
  const std::vector<std::vector<double>> img = {{0, 1}, {2, 3}};
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      const double expected = covspd::testing::bilinear_oracle(img, 4, 4, y, x);
      CHECK(r.at(0, y, x) == doctest::Approx(expected).epsilon(1e-6));
    }
  }
  CHECK(r.at(0, 0, 0) == 0.0f);
  CHECK(r.at(0, 3, 3) == 3.0f);
}

TEST_CASE("resize is per-map independent") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const std::uint32_t m = 4, h = 5, w = 6;
    std::vector<float> data(m * h * w);
    for (float& v : data) v = static_cast<float>(rng.normal());
    const FeatureTensor t(m, h, w, data);
    const std::vector<std::uint32_t> perm = {2, 0, 3, 1};
    std::vector<float> permuted;
    for (auto p : perm) permuted.insert(permuted.end(), t.map(p).begin(), t.map(p).end());
    const FeatureTensor tp(m, h, w, permuted);
    const FeatureTensor a = resize_feature_maps(t, 11, 9);
    const FeatureTensor b = resize_feature_maps(tp, 11, 9);
    for (std::uint32_t i = 0; i < m; ++i) {
      const auto ma = a.map(perm[i]);
      const auto mb = b.map(i);
      CHECK(std::equal(ma.begin(), ma.end(), mb.begin()));
    }
  }
}

TEST_CASE("manifest loads, validates and round trips") {
  TempDir dir("tio");
  const DatasetManifest m = small_manifest();
  save_dataset_manifest(m, dir / "manifest.json");
  const DatasetManifest back = load_dataset_manifest(dir / "manifest.json");
  REQUIRE(back.samples.size() == 3);
  CHECK(back.class_names == m.class_names);
  CHECK(back.input_extent == m.input_extent);
  CHECK(back.samples[1].label == 1);
  CHECK(back.samples[2].tensor_path == dir.path() / "t2.fmt1");
  CHECK_FALSE(back.samples[0].landmarks.has_value());
}

TEST_CASE("manifest rejects invalid records") {
  DatasetManifest m = small_manifest();
  m.samples[0].label = 5;
  CHECK_THROWS_AS(validate_manifest(m), ManifestError);

  m = small_manifest();
  m.samples[1].video_id = "v0";
  CHECK_THROWS_AS(validate_manifest(m), ManifestError);

  m = small_manifest();
  m.samples[0].landmarks = std::vector<Point2>{{224.0, 10.0}};
  CHECK_THROWS_AS(validate_manifest(m), ManifestError);

  m = small_manifest();
  m.samples[0].regions = std::vector<RegionBox>{{"eyes", 10, 10, 10, 20}};
  CHECK_THROWS_AS(validate_manifest(m), ManifestError);

  m = small_manifest();
  m.samples[0].regions = std::vector<RegionBox>{{"eyes", 10, 10, 225, 20}};
  CHECK_THROWS_AS(validate_manifest(m), ManifestError);

  TempDir dir("tio");
  {
    std::ofstream out(dir / "bad.json");
    out << "{\"class_names\": [\"a\"], \"input_extent\": [10, 10], \"samples\": [{\"sample_id\": \"x\"}]}";
  }
  CHECK_THROWS_AS(load_dataset_manifest(dir / "bad.json"), ManifestError);
  {
    std::ofstream out(dir / "garbage.json");
    out << "{not json";
  }
  CHECK_THROWS_AS(load_dataset_manifest(dir / "garbage.json"), ManifestError);
}

TEST_CASE("Oulu-sized manifest: 480 videos of 3 peak frames") {
  TempDir dir("tio");
  nlohmann::json doc;
  doc["class_names"] = {"anger", "disgust", "fear", "happiness", "sadness", "surprise"};
  doc["input_extent"] = {224, 224};
  nlohmann::json samples = nlohmann::json::array();
  for (int v = 0; v < 480; ++v) {
    for (int f = 0; f < 3; ++f) {
      samples.push_back({{"sample_id", "v" + std::to_string(v) + "_" + std::to_string(f)},
                         {"tensor_path", "x.fmt1"},
                         {"label", v % 6},
                         {"subject_id", "p" + std::to_string(v / 6)},
                         {"video_id", "v" + std::to_string(v)},
                         {"frame_index", f}});
    }
  }
  doc["samples"] = samples;
  std::ofstream(dir / "oulu.json") << doc.dump();
  const DatasetManifest m = load_dataset_manifest(dir / "oulu.json");
  CHECK(m.samples.size() == 1440);
  std::map<std::string, std::set<int>> frames;
  for (const auto& s : m.samples) frames[s.video_id].insert(s.frame_index);
  CHECK(frames.size() == 480);
  for (const auto& [video, idx] : frames) CHECK(idx.size() == 3);
}
