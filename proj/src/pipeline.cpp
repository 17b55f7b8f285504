#include "covspd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "covspd/covariance.hpp"
#include "covspd/diagnostics.hpp"
#include "covspd/errors.hpp"

namespace covspd {

namespace fs = std::filesystem;
using nlohmann::json;

void PipelineConfig::validate() const {
  if (!(epsilon > 0.0)) throw UsageError("epsilon must be positive");
  if (!(ratio > 0.0)) throw UsageError("map ratio must be positive");
  if (folds < 2) throw UsageError("folds must be at least 2");
  if (resize_h == 0 || resize_w == 0) throw UsageError("resize target must be positive");
  if (regions.empty()) throw UsageError("no regions configured");
  const std::set<std::string> distinct(regions.begin(), regions.end());
  if (distinct.size() != regions.size()) throw UsageError("duplicate region in configuration");
  if (fusion) validate_fusion_config(*fusion);
}

FusionConfig PipelineConfig::effective_fusion() const {
  if (fusion) return *fusion;
  FusionConfig cfg;
  for (const auto& r : regions) cfg.weights[r] = 1.0;
  return cfg;
}

FusionConfig parse_fusion_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  if (name == "oulu" || name == "sfew") {
    const FusionMethod method = colon == std::string::npos
                                    ? FusionMethod::kWeightedSum
                                    : fusion_method_from_string(spec.substr(colon + 1));
    return preset_config(name, method);
  }
  return load_fusion_config(spec);
}

std::vector<std::string> expand_regions(const std::vector<std::string>& names) {
  std::vector<std::string> out;
  for (const auto& n : names) {
    if (n == "all") {
      out.push_back(region_names::kGlobal);
      for (const auto& r : default_region_names()) out.push_back(r);
    } else if (!n.empty()) {
      out.push_back(n);
    }
  }
  return out;
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  try {
    if (j.contains("manifest")) c.manifest = j.at("manifest").get<std::string>();
    if (j.contains("regions")) c.regions = expand_regions(j.at("regions").get<std::vector<std::string>>());
    c.epsilon = j.value("epsilon", c.epsilon);
    c.ratio = j.value("ratio", c.ratio);
    if (j.contains("resize")) {
      const auto r = j.at("resize").get<std::vector<std::uint32_t>>();
      if (r.size() != 2) throw UsageError("config: resize must be [h, w]");
      c.resize_h = r[0];
      c.resize_w = r[1];
    }
    if (j.contains("gamma_grid")) c.gamma_grid = j.at("gamma_grid").get<std::vector<double>>();
    if (j.contains("cost_grid")) c.cost_grid = j.at("cost_grid").get<std::vector<double>>();
    c.folds = j.value("folds", c.folds);
    c.seed = j.value("seed", c.seed);
    if (j.contains("fusion")) {
      const json& f = j.at("fusion");
      c.fusion = f.is_string() ? parse_fusion_spec(f.get<std::string>()) : fusion_from_json(f);
    }
    if (j.contains("unit")) c.unit = eval_unit_from_string(j.at("unit").get<std::string>());
    if (j.contains("pairing")) {
      const auto p = j.at("pairing").get<std::string>();
      if (p == "all_pairs") c.pairing = FramePairing::kAllPairs;
      else if (p == "frame_matched") c.pairing = FramePairing::kFrameMatched;
      else throw UsageError("config: unknown pairing \"" + p + "\"");
    }
    c.strict = j.value("strict", c.strict);
  } catch (const json::exception& e) {
    throw UsageError("malformed pipeline config: " + std::string(e.what()));
  }
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw UsageError("config is not valid JSON: " + std::string(e.what()));
  }
}

namespace {

RegionBox find_region_box(const SampleRecord& record, const std::string& name, ImageExtent extent,
                          std::optional<std::vector<RegionBox>>& built) {
  if (record.regions) {
    for (const auto& b : *record.regions) {
      if (b.name == name) return b;
    }
  }
  if (record.landmarks) {
    if (!built) built = build_default_region_boxes(*record.landmarks, extent);
    for (const auto& b : *built) {
      if (b.name == name) return b;
    }
    throw DataError("region \"" + name + "\" is neither in the manifest nor a default region");
  }
  throw DataError("no landmarks or region boxes for region \"" + name + "\"");
}

}  // namespace

SampleDescriptors compute_sample_descriptors(const FeatureTensor& tensor, const SampleRecord& record,
                                             ImageExtent extent, const PipelineConfig& config) {
  SampleDescriptors out{record.sample_id, record.label, record.subject_id, record.video_id,
                        record.frame_index, {}};
  std::optional<FeatureTensor> resized;
  std::optional<std::vector<RegionBox>> built;
  for (const auto& region : config.regions) {
    std::optional<ObservationMatrix> obs;
    if (region == region_names::kGlobal) {
      obs.emplace(tensor_to_observations(tensor));
    } else {
      const RegionBox box = find_region_box(record, region, extent, built);
      if (!resized) resized = resize_feature_maps(tensor, config.resize_h, config.resize_w);
      const MappedRegion cells =
          map_region(region_from_box(box), config.ratio,
                     {static_cast<int>(config.resize_w), static_cast<int>(config.resize_h)});
      obs.emplace(tensor_to_observations(*resized, cells));
    }
    const SpdMatrix spd = regularize(compute_covariance(*obs), config.epsilon);
    out.by_region.emplace(region, make_log_descriptor(record.sample_id, region, spd));
  }
  return out;
}

namespace {

template <typename TensorSource>
DescriptorStore extract_impl(const DatasetManifest& manifest, const PipelineConfig& config,
                             TensorSource&& tensor_of) {
  config.validate();
  DescriptorStore store;
  store.class_names = manifest.class_names;
  store.regions = config.regions;
  store.epsilon = config.epsilon;
  store.ratio = config.ratio;
  store.resize_h = config.resize_h;
  store.resize_w = config.resize_w;
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    const SampleRecord& rec = manifest.samples[i];
    try {
      store.samples.push_back(
          compute_sample_descriptors(tensor_of(i), rec, manifest.input_extent, config));
    } catch (const Error& e) {
      if (config.strict) throw;
      warn("skipping sample \"" + rec.sample_id + "\": " + e.what());
      store.skipped.push_back(rec.sample_id + ": " + e.what());
    }
  }
  return store;
}

}  // namespace

DescriptorStore extract_descriptors(const DatasetManifest& manifest, const PipelineConfig& config) {
  return extract_impl(manifest, config,
                      [&](std::size_t i) { return load_feature_tensor(manifest.samples[i].tensor_path); });
}

DescriptorStore extract_descriptors(const DatasetManifest& manifest,
                                    const std::vector<FeatureTensor>& tensors,
                                    const PipelineConfig& config) {
  if (tensors.size() != manifest.samples.size()) {
    throw DimensionMismatchError("one tensor per manifest sample required");
  }
  return extract_impl(manifest, config, [&](std::size_t i) -> const FeatureTensor& { return tensors[i]; });
}

void save_descriptor_store(const DescriptorStore& store, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "descriptors", ec);
  if (ec) throw IoError("cannot create store directory " + dir.string() + ": " + ec.message());

  json index;
  index["class_names"] = store.class_names;
  index["regions"] = store.regions;
  index["epsilon"] = store.epsilon;
  index["ratio"] = store.ratio;
  index["resize"] = {store.resize_h, store.resize_w};
  index["skipped"] = store.skipped;
  json samples = json::array();
  for (std::size_t i = 0; i < store.samples.size(); ++i) {
    const auto& s = store.samples[i];
    json files;
    for (const auto& [region, d] : s.by_region) {
      std::ostringstream name;
      name << "descriptors/" << i << '_' << region << ".fmt1";
      const auto dim = static_cast<std::uint32_t>(d.log.dim());
      std::vector<float> data(static_cast<std::size_t>(dim) * dim);
      for (std::uint32_t r = 0; r < dim; ++r) {
        for (std::uint32_t c = 0; c < dim; ++c) {
          data[static_cast<std::size_t>(r) * dim + c] = static_cast<float>(d.log(r, c));
        }
      }
      save_feature_tensor(FeatureTensor(dim, dim, 1, std::move(data)), dir / name.str());
      files[region] = name.str();
    }
    samples.push_back({{"sample_id", s.sample_id},
                       {"label", s.label},
                       {"subject_id", s.subject_id},
                       {"video_id", s.video_id},
                       {"frame_index", s.frame_index},
                       {"files", files}});
  }
  index["samples"] = std::move(samples);
  std::ofstream out(dir / "store.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "store.json").string());
  out << index.dump(1) << '\n';
}

DescriptorStore load_descriptor_store(const fs::path& dir) {
  std::ifstream in(dir / "store.json");
  if (!in) throw IoError("no descriptor store at " + dir.string());
  DescriptorStore store;
  try {
    const json index = json::parse(in);
    store.class_names = index.at("class_names").get<std::vector<std::string>>();
    store.regions = index.at("regions").get<std::vector<std::string>>();
    store.epsilon = index.at("epsilon").get<double>();
    store.ratio = index.at("ratio").get<double>();
    const auto resize = index.at("resize").get<std::vector<std::uint32_t>>();
    if (resize.size() != 2) throw DataError("store: resize must be [h, w]");
    store.resize_h = resize[0];
    store.resize_w = resize[1];
    store.skipped = index.value("skipped", std::vector<std::string>{});
    for (const auto& js : index.at("samples")) {
      SampleDescriptors s;
      s.sample_id = js.at("sample_id").get<std::string>();
      s.label = js.at("label").get<int>();
      s.subject_id = js.at("subject_id").get<std::string>();
      s.video_id = js.at("video_id").get<std::string>();
      s.frame_index = js.at("frame_index").get<int>();
      for (const auto& [region, file] : js.at("files").items()) {
        const FeatureTensor t = load_feature_tensor(dir / file.get<std::string>());
        if (t.maps() != t.height() || t.width() != 1) {
          throw DataError("store: descriptor " + file.get<std::string>() + " is not square");
        }
        Eigen::MatrixXd m(t.maps(), t.maps());
        for (std::uint32_t r = 0; r < t.maps(); ++r) {
          for (std::uint32_t c = 0; c < t.maps(); ++c) m(r, c) = t.at(r, c, 0);
        }
        s.by_region.emplace(region, LogDescriptor{s.sample_id, region, SymMatrix(m)});
      }
      store.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw DataError("malformed store index: " + std::string(e.what()));
  }
  return store;
}

UnitSet make_units(const DescriptorStore& store, EvalUnit unit) {
  UnitSet units;
  units.unit = unit;
  if (unit == EvalUnit::kFrame) {
    for (std::size_t i = 0; i < store.samples.size(); ++i) {
      const auto& s = store.samples[i];
      units.ids.push_back(s.sample_id);
      units.labels.push_back(s.label);
      units.subjects.push_back(s.subject_id);
      units.members.push_back({i});
    }
    return units;
  }
  std::map<std::string, std::vector<std::size_t>> videos;
  for (std::size_t i = 0; i < store.samples.size(); ++i) {
    videos[store.samples[i].video_id].push_back(i);
  }
  for (auto& [video, members] : videos) {
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return store.samples[a].frame_index < store.samples[b].frame_index;
    });
    const auto& first = store.samples[members.front()];
    for (std::size_t m : members) {
      if (store.samples[m].label != first.label || store.samples[m].subject_id != first.subject_id) {
        throw DataError("frames of video \"" + video + "\" disagree on label or subject");
      }
    }
    units.ids.push_back(video);
    units.labels.push_back(first.label);
    units.subjects.push_back(first.subject_id);
    units.members.push_back(members);
  }
  return units;
}

namespace {

std::vector<std::vector<LogDescriptor>> gather_frames(const DescriptorStore& store,
                                                      const UnitSet& units,
                                                      const std::string& region) {
  std::vector<std::vector<LogDescriptor>> out;
  out.reserve(units.members.size());
  for (const auto& members : units.members) {
    std::vector<LogDescriptor> frames;
    for (std::size_t m : members) {
      const auto& by_region = store.samples[m].by_region;
      auto it = by_region.find(region);
      if (it == by_region.end()) {
        throw DataError("sample \"" + store.samples[m].sample_id + "\" has no \"" + region +
                        "\" descriptor");
      }
      frames.push_back(it->second);
    }
    out.push_back(std::move(frames));
  }
  return out;
}

double unit_distance_squared(std::span<const LogDescriptor> a, std::span<const LogDescriptor> b,
                             EvalUnit unit, FramePairing pairing) {
  if (unit == EvalUnit::kFrame) return squared_log_euclidean_distance(a.front().log, b.front().log);
  const double d = video_distance(a, b, pairing);
  return d * d;
}

}  // namespace

Eigen::MatrixXd unit_squared_distances(const DescriptorStore& store_a, const UnitSet& a,
                                       const DescriptorStore& store_b, const UnitSet& b,
                                       const std::string& region, FramePairing pairing) {
  if (a.unit != b.unit) throw UsageError("unit sets differ in granularity");
  const auto fa = gather_frames(store_a, a, region);
  const auto fb = gather_frames(store_b, b, region);
  Eigen::MatrixXd d2(static_cast<Eigen::Index>(fa.size()), static_cast<Eigen::Index>(fb.size()));
  for (std::size_t i = 0; i < fa.size(); ++i) {
    for (std::size_t j = 0; j < fb.size(); ++j) {
      d2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          unit_distance_squared(fa[i], fb[j], a.unit, pairing);
    }
  }
  return d2;
}

Eigen::MatrixXd unit_squared_distances(const DescriptorStore& store, const UnitSet& units,
                                       const std::string& region, FramePairing pairing) {
  const auto frames = gather_frames(store, units, region);
  const auto n = static_cast<Eigen::Index>(frames.size());
  Eigen::MatrixXd d2(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // A video's all-pairs self distance is the mean spread of its frames.
    d2(i, i) = unit_distance_squared(frames[i], frames[i], units.unit, pairing);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = unit_distance_squared(frames[i], frames[j], units.unit, pairing);
      d2(i, j) = v;
      d2(j, i) = v;
    }
  }
  return d2;
}

}  // namespace covspd
