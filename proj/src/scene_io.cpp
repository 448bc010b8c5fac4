#include "owl3d/scene_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace owl3d {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
void byteswap_inplace(std::vector<T>& values) {
  static_assert(sizeof(T) == 4);
  for (auto& v : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
    std::memcpy(&v, &bits, 4);
  }
}

template <typename T>
std::vector<T> read_raw(const fs::path& path, const std::string& field,
                        std::optional<std::size_t> expected_count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  require(static_cast<bool>(in), "missing file for `" + field + "`: " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  require(bytes % sizeof(T) == 0, "file for `" + field + "` has " + std::to_string(bytes) +
                                      " bytes, not a multiple of " + std::to_string(sizeof(T)));
  const std::size_t count = bytes / sizeof(T);
  if (expected_count) {
    require(count == *expected_count,
            "length mismatch for `" + field + "`: manifest declares " +
                std::to_string(*expected_count) + " values, " + path.filename().string() +
                " holds " + std::to_string(count));
  }
  std::vector<T> values(count);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  require(static_cast<bool>(in), "failed reading " + path.string());
  if constexpr (std::endian::native == std::endian::big) byteswap_inplace(values);
  return values;
}

template <typename T>
void write_raw(const fs::path& path, std::span<const T> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if constexpr (std::endian::native == std::endian::big) {
    std::vector<T> copy(values.begin(), values.end());
    byteswap_inplace(copy);
    out.write(reinterpret_cast<const char*>(copy.data()),
              static_cast<std::streamsize>(copy.size() * sizeof(T)));
  } else {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(T)));
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

const json& field(const json& j, const std::string& key, const std::string& where) {
  require(j.is_object(), "manifest: `" + where + "` must be an object");
  auto it = j.find(key);
  require(it != j.end(), "manifest: missing field `" + where + "." + key + "`");
  return *it;
}

template <typename T>
T field_as(const json& j, const std::string& key, const std::string& where) {
  const json& v = field(j, key, where);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ValidationError("manifest: malformed field `" + where + "." + key + "`");
  }
}

json array_entry(const std::string& file, const char* dtype, std::vector<std::size_t> shape) {
  return json{{"file", file}, {"dtype", dtype}, {"shape", shape}};
}

std::size_t shape_count(const json& entry, const std::string& name) {
  std::size_t count = 1;
  for (const auto& s : field(entry, "shape", "arrays." + name)) {
    require(s.is_number_unsigned(), "manifest: malformed `arrays." + name + ".shape`");
    count *= s.get<std::size_t>();
  }
  return count;
}

struct ArrayRef {
  fs::path path;
  std::size_t count;
};

std::optional<ArrayRef> find_array(const json& arrays, const fs::path& dir, const std::string& name,
                                   const char* dtype) {
  auto it = arrays.find(name);
  if (it == arrays.end()) return std::nullopt;
  const auto d = field_as<std::string>(*it, "dtype", "arrays." + name);
  require(d == dtype, "manifest: `arrays." + name + ".dtype` must be " + dtype + ", got " + d);
  return ArrayRef{dir / field_as<std::string>(*it, "file", "arrays." + name),
                  shape_count(*it, name)};
}

std::vector<std::uint32_t> to_u32_mask(std::span<const std::uint8_t> mask) {
  return {mask.begin(), mask.end()};
}

}  // namespace

std::vector<float> read_f32(const fs::path& path, std::size_t expected_count,
                            const std::string& field_name) {
  return read_raw<float>(path, field_name, expected_count);
}

std::vector<std::uint32_t> read_u32(const fs::path& path, std::size_t expected_count,
                                    const std::string& field_name) {
  return read_raw<std::uint32_t>(path, field_name, expected_count);
}

std::vector<float> read_f32_any(const fs::path& path, const std::string& field_name) {
  return read_raw<float>(path, field_name, std::nullopt);
}

std::vector<std::uint32_t> read_u32_any(const fs::path& path, const std::string& field_name) {
  return read_raw<std::uint32_t>(path, field_name, std::nullopt);
}

void write_f32(const fs::path& path, std::span<const float> values) { write_raw(path, values); }
void write_u32(const fs::path& path, std::span<const std::uint32_t> values) {
  write_raw(path, values);
}

std::vector<Vec3f> unpack_vec3(std::span<const float> flat) {
  require(flat.size() % 3 == 0, "vector array length " + std::to_string(flat.size()) +
                                    " is not a multiple of 3");
  std::vector<Vec3f> out(flat.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = Vec3f(flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]);
  }
  return out;
}

std::vector<float> pack_vec3(std::span<const Vec3f> points) {
  std::vector<float> flat(points.size() * 3);
  for (std::size_t i = 0; i < points.size(); ++i) {
    flat[3 * i] = points[i].x();
    flat[3 * i + 1] = points[i].y();
    flat[3 * i + 2] = points[i].z();
  }
  return flat;
}

void save_scene(const SceneBundle& bundle, const fs::path& dir) {
  bundle.validate();
  fs::create_directories(dir);
  const std::size_t n = bundle.cloud.size();
  json arrays = json::object();

  auto put_vec3 = [&](const std::string& name, const std::vector<Vec3f>& values) {
    if (values.empty() && name != "points") return;
    write_f32(dir / (name + ".f32"), pack_vec3(values));
    arrays[name] = array_entry(name + ".f32", "f32", {n, 3});
  };
  auto put_u32 = [&](const std::string& name, std::span<const std::uint32_t> values) {
    if (values.empty()) return;
    write_u32(dir / (name + ".u32"), values);
    arrays[name] = array_entry(name + ".u32", "u32", {n});
  };
  auto put_f32 = [&](const std::string& name, std::span<const float> values) {
    if (values.empty()) return;
    write_f32(dir / (name + ".f32"), values);
    arrays[name] = array_entry(name + ".f32", "f32", {n});
  };

  put_vec3("points", bundle.cloud.points);
  put_vec3("colors", bundle.cloud.colors);
  put_u32("sem_labels", bundle.cloud.sem_labels);
  put_u32("inst_labels", bundle.cloud.inst_labels);
  const auto mask = to_u32_mask(bundle.cloud.unlabeled_mask);
  put_u32("unlabeled_mask", mask);
  put_u32("gt_sem_labels", bundle.gt_sem_labels);
  put_vec3("gt_offsets", bundle.gt_offsets);
  put_vec3("pred_offsets", bundle.pred_offsets);
  put_f32("confidences", bundle.confidences);
  put_f32("binary_scores", bundle.binary_scores);

  std::vector<const CameraFrame*> frames;
  for (const auto& f : bundle.frames) frames.push_back(&f);
  std::sort(frames.begin(), frames.end(), [](auto* a, auto* b) { return a->id < b->id; });

  json jframes = json::array();
  for (const CameraFrame* f : frames) {
    const std::string depth_file = "depth_" + std::to_string(f->id) + ".f32";
    write_f32(dir / depth_file, f->depth);
    json rot = json::array();
    for (int r = 0; r < 3; ++r) {
      rot.push_back({f->rotation(r, 0), f->rotation(r, 1), f->rotation(r, 2)});
    }
    jframes.push_back(json{
        {"id", f->id},
        {"width", f->width},
        {"height", f->height},
        {"intrinsics", {{"fx", f->fx}, {"fy", f->fy}, {"cx", f->cx}, {"cy", f->cy}}},
        {"rotation", rot},
        {"translation", {f->translation.x(), f->translation.y(), f->translation.z()}},
        {"depth", array_entry(depth_file, "f32",
                              {static_cast<std::size_t>(f->height),
                               static_cast<std::size_t>(f->width)})},
        {"caption", f->caption}});
  }

  json manifest{{"format", kBundleFormat},
                {"version", kBundleVersion},
                {"name", bundle.name},
                {"num_points", n},
                {"arrays", arrays},
                {"classes",
                 {{"names", bundle.class_names},
                  {"base", bundle.base_classes},
                  {"novel", bundle.novel_classes}}},
                {"frames", jframes}};
  if (bundle.scene_caption) manifest["scene_caption"] = *bundle.scene_caption;
  write_text_file(dir / kManifestName, manifest.dump(2) + "\n");
}

SceneBundle load_scene(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifestName;
  require(fs::exists(manifest_path), "missing file: " + manifest_path.string());
  json manifest;
  try {
    manifest = read_json_file(manifest_path);
  } catch (const json::exception& e) {
    throw ValidationError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  require(field_as<std::string>(manifest, "format", "manifest") == kBundleFormat,
          "manifest: unexpected `format`");
  require(field_as<int>(manifest, "version", "manifest") == kBundleVersion,
          "manifest: unsupported `version`");

  SceneBundle b;
  b.name = manifest.value("name", dir.filename().string());
  const auto n = field_as<std::size_t>(manifest, "num_points", "manifest");
  const json& arrays = field(manifest, "arrays", "manifest");

  auto load_vec3 = [&](const std::string& name, bool required) -> std::vector<Vec3f> {
    auto ref = find_array(arrays, dir, name, "f32");
    require(ref || !required, "manifest: missing field `arrays." + name + "`");
    if (!ref) return {};
    require(ref->count == 3 * n, "length mismatch for `" + name + "`: shape does not match " +
                                     "num_points " + std::to_string(n));
    return unpack_vec3(read_f32(ref->path, 3 * n, name));
  };
  auto load_u32 = [&](const std::string& name) -> std::vector<std::uint32_t> {
    auto ref = find_array(arrays, dir, name, "u32");
    if (!ref) return {};
    require(ref->count == n, "length mismatch for `" + name + "`: shape does not match " +
                                 "num_points " + std::to_string(n));
    return read_u32(ref->path, n, name);
  };
  auto load_f32 = [&](const std::string& name) -> std::vector<float> {
    auto ref = find_array(arrays, dir, name, "f32");
    if (!ref) return {};
    require(ref->count == n, "length mismatch for `" + name + "`: shape does not match " +
                                 "num_points " + std::to_string(n));
    return read_f32(ref->path, n, name);
  };

  b.cloud.points = load_vec3("points", true);
  b.cloud.colors = load_vec3("colors", false);
  b.cloud.sem_labels = load_u32("sem_labels");
  b.cloud.inst_labels = load_u32("inst_labels");
  const auto mask = load_u32("unlabeled_mask");
  if (mask.empty()) {
    b.cloud.derive_unlabeled_mask();
  } else {
    b.cloud.unlabeled_mask.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      require(mask[i] <= 1, "`unlabeled_mask` must hold 0/1 values, index " + std::to_string(i));
      b.cloud.unlabeled_mask[i] = static_cast<std::uint8_t>(mask[i]);
    }
  }
  b.gt_sem_labels = load_u32("gt_sem_labels");
  b.gt_offsets = load_vec3("gt_offsets", false);
  b.pred_offsets = load_vec3("pred_offsets", false);
  b.confidences = load_f32("confidences");
  b.binary_scores = load_f32("binary_scores");

  if (auto it = manifest.find("classes"); it != manifest.end()) {
    b.class_names = field_as<std::vector<std::string>>(*it, "names", "classes");
    b.base_classes = field_as<std::vector<std::uint32_t>>(*it, "base", "classes");
    b.novel_classes = field_as<std::vector<std::uint32_t>>(*it, "novel", "classes");
  }
  if (auto it = manifest.find("scene_caption"); it != manifest.end()) {
    require(it->is_string(), "manifest: malformed field `scene_caption`");
    b.scene_caption = it->get<std::string>();
  }

  const json& jframes = field(manifest, "frames", "manifest");
  require(jframes.is_array(), "manifest: `frames` must be an array");
  for (std::size_t k = 0; k < jframes.size(); ++k) {
    const json& jf = jframes[k];
    const std::string where = "frames[" + std::to_string(k) + "]";
    CameraFrame f;
    f.id = field_as<std::uint32_t>(jf, "id", where);
    f.width = field_as<int>(jf, "width", where);
    f.height = field_as<int>(jf, "height", where);
    require(f.width > 0 && f.height > 0, "manifest: `" + where + "` image size must be positive");
    const json& intr = field(jf, "intrinsics", where);
    f.fx = field_as<double>(intr, "fx", where + ".intrinsics");
    f.fy = field_as<double>(intr, "fy", where + ".intrinsics");
    f.cx = field_as<double>(intr, "cx", where + ".intrinsics");
    f.cy = field_as<double>(intr, "cy", where + ".intrinsics");
    const auto rot = field_as<std::vector<std::vector<double>>>(jf, "rotation", where);
    require(rot.size() == 3 && std::all_of(rot.begin(), rot.end(),
                                           [](const auto& r) { return r.size() == 3; }),
            "manifest: `" + where + ".rotation` must be 3x3");
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) f.rotation(r, c) = rot[r][c];
    }
    const auto t = field_as<std::vector<double>>(jf, "translation", where);
    require(t.size() == 3, "manifest: `" + where + ".translation` must have 3 entries");
    f.translation = Vec3d(t[0], t[1], t[2]);
    f.caption = field_as<std::string>(jf, "caption", where);
    const json& jdepth = field(jf, "depth", where);
    const std::size_t pixels = static_cast<std::size_t>(f.width) * static_cast<std::size_t>(f.height);
    require(shape_count(jdepth, where + ".depth") == pixels,
            "manifest: `" + where + ".depth.shape` does not match the image size");
    f.depth = read_f32(dir / field_as<std::string>(jdepth, "file", where + ".depth"), pixels,
                       "depth");
    b.frames.push_back(std::move(f));
  }
  std::sort(b.frames.begin(), b.frames.end(),
            [](const CameraFrame& a, const CameraFrame& c) { return a.id < c.id; });
  b.validate();
  return b;
}

bool is_scene_bundle(const fs::path& dir) { return fs::exists(dir / kManifestName); }

std::vector<fs::path> expand_bundles(const fs::path& dir) {
  if (is_scene_bundle(dir)) return {dir};
  require(fs::is_directory(dir), "not a scene bundle or directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && is_scene_bundle(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  require(!out.empty(), "no scene bundles found under " + dir.string());
  return out;
}

json caption_record_to_json(const CaptionRecord& r) {
  json j{{"level", std::string(to_string(r.level))},
         {"text", r.text},
         {"point_indices", r.point_indices},
         {"source_frames", r.source_frames}};
  if (!r.scene.empty()) j["scene"] = r.scene;
  return j;
}

CaptionRecord caption_record_from_json(const json& j) {
  CaptionRecord r;
  try {
    r.level = parse_caption_level(j.at("level").get<std::string>());
    r.text = j.at("text").get<std::string>();
    r.point_indices = j.at("point_indices").get<IndexSet>();
    r.source_frames = j.at("source_frames").get<std::vector<std::uint32_t>>();
    r.scene = j.value("scene", std::string());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed caption record: ") + e.what());
  }
  r.validate();
  return r;
}

void save_caption_records(std::span<const CaptionRecord> records, const fs::path& path) {
  for (const auto& r : records) r.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& r : records) out << caption_record_to_json(r).dump() << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<CaptionRecord> load_caption_records(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "missing file: " + path.string());
  std::vector<CaptionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(caption_record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void to_json(json& j, const PipelineConfig& c) {
  j = json{{"voxel_size", c.voxel_size},
           {"nn_radius", c.nn_radius},
           {"gamma", c.gamma},
           {"delta", c.delta},
           {"alpha1", c.alpha1},
           {"alpha2", c.alpha2},
           {"alpha3", c.alpha3},
           {"eta", c.eta},
           {"grouping_radius", c.grouping_radius},
           {"tau_soft", c.tau_soft},
           {"min_proposal_points", c.min_proposal_points},
           {"stride", c.stride},
           {"min_view_jaccard", c.min_view_jaccard},
           {"all_view_pairs", c.all_view_pairs},
           {"novel_requires_binary", c.novel_requires_binary},
           {"binary_threshold", c.binary_threshold}};
}

void from_json(const json& j, PipelineConfig& c) {
  require(j.is_object(), "pipeline config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    try {
      if (k == "voxel_size") c.voxel_size = v.get<double>();
      else if (k == "nn_radius") c.nn_radius = v.get<double>();
      else if (k == "gamma") c.gamma = v.get<std::size_t>();
      else if (k == "delta") c.delta = v.get<double>();
      else if (k == "alpha1") c.alpha1 = v.get<double>();
      else if (k == "alpha2") c.alpha2 = v.get<double>();
      else if (k == "alpha3") c.alpha3 = v.get<double>();
      else if (k == "eta") c.eta = v.get<double>();
      else if (k == "grouping_radius") c.grouping_radius = v.get<double>();
      else if (k == "tau_soft") c.tau_soft = v.get<double>();
      else if (k == "min_proposal_points") c.min_proposal_points = v.get<std::size_t>();
      else if (k == "stride") c.stride = v.get<int>();
      else if (k == "min_view_jaccard") c.min_view_jaccard = v.get<double>();
      else if (k == "all_view_pairs") c.all_view_pairs = v.get<bool>();
      else if (k == "novel_requires_binary") c.novel_requires_binary = v.get<bool>();
      else if (k == "binary_threshold") c.binary_threshold = v.get<double>();
      else throw ValidationError("unknown pipeline config key `" + k + "`");
    } catch (const json::exception&) {
      throw ValidationError("malformed pipeline config value for `" + k + "`");
    }
  }
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "missing file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return json::parse(ss.str());
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace owl3d
