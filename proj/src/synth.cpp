#include "owl3d/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "owl3d/geometry.hpp"

namespace owl3d {
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string replace_all(std::string text, const std::string& key, const std::string& value) {
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
  return text;
}

struct Box {
  Vec3d center;
  Vec3d half;
};

bool boxes_overlap(const Box& a, const Box& b) {
  for (int k = 0; k < 3; ++k) {
    if (std::abs(a.center[k] - b.center[k]) >= a.half[k] + b.half[k]) return false;
  }
  return true;
}

Vec3f sample_on_box(const Box& box, std::mt19937_64& rng) {
  const Vec3d& h = box.half;
  // Face areas: pairs of faces normal to x, y, z.
  const double ax = h.y() * h.z();
  const double ay = h.x() * h.z();
  const double az = h.x() * h.y();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  const double pick = unit(rng) * (ax + ay + az);
  const int axis = pick < ax ? 0 : pick < ax + ay ? 1 : 2;
  const double side = unit(rng) < 0.5 ? -1.0 : 1.0;
  Vec3d local;
  for (int k = 0; k < 3; ++k) local[k] = k == axis ? side * h[k] : sym(rng) * h[k];
  return (box.center + local).cast<float>();
}

}  // namespace

CaptionTemplates CaptionTemplates::parse(std::string_view text) {
  CaptionTemplates t;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const std::string line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos,
            "caption templates line " + std::to_string(line_no) + ": expected `key = value`");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key == "empty") t.empty = value;
    else if (key == "list") t.list = value;
    else if (key == "item") t.item = value;
    else if (key.rfind("synonym.", 0) == 0) t.synonyms[key.substr(8)] = value;
    else throw ValidationError("caption templates: unknown key `" + key + "`");
  }
  require(t.list.find("{items}") != std::string::npos, "caption template `list` needs {items}");
  require(t.item.find("{name}") != std::string::npos, "caption template `item` needs {name}");
  return t;
}

std::string CaptionTemplates::render(std::span<const std::string> class_names) const {
  std::set<std::string> names;
  for (const auto& n : class_names) {
    auto it = synonyms.find(n);
    names.insert(it == synonyms.end() ? n : it->second);
  }
  if (names.empty()) return empty;
  std::vector<std::string> items;
  for (const auto& n : names) items.push_back(replace_all(item, "{name}", n));
  std::string joined = items[0];
  for (std::size_t k = 1; k < items.size(); ++k) {
    joined += (k + 1 == items.size() ? " and " : ", ") + items[k];
  }
  return replace_all(list, "{items}", joined);
}

int SynthSpec::instances_of(std::size_t class_index) const {
  return instances_per_class.size() == 1 ? instances_per_class[0]
                                         : instances_per_class.at(class_index);
}

void SynthSpec::validate() const {
  require(room_extent.allFinite() && room_extent.minCoeff() > 0.0, "synth: room extents must be > 0");
  require(!classes.empty(), "synth: class list is empty");
  require(std::set<std::string>(classes.begin(), classes.end()).size() == classes.size(),
          "synth: duplicate class names");
  for (const auto& n : novel_classes) {
    require(std::find(classes.begin(), classes.end(), n) != classes.end(),
            "synth: novel class `" + n + "` not in class list");
  }
  require(instances_per_class.size() == 1 || instances_per_class.size() == classes.size(),
          "synth: instances_per_class needs one entry or one per class");
  for (int c : instances_per_class) require(c >= 1, "synth: instance counts must be >= 1");
  require(points_per_instance >= 1, "synth: points_per_instance must be >= 1");
  require(box_half_min > 0.0 && box_half_max >= box_half_min, "synth: invalid box size range");
  require(min_center_separation >= 0.0, "synth: min_center_separation must be >= 0");
  require(frames >= 1, "synth: frames must be >= 1");
  require(image_width >= 1 && image_height >= 1, "synth: image size must be positive");
  require(hfov_deg > 0.0 && hfov_deg < 180.0, "synth: hfov_deg must lie in (0, 180)");
  require(offset_noise_sigma >= 0.0, "synth: offset_noise_sigma must be >= 0");
  require(confidence_radius > 0.0, "synth: confidence_radius must be > 0");
  require(visibility_tolerance >= 0.0, "synth: visibility_tolerance must be >= 0");
}

void from_json(const json& j, SynthSpec& s) {
  require(j.is_object(), "synth spec must be a JSON object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const json& v = it.value();
      if (k == "seed") s.seed = v.get<std::uint64_t>();
      else if (k == "room_extent") {
        const auto e = v.get<std::vector<double>>();
        require(e.size() == 3, "synth: room_extent needs 3 values");
        s.room_extent = Vec3d(e[0], e[1], e[2]);
      } else if (k == "classes") s.classes = v.get<std::vector<std::string>>();
      else if (k == "novel_classes") s.novel_classes = v.get<std::vector<std::string>>();
      else if (k == "instances_per_class") {
        s.instances_per_class = v.is_array() ? v.get<std::vector<int>>() : std::vector<int>{v.get<int>()};
      } else if (k == "points_per_instance") s.points_per_instance = v.get<int>();
      else if (k == "box_half_min") s.box_half_min = v.get<double>();
      else if (k == "box_half_max") s.box_half_max = v.get<double>();
      else if (k == "min_center_separation") s.min_center_separation = v.get<double>();
      else if (k == "frames") s.frames = v.get<int>();
      else if (k == "image_width") s.image_width = v.get<int>();
      else if (k == "image_height") s.image_height = v.get<int>();
      else if (k == "hfov_deg") s.hfov_deg = v.get<double>();
      else if (k == "camera_height") s.camera_height = v.get<double>();
      else if (k == "camera_ring_radius") s.camera_ring_radius = v.get<double>();
      else if (k == "camera_pitch_deg") s.camera_pitch_deg = v.get<double>();
      else if (k == "offset_noise_sigma") s.offset_noise_sigma = v.get<double>();
      else if (k == "confidence_radius") s.confidence_radius = v.get<double>();
      else if (k == "caption_min_visible") s.caption_min_visible = v.get<int>();
      else if (k == "visibility_tolerance") s.visibility_tolerance = v.get<double>();
      else if (k == "templates") s.templates = CaptionTemplates::parse(v.get<std::string>());
      else throw ValidationError("synth spec: unknown key `" + k + "`");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("synth spec: malformed value: ") + e.what());
  }
  s.validate();
}

void to_json(json& j, const SynthSpec& s) {
  std::string templates = "empty = " + s.templates.empty + "\nlist = " + s.templates.list +
                          "\nitem = " + s.templates.item + "\n";
  for (const auto& [k, v] : s.templates.synonyms) templates += "synonym." + k + " = " + v + "\n";
  j = json{{"seed", s.seed},
           {"room_extent", {s.room_extent.x(), s.room_extent.y(), s.room_extent.z()}},
           {"classes", s.classes},
           {"novel_classes", s.novel_classes},
           {"instances_per_class", s.instances_per_class},
           {"points_per_instance", s.points_per_instance},
           {"box_half_min", s.box_half_min},
           {"box_half_max", s.box_half_max},
           {"min_center_separation", s.min_center_separation},
           {"frames", s.frames},
           {"image_width", s.image_width},
           {"image_height", s.image_height},
           {"hfov_deg", s.hfov_deg},
           {"camera_height", s.camera_height},
           {"camera_ring_radius", s.camera_ring_radius},
           {"camera_pitch_deg", s.camera_pitch_deg},
           {"offset_noise_sigma", s.offset_noise_sigma},
           {"confidence_radius", s.confidence_radius},
           {"caption_min_visible", s.caption_min_visible},
           {"visibility_tolerance", s.visibility_tolerance},
           {"templates", templates}};
}

GeneratedScene gen_scene(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> half_dist(spec.box_half_min, spec.box_half_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  GeneratedScene scene;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const bool novel = std::find(spec.novel_classes.begin(), spec.novel_classes.end(),
                                 spec.classes[c]) != spec.novel_classes.end();
    (novel ? scene.novel_classes : scene.base_classes).push_back(static_cast<std::uint32_t>(c));
  }

  std::vector<Box> boxes;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    for (int k = 0; k < spec.instances_of(c); ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        Box b;
        b.half = Vec3d(half_dist(rng), half_dist(rng), half_dist(rng));
        b.half.z() = std::min(b.half.z(), 0.5 * spec.room_extent.z());
        const double span_x = spec.room_extent.x() - 2.0 * b.half.x();
        const double span_y = spec.room_extent.y() - 2.0 * b.half.y();
        if (span_x <= 0.0 || span_y <= 0.0) continue;
        b.center = Vec3d(b.half.x() + unit(rng) * span_x, b.half.y() + unit(rng) * span_y, b.half.z());
        placed = std::none_of(boxes.begin(), boxes.end(), [&](const Box& o) {
          return boxes_overlap(b, o) || (b.center - o.center).norm() < spec.min_center_separation;
        });
        if (placed) {
          boxes.push_back(b);
          scene.instance_class.push_back(static_cast<std::uint32_t>(c));
        }
      }
      require(placed, "synth: could not place instance " + std::to_string(boxes.size()) +
                          " after 1000 attempts (room too crowded)");
    }
  }

  auto& cloud = scene.cloud;
  for (std::size_t inst = 0; inst < boxes.size(); ++inst) {
    IndexSet members;
    for (int k = 0; k < spec.points_per_instance; ++k) {
      members.push_back(static_cast<Index>(cloud.points.size()));
      cloud.points.push_back(sample_on_box(boxes[inst], rng));
    }
    scene.instances.push_back(std::move(members));
  }

  const std::size_t n = cloud.points.size();
  cloud.sem_labels.assign(n, kIgnoreClass);
  cloud.inst_labels.assign(n, kNoInstance);
  scene.gt_sem_labels.assign(n, kIgnoreClass);
  scene.gt_offsets = OffsetField::zeros(n);
  for (std::size_t inst = 0; inst < scene.instances.size(); ++inst) {
    const std::uint32_t c = scene.instance_class[inst];
    const bool novel = std::find(scene.novel_classes.begin(), scene.novel_classes.end(), c) !=
                       scene.novel_classes.end();
    Vec3d sum = Vec3d::Zero();
    for (Index i : scene.instances[inst]) sum += cloud.points[i].cast<double>();
    const Vec3d centroid = sum / static_cast<double>(scene.instances[inst].size());
    scene.centroids.push_back(centroid);
    for (Index i : scene.instances[inst]) {
      cloud.inst_labels[i] = static_cast<std::uint32_t>(inst);
      scene.gt_sem_labels[i] = c;
      if (!novel) cloud.sem_labels[i] = c;
      scene.gt_offsets.offsets[i] = centroid - cloud.points[i].cast<double>();
      scene.gt_offsets.valid[i] = 1;
    }
  }
  cloud.derive_unlabeled_mask();
  return scene;
}

std::vector<CameraFrame> camera_ring(const SynthSpec& spec) {
  const double fx = 0.5 * spec.image_width / std::tan(0.5 * spec.hfov_deg * std::numbers::pi / 180.0);
  const double pitch = spec.camera_pitch_deg * std::numbers::pi / 180.0;
  const Vec3d up(0.0, 0.0, 1.0);
  std::vector<CameraFrame> frames;
  for (int k = 0; k < spec.frames; ++k) {
    const double yaw = 2.0 * std::numbers::pi * k / spec.frames;
    CameraFrame f;
    f.id = static_cast<std::uint32_t>(k);
    f.width = spec.image_width;
    f.height = spec.image_height;
    f.fx = fx;
    f.fy = fx;
    f.cx = 0.5 * spec.image_width;
    f.cy = 0.5 * spec.image_height;
    const Vec3d forward =
        Vec3d(std::cos(yaw) * std::cos(pitch), std::sin(yaw) * std::cos(pitch), -std::sin(pitch));
    const Vec3d right = forward.cross(up).normalized();
    const Vec3d down = forward.cross(right);
    f.rotation.col(0) = right;
    f.rotation.col(1) = down;
    f.rotation.col(2) = forward;
    f.translation = Vec3d(0.5 * spec.room_extent.x() + spec.camera_ring_radius * std::cos(yaw),
                          0.5 * spec.room_extent.y() + spec.camera_ring_radius * std::sin(yaw),
                          spec.camera_height);
    f.depth.assign(static_cast<std::size_t>(f.width) * static_cast<std::size_t>(f.height), 0.0f);
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<float> render_depth(std::span<const Vec3f> points, const CameraFrame& camera) {
  const std::size_t pixels = static_cast<std::size_t>(camera.width) * static_cast<std::size_t>(camera.height);
  std::vector<float> depth(pixels, 0.0f);
#pragma omp parallel
  {
    std::vector<float> local(pixels, 0.0f);
#pragma omp for schedule(static) nowait
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto proj = project(camera, points[i].cast<double>());
      if (!proj) continue;
      const double u = std::round(proj->u);
      const double v = std::round(proj->v);
      if (u < 0.0 || v < 0.0 || u >= camera.width || v >= camera.height) continue;
      const auto d = static_cast<float>(proj->depth);
      if (d <= 0.0f) continue;
      float& slot = local[static_cast<std::size_t>(v) * static_cast<std::size_t>(camera.width) +
                          static_cast<std::size_t>(u)];
      if (slot == 0.0f || d < slot) slot = d;
    }
#pragma omp critical
    for (std::size_t p = 0; p < pixels; ++p) {
      if (local[p] > 0.0f && (depth[p] == 0.0f || local[p] < depth[p])) depth[p] = local[p];
    }
  }
  return depth;
}

std::vector<std::size_t> visible_counts(const GeneratedScene& scene, const CameraFrame& frame,
                                        double tolerance) {
  std::vector<std::size_t> counts(scene.instances.size(), 0);
  for (std::size_t inst = 0; inst < scene.instances.size(); ++inst) {
    for (Index i : scene.instances[inst]) {
      const auto proj = project(frame, scene.cloud.points[i].cast<double>());
      if (!proj) continue;
      const double u = std::round(proj->u);
      const double v = std::round(proj->v);
      if (u < 0.0 || v < 0.0 || u >= frame.width || v >= frame.height) continue;
      const float d = frame.depth_at(static_cast<int>(u), static_cast<int>(v));
      if (d > 0.0f && std::abs(static_cast<double>(d) - proj->depth) <= tolerance) ++counts[inst];
    }
  }
  return counts;
}

std::string gen_captions(const CameraFrame& frame, const GeneratedScene& scene,
                         const std::vector<std::string>& class_names,
                         const CaptionTemplates& templates, int min_visible, double tolerance) {
  const auto counts = visible_counts(scene, frame, tolerance);
  std::vector<std::string> seen;
  for (std::size_t inst = 0; inst < counts.size(); ++inst) {
    if (counts[inst] >= static_cast<std::size_t>(min_visible)) {
      seen.push_back(class_names.at(scene.instance_class[inst]));
    }
  }
  return templates.render(seen);
}

SceneBundle make_bundle(const SynthSpec& spec, const std::string& name) {
  GeneratedScene scene = gen_scene(spec);
  SceneBundle b;
  b.name = name;
  b.class_names = spec.classes;
  b.base_classes = scene.base_classes;
  b.novel_classes = scene.novel_classes;
  b.frames = camera_ring(spec);
  for (auto& f : b.frames) {
    f.depth = render_depth(scene.cloud.points, f);
    f.caption = gen_captions(f, scene, spec.classes, spec.templates, spec.caption_min_visible,
                             spec.visibility_tolerance);
  }

  const std::size_t n = scene.cloud.size();
  std::mt19937_64 rng(spec.seed ^ 0xA5A5A5A5DEADBEEFull);
  std::normal_distribution<double> noise(0.0, spec.offset_noise_sigma);
  const double inv_2r2 = 1.0 / (2.0 * spec.confidence_radius * spec.confidence_radius);
  b.gt_offsets.resize(n);
  b.pred_offsets.resize(n);
  b.confidences.resize(n);
  b.binary_scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3d gt = scene.gt_offsets.offsets[i];
    Vec3d err = Vec3d::Zero();
    if (spec.offset_noise_sigma > 0.0) err = Vec3d(noise(rng), noise(rng), noise(rng));
    b.gt_offsets[i] = gt.cast<float>();
    b.pred_offsets[i] = (gt + err).cast<float>();
    b.confidences[i] = static_cast<float>(std::exp(-err.squaredNorm() * inv_2r2));
    b.binary_scores[i] = scene.cloud.unlabeled_mask[i] ? 0.9f : 0.1f;
  }
  b.gt_sem_labels = std::move(scene.gt_sem_labels);
  b.cloud = std::move(scene.cloud);
  return b;
}

}  // namespace owl3d
