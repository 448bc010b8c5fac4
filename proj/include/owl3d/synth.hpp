#pragma once

// Synthetic rooms with exact ground truth: axis-aligned box instances resting on the floor,
// a ring of outward-looking cameras, point-splat depth maps and template captions.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "owl3d/instance.hpp"
#include "owl3d/scene.hpp"

namespace owl3d {

/// Plain-text caption templates, one `key = value` per line (`#` starts a comment):
///   empty = an empty room
///   list = a room with {items}
///   item = a {name}
///   synonym.sofa = couch
/// Items are joined as "A", "A and B", "A, B and C".
struct CaptionTemplates {
  std::string empty = "an empty room";
  std::string list = "a room with {items}";
  std::string item = "a {name}";
  std::map<std::string, std::string> synonyms;

  static CaptionTemplates parse(std::string_view text);
  std::string render(std::span<const std::string> class_names) const;
};

struct SynthSpec {
  std::uint64_t seed = 0;
  Vec3d room_extent{4.0, 4.0, 2.5};
  std::vector<std::string> classes{"chair", "table", "bed", "cabinet", "sofa", "lamp"};
  std::vector<std::string> novel_classes{"sofa", "lamp"};
  /// One count per class, or a single count applied to every class.
  std::vector<int> instances_per_class{2};
  int points_per_instance = 400;
  double box_half_min = 0.12;
  double box_half_max = 0.35;
  double min_center_separation = 0.16;
  int frames = 12;
  int image_width = 160;
  int image_height = 120;
  double hfov_deg = 90.0;
  double camera_height = 1.3;
  double camera_ring_radius = 0.3;
  double camera_pitch_deg = 25.0;
  double offset_noise_sigma = 0.01;
  double confidence_radius = 0.04;
  int caption_min_visible = 50;
  double visibility_tolerance = 0.03;
  CaptionTemplates templates;

  int instances_of(std::size_t class_index) const;
  void validate() const;
};

void from_json(const nlohmann::json& j, SynthSpec& spec);
void to_json(nlohmann::json& j, const SynthSpec& spec);

struct GeneratedScene {
  ScenePointCloud cloud;
  std::vector<IndexSet> instances;
  std::vector<std::uint32_t> instance_class;
  std::vector<Vec3d> centroids;
  /// Per-point offset to the containing instance centroid.
  OffsetField gt_offsets;
  std::vector<std::uint32_t> gt_sem_labels;
  std::vector<std::uint32_t> base_classes;
  std::vector<std::uint32_t> novel_classes;
};

/// Deterministic per spec.seed. Throws ValidationError when an instance cannot be placed
/// after 1000 attempts.
GeneratedScene gen_scene(const SynthSpec& spec);

/// Cameras (without depth or caption) on the spec's ring, ids 0..frames-1.
std::vector<CameraFrame> camera_ring(const SynthSpec& spec);

/// Per-pixel minimum positive camera depth of the points landing on it (rounded pixel
/// coordinates); 0 where nothing lands.
std::vector<float> render_depth(std::span<const Vec3f> points, const CameraFrame& camera);

/// Per-instance count of points whose projection matches the depth map within tolerance.
std::vector<std::size_t> visible_counts(const GeneratedScene& scene, const CameraFrame& frame,
                                        double tolerance);

/// Caption listing classes of instances with at least `min_visible` visible points.
std::string gen_captions(const CameraFrame& frame, const GeneratedScene& scene,
                         const std::vector<std::string>& class_names,
                         const CaptionTemplates& templates, int min_visible = 50,
                         double tolerance = 0.03);

/// Scene, rendered frames, captions and simulated prediction channels as a bundle.
SceneBundle make_bundle(const SynthSpec& spec, const std::string& name);

}  // namespace owl3d
