#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "owl3d/common.hpp"
#include "owl3d/embedding.hpp"

namespace owl3d {

/// Scene geometry with optional annotations. Absent channels are empty vectors.
struct ScenePointCloud {
  std::vector<Vec3f> points;
  std::vector<Vec3f> colors;
  /// Base-class ids or kIgnoreClass.
  std::vector<std::uint32_t> sem_labels;
  /// Instance ids or kNoInstance.
  std::vector<std::uint32_t> inst_labels;
  /// 1 where the point carries no base annotation.
  std::vector<std::uint8_t> unlabeled_mask;

  std::size_t size() const { return points.size(); }

  /// Fills unlabeled_mask from sem_labels (all points unlabeled when there are none).
  void derive_unlabeled_mask();

  void validate() const;
};

/// Pinhole RGB-D frame with camera-to-world pose. Depth is row-major, 0 = no measurement.
struct CameraFrame {
  std::uint32_t id = 0;
  int width = 0;
  int height = 0;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Mat3d rotation = Mat3d::Identity();
  Vec3d translation = Vec3d::Zero();
  std::vector<float> depth;
  std::string caption;

  float depth_at(int u, int v) const {
    return depth[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) +
                 static_cast<std::size_t>(u)];
  }

  void validate() const;
};

enum class CaptionLevel { kScene, kView, kEntity };

std::string_view to_string(CaptionLevel level);
CaptionLevel parse_caption_level(std::string_view text);

/// A caption associated with a subset of scene points.
struct CaptionRecord {
  CaptionLevel level = CaptionLevel::kView;
  std::string text;
  IndexSet point_indices;
  std::vector<std::uint32_t> source_frames;
  /// Scene the indices refer to; empty when unnamed.
  std::string scene;

  /// Checks sorted unique indices, non-empty text and (when num_points is given) bounds.
  void validate(std::optional<std::size_t> num_points = std::nullopt) const;

  bool operator==(const CaptionRecord&) const = default;
};

/// Class names, base first, and their unit-norm text embeddings in the same order.
struct CategoryVocabulary {
  std::vector<std::string> base_names;
  std::vector<std::string> novel_names;
  EmbeddingMatrix embeddings;

  std::size_t num_classes() const { return base_names.size() + novel_names.size(); }
  std::size_t num_base() const { return base_names.size(); }
  const std::string& name(std::size_t class_id) const;

  void validate() const;
};

struct PipelineConfig {
  double voxel_size = 0.02;
  double nn_radius = 0.04;
  /// Entity records need strictly more than gamma points.
  std::size_t gamma = 100;
  /// ... and strictly fewer than delta * min(parent view sizes).
  double delta = 0.3;
  double alpha1 = 0.0;
  double alpha2 = 0.05;
  double alpha3 = 0.05;
  double eta = 0.5;
  double grouping_radius = 0.04;
  double tau_soft = 0.2;
  std::size_t min_proposal_points = 50;
  int stride = 1;
  double min_view_jaccard = 0.1;
  bool all_view_pairs = false;
  /// Novel points must additionally have s_b above binary_threshold.
  bool novel_requires_binary = false;
  double binary_threshold = 0.5;

  void validate() const;
};

/// A scene on disk: geometry, frames, class table and optional ground-truth / prediction channels.
struct SceneBundle {
  std::string name;
  ScenePointCloud cloud;
  std::vector<CameraFrame> frames;
  std::optional<std::string> scene_caption;
  std::vector<std::string> class_names;
  std::vector<std::uint32_t> base_classes;
  std::vector<std::uint32_t> novel_classes;

  /// Full semantic labels including novel classes (kIgnoreClass for background).
  std::vector<std::uint32_t> gt_sem_labels;
  std::vector<Vec3f> gt_offsets;
  std::vector<Vec3f> pred_offsets;
  std::vector<float> confidences;
  std::vector<float> binary_scores;

  void validate() const;
};

}  // namespace owl3d
