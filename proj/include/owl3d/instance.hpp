#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "owl3d/calibration.hpp"
#include "owl3d/common.hpp"
#include "owl3d/scene.hpp"

namespace owl3d {

/// Per-point 3-vectors (predicted offsets or offset labels) with a validity mask.
struct OffsetField {
  std::vector<Vec3d> offsets;
  std::vector<std::uint8_t> valid;

  static OffsetField zeros(std::size_t n) { return {std::vector<Vec3d>(n, Vec3d::Zero()), std::vector<std::uint8_t>(n, 0)}; }
  /// Every entry valid.
  static OffsetField dense(std::vector<Vec3d> offsets);

  std::size_t size() const { return offsets.size(); }
  void validate() const;
};

struct Proposal {
  IndexSet point_indices;
  /// Per-member confidence z in [0,1]; empty until scored.
  std::vector<double> point_confidences;
  std::optional<std::uint32_t> class_hint;
  std::optional<Vec3d> center;

  void validate() const;
};

using ProposalSet = std::vector<Proposal>;

/// p + o where the offset is valid, p elsewhere.
std::vector<Vec3d> shift_points(std::span<const Vec3f> points, const OffsetField& offsets);

/// Connected components of the graph over `candidates` with an edge between points at
/// Euclidean distance <= radius. Components smaller than min_size are dropped. Each
/// component is sorted; components are ordered by their smallest member.
std::vector<IndexSet> radius_components(std::span<const Vec3d> points,
                                        std::span<const Index> candidates, double radius,
                                        std::size_t min_size);

/// Soft per-class grouping: class c clusters the points with score(c) >= tau_soft.
/// Output ordered by (class, smallest member).
ProposalSet group_base(std::span<const Vec3d> shifted_points, const ScoreMatrix& scores,
                       const PipelineConfig& cfg);

/// Class-agnostic grouping of the masked points.
ProposalSet group_novel(std::span<const Vec3d> shifted_points, std::span<const std::uint8_t> novel_mask,
                        const PipelineConfig& cfg);

/// Points treated as novel: unlabeled, and (if cfg.novel_requires_binary) s_b above threshold.
std::vector<std::uint8_t> novel_mask(const ScenePointCloud& cloud, const PipelineConfig& cfg,
                                     std::span<const float> binary_scores = {});

/// Copies per-point z values onto each proposal's members.
void attach_confidences(ProposalSet& proposals, std::span<const float> point_confidences);

/// Keeps members with z > cfg.eta; drops proposals left with fewer than
/// cfg.min_proposal_points members.
ProposalSet score_filter(const ProposalSet& proposals, const PipelineConfig& cfg);

struct PseudoLabels {
  OffsetField labels;
  /// Input proposals with `center` filled in.
  ProposalSet proposals;
};

/// Center = centroid of each refined proposal; member label = center - p.
/// Proposals must be pairwise disjoint.
PseudoLabels pseudo_offsets(const ProposalSet& refined, std::span<const Vec3f> points);

struct OffsetLoss {
  double base = 0.0;
  double novel = 0.0;
  double total = 0.0;
};

/// Mean L1 norm of (pred - label) over each label mask; an empty mask contributes 0.
OffsetLoss offset_loss(const OffsetField& pred, const OffsetField& base_labels,
                       const OffsetField& pseudo_labels);

}  // namespace owl3d
