#pragma once

// Open-world evaluation. Per-class values are optional: a class with neither ground truth
// nor predictions has no value and is left out of the base/novel means. Offset MAE uses
// the L1 norm of the 3-vector error (|dx| + |dy| + |dz|), in meters.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "owl3d/common.hpp"
#include "owl3d/instance.hpp"

namespace owl3d {

struct ClassSets {
  std::vector<std::uint32_t> base;
  std::vector<std::uint32_t> novel;

  bool is_base(std::uint32_t c) const;
  bool is_novel(std::uint32_t c) const;
  /// Union in ascending order.
  std::vector<std::uint32_t> all() const;
};

/// 2ab / (a + b); 0 when a + b = 0.
double harmonic(double a, double b);

/// Mean over classes with a value; nullopt when none has one.
std::optional<double> class_mean(const std::map<std::uint32_t, double>& per_class,
                                 std::span<const std::uint32_t> classes);

/// Base mean, novel mean and their harmonic mean (absent means count as 0 in the harmonic).
struct SplitAggregate {
  std::optional<double> base;
  std::optional<double> novel;
  double harmonic = 0.0;
};

SplitAggregate aggregate(const std::map<std::uint32_t, double>& per_class, const ClassSets& sets);

nlohmann::json to_json(const SplitAggregate& agg);

struct SemanticReport {
  std::map<std::uint32_t, double> iou;
  SplitAggregate miou;
};

/// IoU_c = TP / (TP + FP + FN) over points whose ground truth is not kIgnoreClass.
SemanticReport semantic_miou(std::span<const std::uint32_t> pred, std::span<const std::uint32_t> gt,
                             const ClassSets& sets);

/// A (class, point set) segment; confidence ranks instance predictions.
struct Segment {
  std::uint32_t class_id = 0;
  IndexSet point_indices;
  double confidence = 1.0;
};

double mask_iou(std::span<const Index> a, std::span<const Index> b);

struct InstanceReport {
  std::map<std::uint32_t, double> ap50;
  std::map<std::uint32_t, double> ar50;
  SplitAggregate map50;
  SplitAggregate mar50;
};

/// Per class: predictions by descending confidence (ties by input order), each matched to
/// the unmatched gt of highest IoU >= iou_threshold. AP is the area under the all-point
/// interpolated precision-recall curve; AR is the matched gt fraction. Classes without
/// ground truth get no value.
InstanceReport instance_ap(std::span<const Segment> predictions, std::span<const Segment> gt,
                           const ClassSets& sets, double iou_threshold = 0.5);

/// AP for one class given the TP flag of each prediction in ranked order.
double average_precision(std::span<const std::uint8_t> tp_in_rank_order, std::size_t num_gt);

struct PanopticClass {
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct PanopticReport {
  std::map<std::uint32_t, PanopticClass> per_class;
  SplitAggregate pq;
  SplitAggregate sq;
  SplitAggregate rq;
};

/// Same-class pairs with IoU > 0.5 are matches. Throws if segments overlap within pred or gt.
PanopticReport panoptic_quality(std::span<const Segment> pred, std::span<const Segment> gt,
                                const ClassSets& sets);

struct OffsetMae {
  std::optional<double> base;
  std::optional<double> novel;
};

/// Mean L1 error over points valid in `gt`, split by the base/novel class of gt_labels.
OffsetMae offset_mae(const OffsetField& pred, const OffsetField& gt,
                     std::span<const std::uint32_t> gt_labels, const ClassSets& sets);

/// Turns per-point semantic + instance ids into segments (points with kIgnoreClass or
/// kNoInstance skipped). Segments ordered by instance id.
std::vector<Segment> segments_from_labels(std::span<const std::uint32_t> sem,
                                          std::span<const std::uint32_t> inst);

nlohmann::json to_json(const SemanticReport& r);
nlohmann::json to_json(const InstanceReport& r);
nlohmann::json to_json(const PanopticReport& r);
nlohmann::json to_json(const OffsetMae& r);

}  // namespace owl3d
