#include "owl3d/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_map>

namespace owl3d {
using nlohmann::json;

namespace {

bool contains(const std::vector<std::uint32_t>& v, std::uint32_t c) {
  return std::find(v.begin(), v.end(), c) != v.end();
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json per_class_json(const std::map<std::uint32_t, double>& m) {
  json j = json::object();
  for (const auto& [c, v] : m) j[std::to_string(c)] = v;
  return j;
}

// Point -> owning segment, rejecting overlaps.
std::unordered_map<Index, std::size_t> owner_map(std::span<const Segment> segments, const char* what) {
  std::unordered_map<Index, std::size_t> owner;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    require(is_sorted_unique(segments[s].point_indices),
            std::string(what) + " segment " + std::to_string(s) + " has unsorted indices");
    for (Index i : segments[s].point_indices) {
      require(owner.emplace(i, s).second, std::string(what) + " segments overlap at point " +
                                              std::to_string(i));
    }
  }
  return owner;
}

}  // namespace

bool ClassSets::is_base(std::uint32_t c) const { return contains(base, c); }
bool ClassSets::is_novel(std::uint32_t c) const { return contains(novel, c); }

std::vector<std::uint32_t> ClassSets::all() const {
  std::set<std::uint32_t> s(base.begin(), base.end());
  s.insert(novel.begin(), novel.end());
  return {s.begin(), s.end()};
}

double harmonic(double a, double b) {
  require(a >= 0.0 && b >= 0.0, "harmonic mean needs non-negative inputs");
  return a + b == 0.0 ? 0.0 : 2.0 * a * b / (a + b);
}

std::optional<double> class_mean(const std::map<std::uint32_t, double>& per_class,
                                 std::span<const std::uint32_t> classes) {
  double sum = 0.0;
  std::size_t count = 0;
  for (auto c : classes) {
    if (auto it = per_class.find(c); it != per_class.end()) {
      sum += it->second;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

SplitAggregate aggregate(const std::map<std::uint32_t, double>& per_class, const ClassSets& sets) {
  SplitAggregate agg;
  agg.base = class_mean(per_class, sets.base);
  agg.novel = class_mean(per_class, sets.novel);
  agg.harmonic = harmonic(agg.base.value_or(0.0), agg.novel.value_or(0.0));
  return agg;
}

json to_json(const SplitAggregate& agg) {
  return json{{"base", optional_json(agg.base)},
              {"novel", optional_json(agg.novel)},
              {"harmonic", agg.harmonic}};
}

SemanticReport semantic_miou(std::span<const std::uint32_t> pred, std::span<const std::uint32_t> gt,
                             const ClassSets& sets) {
  require(pred.size() == gt.size(), "length mismatch: " + std::to_string(pred.size()) +
                                        " predicted labels vs " + std::to_string(gt.size()) +
                                        " ground-truth labels");
  std::map<std::uint32_t, std::array<std::size_t, 3>> counts;  // tp, fp, fn
  const auto classes = sets.all();
  for (auto c : classes) counts[c] = {0, 0, 0};
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == kIgnoreClass) continue;
    if (pred[i] == gt[i]) {
      if (auto it = counts.find(gt[i]); it != counts.end()) ++it->second[0];
      continue;
    }
    if (auto it = counts.find(pred[i]); it != counts.end()) ++it->second[1];
    if (auto it = counts.find(gt[i]); it != counts.end()) ++it->second[2];
  }
  SemanticReport r;
  for (const auto& [c, n] : counts) {
    const std::size_t denom = n[0] + n[1] + n[2];
    if (denom == 0) continue;
    r.iou[c] = static_cast<double>(n[0]) / static_cast<double>(denom);
  }
  r.miou = aggregate(r.iou, sets);
  return r;
}

double mask_iou(std::span<const Index> a, std::span<const Index> b) {
  const std::size_t inter = intersection_size(a, b);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double average_precision(std::span<const std::uint8_t> tp, std::size_t num_gt) {
  if (num_gt == 0) return 0.0;
  const std::size_t n = tp.size();
  std::vector<double> precision(n);
  std::vector<double> recall(n);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n; ++k) {
    hits += tp[k] ? 1 : 0;
    precision[k] = static_cast<double>(hits) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(hits) / static_cast<double>(num_gt);
  }
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

InstanceReport instance_ap(std::span<const Segment> predictions, std::span<const Segment> gt,
                           const ClassSets& sets, double iou_threshold) {
  InstanceReport r;
  for (auto c : sets.all()) {
    std::vector<std::size_t> gt_idx;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (gt[g].class_id == c) gt_idx.push_back(g);
    }
    if (gt_idx.empty()) continue;
    std::vector<std::size_t> order;
    for (std::size_t p = 0; p < predictions.size(); ++p) {
      if (predictions[p].class_id == c) order.push_back(p);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return predictions[a].confidence > predictions[b].confidence;
    });

    std::vector<std::uint8_t> matched(gt_idx.size(), 0);
    std::vector<std::uint8_t> tp;
    tp.reserve(order.size());
    for (std::size_t p : order) {
      double best_iou = -1.0;
      std::size_t best = gt_idx.size();
      for (std::size_t g = 0; g < gt_idx.size(); ++g) {
        if (matched[g]) continue;
        const double iou = mask_iou(predictions[p].point_indices, gt[gt_idx[g]].point_indices);
        if (iou >= iou_threshold && iou > best_iou) {
          best_iou = iou;
          best = g;
        }
      }
      if (best < gt_idx.size()) matched[best] = 1;
      tp.push_back(best < gt_idx.size() ? 1 : 0);
    }
    const auto found = static_cast<std::size_t>(std::count(matched.begin(), matched.end(), 1));
    r.ap50[c] = average_precision(tp, gt_idx.size());
    r.ar50[c] = static_cast<double>(found) / static_cast<double>(gt_idx.size());
  }
  r.map50 = aggregate(r.ap50, sets);
  r.mar50 = aggregate(r.ar50, sets);
  return r;
}

PanopticReport panoptic_quality(std::span<const Segment> pred, std::span<const Segment> gt,
                                const ClassSets& sets) {
  const auto pred_owner = owner_map(pred, "predicted");
  owner_map(gt, "ground-truth");

  std::vector<std::uint8_t> pred_matched(pred.size(), 0);
  std::vector<std::uint8_t> gt_matched(gt.size(), 0);
  std::map<std::uint32_t, double> iou_sum;

  for (std::size_t g = 0; g < gt.size(); ++g) {
    std::unordered_map<std::size_t, std::size_t> overlap;
    for (Index i : gt[g].point_indices) {
      if (auto it = pred_owner.find(i); it != pred_owner.end()) ++overlap[it->second];
    }
    for (const auto& [p, inter] : overlap) {
      if (pred[p].class_id != gt[g].class_id) continue;
      const std::size_t uni = gt[g].point_indices.size() + pred[p].point_indices.size() - inter;
      const double iou = static_cast<double>(inter) / static_cast<double>(uni);
      if (iou <= 0.5) continue;
      // IoU > 0.5 on disjoint segment sets admits at most one partner per segment.
      require(!pred_matched[p] && !gt_matched[g], "panoptic matching is not unique");
      pred_matched[p] = 1;
      gt_matched[g] = 1;
      iou_sum[gt[g].class_id] += iou;
    }
  }

  PanopticReport r;
  for (auto c : sets.all()) {
    PanopticClass pc;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (gt[g].class_id != c) continue;
      (gt_matched[g] ? pc.tp : pc.fn)++;
    }
    for (std::size_t p = 0; p < pred.size(); ++p) {
      if (pred[p].class_id == c && !pred_matched[p]) ++pc.fp;
    }
    if (pc.tp + pc.fp + pc.fn == 0) continue;
    const double sum = iou_sum[c];
    const double denom = static_cast<double>(pc.tp) + 0.5 * static_cast<double>(pc.fp) +
                         0.5 * static_cast<double>(pc.fn);
    pc.pq = sum / denom;
    pc.sq = pc.tp ? sum / static_cast<double>(pc.tp) : 0.0;
    pc.rq = static_cast<double>(pc.tp) / denom;
    r.per_class[c] = pc;
  }
  std::map<std::uint32_t, double> pq, sq, rq;
  for (const auto& [c, pc] : r.per_class) {
    pq[c] = pc.pq;
    sq[c] = pc.sq;
    rq[c] = pc.rq;
  }
  r.pq = aggregate(pq, sets);
  r.sq = aggregate(sq, sets);
  r.rq = aggregate(rq, sets);
  return r;
}

OffsetMae offset_mae(const OffsetField& pred, const OffsetField& gt,
                     std::span<const std::uint32_t> gt_labels, const ClassSets& sets) {
  require(pred.size() == gt.size() && gt_labels.size() == gt.size(),
          "offset_mae: prediction, ground truth and label lengths differ");
  double sums[2] = {0.0, 0.0};
  std::size_t counts[2] = {0, 0};
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt.valid[i]) continue;
    const int part = sets.is_base(gt_labels[i]) ? 0 : sets.is_novel(gt_labels[i]) ? 1 : -1;
    if (part < 0) continue;
    sums[part] += (pred.offsets[i] - gt.offsets[i]).cwiseAbs().sum();
    ++counts[part];
  }
  OffsetMae m;
  if (counts[0]) m.base = sums[0] / static_cast<double>(counts[0]);
  if (counts[1]) m.novel = sums[1] / static_cast<double>(counts[1]);
  return m;
}

std::vector<Segment> segments_from_labels(std::span<const std::uint32_t> sem,
                                          std::span<const std::uint32_t> inst) {
  require(sem.size() == inst.size(), "length mismatch: semantic and instance label arrays differ");
  std::map<std::uint32_t, Segment> by_instance;
  for (std::size_t i = 0; i < sem.size(); ++i) {
    if (sem[i] == kIgnoreClass || inst[i] == kNoInstance) continue;
    auto [it, inserted] = by_instance.try_emplace(inst[i]);
    if (inserted) it->second.class_id = sem[i];
    require(it->second.class_id == sem[i],
            "instance " + std::to_string(inst[i]) + " mixes semantic classes");
    it->second.point_indices.push_back(static_cast<Index>(i));
  }
  std::vector<Segment> out;
  for (auto& [id, s] : by_instance) out.push_back(std::move(s));
  return out;
}

json to_json(const SemanticReport& r) {
  return json{{"iou", per_class_json(r.iou)}, {"miou", to_json(r.miou)}};
}

json to_json(const InstanceReport& r) {
  return json{{"ap50", per_class_json(r.ap50)},
              {"ar50", per_class_json(r.ar50)},
              {"map50", to_json(r.map50)},
              {"mar50", to_json(r.mar50)}};
}

json to_json(const PanopticReport& r) {
  json per = json::object();
  for (const auto& [c, pc] : r.per_class) {
    per[std::to_string(c)] = json{{"pq", pc.pq}, {"sq", pc.sq}, {"rq", pc.rq},
                                  {"tp", pc.tp}, {"fp", pc.fp}, {"fn", pc.fn}};
  }
  return json{{"per_class", per}, {"pq", to_json(r.pq)}, {"sq", to_json(r.sq)}, {"rq", to_json(r.rq)}};
}

json to_json(const OffsetMae& r) {
  return json{{"norm", "l1"}, {"base", optional_json(r.base)}, {"novel", optional_json(r.novel)}};
}

}  // namespace owl3d
