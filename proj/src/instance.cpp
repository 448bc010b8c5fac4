#include "owl3d/instance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "owl3d/geometry.hpp"

namespace owl3d {
namespace {

double dist_sq(const Vec3d& a, const Vec3d& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a > b) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

// Cells of edge radius / sqrt(3): any two points sharing a cell are within radius, and
// cells more than two steps apart on some axis cannot hold a connected pair.
struct CellGrid {
  std::vector<VoxelKey> keys;
  std::vector<IndexSet> members;
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> lookup;
};

CellGrid build_grid(std::span<const Vec3d> points, std::span<const Index> candidates, double cell) {
  CellGrid g;
  for (Index i : candidates) {
    const VoxelKey k = voxel_key(points[i], cell);
    auto [it, inserted] = g.lookup.try_emplace(k, g.keys.size());
    if (inserted) {
      g.keys.push_back(k);
      g.members.emplace_back();
    }
    g.members[it->second].push_back(i);
  }
  return g;
}

bool cells_connected(std::span<const Vec3d> points, const IndexSet& a, const IndexSet& b,
                     double r2) {
  for (Index i : a) {
    for (Index j : b) {
      if (dist_sq(points[i], points[j]) <= r2) return true;
    }
  }
  return false;
}

const std::vector<VoxelKey>& forward_offsets() {
  static const std::vector<VoxelKey> offsets = [] {
    std::vector<VoxelKey> out;
    for (std::int64_t x = -2; x <= 2; ++x) {
      for (std::int64_t y = -2; y <= 2; ++y) {
        for (std::int64_t z = -2; z <= 2; ++z) {
          const VoxelKey d{x, y, z};
          if (d > VoxelKey{0, 0, 0}) out.push_back(d);
        }
      }
    }
    return out;
  }();
  return offsets;
}

}  // namespace

OffsetField OffsetField::dense(std::vector<Vec3d> offsets) {
  OffsetField f;
  f.valid.assign(offsets.size(), 1);
  f.offsets = std::move(offsets);
  return f;
}

void OffsetField::validate() const {
  require(valid.size() == offsets.size(), "offset mask length does not match offsets");
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    require(offsets[i].allFinite(), "non-finite offset at index " + std::to_string(i));
  }
}

void Proposal::validate() const {
  require(is_sorted_unique(point_indices), "proposal indices must be sorted and unique");
  if (!point_confidences.empty()) {
    require(point_confidences.size() == point_indices.size(),
            "proposal confidences must match its member count");
    for (double z : point_confidences) {
      require(z >= 0.0 && z <= 1.0, "proposal confidence outside [0,1]");
    }
  }
}

std::vector<Vec3d> shift_points(std::span<const Vec3f> points, const OffsetField& offsets) {
  require(points.size() == offsets.size(), "shift_points: " + std::to_string(points.size()) +
                                               " points but " + std::to_string(offsets.size()) +
                                               " offsets");
  offsets.validate();
  std::vector<Vec3d> out(points.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < points.size(); ++i) {
    out[i] = points[i].cast<double>();
    if (offsets.valid[i]) out[i] += offsets.offsets[i];
  }
  return out;
}

std::vector<IndexSet> radius_components(std::span<const Vec3d> points,
                                        std::span<const Index> candidates, double radius,
                                        std::size_t min_size) {
  require(radius > 0.0 && std::isfinite(radius), "grouping radius must be > 0");
  if (candidates.empty()) return {};
  for (Index i : candidates) {
    require(i < points.size(), "grouping candidate " + std::to_string(i) + " out of bounds");
  }
  const double r2 = radius * radius;
  const CellGrid grid = build_grid(points, candidates, radius / std::sqrt(3.0));
  const std::size_t cells = grid.keys.size();
  const auto& offsets = forward_offsets();

  std::vector<std::vector<std::size_t>> links(cells);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t c = 0; c < cells; ++c) {
    const VoxelKey& k = grid.keys[c];
    for (const auto& d : offsets) {
      auto it = grid.lookup.find({k[0] + d[0], k[1] + d[1], k[2] + d[2]});
      if (it == grid.lookup.end()) continue;
      if (cells_connected(points, grid.members[c], grid.members[it->second], r2)) {
        links[c].push_back(it->second);
      }
    }
  }

  DisjointSets sets(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    for (std::size_t other : links[c]) sets.unite(c, other);
  }

  std::unordered_map<std::size_t, IndexSet> by_root;
  for (std::size_t c = 0; c < cells; ++c) {
    auto& comp = by_root[sets.find(c)];
    comp.insert(comp.end(), grid.members[c].begin(), grid.members[c].end());
  }
  std::vector<IndexSet> components;
  for (auto& [root, comp] : by_root) {
    if (comp.size() < min_size) continue;
    std::sort(comp.begin(), comp.end());
    components.push_back(std::move(comp));
  }
  std::sort(components.begin(), components.end(),
            [](const IndexSet& a, const IndexSet& b) { return a.front() < b.front(); });
  return components;
}

ProposalSet group_base(std::span<const Vec3d> shifted_points, const ScoreMatrix& scores,
                       const PipelineConfig& cfg) {
  require(scores.rows == shifted_points.size(), "group_base: score rows do not match points");
  const std::size_t classes = scores.cols;
  std::vector<std::vector<IndexSet>> per_class(classes);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t c = 0; c < classes; ++c) {
    IndexSet candidates;
    for (std::size_t i = 0; i < scores.rows; ++i) {
      if (scores(i, c) >= cfg.tau_soft) candidates.push_back(static_cast<Index>(i));
    }
    per_class[c] = radius_components(shifted_points, candidates, cfg.grouping_radius,
                                     cfg.min_proposal_points);
  }

  ProposalSet out;
  for (std::size_t c = 0; c < classes; ++c) {
    for (auto& comp : per_class[c]) {
      Proposal p;
      p.point_indices = std::move(comp);
      p.class_hint = static_cast<std::uint32_t>(c);
      out.push_back(std::move(p));
    }
  }
  return out;
}

ProposalSet group_novel(std::span<const Vec3d> shifted_points, std::span<const std::uint8_t> mask,
                        const PipelineConfig& cfg) {
  require(mask.size() == shifted_points.size(), "group_novel: mask length does not match points");
  IndexSet candidates;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) candidates.push_back(static_cast<Index>(i));
  }
  ProposalSet out;
  for (auto& comp : radius_components(shifted_points, candidates, cfg.grouping_radius,
                                      cfg.min_proposal_points)) {
    Proposal p;
    p.point_indices = std::move(comp);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::uint8_t> novel_mask(const ScenePointCloud& cloud, const PipelineConfig& cfg,
                                     std::span<const float> binary_scores) {
  require(cloud.unlabeled_mask.size() == cloud.size(), "cloud has no unlabeled mask");
  std::vector<std::uint8_t> mask(cloud.unlabeled_mask);
  if (cfg.novel_requires_binary) {
    require(binary_scores.size() == cloud.size(),
            "novel_requires_binary is set but binary scores are missing or mis-sized");
    for (std::size_t i = 0; i < mask.size(); ++i) {
      mask[i] = mask[i] && binary_scores[i] > cfg.binary_threshold;
    }
  }
  return mask;
}

void attach_confidences(ProposalSet& proposals, std::span<const float> point_confidences) {
  for (auto& p : proposals) {
    p.point_confidences.clear();
    for (Index i : p.point_indices) {
      require(i < point_confidences.size(), "confidence missing for point " + std::to_string(i));
      const double z = point_confidences[i];
      require(z >= 0.0 && z <= 1.0, "confidence outside [0,1] for point " + std::to_string(i));
      p.point_confidences.push_back(z);
    }
  }
}

ProposalSet score_filter(const ProposalSet& proposals, const PipelineConfig& cfg) {
  ProposalSet out;
  for (std::size_t k = 0; k < proposals.size(); ++k) {
    const auto& p = proposals[k];
    require(!p.point_confidences.empty() || p.point_indices.empty(),
            "score_filter: proposal " + std::to_string(k) + " has no point confidences");
    p.validate();
    Proposal kept;
    kept.class_hint = p.class_hint;
    for (std::size_t m = 0; m < p.point_indices.size(); ++m) {
      if (p.point_confidences[m] > cfg.eta) {
        kept.point_indices.push_back(p.point_indices[m]);
        kept.point_confidences.push_back(p.point_confidences[m]);
      }
    }
    if (kept.point_indices.size() >= cfg.min_proposal_points) out.push_back(std::move(kept));
  }
  return out;
}

PseudoLabels pseudo_offsets(const ProposalSet& refined, std::span<const Vec3f> points) {
  PseudoLabels out;
  out.labels = OffsetField::zeros(points.size());
  out.proposals = refined;
  for (std::size_t k = 0; k < out.proposals.size(); ++k) {
    auto& p = out.proposals[k];
    require(!p.point_indices.empty(), "pseudo_offsets: proposal " + std::to_string(k) + " is empty");
    p.validate();
    Vec3d sum = Vec3d::Zero();
    for (Index i : p.point_indices) {
      require(i < points.size(), "pseudo_offsets: member " + std::to_string(i) + " out of bounds");
      require(!out.labels.valid[i], "pseudo_offsets: proposals overlap at point " + std::to_string(i));
      out.labels.valid[i] = 1;
      sum += points[i].cast<double>();
    }
    const Vec3d center = sum / static_cast<double>(p.point_indices.size());
    p.center = center;
    for (Index i : p.point_indices) out.labels.offsets[i] = center - points[i].cast<double>();
  }
  return out;
}

OffsetLoss offset_loss(const OffsetField& pred, const OffsetField& base_labels,
                       const OffsetField& pseudo_labels) {
  const std::size_t n = pred.size();
  require(base_labels.size() == n && pseudo_labels.size() == n,
          "offset_loss: prediction and label lengths differ");
  pred.validate();
  base_labels.validate();
  pseudo_labels.validate();
  double sums[2] = {0.0, 0.0};
  std::size_t counts[2] = {0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    require(!(base_labels.valid[i] && pseudo_labels.valid[i]),
            "offset_loss: base and pseudo label masks overlap at point " + std::to_string(i));
    const OffsetField* label = base_labels.valid[i] ? &base_labels
                               : pseudo_labels.valid[i] ? &pseudo_labels
                                                        : nullptr;
    if (!label) continue;
    const int part = label == &base_labels ? 0 : 1;
    sums[part] += (pred.offsets[i] - label->offsets[i]).cwiseAbs().sum();
    ++counts[part];
  }
  OffsetLoss loss;
  loss.base = counts[0] ? sums[0] / static_cast<double>(counts[0]) : 0.0;
  loss.novel = counts[1] ? sums[1] / static_cast<double>(counts[1]) : 0.0;
  loss.total = loss.base + loss.novel;
  return loss;
}

}  // namespace owl3d
