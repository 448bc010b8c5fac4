#include "owl3d/serial.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "owl3d/geometry.hpp"

namespace owl3d::serial {

std::vector<Vec3d> backproject(const CameraFrame& frame, int stride) {
  require(stride >= 1, "backprojection stride must be >= 1");
  std::vector<Vec3d> out;
  for (int v = 0; v < frame.height; v += stride) {
    for (int u = 0; u < frame.width; u += stride) {
      const double d = frame.depth_at(u, v);
      if (d <= 0.0) continue;
      const Vec3d cam((u - frame.cx) * d / frame.fx, (v - frame.cy) * d / frame.fy, d);
      out.push_back(frame.rotation * cam + frame.translation);
    }
  }
  return out;
}

IndexSet frustum_overlap(const ScenePointCloud& scene, std::span<const Vec3d> backprojected,
                         const PipelineConfig& cfg) {
  require(cfg.voxel_size > 0.0 && cfg.nn_radius > 0.0, "voxel_size and nn_radius must be > 0");
  std::set<VoxelKey> occupied;
  for (const auto& p : backprojected) occupied.insert(voxel_key(p, cfg.voxel_size));

  std::set<VoxelKey> covered;
  const auto ball = lattice_ball(cfg.nn_radius, cfg.voxel_size);
  for (const auto& k : occupied) {
    for (const auto& d : ball) covered.insert({k[0] + d[0], k[1] + d[1], k[2] + d[2]});
  }

  IndexSet out;
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    if (covered.count(voxel_key(scene.points[i].cast<double>(), cfg.voxel_size))) {
      out.push_back(static_cast<Index>(i));
    }
  }
  return out;
}

std::vector<IndexSet> radius_components(std::span<const Vec3d> points,
                                        std::span<const Index> candidates, double radius,
                                        std::size_t min_size) {
  require(radius > 0.0 && std::isfinite(radius), "grouping radius must be > 0");
  const std::size_t m = candidates.size();
  std::vector<std::size_t> parent(m);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  std::unordered_map<VoxelKey, std::vector<std::size_t>, VoxelKeyHash> grid;
  for (std::size_t a = 0; a < m; ++a) grid[voxel_key(points[candidates[a]], radius)].push_back(a);

  const double r2 = radius * radius;
  for (std::size_t a = 0; a < m; ++a) {
    const Vec3d& p = points[candidates[a]];
    const VoxelKey k = voxel_key(p, radius);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = grid.find({k[0] + dx, k[1] + dy, k[2] + dz});
          if (it == grid.end()) continue;
          for (std::size_t b : it->second) {
            if (b <= a) continue;
            const Vec3d e = p - points[candidates[b]];
            if (e.x() * e.x() + e.y() * e.y() + e.z() * e.z() <= r2) {
              parent[find(a)] = find(b);
            }
          }
        }
      }
    }
  }

  std::map<std::size_t, IndexSet> groups;
  for (std::size_t a = 0; a < m; ++a) groups[find(a)].push_back(candidates[a]);
  std::vector<IndexSet> out;
  for (auto& [root, g] : groups) {
    std::sort(g.begin(), g.end());
    if (g.size() >= min_size) out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end());
  return out;
}

ScoreMatrix calibrate(const ScoreMatrix& base_scores, const ScoreMatrix& novel_scores,
                      std::span<const double> binary) {
  ScoreMatrix out(base_scores.rows, base_scores.cols, base_scores.num_base);
  out.distribution = true;
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t c = 0; c < out.cols; ++c) {
      out(i, c) = base_scores(i, c) * (1.0 - binary[i]) + novel_scores(i, c) * binary[i];
    }
  }
  return out;
}

std::vector<float> render_depth(std::span<const Vec3f> points, const CameraFrame& camera) {
  std::vector<float> depth(static_cast<std::size_t>(camera.width) * static_cast<std::size_t>(camera.height), 0.0f);
  for (const auto& p : points) {
    const auto proj = project(camera, p.cast<double>());
    if (!proj) continue;
    const double u = std::round(proj->u);
    const double v = std::round(proj->v);
    if (u < 0.0 || v < 0.0 || u >= camera.width || v >= camera.height) continue;
    const auto d = static_cast<float>(proj->depth);
    if (d <= 0.0f) continue;
    float& slot = depth[static_cast<std::size_t>(v) * static_cast<std::size_t>(camera.width) +
                        static_cast<std::size_t>(u)];
    if (slot == 0.0f || d < slot) slot = d;
  }
  return depth;
}

}  // namespace owl3d::serial
