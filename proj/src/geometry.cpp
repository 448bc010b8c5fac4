#include "owl3d/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace owl3d {

std::vector<Vec3d> backproject(const CameraFrame& frame, int stride) {
  require(stride >= 1, "backprojection stride must be >= 1");
  const int rows = (frame.height + stride - 1) / stride;
  std::vector<std::vector<Vec3d>> per_row(static_cast<std::size_t>(rows));

#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int v = r * stride;
    auto& out = per_row[static_cast<std::size_t>(r)];
    for (int u = 0; u < frame.width; u += stride) {
      const double d = frame.depth_at(u, v);
      if (d <= 0.0) continue;
      const Vec3d cam((u - frame.cx) * d / frame.fx, (v - frame.cy) * d / frame.fy, d);
      out.push_back(frame.rotation * cam + frame.translation);
    }
  }

  std::size_t total = 0;
  for (const auto& r : per_row) total += r.size();
  std::vector<Vec3d> points;
  points.reserve(total);
  for (const auto& r : per_row) points.insert(points.end(), r.begin(), r.end());
  return points;
}

std::optional<PixelProjection> project(const CameraFrame& frame, const Vec3d& world) {
  const Vec3d cam = frame.rotation.transpose() * (world - frame.translation);
  if (cam.z() <= 0.0) return std::nullopt;
  return PixelProjection{frame.fx * cam.x() / cam.z() + frame.cx,
                         frame.fy * cam.y() / cam.z() + frame.cy, cam.z()};
}

VoxelKey voxel_key(const Vec3d& p, double voxel_size) {
  VoxelKey key;
  for (int a = 0; a < 3; ++a) {
    const double q = std::floor(p[a] / voxel_size);
    require(std::abs(q) < 4.0e18, "coordinate too large to voxelize");
    key[static_cast<std::size_t>(a)] = static_cast<std::int64_t>(q);
  }
  return key;
}

Vec3d voxel_center(const VoxelKey& key, double voxel_size) {
  return Vec3d((static_cast<double>(key[0]) + 0.5) * voxel_size,
               (static_cast<double>(key[1]) + 0.5) * voxel_size,
               (static_cast<double>(key[2]) + 0.5) * voxel_size);
}

std::size_t VoxelSet::num_points() const {
  std::size_t n = 0;
  for (const auto& [key, members] : cells) n += members.size();
  return n;
}

namespace {

template <typename Point>
VoxelSet voxelize_impl(std::span<const Point> points, double voxel_size) {
  require(voxel_size > 0.0 && std::isfinite(voxel_size), "voxel size must be > 0");
  std::vector<VoxelKey> keys(points.size());

#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < points.size(); ++i) {
    keys[i] = voxel_key(points[i].template cast<double>(), voxel_size);
  }

  VoxelSet set;
  set.voxel_size = voxel_size;
  for (std::size_t i = 0; i < points.size(); ++i) {
    set.cells[keys[i]].push_back(static_cast<Index>(i));
  }
  return set;
}

}  // namespace

VoxelSet voxelize(std::span<const Vec3f> points, double voxel_size) {
  return voxelize_impl(points, voxel_size);
}

VoxelSet voxelize(std::span<const Vec3d> points, double voxel_size) {
  return voxelize_impl(points, voxel_size);
}

std::int64_t lattice_radius_sq(double radius, double voxel_size) {
  require(radius >= 0.0 && voxel_size > 0.0, "radius must be >= 0 and voxel size > 0");
  const double units = radius / voxel_size;
  return static_cast<std::int64_t>(std::floor(units * units + 1e-9));
}

std::vector<VoxelKey> lattice_ball(double radius, double voxel_size) {
  const std::int64_t limit = lattice_radius_sq(radius, voxel_size);
  const auto reach = static_cast<std::int64_t>(std::floor(std::sqrt(static_cast<double>(limit)))) + 1;
  std::vector<VoxelKey> offsets;
  for (std::int64_t x = -reach; x <= reach; ++x) {
    for (std::int64_t y = -reach; y <= reach; ++y) {
      for (std::int64_t z = -reach; z <= reach; ++z) {
        if (x * x + y * y + z * z <= limit) offsets.push_back({x, y, z});
      }
    }
  }
  // Nearest offsets first so the common hit exits early.
  std::stable_sort(offsets.begin(), offsets.end(), [](const VoxelKey& a, const VoxelKey& b) {
    return a[0] * a[0] + a[1] * a[1] + a[2] * a[2] < b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
  });
  return offsets;
}

IndexSet frustum_overlap(const ScenePointCloud& scene, std::span<const Vec3d> backprojected,
                         const PipelineConfig& cfg) {
  require(cfg.voxel_size > 0.0 && cfg.nn_radius > 0.0, "voxel_size and nn_radius must be > 0");
  if (backprojected.empty() || scene.points.empty()) return {};

  std::unordered_set<VoxelKey, VoxelKeyHash> occupied;
  occupied.reserve(backprojected.size());
  for (const auto& p : backprojected) occupied.insert(voxel_key(p, cfg.voxel_size));

  const VoxelSet scene_voxels = voxelize(std::span<const Vec3f>(scene.points), cfg.voxel_size);
  std::vector<const std::pair<const VoxelKey, IndexSet>*> cells;
  cells.reserve(scene_voxels.cells.size());
  for (const auto& cell : scene_voxels.cells) cells.push_back(&cell);

  const auto offsets = lattice_ball(cfg.nn_radius, cfg.voxel_size);
  std::vector<std::uint8_t> hit(cells.size(), 0);

#pragma omp parallel for schedule(dynamic, 256)
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const VoxelKey& k = cells[c]->first;
    for (const auto& d : offsets) {
      if (occupied.count({k[0] + d[0], k[1] + d[1], k[2] + d[2]})) {
        hit[c] = 1;
        break;
      }
    }
  }

  IndexSet result;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (hit[c]) result.insert(result.end(), cells[c]->second.begin(), cells[c]->second.end());
  }
  std::sort(result.begin(), result.end());
  return result;
}

}  // namespace owl3d
