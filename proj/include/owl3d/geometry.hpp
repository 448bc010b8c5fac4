#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "owl3d/common.hpp"
#include "owl3d/scene.hpp"

namespace owl3d {

/// Lifts every `stride`-th pixel with positive depth to world coordinates:
/// R * ((u - cx) d / fx, (v - cy) d / fy, d) + t. Output is in row-major pixel order.
std::vector<Vec3d> backproject(const CameraFrame& frame, int stride = 1);

struct PixelProjection {
  double u;
  double v;
  double depth;
};

/// Projects a world point into the frame; nullopt when it lies at or behind the camera.
std::optional<PixelProjection> project(const CameraFrame& frame, const Vec3d& world);

using VoxelKey = std::array<std::int64_t, 3>;

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = 0x9E3779B97F4A7C15ull;
    for (auto c : k) {
      h ^= static_cast<std::uint64_t>(c) + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

/// floor(p / voxel_size), componentwise.
VoxelKey voxel_key(const Vec3d& p, double voxel_size);
Vec3d voxel_center(const VoxelKey& key, double voxel_size);

/// Partition of point indices into voxel cells; members of a cell are in increasing order.
struct VoxelSet {
  double voxel_size = 0.0;
  std::unordered_map<VoxelKey, IndexSet, VoxelKeyHash> cells;

  std::size_t num_points() const;
};

VoxelSet voxelize(std::span<const Vec3f> points, double voxel_size);
VoxelSet voxelize(std::span<const Vec3d> points, double voxel_size);

/// Largest squared lattice distance (in voxel units) counted as "within radius".
/// Lattice offsets d qualify when d.d <= (radius / voxel_size)^2 + 1e-9.
std::int64_t lattice_radius_sq(double radius, double voxel_size);

/// All integer offsets with squared length <= lattice_radius_sq(radius, voxel_size).
std::vector<VoxelKey> lattice_ball(double radius, double voxel_size);

/// Scene points whose voxel center lies within cfg.nn_radius of the center of some voxel
/// occupied by `backprojected`. Sorted ascending.
IndexSet frustum_overlap(const ScenePointCloud& scene, std::span<const Vec3d> backprojected,
                         const PipelineConfig& cfg);

}  // namespace owl3d
