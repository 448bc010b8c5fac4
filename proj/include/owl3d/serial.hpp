#pragma once

// Single-threaded reference versions of the OpenMP kernels. They are written independently
// of the parallel code paths and are what the equivalence tests and benchmarks compare to.

#include <span>
#include <vector>

#include "owl3d/calibration.hpp"
#include "owl3d/common.hpp"
#include "owl3d/scene.hpp"

namespace owl3d::serial {

std::vector<Vec3d> backproject(const CameraFrame& frame, int stride = 1);

/// Dilates the occupied back-projected voxels by the lattice ball, then collects the scene
/// points of every covered voxel.
IndexSet frustum_overlap(const ScenePointCloud& scene, std::span<const Vec3d> backprojected,
                         const PipelineConfig& cfg);

/// Point-level union-find over a grid of edge `radius` with a 27-cell neighborhood.
std::vector<IndexSet> radius_components(std::span<const Vec3d> points,
                                        std::span<const Index> candidates, double radius,
                                        std::size_t min_size);

/// Blend only; inputs are assumed valid.
ScoreMatrix calibrate(const ScoreMatrix& base_scores, const ScoreMatrix& novel_scores,
                      std::span<const double> binary);

std::vector<float> render_depth(std::span<const Vec3f> points, const CameraFrame& camera);

}  // namespace owl3d::serial
