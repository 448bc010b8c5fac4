#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

namespace owl3d {

using Vec3f = Eigen::Vector3f;
using Vec3d = Eigen::Vector3d;
using Mat3d = Eigen::Matrix3d;

using Index = std::uint32_t;
/// Sorted, duplicate-free list of point indices.
using IndexSet = std::vector<Index>;

/// Semantic label of points without a (base) annotation.
inline constexpr std::uint32_t kIgnoreClass = std::numeric_limits<std::uint32_t>::max();
/// Instance id of points that belong to no instance.
inline constexpr std::uint32_t kNoInstance = std::numeric_limits<std::uint32_t>::max();

/// Raised when an input violates a documented invariant. The CLI maps it to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws ValidationError with `message` unless `condition` holds.
inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

bool is_sorted_unique(std::span<const Index> indices);

IndexSet set_union(std::span<const Index> a, std::span<const Index> b);
IndexSet set_intersection(std::span<const Index> a, std::span<const Index> b);
IndexSet set_difference(std::span<const Index> a, std::span<const Index> b);
std::size_t intersection_size(std::span<const Index> a, std::span<const Index> b);

/// Sorts and removes duplicates in place.
void canonicalize(IndexSet& indices);

}  // namespace owl3d
