#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace owl3d {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense n x d feature or text embeddings, one row per item.
class EmbeddingMatrix {
 public:
  static constexpr double kNormTolerance = 1e-6;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t dim) : values_(RowMatrix::Zero(rows, dim)) {}
  explicit EmbeddingMatrix(RowMatrix values) : values_(std::move(values)) {}

  static EmbeddingMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values_.cols()); }

  const RowMatrix& values() const { return values_; }
  /// Mutable access clears the normalized flag.
  RowMatrix& mutable_values() {
    normalized_ = false;
    return values_;
  }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dim(), dim()};
  }

  bool normalized() const { return normalized_; }

  /// Scales each row to unit L2 norm. Zero rows are rejected.
  void normalize_rows();

  /// True when every row has unit norm within kNormTolerance.
  bool rows_unit_norm() const;

  /// Throws ValidationError if any value is non-finite.
  void check_finite(const char* what) const;

 private:
  RowMatrix values_;
  bool normalized_ = false;
};

}  // namespace owl3d
