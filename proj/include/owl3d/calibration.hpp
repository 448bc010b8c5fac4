#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "owl3d/common.hpp"
#include "owl3d/embedding.hpp"
#include "owl3d/scene.hpp"

namespace owl3d {

/// n x k row-major scores. Columns [0, num_base) are base classes, the rest novel.
struct ScoreMatrix {
  static constexpr double kRowSumTolerance = 1e-6;

  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t num_base = 0;
  std::vector<double> values;
  bool distribution = false;

  ScoreMatrix() = default;
  ScoreMatrix(std::size_t n, std::size_t k, std::size_t base)
      : rows(n), cols(k), num_base(base), values(n * k, 0.0) {}

  double operator()(std::size_t i, std::size_t c) const { return values[i * cols + c]; }
  double& operator()(std::size_t i, std::size_t c) { return values[i * cols + c]; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }

  /// Entries in [0,1]; rows sum to one within `tolerance` when flagged as a distribution.
  void validate(double tolerance = kRowSumTolerance) const;
};

/// Softmax over cosine similarities between unit feature rows and the class embeddings in
/// `class_subset`; every other class gets exactly 0.
ScoreMatrix semantic_scores(const EmbeddingMatrix& features, const CategoryVocabulary& vocab,
                            std::span<const std::uint32_t> class_subset);

inline constexpr double kBceEpsilon = 1e-7;

/// Mean binary cross-entropy with s_b clamped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> s_b, std::span<const std::uint8_t> y_b);

/// s = s_B (1 - s_b) + s_N s_b, row-wise. Rejects (naming the row) a base matrix with
/// non-zero novel entries, a novel matrix with non-zero base entries, rows that are not
/// distributions, or s_b outside [0,1].
ScoreMatrix calibrate(const ScoreMatrix& base_scores, const ScoreMatrix& novel_scores,
                      std::span<const double> binary, double tolerance = ScoreMatrix::kRowSumTolerance);

struct ProposalClass {
  std::uint32_t class_id = 0;
  double confidence = 0.0;
};

/// Mean score row over the member points, then argmax (ties go to the lower class id).
ProposalClass calibrate_proposal(std::span<const Index> members, const ScoreMatrix& point_scores);

}  // namespace owl3d
