#include "owl3d/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>

namespace owl3d {
namespace {

std::string row_msg(const char* what, std::size_t row) {
  return std::string(what) + " (row " + std::to_string(row) + ")";
}

// Smallest row index for which `bad` holds.
template <typename Pred>
std::optional<std::size_t> first_bad_row(std::size_t rows, Pred bad) {
  std::size_t found = rows;
#pragma omp parallel for schedule(static) reduction(min : found)
  for (std::size_t i = 0; i < rows; ++i) {
    if (bad(i)) found = std::min(found, i);
  }
  if (found == rows) return std::nullopt;
  return found;
}

}  // namespace

void ScoreMatrix::validate(double tolerance) const {
  require(values.size() == rows * cols, "score matrix size does not match its shape");
  require(num_base <= cols, "score matrix num_base exceeds column count");
  for (std::size_t i = 0; i < rows; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = (*this)(i, c);
      require(std::isfinite(v) && v >= 0.0 && v <= 1.0, row_msg("score outside [0,1]", i));
      sum += v;
    }
    if (distribution) {
      require(std::abs(sum - 1.0) <= tolerance, row_msg("score row does not sum to 1", i));
    }
  }
}

ScoreMatrix semantic_scores(const EmbeddingMatrix& features, const CategoryVocabulary& vocab,
                            std::span<const std::uint32_t> class_subset) {
  require(!class_subset.empty(), "semantic scores need a non-empty class subset");
  require(features.rows_unit_norm(), "features must be L2 row-normalized");
  require(features.dim() == vocab.embeddings.dim(),
          "feature dimension does not match vocabulary embedding dimension");
  const std::set<std::uint32_t> subset(class_subset.begin(), class_subset.end());
  for (auto c : subset) {
    require(c < vocab.num_classes(), "class " + std::to_string(c) + " not in vocabulary");
  }
  const std::vector<std::uint32_t> classes(subset.begin(), subset.end());

  const std::size_t n = features.rows();
  ScoreMatrix out(n, vocab.num_classes(), vocab.num_base());
  out.distribution = true;
  const RowMatrix& f = features.values();
  const RowMatrix& e = vocab.embeddings.values();

#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> logits(classes.size());
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < classes.size(); ++k) {
      logits[k] = f.row(static_cast<Eigen::Index>(i)).dot(e.row(classes[k]));
      m = std::max(m, logits[k]);
    }
    double z = 0.0;
    for (auto& l : logits) {
      l = std::exp(l - m);
      z += l;
    }
    for (std::size_t k = 0; k < classes.size(); ++k) out(i, classes[k]) = logits[k] / z;
  }
  return out;
}

double bce_loss(std::span<const double> s_b, std::span<const std::uint8_t> y_b) {
  require(s_b.size() == y_b.size(), "bce_loss: score and label lengths differ");
  require(!s_b.empty(), "bce_loss: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < s_b.size(); ++i) {
    require(y_b[i] <= 1, "bce_loss: labels must be 0/1");
    const double s = std::clamp(s_b[i], kBceEpsilon, 1.0 - kBceEpsilon);
    total += y_b[i] ? -std::log(s) : -std::log1p(-s);
  }
  return total / static_cast<double>(s_b.size());
}

ScoreMatrix calibrate(const ScoreMatrix& base_scores, const ScoreMatrix& novel_scores,
                      std::span<const double> binary, double tolerance) {
  const std::size_t n = base_scores.rows;
  const std::size_t k = base_scores.cols;
  const std::size_t nb = base_scores.num_base;
  require(novel_scores.rows == n && novel_scores.cols == k && novel_scores.num_base == nb,
          "base and novel score matrices must share shape and base/novel split");
  require(binary.size() == n, "binary score length does not match score rows");
  require(base_scores.values.size() == n * k && novel_scores.values.size() == n * k,
          "score matrix size does not match its shape");

  auto not_distribution = [&](const ScoreMatrix& s, std::size_t i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double v = s(i, c);
      if (!(v >= 0.0 && v <= 1.0)) return true;
      sum += v;
    }
    return std::abs(sum - 1.0) > tolerance;
  };
  const auto checks = {
      std::pair{"base scores must be zero on novel classes",
                first_bad_row(n, [&](std::size_t i) {
                  for (std::size_t c = nb; c < k; ++c) {
                    if (base_scores(i, c) != 0.0) return true;
                  }
                  return false;
                })},
      std::pair{"novel scores must be zero on base classes",
                first_bad_row(n, [&](std::size_t i) {
                  for (std::size_t c = 0; c < nb; ++c) {
                    if (novel_scores(i, c) != 0.0) return true;
                  }
                  return false;
                })},
      std::pair{"base scores are not a distribution",
                first_bad_row(n, [&](std::size_t i) { return not_distribution(base_scores, i); })},
      std::pair{"novel scores are not a distribution",
                first_bad_row(n, [&](std::size_t i) { return not_distribution(novel_scores, i); })},
      std::pair{"binary score outside [0,1]", first_bad_row(n, [&](std::size_t i) {
                  return !(binary[i] >= 0.0 && binary[i] <= 1.0);
                })}};
  for (const auto& [what, row] : checks) {
    if (row) throw ValidationError(row_msg(what, *row));
  }

  ScoreMatrix out(n, k, nb);
  out.distribution = true;
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    const double sb = binary[i];
    for (std::size_t c = 0; c < k; ++c) {
      out(i, c) = base_scores(i, c) * (1.0 - sb) + novel_scores(i, c) * sb;
    }
  }
  return out;
}

ProposalClass calibrate_proposal(std::span<const Index> members, const ScoreMatrix& point_scores) {
  require(!members.empty(), "cannot classify an empty proposal");
  require(point_scores.cols >= 1, "score matrix has no classes");
  std::vector<double> mean(point_scores.cols, 0.0);
  for (Index i : members) {
    require(i < point_scores.rows, "proposal member " + std::to_string(i) + " out of bounds");
    for (std::size_t c = 0; c < point_scores.cols; ++c) mean[c] += point_scores(i, c);
  }
  for (auto& m : mean) m /= static_cast<double>(members.size());
  const auto best = std::max_element(mean.begin(), mean.end());  // first maximum wins ties
  return {static_cast<std::uint32_t>(best - mean.begin()), *best};
}

}  // namespace owl3d
