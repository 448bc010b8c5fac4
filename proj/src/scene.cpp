#include "owl3d/scene.hpp"

#include <cmath>
#include <set>

namespace owl3d {
namespace {

std::string at_index(const char* field, std::size_t i) {
  return std::string(field) + "[" + std::to_string(i) + "]";
}

void require_length(std::size_t actual, std::size_t expected, const char* field) {
  require(actual == expected, std::string("length mismatch for `") + field + "`: expected " +
                                  std::to_string(expected) + ", got " + std::to_string(actual));
}

}  // namespace

EmbeddingMatrix EmbeddingMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  EmbeddingMatrix m(rows.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].size() == dim, "embedding rows have inconsistent dimension at row " +
                                       std::to_string(i));
    for (std::size_t j = 0; j < dim; ++j) m.values_(i, j) = rows[i][j];
  }
  return m;
}

void EmbeddingMatrix::normalize_rows() {
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    const double norm = values_.row(i).norm();
    require(norm > 0.0 && std::isfinite(norm),
            "cannot normalize embedding row " + std::to_string(i) + " (norm " +
                std::to_string(norm) + ")");
    values_.row(i) /= norm;
  }
  normalized_ = true;
}

bool EmbeddingMatrix::rows_unit_norm() const {
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    if (std::abs(values_.row(i).norm() - 1.0) > kNormTolerance) return false;
  }
  return true;
}

void EmbeddingMatrix::check_finite(const char* what) const {
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      require(std::isfinite(values_(i, j)), std::string(what) + ": non-finite value at row " +
                                                std::to_string(i) + ", column " +
                                                std::to_string(j));
    }
  }
}

void ScenePointCloud::derive_unlabeled_mask() {
  unlabeled_mask.assign(points.size(), 1);
  if (sem_labels.empty()) return;
  for (std::size_t i = 0; i < points.size() && i < sem_labels.size(); ++i) {
    unlabeled_mask[i] = sem_labels[i] == kIgnoreClass ? 1 : 0;
  }
}

void ScenePointCloud::validate() const {
  const std::size_t n = points.size();
  for (std::size_t i = 0; i < n; ++i) {
    require(points[i].allFinite(), "non-finite coordinate in " + at_index("points", i));
  }
  if (!colors.empty()) {
    require_length(colors.size(), n, "colors");
    for (std::size_t i = 0; i < n; ++i) {
      require(colors[i].allFinite() && colors[i].minCoeff() >= 0.0f && colors[i].maxCoeff() <= 1.0f,
              "color outside [0,1] in " + at_index("colors", i));
    }
  }
  if (!sem_labels.empty()) require_length(sem_labels.size(), n, "sem_labels");
  if (!inst_labels.empty()) require_length(inst_labels.size(), n, "inst_labels");
  require_length(unlabeled_mask.size(), n, "unlabeled_mask");
  if (!sem_labels.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      require(sem_labels[i] == kIgnoreClass || unlabeled_mask[i] == 0,
              "annotated point marked unlabeled at " + at_index("unlabeled_mask", i));
    }
  }
}

void CameraFrame::validate() const {
  const std::string where = "frame " + std::to_string(id) + ": ";
  require(width > 0 && height > 0, where + "image size must be positive");
  require(std::isfinite(fx) && std::isfinite(fy) && fx > 0.0 && fy > 0.0,
          where + "`fx`/`fy` must be finite and > 0");
  require(std::isfinite(cx) && std::isfinite(cy), where + "`cx`/`cy` must be finite");
  require(rotation.allFinite() && translation.allFinite(), where + "non-finite pose");
  const double ortho_error = (rotation.transpose() * rotation - Mat3d::Identity()).cwiseAbs().maxCoeff();
  require(ortho_error <= 1e-6, where + "`rotation` is not orthonormal (error " +
                                   std::to_string(ortho_error) + ")");
  require(rotation.determinant() > 0.0, where + "`rotation` is a reflection");
  require_length(depth.size(), static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
                 "depth");
  for (std::size_t i = 0; i < depth.size(); ++i) {
    require(std::isfinite(depth[i]) && depth[i] >= 0.0f,
            where + "invalid value " + std::to_string(depth[i]) + " in " + at_index("depth", i));
  }
}

std::string_view to_string(CaptionLevel level) {
  switch (level) {
    case CaptionLevel::kScene:
      return "scene";
    case CaptionLevel::kView:
      return "view";
    case CaptionLevel::kEntity:
      return "entity";
  }
  return "unknown";
}

CaptionLevel parse_caption_level(std::string_view text) {
  if (text == "scene") return CaptionLevel::kScene;
  if (text == "view") return CaptionLevel::kView;
  if (text == "entity") return CaptionLevel::kEntity;
  throw ValidationError("unknown caption level `" + std::string(text) + "`");
}

void CaptionRecord::validate(std::optional<std::size_t> num_points) const {
  require(!text.empty(), "caption record has empty `text`");
  require(is_sorted_unique(point_indices),
          "caption record `point_indices` must be strictly increasing");
  if (num_points && !point_indices.empty()) {
    require(point_indices.back() < *num_points,
            "caption record index " + std::to_string(point_indices.back()) +
                " out of bounds for " + std::to_string(*num_points) + " points");
  }
}

const std::string& CategoryVocabulary::name(std::size_t class_id) const {
  require(class_id < num_classes(), "class id " + std::to_string(class_id) + " out of range");
  return class_id < base_names.size() ? base_names[class_id]
                                      : novel_names[class_id - base_names.size()];
}

void CategoryVocabulary::validate() const {
  std::set<std::string> seen;
  for (const auto* names : {&base_names, &novel_names}) {
    for (const auto& n : *names) {
      require(seen.insert(n).second, "duplicate class name `" + n + "` in vocabulary");
    }
  }
  require(embeddings.rows() == num_classes(),
          "vocabulary has " + std::to_string(num_classes()) + " names but " +
              std::to_string(embeddings.rows()) + " embeddings");
  embeddings.check_finite("vocabulary embeddings");
  require(embeddings.rows_unit_norm(), "vocabulary embeddings must have unit L2 norm");
}

void PipelineConfig::validate() const {
  require(voxel_size > 0.0 && std::isfinite(voxel_size), "`voxel_size` must be > 0");
  require(nn_radius > 0.0 && std::isfinite(nn_radius), "`nn_radius` must be > 0");
  require(delta > 0.0 && delta <= 1.0, "`delta` must lie in (0, 1]");
  require(gamma >= 1, "`gamma` must be >= 1");
  require(alpha1 >= 0.0 && alpha2 >= 0.0 && alpha3 >= 0.0, "caption loss weights must be >= 0");
  require(eta >= 0.0 && eta <= 1.0, "`eta` must lie in [0, 1]");
  require(tau_soft >= 0.0 && tau_soft <= 1.0, "`tau_soft` must lie in [0, 1]");
  require(grouping_radius > 0.0 && std::isfinite(grouping_radius), "`grouping_radius` must be > 0");
  require(min_proposal_points >= 1, "`min_proposal_points` must be >= 1");
  require(stride >= 1, "`stride` must be >= 1");
  require(min_view_jaccard >= 0.0 && min_view_jaccard <= 1.0,
          "`min_view_jaccard` must lie in [0, 1]");
  require(binary_threshold >= 0.0 && binary_threshold <= 1.0,
          "`binary_threshold` must lie in [0, 1]");
}

void SceneBundle::validate() const {
  cloud.validate();
  const std::size_t n = cloud.size();
  std::set<std::uint32_t> ids;
  for (const auto& f : frames) {
    f.validate();
    require(ids.insert(f.id).second, "duplicate frame id " + std::to_string(f.id));
  }
  if (!gt_sem_labels.empty()) require_length(gt_sem_labels.size(), n, "gt_sem_labels");
  if (!gt_offsets.empty()) require_length(gt_offsets.size(), n, "gt_offsets");
  if (!pred_offsets.empty()) require_length(pred_offsets.size(), n, "pred_offsets");
  if (!confidences.empty()) require_length(confidences.size(), n, "confidences");
  if (!binary_scores.empty()) require_length(binary_scores.size(), n, "binary_scores");
  for (const auto* field : {&gt_offsets, &pred_offsets}) {
    for (std::size_t i = 0; i < field->size(); ++i) {
      require((*field)[i].allFinite(), "non-finite offset at index " + std::to_string(i));
    }
  }
  for (const auto* field : {&confidences, &binary_scores}) {
    for (std::size_t i = 0; i < field->size(); ++i) {
      const float v = (*field)[i];
      require(std::isfinite(v) && v >= 0.0f && v <= 1.0f,
              "score outside [0,1] at index " + std::to_string(i));
    }
  }
  for (auto c : base_classes) {
    require(c < class_names.size(), "base class id " + std::to_string(c) + " out of range");
  }
  for (auto c : novel_classes) {
    require(c < class_names.size(), "novel class id " + std::to_string(c) + " out of range");
  }
}

}  // namespace owl3d
