#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "owl3d/common.hpp"
#include "owl3d/embedding.hpp"
#include "owl3d/scene.hpp"

namespace owl3d {

/// Learnable inverse temperature, stored as log(1/tau). The effective 1/tau is
/// exp(log_inv_tau) clamped to (0, kMaxInvTau].
struct TemperatureParam {
  static constexpr double kMaxInvTau = 100.0;
  static double default_log_inv_tau() { return std::log(1.0 / 0.07); }

  double log_inv_tau = default_log_inv_tau();

  double inv_tau() const { return std::min(std::exp(log_inv_tau), kMaxInvTau); }
  bool at_clamp() const { return log_inv_tau >= std::log(kMaxInvTau); }

  /// Gradient step on log_inv_tau; the result never exceeds log(kMaxInvTau).
  void apply_gradient(double grad, double learning_rate);
};

/// Mean of the selected rows.
Eigen::VectorXd pool_features(const EmbeddingMatrix& features, std::span<const Index> index_set);

/// Pools one row per index set; the result is row-normalized.
EmbeddingMatrix pool_and_normalize(const EmbeddingMatrix& features,
                                   std::span<const IndexSet> index_sets);

/// -(1/n) sum_i log softmax_j(p_i . t_j / tau)[i], evaluated with max-logit subtraction.
double contrastive_loss(const EmbeddingMatrix& pooled, const EmbeddingMatrix& text,
                        const TemperatureParam& temp);

struct ContrastiveGrad {
  double loss = 0.0;
  RowMatrix d_pooled;
  RowMatrix d_text;
  double d_log_inv_tau = 0.0;
};

/// Loss and analytic gradients w.r.t. pooled rows, text rows and log_inv_tau. Rows are
/// treated as free variables (no projection onto the unit sphere). At or past the
/// temperature clamp the log_inv_tau gradient is projected so a descent step cannot
/// raise 1/tau above the clamp.
ContrastiveGrad contrastive_grad(const EmbeddingMatrix& pooled, const EmbeddingMatrix& text,
                                 const TemperatureParam& temp);

/// Keeps the first occurrence of every exact caption string, preserving order.
std::vector<std::pair<IndexSet, std::string>> dedup_captions(
    std::vector<std::pair<IndexSet, std::string>> pairs);

double combined_caption_loss(double loss_scene, double loss_view, double loss_entity,
                             const PipelineConfig& cfg);

struct GradcheckReport {
  int trials = 0;
  double max_rel_error = 0.0;
  double tolerance = 1e-4;
  bool passed = false;
};

/// Random contrastive instances (n in [2,8], d in [4,16], unit rows, tau in [0.05, 1]):
/// analytic gradients vs central differences with the given step. Relative error is
/// |a - f| / max(|a|, |f|, kGradcheckFloor).
inline constexpr double kGradcheckFloor = 1e-3;
GradcheckReport run_gradcheck(int trials, std::uint64_t seed, double step = 1e-5,
                              double tolerance = 1e-4);

}  // namespace owl3d
