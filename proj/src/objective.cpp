#include "owl3d/objective.hpp"

#include <algorithm>
#include <random>
#include <unordered_set>

namespace owl3d {
namespace {

void check_pair(const EmbeddingMatrix& pooled, const EmbeddingMatrix& text) {
  require(pooled.rows() >= 1, "contrastive loss needs at least one pair");
  require(pooled.rows() == text.rows() && pooled.dim() == text.dim(),
          "pooled and text embeddings must have identical shapes");
  pooled.check_finite("pooled embeddings");
  text.check_finite("text embeddings");
  require(pooled.rows_unit_norm(), "pooled embeddings must be L2 row-normalized");
  require(text.rows_unit_norm(), "text embeddings must be L2 row-normalized");
}

// Row-wise softmax of the logits and the mean cross-entropy against the diagonal.
double softmax_cross_entropy(const RowMatrix& logits, RowMatrix* probs) {
  const Eigen::Index n = logits.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) z += std::exp(logits(i, j) - m);
    total += (std::log(z) + m) - logits(i, i);
    if (probs) {
      for (Eigen::Index j = 0; j < n; ++j) (*probs)(i, j) = std::exp(logits(i, j) - m) / z;
    }
  }
  return total / static_cast<double>(n);
}

double raw_loss(const RowMatrix& pooled, const RowMatrix& text, double inv_tau) {
  const RowMatrix logits = inv_tau * (pooled * text.transpose());
  return std::max(0.0, softmax_cross_entropy(logits, nullptr));
}

RowMatrix random_unit_rows(Eigen::Index n, Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  RowMatrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = normal(rng);
    m.row(i).normalize();
  }
  return m;
}

}  // namespace

void TemperatureParam::apply_gradient(double grad, double learning_rate) {
  log_inv_tau = std::min(log_inv_tau - learning_rate * grad, std::log(kMaxInvTau));
}

Eigen::VectorXd pool_features(const EmbeddingMatrix& features, std::span<const Index> index_set) {
  require(!index_set.empty(), "cannot pool over an empty index set");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(features.dim()));
  for (Index i : index_set) {
    require(i < features.rows(), "pool index " + std::to_string(i) + " out of bounds for " +
                                     std::to_string(features.rows()) + " rows");
    sum += features.values().row(i).transpose();
  }
  return sum / static_cast<double>(index_set.size());
}

EmbeddingMatrix pool_and_normalize(const EmbeddingMatrix& features,
                                   std::span<const IndexSet> index_sets) {
  EmbeddingMatrix out(index_sets.size(), features.dim());
  RowMatrix& v = out.mutable_values();
  for (std::size_t r = 0; r < index_sets.size(); ++r) {
    v.row(static_cast<Eigen::Index>(r)) = pool_features(features, index_sets[r]).transpose();
  }
  out.normalize_rows();
  return out;
}

double contrastive_loss(const EmbeddingMatrix& pooled, const EmbeddingMatrix& text,
                        const TemperatureParam& temp) {
  check_pair(pooled, text);
  return raw_loss(pooled.values(), text.values(), temp.inv_tau());
}

ContrastiveGrad contrastive_grad(const EmbeddingMatrix& pooled, const EmbeddingMatrix& text,
                                 const TemperatureParam& temp) {
  check_pair(pooled, text);
  const RowMatrix& p = pooled.values();
  const RowMatrix& t = text.values();
  const Eigen::Index n = p.rows();
  const double s = temp.inv_tau();

  const RowMatrix logits = s * (p * t.transpose());
  RowMatrix g(n, n);
  ContrastiveGrad out;
  out.loss = std::max(0.0, softmax_cross_entropy(logits, &g));
  g.diagonal().array() -= 1.0;
  g /= static_cast<double>(n);

  out.d_pooled = s * (g * t);
  out.d_text = s * (g.transpose() * p);
  const double d_theta = (g.array() * logits.array()).sum();
  const double clamp = std::log(TemperatureParam::kMaxInvTau);
  if (temp.log_inv_tau > clamp) {
    out.d_log_inv_tau = 0.0;
  } else if (temp.log_inv_tau == clamp) {
    out.d_log_inv_tau = std::max(d_theta, 0.0);
  } else {
    out.d_log_inv_tau = d_theta;
  }
  return out;
}

std::vector<std::pair<IndexSet, std::string>> dedup_captions(
    std::vector<std::pair<IndexSet, std::string>> pairs) {
  std::unordered_set<std::string> seen;
  std::vector<std::pair<IndexSet, std::string>> out;
  for (auto& p : pairs) {
    if (seen.insert(p.second).second) out.push_back(std::move(p));
  }
  return out;
}

double combined_caption_loss(double loss_scene, double loss_view, double loss_entity,
                             const PipelineConfig& cfg) {
  require(cfg.alpha1 >= 0.0 && cfg.alpha2 >= 0.0 && cfg.alpha3 >= 0.0,
          "caption loss weights must be >= 0");
  return cfg.alpha1 * loss_scene + cfg.alpha2 * loss_view + cfg.alpha3 * loss_entity;
}

GradcheckReport run_gradcheck(int trials, std::uint64_t seed, double step, double tolerance) {
  require(trials >= 1, "gradcheck needs at least one trial");
  require(step > 0.0, "finite-difference step must be > 0");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_dist(2, 8);
  std::uniform_int_distribution<int> d_dist(4, 16);
  std::uniform_real_distribution<double> tau_dist(0.05, 1.0);

  GradcheckReport report;
  report.trials = trials;
  report.tolerance = tolerance;
  auto rel = [](double a, double f) {
    return std::abs(a - f) / std::max({std::abs(a), std::abs(f), kGradcheckFloor});
  };

  for (int trial = 0; trial < trials; ++trial) {
    const int n = n_dist(rng);
    const int d = d_dist(rng);
    EmbeddingMatrix pooled(random_unit_rows(n, d, rng));
    EmbeddingMatrix text(random_unit_rows(n, d, rng));
    pooled.normalize_rows();
    text.normalize_rows();
    TemperatureParam temp{std::log(1.0 / tau_dist(rng))};
    const auto grad = contrastive_grad(pooled, text, temp);

    RowMatrix p = pooled.values();
    RowMatrix t = text.values();
    const double s = temp.inv_tau();
    auto check_entries = [&](RowMatrix& target, const RowMatrix& analytic) {
      for (Eigen::Index i = 0; i < target.rows(); ++i) {
        for (Eigen::Index j = 0; j < target.cols(); ++j) {
          const double saved = target(i, j);
          target(i, j) = saved + step;
          const double up = raw_loss(p, t, s);
          target(i, j) = saved - step;
          const double down = raw_loss(p, t, s);
          target(i, j) = saved;
          report.max_rel_error =
              std::max(report.max_rel_error, rel(analytic(i, j), (up - down) / (2.0 * step)));
        }
      }
    };
    check_entries(p, grad.d_pooled);
    check_entries(t, grad.d_text);
    const double up = raw_loss(p, t, std::exp(temp.log_inv_tau + step));
    const double down = raw_loss(p, t, std::exp(temp.log_inv_tau - step));
    report.max_rel_error =
        std::max(report.max_rel_error, rel(grad.d_log_inv_tau, (up - down) / (2.0 * step)));
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace owl3d
