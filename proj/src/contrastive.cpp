#include "geoicl/contrastive.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace geoicl {

namespace {

void check_batch(const Matrix& text_embs, const Matrix& image_embs,
                 const InfoNCEConfig& cfg) {
  if (cfg.temperature <= 0.0)
    throw Error("InvalidArgument", "temperature must be positive");
  if (text_embs.rows() != image_embs.rows() ||
      text_embs.cols() != image_embs.cols())
    throw Error("DimMismatch", "text/image embedding shapes differ");
  if (text_embs.rows() < 1)
    throw Error("InvalidArgument", "empty contrastive batch");
  if (!text_embs.allFinite() || !image_embs.allFinite())
    throw Error("NonFinite", "non-finite embeddings in batch");
}

// Row-wise log-softmax diagonal terms: returns
// (1/N) sum_i [lse(L.row(i)) - L(i,i)], computed stably.
double diagonal_cross_entropy(const Matrix& logits) {
  const Eigen::Index n = logits.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    total += lse - logits(i, i);
  }
  return total / static_cast<double>(n);
}

// d/dL of diagonal_cross_entropy: (softmax_rows(L) - I) / N.
Matrix diagonal_cross_entropy_grad(const Matrix& logits) {
  const Eigen::Index n = logits.rows();
  Matrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
    g.row(i) = (e / e.sum()).matrix();
    g(i, i) -= 1.0;
  }
  return g / static_cast<double>(n);
}

AdapterGradients zero_gradients(const AdapterParams& params) {
  AdapterGradients g;
  for (int l = 0; l < 3; ++l) {
    g.layers[l].weights = Matrix::Zero(params.layers[l].weights.rows(),
                                       params.layers[l].weights.cols());
    g.layers[l].bias = Vector::Zero(params.layers[l].bias.size());
  }
  return g;
}

// Backprop one sample through a tower; accumulates into grads.
void adapter_backward(const AdapterParams& params,
                      const AdapterForwardCache& cache,
                      const Eigen::Ref<const Vector>& g_output,
                      AdapterGradients& grads) {
  // Through y = z / |z|: dz = (g - (y . g) y) / |z|.
  Vector g_pre_norm =
      (g_output - cache.output.dot(g_output) * cache.output) / cache.norm;

  // Layer 3 (linear, no activation).
  grads.layers[2].weights.noalias() += cache.hidden2 * g_pre_norm.transpose();
  grads.layers[2].bias += g_pre_norm;
  Vector g_hidden2 = params.layers[2].weights * g_pre_norm;

  // ReLU subgradient: 0 at 0.
  Vector g_pre2 =
      (cache.pre2.array() > 0.0).select(g_hidden2.array(), 0.0).matrix();
  grads.layers[1].weights.noalias() += cache.hidden1 * g_pre2.transpose();
  grads.layers[1].bias += g_pre2;
  Vector g_hidden1 = params.layers[1].weights * g_pre2;

  Vector g_pre1 =
      (cache.pre1.array() > 0.0).select(g_hidden1.array(), 0.0).matrix();
  grads.layers[0].weights.noalias() += cache.input * g_pre1.transpose();
  grads.layers[0].bias += g_pre1;
}

void momentum_step(AdapterParams& params, AdapterGradients& velocity,
                   const AdapterGradients& g, const TrainerConfig& cfg) {
  for (int l = 0; l < 3; ++l) {
    if (cfg.optimizer == Optimizer::MomentumSgd) {
      velocity.layers[l].weights =
          cfg.momentum * velocity.layers[l].weights + g.layers[l].weights;
      velocity.layers[l].bias =
          cfg.momentum * velocity.layers[l].bias + g.layers[l].bias;
      params.layers[l].weights -= cfg.learning_rate * velocity.layers[l].weights;
      params.layers[l].bias -= cfg.learning_rate * velocity.layers[l].bias;
    } else {
      params.layers[l].weights -= cfg.learning_rate * g.layers[l].weights;
      params.layers[l].bias -= cfg.learning_rate * g.layers[l].bias;
    }
  }
}

}  // namespace

double info_nce_loss(const Matrix& text_embs, const Matrix& image_embs,
                     const InfoNCEConfig& cfg) {
  check_batch(text_embs, image_embs, cfg);
  const Matrix logits = (text_embs * image_embs.transpose()) / cfg.temperature;
  double loss = diagonal_cross_entropy(logits);
  if (cfg.symmetric)
    loss = 0.5 * (loss + diagonal_cross_entropy(logits.transpose()));
  if (!std::isfinite(loss)) throw Error("NonFinite", "InfoNCE loss diverged");
  return loss;
}

BatchGradients info_nce_gradients(const AdapterParams& text_params,
                                  const AdapterParams& image_params,
                                  const std::vector<EmbeddingPair>& batch,
                                  const InfoNCEConfig& cfg) {
  if (batch.empty()) throw Error("InvalidArgument", "empty contrastive batch");
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index d = text_params.output_dim();
  if (image_params.output_dim() != d)
    throw Error("DimMismatch", "towers disagree on shared dimension");

  std::vector<AdapterForwardCache> text_caches(batch.size());
  std::vector<AdapterForwardCache> image_caches(batch.size());
  Matrix text_out(n, d), image_out(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    text_caches[i] = adapter_forward_cached(text_params, batch[i].text);
    image_caches[i] = adapter_forward_cached(image_params, batch[i].image);
    text_out.row(i) = text_caches[i].output.transpose();
    image_out.row(i) = image_caches[i].output.transpose();
  }
  check_batch(text_out, image_out, cfg);

  const Matrix logits = (text_out * image_out.transpose()) / cfg.temperature;
  double loss = diagonal_cross_entropy(logits);
  Matrix g_logits = diagonal_cross_entropy_grad(logits);
  if (cfg.symmetric) {
    loss = 0.5 * (loss + diagonal_cross_entropy(logits.transpose()));
    g_logits = 0.5 * (g_logits +
                      diagonal_cross_entropy_grad(logits.transpose()).transpose());
  }
  if (!std::isfinite(loss)) throw Error("NonFinite", "InfoNCE loss diverged");

  // dL/dT = G V / tau, dL/dV = G^T T / tau.
  const Matrix g_text = (g_logits * image_out) / cfg.temperature;
  const Matrix g_image = (g_logits.transpose() * text_out) / cfg.temperature;

  BatchGradients out;
  out.loss = loss;
  out.text = zero_gradients(text_params);
  out.image = zero_gradients(image_params);
  for (Eigen::Index i = 0; i < n; ++i) {
    adapter_backward(text_params, text_caches[i], g_text.row(i).transpose(),
                     out.text);
    adapter_backward(image_params, image_caches[i], g_image.row(i).transpose(),
                     out.image);
  }
  return out;
}

TrainOutputs train_retriever(const std::vector<EmbeddingPair>& pairs,
                             const TrainerConfig& trainer_cfg,
                             const InfoNCEConfig& infonce_cfg,
                             const std::vector<EmbeddingPair>* holdout) {
  if (trainer_cfg.learning_rate < 0.0)
    throw Error("InvalidArgument", "negative learning rate");
  if (trainer_cfg.batch_size < 2)
    throw Error("InvalidArgument", "contrastive batches need size >= 2");
  if (pairs.size() < 2 * static_cast<std::size_t>(trainer_cfg.batch_size))
    throw Error("InvalidArgument",
                "need at least 2x batch_size pairs, got " +
                    std::to_string(pairs.size()));

  const int d_text = static_cast<int>(pairs.front().text.size());
  const int d_image = static_cast<int>(pairs.front().image.size());
  for (const auto& p : pairs)
    if (p.text.size() != d_text || p.image.size() != d_image)
      throw Error("DimMismatch", "pair \"" + p.id + "\" has inconsistent dims");

  const auto t0 = std::chrono::steady_clock::now();
  TrainOutputs out;
  out.text = init_adapter(trainer_cfg.seed,
                          {d_text, trainer_cfg.hidden1, trainer_cfg.hidden2,
                           trainer_cfg.d_shared});
  out.image = init_adapter(trainer_cfg.seed + 1,
                           {d_image, trainer_cfg.hidden1, trainer_cfg.hidden2,
                            trainer_cfg.d_shared});
  AdapterGradients vel_text = zero_gradients(out.text);
  AdapterGradients vel_image = zero_gradients(out.image);

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(trainer_cfg.seed ^ 0x9e3779b97f4a7c15ull);

  for (int epoch = 0; epoch < trainer_cfg.epochs; ++epoch) {
    if (trainer_cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(trainer_cfg.batch_size)) {
      const std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(trainer_cfg.batch_size));
      std::vector<EmbeddingPair> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) batch.push_back(pairs[order[k]]);

      BatchGradients g =
          info_nce_gradients(out.text, out.image, batch, infonce_cfg);
      if (!std::isfinite(g.loss))
        throw Error("DivergedLoss", "epoch " + std::to_string(epoch));
      epoch_loss += g.loss * static_cast<double>(batch.size());
      seen += batch.size();
      momentum_step(out.text, vel_text, g.text, trainer_cfg);
      momentum_step(out.image, vel_image, g.image, trainer_cfg);
    }
    const double mean = epoch_loss / static_cast<double>(seen);
    if (!std::isfinite(mean))
      throw Error("DivergedLoss", "epoch " + std::to_string(epoch));
    out.report.epoch_loss.push_back(mean);
  }

  const std::vector<EmbeddingPair>& eval_pairs = holdout ? *holdout : pairs;
  out.report.recall_at_1 = recall_at_k(out.text, out.image, eval_pairs, 1);
  out.report.recall_at_5 = recall_at_k(out.text, out.image, eval_pairs, 5);
  out.report.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

double recall_at_k(const AdapterParams& text_params,
                   const AdapterParams& image_params,
                   const std::vector<EmbeddingPair>& pairs, int k) {
  if (pairs.empty()) return 0.0;
  if (k < 1) throw Error("InvalidArgument", "k must be >= 1");
  const Eigen::Index n = static_cast<Eigen::Index>(pairs.size());
  const Eigen::Index d = text_params.output_dim();
  Matrix text_out(n, d), image_out(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    text_out.row(i) = adapter_forward(text_params, pairs[i].text).transpose();
    image_out.row(i) = adapter_forward(image_params, pairs[i].image).transpose();
  }
  const Matrix scores = text_out * image_out.transpose();
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    // Rank of the true image: candidates strictly better, ties broken by
    // lower index.
    Eigen::Index rank = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      if (scores(i, j) > scores(i, i) || (scores(i, j) == scores(i, i) && j < i))
        ++rank;
    }
    if (rank < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace geoicl
