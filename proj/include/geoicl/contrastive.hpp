#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geoicl/embed.hpp"

namespace geoicl {

struct InfoNCEConfig {
  double temperature = 0.07;  // fixed, not learned
  bool symmetric = true;      // average text->image and image->text losses
};

enum class Optimizer { Sgd, MomentumSgd };

struct TrainerConfig {
  double learning_rate = 0.5;
  int batch_size = 32;
  int epochs = 100;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::MomentumSgd;
  double momentum = 0.9;
  bool shuffle = true;
  // Adapter tower shape: [d_in, hidden1, hidden2, d_shared] with d_in taken
  // from the data.
  int hidden1 = 256;
  int hidden2 = 256;
  int d_shared = 64;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean per-pair loss by epoch
  double recall_at_1 = 0.0;
  double recall_at_5 = 0.0;
  double wall_time_sec = 0.0;
};

// One question-image pair of base embeddings.
struct EmbeddingPair {
  std::string id;
  Vector text;
  Vector image;
};

// In-batch-negatives InfoNCE over unit-norm embeddings (rows). With
// L[i][j] = (T_i . V_j) / tau, the text->image direction is
// -(1/N) sum_i log softmax(L[i])[i]; the symmetric form averages both
// directions.
double info_nce_loss(const Matrix& text_embs, const Matrix& image_embs,
                     const InfoNCEConfig& cfg);

struct BatchGradients {
  AdapterGradients text;
  AdapterGradients image;
  double loss = 0.0;
};

// Analytic gradients for every weight and bias of both towers, backpropagated
// through the cosine logits, the output L2 normalization and the ReLUs
// (subgradient 0 at 0). Accumulation runs in batch index order.
BatchGradients info_nce_gradients(const AdapterParams& text_params,
                                  const AdapterParams& image_params,
                                  const std::vector<EmbeddingPair>& batch,
                                  const InfoNCEConfig& cfg);

struct TrainOutputs {
  AdapterParams text;
  AdapterParams image;
  TrainReport report;
};

// Minibatch SGD over the pairs. Deterministic given (seed, data, config):
// fixed shuffle order, fixed accumulation order. Throws DivergedLoss on a
// non-finite loss. Recall in the report is measured on `holdout` when
// provided, else on the training pairs.
TrainOutputs train_retriever(const std::vector<EmbeddingPair>& pairs,
                             const TrainerConfig& trainer_cfg,
                             const InfoNCEConfig& infonce_cfg,
                             const std::vector<EmbeddingPair>* holdout = nullptr);

// Fraction of text queries whose paired image lands in the cosine top-k.
double recall_at_k(const AdapterParams& text_params,
                   const AdapterParams& image_params,
                   const std::vector<EmbeddingPair>& pairs, int k);

}  // namespace geoicl
