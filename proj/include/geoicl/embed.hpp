#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string_view>

#include <Eigen/Dense>

#include "geoicl/types.hpp"

namespace geoicl {

using Scalar = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Deterministic stand-ins for pretrained text/image encoders. Real encoder
// outputs can be plugged in via import_external_embeddings; everything
// downstream (adapters, training, retrieval) is agnostic to the source.
struct TextFeaturizerConfig {
  int buckets = 512;  // >= 256
  int ngram_min = 2;
  int ngram_max = 3;
};

struct ImageFeaturizerConfig {
  int grid = 8;      // >= 4
  int channels = 1;  // rasters are converted to this count before featurizing
};

struct BaseFeaturizerConfig {
  TextFeaturizerConfig text;
  ImageFeaturizerConfig image;
};

// Hashed character n-gram counts, L2-normalized. dim = buckets.
Vector text_base_embed(std::string_view question_norm,
                       const TextFeaturizerConfig& cfg);

// Per-cell mean/std of intensity on a grid x grid partition, L2-normalized.
// dim = grid * grid * channels * 2. Cells outside a small image contribute
// zeros.
Vector image_base_embed(const ImageRaster& raster,
                        const ImageFeaturizerConfig& cfg);

struct AdapterLayer {
  Matrix weights;  // d_in x d_out
  Vector bias;     // d_out
};

// Three linear layers with ReLU after the first two and an L2-normalized
// output, bridging a frozen base encoder into the shared retrieval space.
struct AdapterParams {
  std::array<AdapterLayer, 3> layers;

  std::array<int, 4> dims() const;
  int input_dim() const { return static_cast<int>(layers[0].weights.rows()); }
  int output_dim() const { return static_cast<int>(layers[2].weights.cols()); }
};

// Per-parameter gradients share the adapter's shape.
using AdapterGradients = AdapterParams;

// He-style fan-in scaled uniform weights, zero biases. Fully determined by
// the seed; the same seed always reproduces the same bytes.
AdapterParams init_adapter(std::uint64_t seed, const std::array<int, 4>& dims);

// Intermediate activations kept for backpropagation.
struct AdapterForwardCache {
  Vector input;
  Vector pre1, hidden1;  // layer 1 pre-activation / ReLU output
  Vector pre2, hidden2;
  Vector pre_norm;       // layer 3 output before L2 normalization
  double norm = 0.0;
  Vector output;         // unit length
};

AdapterForwardCache adapter_forward_cached(const AdapterParams& params,
                                           const Eigen::Ref<const Vector>& x);
Vector adapter_forward(const AdapterParams& params,
                       const Eigen::Ref<const Vector>& x);

// JSON-lines of {"id": ..., "vector": [...]}. All vectors must share one
// dimension and every id must belong to the known set.
std::map<std::string, Vector> import_external_embeddings(
    const std::filesystem::path& path, const std::set<std::string>& known_ids);

struct RetrieverCheckpoint {
  std::uint64_t seed = 0;
  AdapterParams text;
  AdapterParams image;
  BaseFeaturizerConfig featurizer;
};

void save_checkpoint(const RetrieverCheckpoint& ckpt,
                     const std::filesystem::path& path);
RetrieverCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace geoicl
