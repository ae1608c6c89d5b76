#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geoicl/embed.hpp"

namespace geoicl {

struct ScoredId {
  std::string id;
  double score = 0.0;
  bool operator==(const ScoredId&) const = default;
};

// Exact cosine search over unit-norm rows. Immutable after build; queries
// are read-only and freely parallel.
class SimilarityIndex {
 public:
  SimilarityIndex() = default;

  // Rows are inserted in ascending id order regardless of map iteration.
  static SimilarityIndex build(const std::map<std::string, Vector>& entries);
  // Same, but detects duplicate ids in the input list.
  static SimilarityIndex build(
      const std::vector<std::pair<std::string, Vector>>& entries);

  std::size_t size() const { return ids_.size(); }
  int dim() const { return static_cast<int>(embeddings_.cols()); }
  const std::vector<std::string>& ids() const { return ids_; }
  const Matrix& embeddings() const { return embeddings_; }
  std::optional<std::size_t> row_of(const std::string& id) const;

 private:
  std::vector<std::string> ids_;
  Matrix embeddings_;  // one unit-norm row per id
};

// Descending cosine, ties broken by ascending id. The excluded id never
// appears. Length is min(k, remaining rows) unless strict_k is set, in which
// case an unsatisfiable k raises KTooLarge.
std::vector<ScoredId> top_k(const SimilarityIndex& index,
                            const Eigen::Ref<const Vector>& query,
                            std::size_t k,
                            const std::optional<std::string>& exclude = {},
                            bool strict_k = false);

// Element-wise equal to top_k per query. `exclusions` is either empty or
// aligned 1:1 with `queries`.
std::vector<std::vector<ScoredId>> top_k_batch(
    const SimilarityIndex& index, const std::vector<Vector>& queries,
    std::size_t k,
    const std::vector<std::optional<std::string>>& exclusions = {},
    bool strict_k = false);

void save_index(const SimilarityIndex& index,
                const std::filesystem::path& path);
SimilarityIndex load_index(const std::filesystem::path& path);

}  // namespace geoicl
