#include "geoicl/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace geoicl {

using nlohmann::json;
using nlohmann::ordered_json;

SimilarityIndex SimilarityIndex::build(
    const std::map<std::string, Vector>& entries) {
  SimilarityIndex index;
  if (entries.empty()) return index;

  const Eigen::Index dim = entries.begin()->second.size();
  index.ids_.reserve(entries.size());
  index.embeddings_.resize(static_cast<Eigen::Index>(entries.size()), dim);
  Eigen::Index row = 0;
  for (const auto& [id, v] : entries) {  // std::map iterates in id order
    if (id.empty()) throw Error("InvalidArgument", "empty id");
    if (v.size() != dim)
      throw Error("DimMismatch", "id \"" + id + "\": expected dim " +
                                     std::to_string(dim) + ", got " +
                                     std::to_string(v.size()));
    if (!v.allFinite()) throw Error("NonFinite", "id \"" + id + "\"");
    if (std::abs(v.norm() - 1.0) > 1e-6)
      throw Error("InvalidArgument",
                  "id \"" + id + "\": embedding is not unit norm");
    index.embeddings_.row(row) = v.transpose();
    index.ids_.push_back(id);
    ++row;
  }
  return index;
}

SimilarityIndex SimilarityIndex::build(
    const std::vector<std::pair<std::string, Vector>>& entries) {
  std::map<std::string, Vector> by_id;
  for (const auto& [id, v] : entries)
    if (!by_id.emplace(id, v).second)
      throw Error("DuplicateId", "id \"" + id + "\"");
  return build(by_id);
}

std::optional<std::size_t> SimilarityIndex::row_of(const std::string& id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids_.begin());
}

std::vector<ScoredId> top_k(const SimilarityIndex& index,
                            const Eigen::Ref<const Vector>& query,
                            std::size_t k,
                            const std::optional<std::string>& exclude,
                            bool strict_k) {
  if (k < 1) throw Error("InvalidArgument", "k must be >= 1");
  if (index.size() == 0) throw Error("EmptyIndex", "index has no rows");
  if (query.size() != index.dim())
    throw Error("DimMismatch", "query dim " + std::to_string(query.size()) +
                                   " vs index dim " +
                                   std::to_string(index.dim()));

  const Vector scores = index.embeddings() * query;
  std::vector<std::size_t> rows;
  rows.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (exclude && index.ids()[i] == *exclude) continue;
    rows.push_back(i);
  }
  if (rows.empty()) throw Error("EmptyIndex", "no candidates after exclusion");
  if (strict_k && k > rows.size())
    throw Error("KTooLarge", "k=" + std::to_string(k) + " exceeds " +
                                 std::to_string(rows.size()) + " candidates");

  const std::size_t take = std::min(k, rows.size());
  const auto better = [&](std::size_t a, std::size_t b) {
    const double sa = scores[static_cast<Eigen::Index>(a)];
    const double sb = scores[static_cast<Eigen::Index>(b)];
    if (sa != sb) return sa > sb;
    return index.ids()[a] < index.ids()[b];
  };
  std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take),
                    rows.end(), better);

  std::vector<ScoredId> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    out.push_back({index.ids()[rows[i]],
                   scores[static_cast<Eigen::Index>(rows[i])]});
  return out;
}

std::vector<std::vector<ScoredId>> top_k_batch(
    const SimilarityIndex& index, const std::vector<Vector>& queries,
    std::size_t k, const std::vector<std::optional<std::string>>& exclusions,
    bool strict_k) {
  if (!exclusions.empty() && exclusions.size() != queries.size())
    throw Error("InvalidArgument",
                "exclusion list length " + std::to_string(exclusions.size()) +
                    " does not match " + std::to_string(queries.size()) +
                    " queries");
  std::vector<std::vector<ScoredId>> out;
  out.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i)
    out.push_back(top_k(index, queries[i], k,
                        exclusions.empty() ? std::nullopt : exclusions[i],
                        strict_k));
  return out;
}

void save_index(const SimilarityIndex& index,
                const std::filesystem::path& path) {
  ordered_json entries = ordered_json::array();
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto row = index.embeddings().row(static_cast<Eigen::Index>(i));
    // Rows of a column-major matrix are not contiguous; copy coefficient-wise.
    std::vector<double> v(static_cast<std::size_t>(row.size()));
    for (Eigen::Index j = 0; j < row.size(); ++j)
      v[static_cast<std::size_t>(j)] = row[j];
    entries.push_back(ordered_json{{"id", index.ids()[i]}, {"v", v}});
  }
  ordered_json j{{"schema", "geoicl/index/v1"},
                 {"dim", index.dim()},
                 {"entries", entries}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("Io", "cannot write " + path.string());
  out << j.dump() << '\n';
}

SimilarityIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("Io", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("Schema", std::string("bad index file: ") + e.what());
  }
  if (j.value("schema", "") != "geoicl/index/v1")
    throw Error("Schema", "unsupported index schema");
  std::map<std::string, Vector> entries;
  for (const auto& e : j.at("entries")) {
    auto id = e.at("id").get<std::string>();
    auto values = e.at("v").get<std::vector<double>>();
    if (entries.count(id)) throw Error("DuplicateId", "id \"" + id + "\"");
    entries.emplace(std::move(id),
                    Eigen::Map<const Vector>(
                        values.data(), static_cast<Eigen::Index>(values.size())));
  }
  return SimilarityIndex::build(entries);
}

}  // namespace geoicl
