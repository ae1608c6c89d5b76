#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "geoicl/types.hpp"

namespace geoicl {

inline constexpr std::string_view kDatasetSchemaVersion = "v1";

struct LoadOptions {
  bool lenient = false;        // report-and-skip instead of fail-fast
  std::string image_root;      // defaults to the dataset file's directory
};

struct LoadIssue {
  std::size_t line = 0;
  std::string reason;
};

struct LoadResult {
  Dataset records;
  std::vector<LoadIssue> skipped;  // populated only under lenient
};

// One JSON object per line. Fails fast on the first invalid record unless
// opts.lenient is set; image references must resolve (path exists, or inline
// base64 decodes to a PNG).
LoadResult load_dataset(const std::filesystem::path& path,
                        std::string_view schema_version = kDatasetSchemaVersion,
                        const LoadOptions& opts = {});

// Canonical form: fixed key order, one record per line. write(load(f)) is a
// fixed point byte-for-byte.
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
std::string record_to_json_line(const GeoRecord& rec);

Dataset filter_split(const Dataset& dataset, Split split);

struct DatasetStats {
  static constexpr int kSources = 4;
  static constexpr int kTypes = 3;
  static constexpr int kSplits = 3;
  // counts[source][qtype][split], synthetic records excluded
  std::array<std::array<std::array<std::size_t, kSplits>, kTypes>, kSources>
      counts{};
  // distinct image references per source (total / test split only)
  std::array<std::size_t, kSources> image_text_pairs{};
  std::array<std::size_t, kSources> image_text_pairs_test{};
  std::size_t total = 0;
  std::size_t synthetic = 0;

  std::size_t count(Source s, QuestionType t) const;
  std::size_t count_test(Source s, QuestionType t) const;
};

DatasetStats compute_stats(const Dataset& dataset);

// Text table shaped like the dataset-statistics tables in geometry QA
// papers: one row per question kind, "N(T)" cells, "-" for empty.
std::string render_stats_table(const DatasetStats& stats);

ImageRaster load_image(const GeoRecord& rec,
                       const std::filesystem::path& image_root);

}  // namespace geoicl
