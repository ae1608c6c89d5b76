#pragma once

// Shared fixture builders for the test suites.

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "geoicl/corpus.hpp"
#include "geoicl/png_io.hpp"
#include "geoicl/types.hpp"
#include "geoicl/util.hpp"

namespace geoicl::testing {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("geoicl_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline ImageRaster checker_image(int width, int height, int channels = 1,
                                 std::uint8_t a = 0, std::uint8_t b = 255) {
  ImageRaster img = make_raster(width, height, channels);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c)
        img.at(y, x, c) = ((x + y) % 2 == 0) ? a : b;
  return img;
}

inline ImageRef inline_ref(const ImageRaster& img) {
  ImageRef ref;
  ref.inline_b64 = base64_encode(encode_png(img));
  return ref;
}

// A 2x2 gray checkerboard; the cheapest valid inline image.
inline ImageRef tiny_image_ref() {
  static const ImageRef ref = inline_ref(checker_image(2, 2));
  return ref;
}

inline GeoRecord make_record(
    std::string id, std::string question, Split split = Split::Train,
    QuestionType qtype = QuestionType::Selection,
    AnswerValue answer = AnswerValue::make_choice(0, {"1", "2", "3", "4"}),
    Source source = Source::GeoMath) {
  GeoRecord rec;
  rec.id = std::move(id);
  rec.question_raw = std::move(question);
  rec.image = tiny_image_ref();
  rec.answer = std::move(answer);
  rec.qtype = qtype;
  rec.split = split;
  rec.source = source;
  return rec;
}

inline void write_lines(const std::filesystem::path& path,
                        const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  for (const auto& line : lines) out << line << '\n';
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// Decodes each record's own (usually inline) image reference.
inline std::function<ImageRaster(const GeoRecord&)> inline_image_provider() {
  return [](const GeoRecord& rec) { return load_image(rec, {}); };
}

}  // namespace geoicl::testing
