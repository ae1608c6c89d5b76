#include "geoicl/png_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <memory>

namespace geoicl {

namespace {

struct MemCursor {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t off;
};

void mem_read(png_structp png, png_bytep out, png_size_t len) {
  auto* cur = static_cast<MemCursor*>(png_get_io_ptr(png));
  if (cur->off + len > cur->size) png_error(png, "read past end of PNG buffer");
  std::memcpy(out, cur->data + cur->off, len);
  cur->off += len;
}

void mem_write(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void mem_flush(png_structp) {}

// State for one decode/encode lives on the heap: libpng reports errors via
// longjmp, which must not cross frames holding non-trivial locals.
struct ReadState {
  ImageRaster img;
  std::vector<png_bytep> rows;
};

struct WriteState {
  std::vector<std::uint8_t> bytes;
  std::vector<png_bytep> rows;
};

}  // namespace

ImageRaster decode_png(const std::uint8_t* data, std::size_t size) {
  if (size < 8 || png_sig_cmp(data, 0, 8) != 0)
    throw Error("Png", "not a PNG stream");

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("Png", "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("Png", "png_create_info_struct failed");
  }

  auto st = std::make_unique<ReadState>();
  MemCursor cur{data, size, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("Png", "corrupt PNG stream");
  }

  png_set_read_fn(png, &cur, mem_read);
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("Png", "unsupported channel count " + std::to_string(channels));
  }

  st->img.width = static_cast<int>(width);
  st->img.height = static_cast<int>(height);
  st->img.channels = channels;
  st->img.pixels.resize(static_cast<std::size_t>(width) * height * channels);
  st->rows.resize(height);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (png_uint_32 y = 0; y < height; ++y)
    st->rows[y] = st->img.pixels.data() + y * stride;

  png_read_image(png, st->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return std::move(st->img);
}

ImageRaster read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("Io", "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_png(bytes.data(), bytes.size());
}

std::vector<std::uint8_t> encode_png(const ImageRaster& img) {
  if (!img.valid()) throw Error("Png", "invalid raster");

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("Png", "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("Png", "png_create_info_struct failed");
  }

  auto st = std::make_unique<WriteState>();
  st->rows.resize(img.height);
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y)
    st->rows[y] = const_cast<png_bytep>(img.pixels.data() + y * stride);

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("Png", "PNG encode failed");
  }

  png_set_write_fn(png, &st->bytes, mem_write, mem_flush);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, st->rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return std::move(st->bytes);
}

void write_png(const ImageRaster& img, const std::filesystem::path& path) {
  auto bytes = encode_png(img);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("Io", "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("Io", "short write to " + path.string());
}

}  // namespace geoicl
