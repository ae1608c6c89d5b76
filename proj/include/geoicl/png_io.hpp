#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "geoicl/types.hpp"

namespace geoicl {

// 8-bit gray or RGB only; palette/16-bit/alpha inputs are converted on read.
ImageRaster decode_png(const std::uint8_t* data, std::size_t size);
ImageRaster read_png(const std::filesystem::path& path);

// Fixed compression settings so identical rasters produce identical bytes.
std::vector<std::uint8_t> encode_png(const ImageRaster& img);
void write_png(const ImageRaster& img, const std::filesystem::path& path);

}  // namespace geoicl
