#pragma once

#include <filesystem>

#include "vser/image.hpp"

namespace vser {

// Cache file: magic "VSER", version u16, height u16, width u16, then
// height*width little-endian f32, row-major.
void save_image_cache(const std::filesystem::path& path, const Image& img);
Image load_image_cache(const std::filesystem::path& path);

// Binary PGM (P5), 8-bit; pixel = round(value * 255), clamped.
void save_pgm(const std::filesystem::path& path, const Image& img);
Image load_pgm(const std::filesystem::path& path);

uint64_t file_hash(const std::filesystem::path& path);

}  // namespace vser
