#pragma once

#include <filesystem>

#include "polymeasure/maskmeasure.hpp"

namespace polymeasure::io {

// Binary PGM (P5, maxval 255) with pixel values equal to label ids 0-4.
maskmeasure::LabelMap read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path,
               const maskmeasure::LabelMap& map);

}  // namespace polymeasure::io
