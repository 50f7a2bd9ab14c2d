#pragma once

#include <string>

#include "vcsel/imaging.hpp"

namespace vcsel {

// PNG or PGM/PPM (P2, P3, P5, P6), detected from the file's magic bytes.
// Samples are scaled to 8 bits; PNG alpha is dropped.
RawImage read_image(const std::string& path);

// Binary P5 writer for 8-bit gray or P6 for RGB.
void write_pnm(const std::string& path, const RawImage& image);

// Debug dump: +1 -> 0 (black), -1 -> 255 (white), linear in between.
void write_pgm(const std::string& path, const PixelImage& image);

}  // namespace vcsel
