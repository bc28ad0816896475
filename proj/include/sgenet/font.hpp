#pragma once

#include <array>
#include <cstdint>

namespace sgenet {

// Embedded 5x7 dot-matrix glyphs for [a-z0-9]; row bits are MSB-left of the
// low 5 bits. Letters use the classic uppercase shapes.
constexpr int kGlyphW = 5;
constexpr int kGlyphH = 7;

std::array<uint8_t, kGlyphH> glyph_rows(char c);

}  // namespace sgenet
