#include "sgenet/font.hpp"

#include <stdexcept>
#include <string>

namespace sgenet {

namespace {

struct Glyph {
    char c;
    const char* rows[kGlyphH];  // '#' = on
};

constexpr Glyph kGlyphs[] = {
    {'a', {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
    {'b', {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."}},
    {'c', {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."}},
    {'d', {"####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."}},
    {'e', {"#####", "#....", "#....", "####.", "#....", "#....", "#####"}},
    {'f', {"#####", "#....", "#....", "####.", "#....", "#....", "#...."}},
    {'g', {".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"}},
    {'h', {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
    {'i', {".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."}},
    {'j', {"..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."}},
    {'k', {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"}},
    {'l', {"#....", "#....", "#....", "#....", "#....", "#....", "#####"}},
    {'m', {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"}},
    {'n', {"#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"}},
    {'o', {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
    {'p', {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."}},
    {'q', {".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"}},
    {'r', {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"}},
    {'s', {".####", "#....", "#....", ".###.", "....#", "....#", "####."}},
    {'t', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."}},
    {'u', {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
    {'v', {"#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."}},
    {'w', {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"}},
    {'x', {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"}},
    {'y', {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."}},
    {'z', {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"}},
    {'0', {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."}},
    {'1', {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."}},
    {'2', {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"}},
    {'3', {"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."}},
    {'4', {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."}},
    {'5', {"#####", "#....", "####.", "....#", "....#", "#...#", "####."}},
    {'6', {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."}},
    {'7', {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."}},
    {'8', {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."}},
    {'9', {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."}},
};

}  // namespace

std::array<uint8_t, kGlyphH> glyph_rows(char c) {
    for (const auto& g : kGlyphs) {
        if (g.c != c) continue;
        std::array<uint8_t, kGlyphH> out{};
        for (int r = 0; r < kGlyphH; ++r) {
            uint8_t bits = 0;
            for (int x = 0; x < kGlyphW; ++x)
                if (g.rows[r][x] == '#')
                    bits |= static_cast<uint8_t>(1u << (kGlyphW - 1 - x));
            out[static_cast<size_t>(r)] = bits;
        }
        return out;
    }
    throw std::invalid_argument(std::string("font: no glyph for '") + c + "'");
}

}  // namespace sgenet
