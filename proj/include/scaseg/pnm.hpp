#ifndef SCASEG_PNM_HPP_
#define SCASEG_PNM_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace scaseg {

// 8-bit binary PPM (P6) / PGM (P5), maxval 255, single-whitespace headers.
struct PnmImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 for PGM, 3 for PPM
  std::vector<uint8_t> data;
};

// Throws FormatError naming the byte offset on malformed input.
PnmImage parse_pnm(std::span<const uint8_t> bytes);
PnmImage read_pnm(const std::string& path);

std::vector<uint8_t> encode_pnm(const PnmImage& image);
void write_pnm(const PnmImage& image, const std::string& path);

}  // namespace scaseg

#endif  // SCASEG_PNM_HPP_
