#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "woplearn/image.hpp"

namespace wopl {

// Portable bitmap I/O. Reads P1 and P4, writes P4. A set (black) bit is
// foreground (1).
BinaryImage decode_pbm(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_pbm(const BinaryImage& img);

BinaryImage read_image(const std::filesystem::path& path);
void write_image(const BinaryImage& img, const std::filesystem::path& path);

}  // namespace wopl
