#include "woplearn/pbm.hpp"

#include <cctype>
#include <cstdint>
#include <limits>

#include "woplearn/binary_io.hpp"
#include "woplearn/errors.hpp"

namespace wopl {

namespace {

class HeaderScanner {
 public:
  explicit HeaderScanner(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int read_dimension(const char* name) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::uint64_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + static_cast<std::uint64_t>(bytes_[pos_] - '0');
      if (value > static_cast<std::uint64_t>(std::numeric_limits<int>::max()))
        throw ParseError(std::string("pbm ") + name + " too large", start);
      ++pos_;
    }
    if (pos_ == start) {
      if (pos_ >= bytes_.size()) throw ParseError(std::string("pbm header truncated before ") + name, pos_);
      throw ParseError(std::string("pbm ") + name + " is not a decimal number", pos_);
    }
    if (value == 0) throw ParseError(std::string("pbm ") + name + " must be >= 1", start);
    return static_cast<int>(value);
  }

  std::size_t pos_ = 0;
  std::span<const unsigned char> bytes_;
};

}  // namespace

BinaryImage decode_pbm(std::span<const unsigned char> bytes) {
  if (bytes.size() < 2) throw ParseError("pbm file too short for magic number", bytes.size());
  if (bytes[0] != 'P' || (bytes[1] != '1' && bytes[1] != '4'))
    throw ParseError("unsupported image format (expected P1 or P4 magic)", 0);
  const bool binary = bytes[1] == '4';

  HeaderScanner scan(bytes);
  scan.pos_ = 2;
  if (scan.pos_ < bytes.size() && !std::isspace(bytes[scan.pos_]) && bytes[scan.pos_] != '#')
    throw ParseError("missing whitespace after pbm magic number", scan.pos_);
  const int width = scan.read_dimension("width");
  const int height = scan.read_dimension("height");

  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  std::size_t pos = scan.pos_;
  if (binary) {
    if (pos >= bytes.size() || !std::isspace(bytes[pos]))
      throw ParseError("expected single whitespace before P4 raster", pos);
    ++pos;
    const std::size_t row_bytes = (static_cast<std::size_t>(width) + 7) / 8;
    const std::size_t need = row_bytes * static_cast<std::size_t>(height);
    if (bytes.size() - pos < need)
      throw ParseError("truncated P4 raster: need " + std::to_string(need) + " bytes, have " +
                           std::to_string(bytes.size() - pos),
                       bytes.size());
    for (int y = 0; y < height; ++y) {
      const unsigned char* row = bytes.data() + pos + static_cast<std::size_t>(y) * row_bytes;
      for (int x = 0; x < width; ++x)
        pixels[static_cast<std::size_t>(y) * width + x] = (row[x / 8] >> (7 - x % 8)) & 1U;
    }
  } else {
    std::size_t filled = 0;
    while (filled < pixels.size()) {
      while (pos < bytes.size() && (std::isspace(bytes[pos]) || bytes[pos] == '#')) {
        if (bytes[pos] == '#') {
          while (pos < bytes.size() && bytes[pos] != '\n' && bytes[pos] != '\r') ++pos;
        } else {
          ++pos;
        }
      }
      if (pos >= bytes.size())
        throw ParseError("truncated P1 raster: " + std::to_string(filled) + " of " +
                             std::to_string(pixels.size()) + " pixels",
                         pos);
      if (bytes[pos] != '0' && bytes[pos] != '1')
        throw ParseError("invalid P1 pixel character", pos);
      pixels[filled++] = static_cast<std::uint8_t>(bytes[pos] - '0');
      ++pos;
    }
  }
  return BinaryImage(width, height, std::move(pixels));
}

std::vector<unsigned char> encode_pbm(const BinaryImage& img) {
  const std::string header =
      "P4\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n";
  const std::size_t row_bytes = (static_cast<std::size_t>(img.width()) + 7) / 8;
  std::vector<unsigned char> out(header.begin(), header.end());
  const std::size_t raster = out.size();
  out.resize(raster + row_bytes * static_cast<std::size_t>(img.height()), 0);
  for (int y = 0; y < img.height(); ++y) {
    unsigned char* row = out.data() + raster + static_cast<std::size_t>(y) * row_bytes;
    for (int x = 0; x < img.width(); ++x)
      if (img.at(x, y)) row[x / 8] |= static_cast<unsigned char>(0x80U >> (x % 8));
  }
  return out;
}

BinaryImage read_image(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_pbm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.detail(), e.offset());
  }
}

void write_image(const BinaryImage& img, const std::filesystem::path& path) {
  write_file_bytes(path, encode_pbm(img));
}

}  // namespace wopl
