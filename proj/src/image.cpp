#include "woplearn/image.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include "woplearn/errors.hpp"

namespace wopl {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Data: return "data";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::State: return "state";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Selection: return "selection";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

BinaryImage::BinaryImage(int width, int height) : width_(width), height_(height) {
  if (width < 1 || height < 1)
    throw InvalidArgument("image dimensions must be >= 1, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

BinaryImage::BinaryImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1)
    throw InvalidArgument("image dimensions must be >= 1, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw InvalidArgument("pixel count " + std::to_string(pixels_.size()) + " does not match " +
                          std::to_string(width) + "x" + std::to_string(height));
  for (std::size_t i = 0; i < pixels_.size(); ++i)
    if (pixels_[i] > 1)
      throw InvalidArgument("pixel " + std::to_string(i) + " has non-binary value " +
                            std::to_string(pixels_[i]));
}

void BinaryImage::set(int x, int y, std::uint8_t value) {
  if (!contains(x, y))
    throw InvalidArgument("pixel (" + std::to_string(x) + "," + std::to_string(y) +
                          ") outside image support");
  if (value > 1) throw InvalidArgument("non-binary pixel value " + std::to_string(value));
  pixels_[index(x, y)] = value;
}

std::size_t BinaryImage::count_foreground() const {
  return static_cast<std::size_t>(std::count(pixels_.begin(), pixels_.end(), std::uint8_t{1}));
}

std::vector<Point> BinaryImage::foreground() const {
  std::vector<Point> points;
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      if (pixels_[index(x, y)]) points.push_back({x, y});
  return points;
}

void BinaryImage::require_same_shape(const BinaryImage& other, const char* op) const {
  if (width_ != other.width_ || height_ != other.height_)
    throw InvalidArgument(std::string(op) + ": image sizes differ (" + std::to_string(width_) + "x" +
                          std::to_string(height_) + " vs " + std::to_string(other.width_) + "x" +
                          std::to_string(other.height_) + ")");
}

BinaryImage BinaryImage::intersect(const BinaryImage& other) const {
  require_same_shape(other, "intersect");
  BinaryImage out = *this;
  for (std::size_t i = 0; i < pixels_.size(); ++i) out.pixels_[i] &= other.pixels_[i];
  return out;
}

BinaryImage BinaryImage::unite(const BinaryImage& other) const {
  require_same_shape(other, "unite");
  BinaryImage out = *this;
  for (std::size_t i = 0; i < pixels_.size(); ++i) out.pixels_[i] |= other.pixels_[i];
  return out;
}

BinaryImage BinaryImage::subtract(const BinaryImage& other) const {
  require_same_shape(other, "subtract");
  BinaryImage out = *this;
  for (std::size_t i = 0; i < pixels_.size(); ++i) out.pixels_[i] &= static_cast<std::uint8_t>(1 - other.pixels_[i]);
  return out;
}

bool BinaryImage::is_subset_of(const BinaryImage& other) const {
  require_same_shape(other, "is_subset_of");
  for (std::size_t i = 0; i < pixels_.size(); ++i)
    if (pixels_[i] && !other.pixels_[i]) return false;
  return true;
}

Window::Window(std::vector<Offset> offsets) : offsets_(std::move(offsets)) {
  if (offsets_.empty()) throw InvalidArgument("window must be non-empty");
  std::sort(offsets_.begin(), offsets_.end());
  if (std::adjacent_find(offsets_.begin(), offsets_.end()) != offsets_.end())
    throw InvalidArgument("window offsets must be unique");
  if (!std::binary_search(offsets_.begin(), offsets_.end(), Offset{0, 0}))
    throw InvalidArgument("window must contain the origin");
  min_dx_ = max_dx_ = min_dy_ = max_dy_ = 0;
  for (const auto& o : offsets_) {
    min_dx_ = std::min(min_dx_, o.dx);
    max_dx_ = std::max(max_dx_, o.dx);
    min_dy_ = std::min(min_dy_, o.dy);
    max_dy_ = std::max(max_dy_, o.dy);
  }
}

int Window::radius() const noexcept {
  return std::max({-min_dx_, max_dx_, -min_dy_, max_dy_});
}

bool Window::contains(Offset o) const {
  return std::binary_search(offsets_.begin(), offsets_.end(), o);
}

Window make_rect_window(int w, int h) {
  if (w < 1 || h < 1 || w % 2 == 0 || h % 2 == 0)
    throw InvalidArgument("window dimensions must be odd and positive, got " + std::to_string(w) +
                          "x" + std::to_string(h));
  std::vector<Offset> offsets;
  offsets.reserve(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int dy = -h / 2; dy <= h / 2; ++dy)
    for (int dx = -w / 2; dx <= w / 2; ++dx) offsets.push_back({dx, dy});
  return Window(std::move(offsets));
}

void extract_patch_into(const BinaryImage& img, Point p, const Window& w, std::span<std::uint8_t> out) {
  const auto offsets = w.offsets();
  // Fast path: the whole bounding box lies inside the support.
  if (p.x + w.min_dx() >= 0 && p.y + w.min_dy() >= 0 && p.x + w.max_dx() < img.width() &&
      p.y + w.max_dy() < img.height()) {
    for (std::size_t k = 0; k < offsets.size(); ++k) out[k] = img.at(p.x + offsets[k].dx, p.y + offsets[k].dy);
    return;
  }
  for (std::size_t k = 0; k < offsets.size(); ++k)
    out[k] = get_pixel_padded(img, p.x + offsets[k].dx, p.y + offsets[k].dy);
}

std::vector<std::uint8_t> extract_patch(const BinaryImage& img, Point p, const Window& w) {
  if (!img.contains(p.x, p.y))
    throw InvalidArgument("patch center (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                          ") outside image support");
  std::vector<std::uint8_t> out(w.size());
  extract_patch_into(img, p, w, out);
  return out;
}

}  // namespace wopl
