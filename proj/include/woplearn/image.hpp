#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace wopl {

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

// Binary image on a finite rectangular support. 1 = foreground (ink), 0 = background.
class BinaryImage {
 public:
  BinaryImage() = default;
  // All-background image. Both dimensions must be >= 1.
  BinaryImage(int width, int height);
  // Row-major pixels; every value must be 0 or 1.
  BinaryImage(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::uint8_t at(int x, int y) const { return pixels_[index(x, y)]; }
  void set(int x, int y, std::uint8_t value);
  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<const std::uint8_t> row(int y) const {
    return std::span<const std::uint8_t>(pixels_).subspan(static_cast<std::size_t>(y) * width_, width_);
  }

  std::size_t count_foreground() const;
  // Foreground set in row-major order.
  std::vector<Point> foreground() const;

  // Pixel-wise set operations; dimensions must agree.
  BinaryImage intersect(const BinaryImage& other) const;
  BinaryImage unite(const BinaryImage& other) const;
  BinaryImage subtract(const BinaryImage& other) const;
  bool is_subset_of(const BinaryImage& other) const;

  friend bool operator==(const BinaryImage&, const BinaryImage&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  void require_same_shape(const BinaryImage& other, const char* op) const;

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Outside the support every pixel reads as background.
inline std::uint8_t get_pixel_padded(const BinaryImage& img, int x, int y) {
  return img.contains(x, y) ? img.at(x, y) : std::uint8_t{0};
}

struct Offset {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
  friend auto operator<=>(const Offset& a, const Offset& b) {
    if (auto c = a.dy <=> b.dy; c != 0) return c;
    return a.dx <=> b.dx;
  }
};

// Finite set of offsets containing the origin, kept sorted row-major by (dy, dx).
class Window {
 public:
  explicit Window(std::vector<Offset> offsets);

  std::size_t size() const noexcept { return offsets_.size(); }
  std::span<const Offset> offsets() const noexcept { return offsets_; }
  const Offset& operator[](std::size_t k) const { return offsets_[k]; }

  // Bounding box of the offsets.
  int min_dx() const noexcept { return min_dx_; }
  int max_dx() const noexcept { return max_dx_; }
  int min_dy() const noexcept { return min_dy_; }
  int max_dy() const noexcept { return max_dy_; }
  int bbox_width() const noexcept { return max_dx_ - min_dx_ + 1; }
  int bbox_height() const noexcept { return max_dy_ - min_dy_ + 1; }
  // Largest |dx| or |dy|.
  int radius() const noexcept;
  // True when the offsets fill their bounding box.
  bool is_rectangle() const noexcept {
    return size() == static_cast<std::size_t>(bbox_width()) * static_cast<std::size_t>(bbox_height());
  }
  bool contains(Offset o) const;

  friend bool operator==(const Window&, const Window&) = default;

 private:
  std::vector<Offset> offsets_;
  int min_dx_ = 0, max_dx_ = 0, min_dy_ = 0, max_dy_ = 0;
};

// Centered w x h rectangle; both dimensions odd and >= 1.
Window make_rect_window(int w, int h);

// v[k] = img(p + offset_k) with background padding. p must be inside the support.
std::vector<std::uint8_t> extract_patch(const BinaryImage& img, Point p, const Window& w);
// Same as extract_patch, writing into out (size |w|) without bounds checks on p.
void extract_patch_into(const BinaryImage& img, Point p, const Window& w, std::span<std::uint8_t> out);

}  // namespace wopl
