#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "woplearn/errors.hpp"

namespace wopl {

std::string shape_string(std::span<const int> shape);

// Dense row-major tensor; 4-D tensors are (batch, channels, height, width),
// 2-D tensors are (batch, features).
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, T fill = T(0)) : shape(std::move(dims)) {
    std::size_t n = 1;
    for (int d : shape) {
      if (d < 0) throw ShapeError("negative tensor dimension in " + shape_string(shape));
      n *= static_cast<std::size_t>(d);
    }
    data.assign(n, fill);
  }
  Tensor(std::vector<int> dims, std::vector<T> values) : shape(std::move(dims)), data(std::move(values)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    if (n != data.size())
      throw ShapeError("tensor " + shape_string(shape) + " needs " + std::to_string(n) + " values, got " +
                       std::to_string(data.size()));
  }

  std::size_t size() const noexcept { return data.size(); }
  std::size_t rank() const noexcept { return shape.size(); }
  int dim(std::size_t i) const { return shape.at(i); }

  T& at(int b, int c, int y, int x) {
    return data[((static_cast<std::size_t>(b) * shape[1] + c) * shape[2] + y) * shape[3] + x];
  }
  T at(int b, int c, int y, int x) const {
    return data[((static_cast<std::size_t>(b) * shape[1] + c) * shape[2] + y) * shape[3] + x];
  }
  T& at(int b, int f) { return data[static_cast<std::size_t>(b) * shape[1] + f]; }
  T at(int b, int f) const { return data[static_cast<std::size_t>(b) * shape[1] + f]; }
};

}  // namespace wopl
