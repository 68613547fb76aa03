#pragma once

// Layer kernels for the convolutional classifier. All functions are
// instantiated for float and double.

#include <cstdint>
#include <span>
#include <vector>

#include "woplearn/rng.hpp"
#include "woplearn/tensor.hpp"

namespace wopl {

// Same-padded (k/2 zeros), stride-1 convolution.
// x: (B, C, H, W); kernels: (O, C, k, k) with k odd; bias: O values.
// If col is given, it receives the im2col buffer for reuse in backward.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& kernels, std::span<const T> bias,
                         std::vector<T>* col = nullptr);

// Accumulates dL/dkernels and dL/dbias; writes dL/dx when dx is non-null.
// col may be the buffer produced by the matching forward call (or empty).
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& dout,
                     std::span<T> dkernels, std::span<T> dbias, Tensor<T>* dx,
                     const std::vector<T>* col = nullptr);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x);
// dx = dout where the pre-activation was > 0, else 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& pre, const Tensor<T>& dout);

template <typename T>
struct PoolResult {
  Tensor<T> out;
  // Flat index into the input for every output element.
  std::vector<std::size_t> argmax;
};

// Non-overlapping 2x2 max pooling with stride 2; odd trailing rows/columns are
// dropped. Ties go to the first element in row-major window order.
template <typename T>
PoolResult<T> maxpool2x2_forward(const Tensor<T>& x);
template <typename T>
Tensor<T> maxpool2x2_backward(const std::vector<int>& input_shape, std::span<const std::size_t> argmax,
                              const Tensor<T>& dout);

// x: (B, F); weights: (O, F); bias: O values.
template <typename T>
Tensor<T> fc_forward(const Tensor<T>& x, const Tensor<T>& weights, std::span<const T> bias);
template <typename T>
void fc_backward(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& dout, std::span<T> dweights,
                 std::span<T> dbias, Tensor<T>* dx);

// Row-wise softmax with max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);
// Mean over rows of -log(max(p[label], 1e-12)).
template <typename T>
double cross_entropy(const Tensor<T>& probs, std::span<const std::uint8_t> labels);
// Gradient at the logits of mean cross-entropy after softmax: (probs - onehot) / B.
template <typename T>
Tensor<T> softmax_cross_entropy_grad(const Tensor<T>& probs, std::span<const std::uint8_t> labels);

template <typename T>
struct DropoutResult {
  Tensor<T> out;
  // Per-unit multiplier: 0 or 1/(1-rate). Empty in inference mode.
  std::vector<T> mask;
};

// Inverted dropout. rate must lie in [0, 1).
template <typename T>
DropoutResult<T> dropout_forward(const Tensor<T>& x, double rate, bool training, Rng& rng);
template <typename T>
Tensor<T> dropout_backward(std::span<const T> mask, const Tensor<T>& dout);

}  // namespace wopl
