#include "woplearn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace wopl {

std::string shape_string(std::span<const int> shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

namespace {

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* what) {
  if (t.rank() != rank)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_string(t.shape));
}

// Dot product with independent partial sums so the loop vectorizes without
// reassociating floating-point math. Summation order is fixed.
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  constexpr std::size_t kLanes = 16;
  T acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t k = 0; k < kLanes; ++k) acc[k] += a[i + k] * b[i + k];
  T s = 0;
  for (std::size_t k = 0; k < kLanes; ++k) s += acc[k];
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

// col[(c*k + i)*k + j][b*HW + y*W + x] = x_padded[b][c][y+i][x+j]
template <typename T>
void im2col(const Tensor<T>& x, int k, std::vector<T>& col) {
  const int B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  const int pad = k / 2;
  const std::size_t HW = static_cast<std::size_t>(H) * W;
  const std::size_t N = static_cast<std::size_t>(B) * HW;
  col.assign(static_cast<std::size_t>(C) * k * k * N, T(0));
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        T* dst = col.data() + ((static_cast<std::size_t>(c) * k + i) * k + j) * N;
        const int x_lo = std::max(0, pad - j);
        const int x_hi = std::min(W, W + pad - j);
        for (int b = 0; b < B; ++b) {
          const T* src_plane = x.data.data() + (static_cast<std::size_t>(b) * C + c) * HW;
          for (int y = 0; y < H; ++y) {
            const int sy = y + i - pad;
            if (sy < 0 || sy >= H) continue;
            T* d = dst + b * HW + static_cast<std::size_t>(y) * W;
            const T* s = src_plane + static_cast<std::size_t>(sy) * W;
            for (int xx = x_lo; xx < x_hi; ++xx) d[xx] = s[xx + j - pad];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const std::vector<T>& dcol, int k, Tensor<T>& dx) {
  const int B = dx.shape[0], C = dx.shape[1], H = dx.shape[2], W = dx.shape[3];
  const int pad = k / 2;
  const std::size_t HW = static_cast<std::size_t>(H) * W;
  const std::size_t N = static_cast<std::size_t>(B) * HW;
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        const T* src = dcol.data() + ((static_cast<std::size_t>(c) * k + i) * k + j) * N;
        const int x_lo = std::max(0, pad - j);
        const int x_hi = std::min(W, W + pad - j);
        for (int b = 0; b < B; ++b) {
          T* plane = dx.data.data() + (static_cast<std::size_t>(b) * C + c) * HW;
          for (int y = 0; y < H; ++y) {
            const int sy = y + i - pad;
            if (sy < 0 || sy >= H) continue;
            const T* s = src + b * HW + static_cast<std::size_t>(y) * W;
            T* d = plane + static_cast<std::size_t>(sy) * W;
            for (int xx = x_lo; xx < x_hi; ++xx) d[xx + j - pad] += s[xx];
          }
        }
      }
    }
  }
}

constexpr std::size_t kTile = 512;

// out (O x N) += weights (O x R) * col (R x N), four output rows at a time.
template <typename T>
void gemm_rows(const T* weights, const T* col, T* out, std::size_t O, std::size_t R, std::size_t N) {
  for (std::size_t n0 = 0; n0 < N; n0 += kTile) {
    const std::size_t len = std::min(kTile, N - n0);
    std::size_t o = 0;
    for (; o + 4 <= O; o += 4) {
      T* d0 = out + o * N + n0;
      T* d1 = d0 + N;
      T* d2 = d1 + N;
      T* d3 = d2 + N;
      for (std::size_t r = 0; r < R; ++r) {
        const T* c = col + r * N + n0;
        const T w0 = weights[o * R + r], w1 = weights[(o + 1) * R + r];
        const T w2 = weights[(o + 2) * R + r], w3 = weights[(o + 3) * R + r];
        for (std::size_t n = 0; n < len; ++n) {
          const T v = c[n];
          d0[n] += w0 * v;
          d1[n] += w1 * v;
          d2[n] += w2 * v;
          d3[n] += w3 * v;
        }
      }
    }
    for (; o < O; ++o) {
      T* d = out + o * N + n0;
      for (std::size_t r = 0; r < R; ++r) {
        const T* c = col + r * N + n0;
        const T w = weights[o * R + r];
        for (std::size_t n = 0; n < len; ++n) d[n] += w * c[n];
      }
    }
  }
}

// dcol (R x N) = weights^T (R x O) * g (O x N)
template <typename T>
void gemm_transposed(const T* weights, const T* g, T* dcol, std::size_t O, std::size_t R, std::size_t N) {
  for (std::size_t n0 = 0; n0 < N; n0 += kTile) {
    const std::size_t len = std::min(kTile, N - n0);
    for (std::size_t r = 0; r < R; ++r) {
      T* d = dcol + r * N + n0;
      std::size_t o = 0;
      for (; o + 4 <= O; o += 4) {
        const T* g0 = g + o * N + n0;
        const T* g1 = g0 + N;
        const T* g2 = g1 + N;
        const T* g3 = g2 + N;
        const T w0 = weights[o * R + r], w1 = weights[(o + 1) * R + r];
        const T w2 = weights[(o + 2) * R + r], w3 = weights[(o + 3) * R + r];
        for (std::size_t n = 0; n < len; ++n) d[n] += w0 * g0[n] + w1 * g1[n] + w2 * g2[n] + w3 * g3[n];
      }
      for (; o < O; ++o) {
        const T* g0 = g + o * N + n0;
        const T w = weights[o * R + r];
        for (std::size_t n = 0; n < len; ++n) d[n] += w * g0[n];
      }
    }
  }
}

template <typename T>
void check_conv_shapes(const Tensor<T>& x, const Tensor<T>& kernels, std::size_t bias_size) {
  require_rank(x, 4, "conv2d input");
  require_rank(kernels, 4, "conv2d kernels");
  if (kernels.shape[1] != x.shape[1])
    throw ShapeError("conv2d: input " + shape_string(x.shape) + " has " + std::to_string(x.shape[1]) +
                     " channels but kernels " + shape_string(kernels.shape) + " expect " +
                     std::to_string(kernels.shape[1]));
  if (kernels.shape[2] != kernels.shape[3] || kernels.shape[2] % 2 == 0)
    throw ShapeError("conv2d: kernels " + shape_string(kernels.shape) + " must be square with odd size");
  if (bias_size != static_cast<std::size_t>(kernels.shape[0]))
    throw ShapeError("conv2d: bias has " + std::to_string(bias_size) + " values for kernels " +
                     shape_string(kernels.shape));
  if (x.shape[2] < 1 || x.shape[3] < 1) throw ShapeError("conv2d: empty spatial input " + shape_string(x.shape));
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& kernels, std::span<const T> bias, std::vector<T>* col) {
  check_conv_shapes(x, kernels, bias.size());
  const int B = x.shape[0], H = x.shape[2], W = x.shape[3];
  const int O = kernels.shape[0], k = kernels.shape[2];
  const std::size_t R = static_cast<std::size_t>(x.shape[1]) * k * k;
  const std::size_t HW = static_cast<std::size_t>(H) * W;
  const std::size_t N = static_cast<std::size_t>(B) * HW;

  std::vector<T> local;
  std::vector<T>& cols = col ? *col : local;
  im2col(x, k, cols);

  std::vector<T> out_on(static_cast<std::size_t>(O) * N);
  for (int o = 0; o < O; ++o) std::fill_n(out_on.begin() + static_cast<std::ptrdiff_t>(o * N), N, bias[o]);
  gemm_rows(kernels.data.data(), cols.data(), out_on.data(), static_cast<std::size_t>(O), R, N);

  Tensor<T> out({B, O, H, W});
  for (int b = 0; b < B; ++b)
    for (int o = 0; o < O; ++o)
      std::copy_n(out_on.begin() + static_cast<std::ptrdiff_t>(o * N + b * HW), HW,
                  out.data.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(b) * O + o) * HW));
  return out;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& dout, std::span<T> dkernels,
                     std::span<T> dbias, Tensor<T>* dx, const std::vector<T>* col) {
  check_conv_shapes(x, kernels, dbias.size());
  const int B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  const int O = kernels.shape[0], k = kernels.shape[2];
  if (dout.shape != std::vector<int>{B, O, H, W})
    throw ShapeError("conv2d backward: output gradient " + shape_string(dout.shape) + " does not match " +
                     shape_string(std::vector<int>{B, O, H, W}));
  if (dkernels.size() != kernels.size()) throw ShapeError("conv2d backward: kernel gradient size mismatch");
  const std::size_t R = static_cast<std::size_t>(C) * k * k;
  const std::size_t HW = static_cast<std::size_t>(H) * W;
  const std::size_t N = static_cast<std::size_t>(B) * HW;

  std::vector<T> local;
  if (!col || col->size() != R * N) {
    im2col(x, k, local);
    col = &local;
  }

  std::vector<T> g(static_cast<std::size_t>(O) * N);
  for (int b = 0; b < B; ++b)
    for (int o = 0; o < O; ++o)
      std::copy_n(dout.data.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(b) * O + o) * HW), HW,
                  g.begin() + static_cast<std::ptrdiff_t>(o * N + b * HW));

  for (int o = 0; o < O; ++o) {
    const T* go = g.data() + o * N;
    T s = 0;
    for (std::size_t n = 0; n < N; ++n) s += go[n];
    dbias[o] += s;
    for (std::size_t r = 0; r < R; ++r) dkernels[o * R + r] += dot(go, col->data() + r * N, N);
  }

  if (dx) {
    *dx = Tensor<T>(x.shape);
    std::vector<T> dcol(R * N, T(0));
    gemm_transposed(kernels.data.data(), g.data(), dcol.data(), static_cast<std::size_t>(O), R, N);
    col2im_add(dcol, k, *dx);
  }
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (auto& v : out.data) v = v > T(0) ? v : T(0);
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& pre, const Tensor<T>& dout) {
  if (pre.shape != dout.shape)
    throw ShapeError("relu backward: " + shape_string(pre.shape) + " vs " + shape_string(dout.shape));
  Tensor<T> dx = dout;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!(pre.data[i] > T(0))) dx.data[i] = T(0);
  return dx;
}

template <typename T>
PoolResult<T> maxpool2x2_forward(const Tensor<T>& x) {
  require_rank(x, 4, "maxpool input");
  const int B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  const int Ho = H / 2, Wo = W / 2;
  PoolResult<T> r{Tensor<T>({B, C, Ho, Wo}), {}};
  r.argmax.resize(r.out.size());
  std::size_t o = 0;
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const std::size_t plane = (static_cast<std::size_t>(b) * C + c) * H * W;
      for (int y = 0; y < Ho; ++y) {
        for (int xx = 0; xx < Wo; ++xx, ++o) {
          std::size_t best = plane + static_cast<std::size_t>(2 * y) * W + 2 * xx;
          for (const auto& [dy, dx] : {std::pair{0, 1}, std::pair{1, 0}, std::pair{1, 1}}) {
            const std::size_t idx = plane + static_cast<std::size_t>(2 * y + dy) * W + 2 * xx + dx;
            if (x.data[idx] > x.data[best]) best = idx;
          }
          r.out.data[o] = x.data[best];
          r.argmax[o] = best;
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool2x2_backward(const std::vector<int>& input_shape, std::span<const std::size_t> argmax,
                              const Tensor<T>& dout) {
  if (argmax.size() != dout.size()) throw ShapeError("maxpool backward: argmax/gradient size mismatch");
  Tensor<T> dx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) dx.data[argmax[i]] += dout.data[i];
  return dx;
}

template <typename T>
Tensor<T> fc_forward(const Tensor<T>& x, const Tensor<T>& weights, std::span<const T> bias) {
  require_rank(x, 2, "fc input");
  require_rank(weights, 2, "fc weights");
  const int B = x.shape[0], F = x.shape[1], O = weights.shape[0];
  if (weights.shape[1] != F)
    throw ShapeError("fc: input " + shape_string(x.shape) + " does not match weights " + shape_string(weights.shape));
  if (bias.size() != static_cast<std::size_t>(O))
    throw ShapeError("fc: bias has " + std::to_string(bias.size()) + " values for weights " +
                     shape_string(weights.shape));
  Tensor<T> out({B, O});
  for (int b = 0; b < B; ++b) {
    const T* xb = x.data.data() + static_cast<std::size_t>(b) * F;
    for (int o = 0; o < O; ++o)
      out.data[static_cast<std::size_t>(b) * O + o] =
          bias[o] + dot(xb, weights.data.data() + static_cast<std::size_t>(o) * F, static_cast<std::size_t>(F));
  }
  return out;
}

template <typename T>
void fc_backward(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& dout, std::span<T> dweights,
                 std::span<T> dbias, Tensor<T>* dx) {
  const int B = x.shape[0], F = x.shape[1], O = weights.shape[0];
  if (dout.shape != std::vector<int>{B, O})
    throw ShapeError("fc backward: gradient " + shape_string(dout.shape) + " does not match " +
                     shape_string(std::vector<int>{B, O}));
  if (dweights.size() != weights.size() || dbias.size() != static_cast<std::size_t>(O))
    throw ShapeError("fc backward: parameter gradient size mismatch");
  for (int b = 0; b < B; ++b) {
    const T* xb = x.data.data() + static_cast<std::size_t>(b) * F;
    for (int o = 0; o < O; ++o) {
      const T g = dout.data[static_cast<std::size_t>(b) * O + o];
      dbias[o] += g;
      if (g == T(0)) continue;
      T* dw = dweights.data() + static_cast<std::size_t>(o) * F;
      for (int f = 0; f < F; ++f) dw[f] += g * xb[f];
    }
  }
  if (dx) {
    *dx = Tensor<T>({B, F});
    for (int b = 0; b < B; ++b) {
      T* d = dx->data.data() + static_cast<std::size_t>(b) * F;
      for (int o = 0; o < O; ++o) {
        const T g = dout.data[static_cast<std::size_t>(b) * O + o];
        if (g == T(0)) continue;
        const T* w = weights.data.data() + static_cast<std::size_t>(o) * F;
        for (int f = 0; f < F; ++f) d[f] += g * w[f];
      }
    }
  }
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  require_rank(logits, 2, "softmax input");
  const int B = logits.shape[0], K = logits.shape[1];
  Tensor<T> p(logits.shape);
  for (int b = 0; b < B; ++b) {
    const T* z = logits.data.data() + static_cast<std::size_t>(b) * K;
    T* q = p.data.data() + static_cast<std::size_t>(b) * K;
    const T m = *std::max_element(z, z + K);
    T sum = 0;
    for (int i = 0; i < K; ++i) sum += (q[i] = std::exp(z[i] - m));
    for (int i = 0; i < K; ++i) q[i] /= sum;
  }
  return p;
}

template <typename T>
double cross_entropy(const Tensor<T>& probs, std::span<const std::uint8_t> labels) {
  require_rank(probs, 2, "cross-entropy input");
  const int B = probs.shape[0], K = probs.shape[1];
  if (labels.size() != static_cast<std::size_t>(B))
    throw ShapeError("cross-entropy: " + std::to_string(labels.size()) + " labels for probabilities " +
                     shape_string(probs.shape));
  if (B == 0) return 0.0;
  double total = 0;
  for (int b = 0; b < B; ++b) {
    if (labels[b] >= K) throw InvalidArgument("label " + std::to_string(labels[b]) + " out of range");
    const double p = static_cast<double>(probs.data[static_cast<std::size_t>(b) * K + labels[b]]);
    total -= std::log(std::max(p, 1e-12));
  }
  return total / B;
}

template <typename T>
Tensor<T> softmax_cross_entropy_grad(const Tensor<T>& probs, std::span<const std::uint8_t> labels) {
  const int B = probs.shape[0], K = probs.shape[1];
  if (labels.size() != static_cast<std::size_t>(B)) throw ShapeError("softmax gradient: label count mismatch");
  Tensor<T> g = probs;
  const T inv = T(1) / static_cast<T>(B);
  for (int b = 0; b < B; ++b) {
    T* row = g.data.data() + static_cast<std::size_t>(b) * K;
    row[labels[b]] -= T(1);
    for (int i = 0; i < K; ++i) row[i] *= inv;
  }
  return g;
}

template <typename T>
DropoutResult<T> dropout_forward(const Tensor<T>& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  DropoutResult<T> r{x, {}};
  if (!training || rate == 0.0) return r;
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  r.mask.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    r.mask[i] = rng.uniform() < rate ? T(0) : scale;
    r.out.data[i] *= r.mask[i];
  }
  return r;
}

template <typename T>
Tensor<T> dropout_backward(std::span<const T> mask, const Tensor<T>& dout) {
  if (mask.empty()) return dout;
  if (mask.size() != dout.size()) throw ShapeError("dropout backward: mask size mismatch");
  Tensor<T> dx = dout;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= mask[i];
  return dx;
}

#define WOPL_INSTANTIATE_LAYERS(T)                                                                              \
  template Tensor<T> conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&, std::span<const T>, std::vector<T>*); \
  template void conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::span<T>,          \
                                   std::span<T>, Tensor<T>*, const std::vector<T>*);                             \
  template Tensor<T> relu_forward<T>(const Tensor<T>&);                                                         \
  template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);                                      \
  template PoolResult<T> maxpool2x2_forward<T>(const Tensor<T>&);                                               \
  template Tensor<T> maxpool2x2_backward<T>(const std::vector<int>&, std::span<const std::size_t>,              \
                                            const Tensor<T>&);                                                  \
  template Tensor<T> fc_forward<T>(const Tensor<T>&, const Tensor<T>&, std::span<const T>);                     \
  template void fc_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::span<T>, std::span<T>, \
                               Tensor<T>*);                                                                     \
  template Tensor<T> softmax<T>(const Tensor<T>&);                                                              \
  template double cross_entropy<T>(const Tensor<T>&, std::span<const std::uint8_t>);                            \
  template Tensor<T> softmax_cross_entropy_grad<T>(const Tensor<T>&, std::span<const std::uint8_t>);            \
  template DropoutResult<T> dropout_forward<T>(const Tensor<T>&, double, bool, Rng&);                           \
  template Tensor<T> dropout_backward<T>(std::span<const T>, const Tensor<T>&);

WOPL_INSTANTIATE_LAYERS(float)
WOPL_INSTANTIATE_LAYERS(double)

}  // namespace wopl
