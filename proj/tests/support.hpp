#pragma once

// Shared fixtures and brute-force oracles for the test binaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "woplearn/cnn.hpp"
#include "woplearn/dataset.hpp"
#include "woplearn/image.hpp"
#include "woplearn/rng.hpp"
#include "woplearn/selection.hpp"
#include "woplearn/woperator.hpp"

namespace testing {

inline wopl::BinaryImage random_image(wopl::Rng& rng, int w, int h, double density = 0.5) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h);
  for (auto& v : px) v = rng.bernoulli(density) ? 1 : 0;
  return wopl::BinaryImage(w, h, std::move(px));
}

// Random window: origin plus a few offsets within the given radius.
inline wopl::Window random_window(wopl::Rng& rng, int radius, int extra) {
  std::vector<wopl::Offset> offs{{0, 0}};
  for (int i = 0; i < extra; ++i) {
    wopl::Offset o{static_cast<int>(rng.range(-radius, radius)), static_cast<int>(rng.range(-radius, radius))};
    if (std::find(offs.begin(), offs.end(), o) == offs.end()) offs.push_back(o);
  }
  return wopl::Window(offs);
}

inline std::uint8_t px_or_zero(const wopl::BinaryImage& img, int x, int y) {
  if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return 0;
  return img.pixels()[static_cast<std::size_t>(y) * img.width() + x];
}

// Erosion by a centered (2r+1)^2 square with background outside the image.
inline wopl::BinaryImage erode_square(const wopl::BinaryImage& img, int r) {
  wopl::BinaryImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      bool all = true;
      for (int dy = -r; dy <= r && all; ++dy)
        for (int dx = -r; dx <= r && all; ++dx) all = px_or_zero(img, x + dx, y + dy) == 1;
      out.set(x, y, all ? 1 : 0);
    }
  return out;
}

// Pattern -> (count of label 0, count of label 1), keyed by the expanded bits.
using CountMap = std::map<std::vector<std::uint8_t>, std::pair<std::uint64_t, std::uint64_t>>;

inline CountMap hash_count(const wopl::PatchDataset& ds) {
  CountMap m;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto& c = m[ds.patch(i)];
    (ds.label(i) ? c.second : c.first) += 1;
  }
  return m;
}

inline wopl::PatchDataset random_dataset(wopl::Rng& rng, const wopl::Window& w, std::size_t n, double density = 0.5) {
  wopl::PatchDataset ds(w);
  std::vector<std::uint8_t> p(w.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& b : p) b = rng.bernoulli(density) ? 1 : 0;
    ds.add(p, static_cast<std::uint8_t>(rng.below(2)));
  }
  return ds;
}

struct GradCheck {
  double max_rel = 0;
  std::string worst;
  std::size_t checked = 0;
};

// Central differences on every parameter of an f64 network.
// Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheck gradient_check(const wopl::CnnConfig& cfg, int batch, std::uint64_t seed, double eps = 1e-5,
                                double floor = 1e-7) {
  using T = double;
  wopl::Network<T> net(cfg);
  net.initialize(seed);
  wopl::Rng rng(wopl::derive_seed(seed, 99));
  // Non-zero biases so that no path starts exactly at a ReLU kink.
  for (auto& p : net.parameters())
    if (p.name.find("bias") != std::string::npos)
      for (auto& v : p.value.data) v = rng.uniform(-0.1, 0.1);

  wopl::Tensor<T> x({batch, 1, cfg.window_h, cfg.window_w});
  for (auto& v : x.data) v = rng.uniform();
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(batch));
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng.below(2));

  const std::uint64_t drop_seed = wopl::derive_seed(seed, 7);
  typename wopl::Network<T>::Workspace ws;
  auto loss_at = [&]() {
    wopl::Rng drop(drop_seed);
    net.forward(x, ws, true, &drop);
    return net.loss(ws, labels);
  };

  loss_at();
  std::vector<std::vector<T>> grads;
  net.backward(ws, labels, grads);

  GradCheck r;
  auto& params = net.parameters();
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& data = params[pi].value.data;
    for (std::size_t k = 0; k < data.size(); ++k) {
      const T saved = data[k];
      data[k] = saved + eps;
      const double up = loss_at();
      data[k] = saved - eps;
      const double down = loss_at();
      data[k] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = grads[pi][k];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      ++r.checked;
      if (rel > r.max_rel) {
        r.max_rel = rel;
        r.worst = params[pi].name + "[" + std::to_string(k) + "]";
      }
    }
  }
  return r;
}

// Random small config within the acceptance ranges.
inline wopl::CnnConfig random_small_config(wopl::Rng& rng) {
  wopl::CnnConfig c;
  const int w = 5 + 2 * static_cast<int>(rng.below(3));  // 5, 7, 9
  c.window_w = c.window_h = w;
  const int masks1 = static_cast<int>(rng.range(2, 4));
  const int masks2 = static_cast<int>(rng.range(2, 4));
  const int k1 = rng.bernoulli(0.5) ? 3 : 5;
  const int k2 = rng.bernoulli(0.5) ? 1 : 3;
  c.blocks = {{masks1, k1}, {masks2, k2}};
  c.fc_hidden = static_cast<int>(rng.range(2, 8));
  c.dropout_rate = rng.bernoulli(0.5) ? 0.0 : 0.3;
  c.precision = wopl::Precision::F64;
  c.epochs = 1;
  return c;
}

// Toy selection report with random trajectories and occasional divergence.
inline wopl::SelectionReport random_report(wopl::Rng& rng) {
  wopl::SelectionReport rep;
  const std::vector<int> windows{9, 11, 13};
  const std::vector<double> lrs{1e-2, 1e-3, 1e-4};
  const std::vector<double> drops{0.0, 0.5};
  const int epochs = static_cast<int>(rng.range(1, 4));
  for (int w : windows)
    for (double lr : lrs)
      for (double d : drops) {
        if (rng.bernoulli(0.3)) continue;
        wopl::CellResult cell;
        cell.key = {w, lr, d, 5};
        cell.diverged = rng.bernoulli(0.1);
        for (int e = 1; e <= epochs; ++e) {
          // Coarse values so that ties are common.
          const double mae = cell.diverged ? INFINITY : static_cast<double>(rng.range(1, 6)) / 100.0;
          cell.epochs.push_back({e, mae, 0.5, ""});
        }
        rep.cells.push_back(cell);
      }
  return rep;
}

// Linear scan: lexicographic (mae, window, epoch, lr, dropout, mask).
inline std::optional<wopl::Choice> scan_best(const wopl::SelectionReport& rep) {
  std::optional<wopl::Choice> best;
  for (const auto& c : rep.cells)
    for (const auto& e : c.epochs) {
      if (!std::isfinite(e.val_mae)) continue;
      const wopl::Choice cand{c.key, e.epoch, e.val_mae, e.checkpoint};
      if (!best) {
        best = cand;
        continue;
      }
      const auto key = [](const wopl::Choice& x) {
        return std::make_tuple(x.val_mae, x.key.window, x.epoch, x.key.learning_rate, x.key.dropout, x.key.mask);
      };
      if (key(cand) < key(*best)) best = cand;
    }
  return best;
}

// Pseudo-random boolean function of the patch bits.
inline wopl::LocalFunction random_psi(const wopl::Window& w, std::uint64_t seed) {
  auto fn = [seed](std::span<const std::uint8_t> bits) -> std::uint8_t {
    std::uint64_t h = seed;
    for (auto b : bits) h = wopl::mix_seed(h ^ b);
    return static_cast<std::uint8_t>(h & 1U);
  };
  return wopl::LocalFunction(w, std::make_shared<wopl::FunctionClassifier>(w.size(), fn));
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("woplearn_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
