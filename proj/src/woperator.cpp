#include "woplearn/woperator.hpp"

#include <algorithm>
#include <string>
#include <thread>

#include "woplearn/errors.hpp"

namespace wopl {

namespace {

constexpr std::size_t kChunkPixels = 4096;

// Classifies positions[begin, end) and writes the labels into out.
void classify_range(const LocalFunction& fn, const BinaryImage& img, std::span<const Point> positions,
                    BinaryImage& out) {
  const std::size_t n = fn.window().size();
  std::vector<std::uint8_t> patches;
  std::vector<std::uint8_t> labels;
  for (std::size_t start = 0; start < positions.size(); start += kChunkPixels) {
    const std::size_t count = std::min(kChunkPixels, positions.size() - start);
    patches.resize(count * n);
    labels.resize(count);
    for (std::size_t i = 0; i < count; ++i)
      extract_patch_into(img, positions[start + i], fn.window(),
                         std::span<std::uint8_t>(patches).subspan(i * n, n));
    fn.classifier().predict(patches, labels);
    for (std::size_t i = 0; i < count; ++i) {
      const Point p = positions[start + i];
      out.set(p.x, p.y, labels[i] ? 1 : 0);
    }
  }
}

}  // namespace

void FunctionClassifier::predict(std::span<const std::uint8_t> patches, std::span<std::uint8_t> out) const {
  if (patches.size() != out.size() * input_size_)
    throw InvalidArgument("patch buffer size " + std::to_string(patches.size()) + " is not " +
                          std::to_string(out.size()) + " x " + std::to_string(input_size_));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn_(patches.subspan(i * input_size_, input_size_)) ? 1 : 0;
}

LocalFunction::LocalFunction(Window window, std::shared_ptr<const PatchClassifier> classifier)
    : window_(std::move(window)), classifier_(std::move(classifier)) {
  if (!classifier_) throw InvalidArgument("local function needs a classifier");
  if (classifier_->input_size() != window_.size())
    throw InvalidArgument("classifier expects " + std::to_string(classifier_->input_size()) +
                          " inputs but the window has " + std::to_string(window_.size()) + " points");
}

BinaryImage apply(const LocalFunction& fn, const BinaryImage& img, ApplyMode mode, int threads) {
  if (img.empty()) throw InvalidArgument("cannot apply an operator to an empty image");
  if (!fn.classifier().trained()) throw StateError("classifier is not trained");

  std::vector<Point> positions;
  if (mode == ApplyMode::ForegroundOnly) {
    positions = img.foreground();
  } else {
    positions.reserve(static_cast<std::size_t>(img.width()) * img.height());
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) positions.push_back({x, y});
  }

  BinaryImage out(img.width(), img.height());
  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1,
                              std::max<std::size_t>(1, positions.size() / kChunkPixels));
  if (workers <= 1) {
    classify_range(fn, img, positions, out);
    return out;
  }

  // Each worker owns a contiguous slice of positions; slices touch disjoint pixels.
  std::vector<std::jthread> pool;
  const std::size_t per = (positions.size() + workers - 1) / workers;
  const std::span<const Point> all(positions);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(positions.size(), w * per);
    const std::size_t end = std::min(positions.size(), begin + per);
    if (begin == end) break;
    pool.emplace_back([&, begin, end] { classify_range(fn, img, all.subspan(begin, end - begin), out); });
  }
  pool.clear();
  return out;
}

BinaryImage compose_apply(std::span<const LocalFunction> fns, const BinaryImage& img, ApplyMode mode,
                          int threads) {
  if (fns.empty()) throw InvalidArgument("compose_apply needs at least one local function");
  BinaryImage current = img;
  for (const auto& fn : fns) current = apply(fn, current, mode, threads);
  return current;
}

LocalFunction identity_function() {
  Window w({{0, 0}});
  return LocalFunction(w, std::make_shared<FunctionClassifier>(
                              1, [](std::span<const std::uint8_t> p) { return p[0]; }));
}

LocalFunction constant_function(const Window& window, std::uint8_t value) {
  return LocalFunction(window, std::make_shared<FunctionClassifier>(
                                   window.size(), [value](std::span<const std::uint8_t>) { return value; }));
}

LocalFunction erosion_function(const Window& window) {
  return LocalFunction(window, std::make_shared<FunctionClassifier>(
                                   window.size(), [](std::span<const std::uint8_t> p) {
                                     return static_cast<std::uint8_t>(
                                         std::all_of(p.begin(), p.end(), [](std::uint8_t b) { return b == 1; }));
                                   }));
}

}  // namespace wopl
