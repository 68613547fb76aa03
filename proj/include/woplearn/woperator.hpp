#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "woplearn/image.hpp"

namespace wopl {

// Maps flattened binary patches to {0,1}. Implementations must be safe for
// concurrent calls to predict() once trained.
class PatchClassifier {
 public:
  virtual ~PatchClassifier() = default;

  virtual std::size_t input_size() const = 0;
  virtual bool trained() const = 0;
  // patches holds count = out.size() rows of input_size() bits each.
  virtual void predict(std::span<const std::uint8_t> patches, std::span<std::uint8_t> out) const = 0;
};

// Classifier backed by a plain function on one patch. Used for hand-written
// operators (identity, erosion, ...).
class FunctionClassifier final : public PatchClassifier {
 public:
  using Fn = std::function<std::uint8_t(std::span<const std::uint8_t>)>;
  FunctionClassifier(std::size_t input_size, Fn fn) : input_size_(input_size), fn_(std::move(fn)) {}

  std::size_t input_size() const override { return input_size_; }
  bool trained() const override { return static_cast<bool>(fn_); }
  void predict(std::span<const std::uint8_t> patches, std::span<std::uint8_t> out) const override;

 private:
  std::size_t input_size_;
  Fn fn_;
};

enum class ApplyMode { AllPixels, ForegroundOnly };

// psi: the window plus a classifier over patches on that window.
class LocalFunction {
 public:
  LocalFunction(Window window, std::shared_ptr<const PatchClassifier> classifier);

  const Window& window() const noexcept { return window_; }
  const PatchClassifier& classifier() const noexcept { return *classifier_; }

 private:
  Window window_;
  std::shared_ptr<const PatchClassifier> classifier_;
};

// out(p) = psi(patch at p). In ForegroundOnly mode background pixels map to 0,
// so the output is a subset of the input. threads <= 1 runs inline.
BinaryImage apply(const LocalFunction& fn, const BinaryImage& img,
                  ApplyMode mode = ApplyMode::ForegroundOnly, int threads = 1);

// Left-to-right composition; every stage uses the same mode.
BinaryImage compose_apply(std::span<const LocalFunction> fns, const BinaryImage& img,
                          ApplyMode mode = ApplyMode::ForegroundOnly, int threads = 1);

// Small library of hand-written operators, mostly for tests and sanity runs.
LocalFunction identity_function();
LocalFunction constant_function(const Window& window, std::uint8_t value);
// 1 iff every bit of the window is 1.
LocalFunction erosion_function(const Window& window);

}  // namespace wopl
