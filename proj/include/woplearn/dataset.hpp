#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "woplearn/image.hpp"

namespace wopl {

struct ImagePair {
  std::string id;
  BinaryImage input;
  BinaryImage output;
};

enum class Sampling { ForegroundOnly, AllPixels };

struct Provenance {
  std::uint32_t image = 0;  // index into the pair list used for extraction
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct DatasetStats {
  std::size_t total = 0;
  std::size_t distinct = 0;     // distinct patch bit patterns
  std::size_t conflicting = 0;  // distinct patterns seen with both labels
  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

// Labeled binary patches over a window. Patches are stored bit-packed, one
// run of 64-bit words per sample (bit k of the pattern is bit k%64 of word k/64).
class PatchDataset {
 public:
  explicit PatchDataset(Window window);

  const Window& window() const noexcept { return window_; }
  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  std::size_t words_per_patch() const noexcept { return words_; }
  bool has_provenance() const noexcept { return !provenance_.empty(); }

  void reserve(std::size_t n);
  // Appends one sample; patch has |window| entries in {0,1}.
  void add(std::span<const std::uint8_t> patch, std::uint8_t label,
           std::optional<Provenance> where = std::nullopt);
  void add_packed(std::span<const std::uint64_t> words, std::uint8_t label,
                  std::optional<Provenance> where = std::nullopt);

  std::span<const std::uint64_t> packed(std::size_t i) const {
    return std::span<const std::uint64_t>(bits_).subspan(i * words_, words_);
  }
  std::vector<std::uint8_t> patch(std::size_t i) const;
  // Expands sample i into out (size |window|) as numeric 0/1 values.
  template <typename T>
  void expand(std::size_t i, std::span<T> out) const {
    const auto w = packed(i);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<T>((w[k >> 6] >> (k & 63)) & 1U);
  }
  std::uint8_t label(std::size_t i) const { return labels_[i]; }
  std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  std::optional<Provenance> provenance(std::size_t i) const {
    if (provenance_.empty()) return std::nullopt;
    return provenance_[i];
  }

  // Statistics over exact bit-pattern equality; computed on demand and cached.
  const DatasetStats& stats() const;

  // Copy of the samples at the given indices, in that order.
  PatchDataset select(std::span<const std::size_t> indices) const;

  friend bool operator==(const PatchDataset& a, const PatchDataset& b) {
    return a.window_ == b.window_ && a.bits_ == b.bits_ && a.labels_ == b.labels_ &&
           a.provenance_ == b.provenance_;
  }

 private:
  Window window_;
  std::size_t words_;
  std::vector<std::uint64_t> bits_;
  std::vector<std::uint8_t> labels_;
  std::vector<Provenance> provenance_;
  mutable std::optional<DatasetStats> stats_;
};

// One sample per eligible pixel, in (pair, row-major pixel) order. In
// ForegroundOnly mode every pair must have output contained in input.
PatchDataset extract_dataset(std::span<const ImagePair> pairs, const Window& window,
                             Sampling sampling = Sampling::ForegroundOnly);

// Uniform sample of n distinct samples; kept in their original relative order.
PatchDataset subsample(const PatchDataset& ds, std::size_t n, std::uint64_t seed);

// Deterministic per-epoch mini-batch order. The last batch may be short.
class BatchSchedule {
 public:
  BatchSchedule(std::size_t count, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch);

  std::size_t batch_count() const noexcept {
    return (order_.size() + batch_size_ - 1) / batch_size_;
  }
  std::span<const std::size_t> batch(std::size_t b) const;
  std::span<const std::size_t> order() const noexcept { return order_; }

  class iterator {
   public:
    using value_type = std::span<const std::size_t>;
    using difference_type = std::ptrdiff_t;
    iterator() = default;
    iterator(const BatchSchedule* s, std::size_t b) : s_(s), b_(b) {}
    value_type operator*() const { return s_->batch(b_); }
    iterator& operator++() {
      ++b_;
      return *this;
    }
    iterator operator++(int) {
      auto t = *this;
      ++b_;
      return t;
    }
    bool operator==(const iterator& o) const { return b_ == o.b_; }

   private:
    const BatchSchedule* s_ = nullptr;
    std::size_t b_ = 0;
  };
  iterator begin() const { return {this, 0}; }
  iterator end() const { return {this, batch_count()}; }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
};

BatchSchedule shuffle_batches(const PatchDataset& ds, std::size_t batch_size, std::uint64_t seed,
                              std::uint64_t epoch);

// Binary container, see docs/formats.md.
std::vector<unsigned char> encode_dataset(const PatchDataset& ds);
PatchDataset decode_dataset(std::span<const unsigned char> bytes);
void save_dataset(const PatchDataset& ds, const std::filesystem::path& path);
PatchDataset load_dataset(const std::filesystem::path& path);

}  // namespace wopl
