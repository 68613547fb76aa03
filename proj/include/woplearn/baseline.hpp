#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>

#include "woplearn/dataset.hpp"
#include "woplearn/woperator.hpp"

namespace wopl {

struct LabelCounts {
  std::uint64_t zeros = 0;
  std::uint64_t ones = 0;
  friend bool operator==(const LabelCounts&, const LabelCounts&) = default;
};

// Empirical conditional label counts per observed patch pattern. Decision:
// majority label, ties keep (1); unseen patterns get the global majority.
class FrequencyTable {
 public:
  explicit FrequencyTable(Window window);

  const Window& window() const noexcept { return window_; }
  std::uint8_t default_label() const noexcept { return default_label_; }
  std::size_t entry_count() const noexcept { return entries_.size(); }
  std::size_t words_per_patch() const noexcept { return words_; }

  const LabelCounts* find(std::span<const std::uint8_t> patch) const;
  const LabelCounts* find_packed(std::span<const std::uint64_t> words) const;
  std::uint8_t predict(std::span<const std::uint8_t> patch) const;
  std::uint8_t predict_packed(std::span<const std::uint64_t> words) const;

  // Iteration in unspecified order: fn(packed words, counts).
  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& [key, counts] : entries_)
      fn(std::span<const std::uint64_t>(reinterpret_cast<const std::uint64_t*>(key.data()), words_), counts);
  }

  void add_count(std::span<const std::uint64_t> words, LabelCounts counts);
  void set_default_label(std::uint8_t label);

  friend bool operator==(const FrequencyTable&, const FrequencyTable&) = default;

 private:
  std::string pack(std::span<const std::uint8_t> patch) const;

  Window window_;
  std::size_t words_;
  std::unordered_map<std::string, LabelCounts> entries_;
  std::uint8_t default_label_ = 1;
};

FrequencyTable fit_table(const PatchDataset& ds);
std::uint8_t predict_table(const FrequencyTable& t, std::span<const std::uint8_t> patch);

// Fraction of samples in ds the table mislabels.
double table_error(const FrequencyTable& t, const PatchDataset& ds);

class TableClassifier final : public PatchClassifier {
 public:
  explicit TableClassifier(FrequencyTable table) : table_(std::move(table)) {}

  std::size_t input_size() const override { return table_.window().size(); }
  bool trained() const override { return true; }
  void predict(std::span<const std::uint8_t> patches, std::span<std::uint8_t> out) const override;

  const FrequencyTable& table() const noexcept { return table_; }

 private:
  FrequencyTable table_;
};

}  // namespace wopl
