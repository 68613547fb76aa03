#include "woplearn/baseline.hpp"

#include <cstring>
#include <string>

#include "woplearn/errors.hpp"

namespace wopl {

namespace {

std::uint8_t decide(const LabelCounts& c) { return c.ones >= c.zeros ? 1 : 0; }

}  // namespace

FrequencyTable::FrequencyTable(Window window) : window_(std::move(window)), words_((window_.size() + 63) / 64) {}

std::string FrequencyTable::pack(std::span<const std::uint8_t> patch) const {
  if (patch.size() != window_.size())
    throw InvalidArgument("patch length " + std::to_string(patch.size()) + " does not match window size " +
                          std::to_string(window_.size()));
  std::string key(words_ * sizeof(std::uint64_t), '\0');
  std::vector<std::uint64_t> words(words_, 0);
  for (std::size_t k = 0; k < patch.size(); ++k)
    if (patch[k]) words[k >> 6] |= std::uint64_t{1} << (k & 63);
  std::memcpy(key.data(), words.data(), key.size());
  return key;
}

const LabelCounts* FrequencyTable::find(std::span<const std::uint8_t> patch) const {
  const auto it = entries_.find(pack(patch));
  return it == entries_.end() ? nullptr : &it->second;
}

const LabelCounts* FrequencyTable::find_packed(std::span<const std::uint64_t> words) const {
  const std::string key(reinterpret_cast<const char*>(words.data()), words.size_bytes());
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::uint8_t FrequencyTable::predict(std::span<const std::uint8_t> patch) const {
  const auto* c = find(patch);
  return c ? decide(*c) : default_label_;
}

std::uint8_t FrequencyTable::predict_packed(std::span<const std::uint64_t> words) const {
  const auto* c = find_packed(words);
  return c ? decide(*c) : default_label_;
}

void FrequencyTable::add_count(std::span<const std::uint64_t> words, LabelCounts counts) {
  if (words.size() != words_) throw InvalidArgument("packed pattern has the wrong word count");
  if (counts.zeros + counts.ones == 0) throw InvalidArgument("table entries need at least one observation");
  auto& e = entries_[std::string(reinterpret_cast<const char*>(words.data()), words.size_bytes())];
  e.zeros += counts.zeros;
  e.ones += counts.ones;
}

void FrequencyTable::set_default_label(std::uint8_t label) {
  if (label > 1) throw InvalidArgument("default label must be 0 or 1");
  default_label_ = label;
}

FrequencyTable fit_table(const PatchDataset& ds) {
  if (ds.empty()) throw InvalidArgument("cannot fit a lookup table on an empty dataset");
  FrequencyTable t(ds.window());
  std::uint64_t ones = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::uint8_t y = ds.label(i);
    t.add_count(ds.packed(i), y ? LabelCounts{0, 1} : LabelCounts{1, 0});
    ones += y;
  }
  const std::uint64_t zeros = ds.size() - ones;
  t.set_default_label(ones >= zeros ? 1 : 0);
  return t;
}

std::uint8_t predict_table(const FrequencyTable& t, std::span<const std::uint8_t> patch) { return t.predict(patch); }

double table_error(const FrequencyTable& t, const PatchDataset& ds) {
  if (ds.empty()) throw InvalidArgument("cannot evaluate on an empty dataset");
  if (!(ds.window() == t.window())) throw InvalidArgument("dataset window differs from table window");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) wrong += t.predict_packed(ds.packed(i)) != ds.label(i);
  return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

void TableClassifier::predict(std::span<const std::uint8_t> patches, std::span<std::uint8_t> out) const {
  const std::size_t n = input_size();
  if (patches.size() != out.size() * n)
    throw InvalidArgument("patch buffer size " + std::to_string(patches.size()) + " is not " +
                          std::to_string(out.size()) + " x " + std::to_string(n));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = table_.predict(patches.subspan(i * n, n));
}

}  // namespace wopl
