#include "woplearn/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_map>

#include "woplearn/binary_io.hpp"
#include "woplearn/errors.hpp"
#include "woplearn/rng.hpp"

namespace wopl {

namespace {

constexpr char kDatasetMagic[] = "WOPD";
constexpr std::uint32_t kDatasetVersion = 1;

std::string_view key_of(std::span<const std::uint64_t> words) {
  return {reinterpret_cast<const char*>(words.data()), words.size_bytes()};
}

}  // namespace

PatchDataset::PatchDataset(Window window) : window_(std::move(window)), words_((window_.size() + 63) / 64) {}

void PatchDataset::reserve(std::size_t n) {
  bits_.reserve(n * words_);
  labels_.reserve(n);
}

void PatchDataset::add(std::span<const std::uint8_t> patch, std::uint8_t label, std::optional<Provenance> where) {
  if (patch.size() != window_.size())
    throw InvalidArgument("patch length " + std::to_string(patch.size()) + " does not match window size " +
                          std::to_string(window_.size()));
  std::vector<std::uint64_t> words(words_, 0);
  for (std::size_t k = 0; k < patch.size(); ++k) {
    if (patch[k] > 1) throw InvalidArgument("patch values must be 0 or 1");
    if (patch[k]) words[k >> 6] |= std::uint64_t{1} << (k & 63);
  }
  add_packed(words, label, where);
}

void PatchDataset::add_packed(std::span<const std::uint64_t> words, std::uint8_t label,
                              std::optional<Provenance> where) {
  if (words.size() != words_) throw InvalidArgument("packed patch has the wrong word count");
  if (label > 1) throw InvalidArgument("labels must be 0 or 1");
  if (!labels_.empty() && where.has_value() != has_provenance())
    throw InvalidArgument("provenance must be given for all samples or for none");
  bits_.insert(bits_.end(), words.begin(), words.end());
  labels_.push_back(label);
  if (where) provenance_.push_back(*where);
  stats_.reset();
}

std::vector<std::uint8_t> PatchDataset::patch(std::size_t i) const {
  std::vector<std::uint8_t> out(window_.size());
  expand<std::uint8_t>(i, out);
  return out;
}

const DatasetStats& PatchDataset::stats() const {
  if (!stats_) {
    std::unordered_map<std::string_view, std::uint8_t> seen;
    seen.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) seen[key_of(packed(i))] |= static_cast<std::uint8_t>(1U << labels_[i]);
    DatasetStats s;
    s.total = size();
    s.distinct = seen.size();
    s.conflicting = static_cast<std::size_t>(
        std::count_if(seen.begin(), seen.end(), [](const auto& kv) { return kv.second == 3; }));
    stats_ = s;
  }
  return *stats_;
}

PatchDataset PatchDataset::select(std::span<const std::size_t> indices) const {
  PatchDataset out(window_);
  out.reserve(indices.size());
  for (const std::size_t i : indices) {
    if (i >= size()) throw InvalidArgument("sample index " + std::to_string(i) + " out of range");
    out.add_packed(packed(i), labels_[i], provenance(i));
  }
  return out;
}

PatchDataset extract_dataset(std::span<const ImagePair> pairs, const Window& window, Sampling sampling) {
  PatchDataset ds(window);
  std::size_t expected = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [id, input, output] = pairs[i];
    if (input.width() != output.width() || input.height() != output.height())
      throw DataError("pair " + std::to_string(i) + " (" + id + "): input is " + std::to_string(input.width()) +
                      "x" + std::to_string(input.height()) + " but output is " + std::to_string(output.width()) +
                      "x" + std::to_string(output.height()));
    expected += sampling == Sampling::ForegroundOnly ? input.count_foreground()
                                                     : static_cast<std::size_t>(input.width()) * input.height();
  }
  ds.reserve(expected);

  std::vector<std::uint8_t> buf(window.size());
  std::vector<std::uint64_t> words(ds.words_per_patch());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [id, input, output] = pairs[i];
    for (int y = 0; y < input.height(); ++y) {
      for (int x = 0; x < input.width(); ++x) {
        if (sampling == Sampling::ForegroundOnly) {
          if (!input.at(x, y)) {
            if (output.at(x, y))
              throw DataError("pair " + std::to_string(i) + " (" + id + "): output pixel (" + std::to_string(x) +
                              "," + std::to_string(y) + ") is set where the input is background");
            continue;
          }
        }
        extract_patch_into(input, {x, y}, window, buf);
        std::fill(words.begin(), words.end(), 0);
        for (std::size_t k = 0; k < buf.size(); ++k)
          if (buf[k]) words[k >> 6] |= std::uint64_t{1} << (k & 63);
        ds.add_packed(words, output.at(x, y),
                      Provenance{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(x),
                                 static_cast<std::uint32_t>(y)});
      }
    }
  }
  return ds;
}

PatchDataset subsample(const PatchDataset& ds, std::size_t n, std::uint64_t seed) {
  if (n > ds.size())
    throw InvalidArgument("cannot subsample " + std::to_string(n) + " of " + std::to_string(ds.size()) +
                          " samples");
  // Partial Fisher-Yates over the index range.
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5b5a4d504c45ULL));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return ds.select(idx);
}

BatchSchedule::BatchSchedule(std::size_t count, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch)
    : order_(count), batch_size_(batch_size) {
  if (batch_size == 0) throw InvalidArgument("batch size must be >= 1");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  Rng rng(derive_seed(seed, epoch));
  rng.shuffle(std::span<std::size_t>(order_));
}

std::span<const std::size_t> BatchSchedule::batch(std::size_t b) const {
  const std::size_t begin = b * batch_size_;
  const std::size_t end = std::min(order_.size(), begin + batch_size_);
  return std::span<const std::size_t>(order_).subspan(begin, end - begin);
}

BatchSchedule shuffle_batches(const PatchDataset& ds, std::size_t batch_size, std::uint64_t seed,
                              std::uint64_t epoch) {
  return BatchSchedule(ds.size(), batch_size, seed, epoch);
}

std::vector<unsigned char> encode_dataset(const PatchDataset& ds) {
  ByteWriter w;
  w.put_raw(kDatasetMagic);
  w.put(kDatasetVersion);
  w.put(static_cast<std::uint32_t>(ds.window().size()));
  for (const auto& o : ds.window().offsets()) {
    w.put(static_cast<std::int32_t>(o.dx));
    w.put(static_cast<std::int32_t>(o.dy));
  }
  w.put(static_cast<std::uint64_t>(ds.size()));
  w.put(static_cast<std::uint8_t>(ds.has_provenance() ? 1 : 0));
  for (std::size_t i = 0; i < ds.size(); ++i) w.put_array(ds.packed(i));
  w.put_array(ds.labels());
  if (ds.has_provenance()) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto p = *ds.provenance(i);
      w.put(p.image);
      w.put(p.x);
      w.put(p.y);
    }
  }
  return w.take();
}

PatchDataset decode_dataset(std::span<const unsigned char> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.get_raw(4) != kDatasetMagic) throw ParseError("not a dataset container (bad magic)", 0);
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion)
    throw ParseError("unsupported dataset container version " + std::to_string(version), 4);
  const auto count = r.get<std::uint32_t>();
  if (count == 0 || count > r.remaining() / 8) throw ParseError("invalid window size", r.position() - 4);
  std::vector<Offset> offsets(count);
  for (auto& o : offsets) {
    o.dx = r.get<std::int32_t>();
    o.dy = r.get<std::int32_t>();
  }
  Window window = [&] {
    const auto at = r.position();
    try {
      return Window(offsets);
    } catch (const InvalidArgument& e) {
      throw ParseError(std::string("invalid window: ") + e.what(), at);
    }
  }();
  const auto n = r.get<std::uint64_t>();
  const auto flags = r.get<std::uint8_t>();
  if (flags > 1) throw ParseError("invalid dataset flags", r.position() - 1);
  PatchDataset ds(window);
  const std::size_t words = ds.words_per_patch();
  const std::size_t per_sample = words * 8 + 1 + (flags ? 12 : 0);
  if (n > r.remaining() / per_sample) throw ParseError("truncated dataset payload", r.position());
  std::vector<std::uint64_t> bits(static_cast<std::size_t>(n) * words);
  r.get_array(std::span<std::uint64_t>(bits));
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(n));
  const auto label_pos = r.position();
  r.get_array(std::span<std::uint8_t>(labels));
  std::vector<Provenance> prov;
  if (flags) {
    prov.resize(static_cast<std::size_t>(n));
    for (auto& p : prov) {
      p.image = r.get<std::uint32_t>();
      p.x = r.get<std::uint32_t>();
      p.y = r.get<std::uint32_t>();
    }
  }
  r.expect_end();
  if (const std::size_t tail = window.size() % 64; tail != 0) {
    const std::uint64_t unused = ~((std::uint64_t{1} << tail) - 1);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i)
      if (bits[i * words + words - 1] & unused)
        throw ParseError("patch padding bits are not zero", 4 + 4 + 4 + 8 * window.size() + 9 + (i * words + words - 1) * 8);
  }
  ds.reserve(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1) throw ParseError("non-binary label", label_pos + i);
    ds.add_packed(std::span<const std::uint64_t>(bits).subspan(i * words, words), labels[i],
                  flags ? std::optional<Provenance>(prov[i]) : std::nullopt);
  }
  return ds;
}

void save_dataset(const PatchDataset& ds, const std::filesystem::path& path) {
  write_file_bytes(path, encode_dataset(ds));
}

PatchDataset load_dataset(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_dataset(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.detail(), e.offset());
  }
}

}  // namespace wopl
