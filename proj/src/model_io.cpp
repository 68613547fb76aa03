#include "woplearn/model_io.hpp"

#include <algorithm>

#include "woplearn/binary_io.hpp"
#include "woplearn/errors.hpp"

namespace wopl {

namespace {

constexpr char kModelMagic[] = "WOPM";
constexpr std::uint32_t kModelVersion = 1;

void put_window(ByteWriter& w, const Window& window) {
  w.put(static_cast<std::uint32_t>(window.size()));
  for (const auto& o : window.offsets()) {
    w.put(static_cast<std::int32_t>(o.dx));
    w.put(static_cast<std::int32_t>(o.dy));
  }
}

Window get_window(ByteReader& r) {
  const auto at = r.position();
  const auto count = r.get<std::uint32_t>();
  if (count == 0 || count > r.remaining() / 8) throw ParseError("invalid window size", at);
  std::vector<Offset> offsets(count);
  for (auto& o : offsets) {
    o.dx = r.get<std::int32_t>();
    o.dy = r.get<std::int32_t>();
  }
  try {
    return Window(offsets);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid window: ") + e.what(), at);
  }
}

void put_config(ByteWriter& w, const CnnConfig& c) {
  w.put(static_cast<std::uint32_t>(c.window_w));
  w.put(static_cast<std::uint32_t>(c.window_h));
  w.put(static_cast<std::uint32_t>(c.blocks.size()));
  for (const auto& b : c.blocks) {
    w.put(static_cast<std::uint32_t>(b.num_masks));
    w.put(static_cast<std::uint32_t>(b.mask_size));
  }
  w.put(static_cast<std::uint32_t>(c.fc_hidden));
  w.put(static_cast<std::uint32_t>(c.num_classes));
  w.put(c.dropout_rate);
  w.put(c.learning_rate);
  w.put(static_cast<std::uint32_t>(c.batch_size));
  w.put(static_cast<std::uint32_t>(c.epochs));
  w.put(c.seed);
  w.put(static_cast<std::uint8_t>(c.precision));
}

CnnConfig get_config(ByteReader& r) {
  const auto at = r.position();
  CnnConfig c;
  c.window_w = static_cast<int>(r.get<std::uint32_t>());
  c.window_h = static_cast<int>(r.get<std::uint32_t>());
  const auto nblocks = r.get<std::uint32_t>();
  if (nblocks > r.remaining() / 8) throw ParseError("invalid block count", r.position() - 4);
  c.blocks.resize(nblocks);
  for (auto& b : c.blocks) {
    b.num_masks = static_cast<int>(r.get<std::uint32_t>());
    b.mask_size = static_cast<int>(r.get<std::uint32_t>());
  }
  c.fc_hidden = static_cast<int>(r.get<std::uint32_t>());
  c.num_classes = static_cast<int>(r.get<std::uint32_t>());
  c.dropout_rate = r.get<double>();
  c.learning_rate = r.get<double>();
  c.batch_size = static_cast<int>(r.get<std::uint32_t>());
  c.epochs = static_cast<int>(r.get<std::uint32_t>());
  c.seed = r.get<std::uint64_t>();
  const auto p = r.get<std::uint8_t>();
  if (p > 1) throw ParseError("unknown precision tag", r.position() - 1);
  c.precision = static_cast<Precision>(p);
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what(), at);
  }
  return c;
}

template <typename T>
void put_cnn_state(ByteWriter& w, const CnnModel::State<T>& s, bool with_optimizer_state) {
  const auto& params = s.net.parameters();
  w.put(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.put_string(p.name);
    w.put(static_cast<std::uint8_t>(p.value.rank()));
    for (int d : p.value.shape) w.put(static_cast<std::uint32_t>(d));
    w.put_array(std::span<const T>(p.value.data));
  }
  if (with_optimizer_state)
    for (std::size_t i = 0; i < params.size(); ++i) {
      w.put_array(std::span<const T>(s.adam.m[i]));
      w.put_array(std::span<const T>(s.adam.v[i]));
    }
}

template <typename T>
void get_cnn_state(ByteReader& r, CnnModel::State<T>& s, bool with_optimizer_state) {
  auto& params = s.net.parameters();
  const auto count_at = r.position();
  if (r.get<std::uint32_t>() != params.size()) throw ParseError("parameter count does not match config", count_at);
  for (auto& p : params) {
    const auto at = r.position();
    const std::string name = r.get_string();
    if (name != p.name) throw ParseError("expected parameter '" + p.name + "', found '" + name + "'", at);
    const auto rank = r.get<std::uint8_t>();
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(r.get<std::uint32_t>());
    if (shape != p.value.shape)
      throw ParseError("parameter '" + name + "' has shape " + shape_string(shape) + ", expected " +
                           shape_string(p.value.shape),
                       at);
    r.get_array(std::span<T>(p.value.data));
  }
  if (with_optimizer_state)
    for (std::size_t i = 0; i < params.size(); ++i) {
      r.get_array(std::span<T>(s.adam.m[i]));
      r.get_array(std::span<T>(s.adam.v[i]));
    }
}

}  // namespace

Window LoadedModel::window() const { return kind == ModelKind::Cnn ? cnn->window() : table->window(); }

LocalFunction LoadedModel::local_function() const {
  if (kind == ModelKind::Cnn) return LocalFunction(cnn->window(), std::make_shared<CnnClassifier>(cnn));
  return LocalFunction(table->window(), std::make_shared<TableClassifier>(*table));
}

std::vector<unsigned char> encode_model(const CnnModel& model, bool with_optimizer_state) {
  ByteWriter w;
  w.put_raw(kModelMagic);
  w.put(kModelVersion);
  w.put_string("cnn");
  put_window(w, model.window());
  put_config(w, model.config());
  w.put(static_cast<std::uint32_t>(model.epochs_completed()));
  w.put(model.adam_steps());
  w.put(static_cast<std::uint8_t>(with_optimizer_state ? 1 : 0));
  std::visit([&](const auto& s) { put_cnn_state(w, s, with_optimizer_state); }, model.state());
  return w.take();
}

std::vector<unsigned char> encode_model(const FrequencyTable& table) {
  ByteWriter w;
  w.put_raw(kModelMagic);
  w.put(kModelVersion);
  w.put_string("table");
  put_window(w, table.window());
  w.put(table.default_label());
  // Entries sorted by packed pattern so identical tables encode identically.
  struct Entry {
    std::vector<std::uint64_t> words;
    LabelCounts counts;
  };
  std::vector<Entry> entries;
  entries.reserve(table.entry_count());
  table.for_each([&](std::span<const std::uint64_t> words, const LabelCounts& c) {
    entries.push_back({{words.begin(), words.end()}, c});
  });
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.words < b.words; });
  w.put(static_cast<std::uint64_t>(entries.size()));
  for (const auto& e : entries) {
    w.put_array(std::span<const std::uint64_t>(e.words));
    w.put(e.counts.zeros);
    w.put(e.counts.ones);
  }
  return w.take();
}

LoadedModel decode_model(std::span<const unsigned char> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.get_raw(4) != kModelMagic) throw ParseError("not a model container (bad magic)", 0);
  const auto version = r.get<std::uint32_t>();
  if (version != kModelVersion) throw ParseError("unsupported model container version " + std::to_string(version), 4);
  const auto kind_at = r.position();
  const std::string kind = r.get_string();
  const Window window = get_window(r);
  LoadedModel out;
  if (kind == "cnn") {
    const auto config_at = r.position();
    const CnnConfig config = get_config(r);
    if (!(make_rect_window(config.window_w, config.window_h) == window))
      throw ParseError("window does not match the network input size", config_at);
    auto model = std::make_shared<CnnModel>(config);
    model->set_epochs_completed(static_cast<int>(r.get<std::uint32_t>()));
    const auto steps = r.get<std::uint64_t>();
    const auto flag_at = r.position();
    const auto with_opt = r.get<std::uint8_t>();
    if (with_opt > 1) throw ParseError("invalid optimizer-state flag", flag_at);
    std::visit(
        [&](auto& s) {
          get_cnn_state(r, s, with_opt == 1);
          s.adam.step = steps;
        },
        model->state());
    out.kind = ModelKind::Cnn;
    out.cnn = std::move(model);
  } else if (kind == "table") {
    auto table = std::make_shared<FrequencyTable>(window);
    const auto label_at = r.position();
    const auto def = r.get<std::uint8_t>();
    if (def > 1) throw ParseError("invalid default label", label_at);
    table->set_default_label(def);
    const auto n = r.get<std::uint64_t>();
    const std::size_t words = table->words_per_patch();
    if (n > r.remaining() / (words * 8 + 16)) throw ParseError("truncated table payload", r.position());
    std::vector<std::uint64_t> key(words);
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto at = r.position();
      r.get_array(std::span<std::uint64_t>(key));
      LabelCounts c;
      c.zeros = r.get<std::uint64_t>();
      c.ones = r.get<std::uint64_t>();
      if (c.zeros + c.ones == 0) throw ParseError("table entry without observations", at);
      table->add_count(key, c);
    }
    out.kind = ModelKind::Table;
    out.table = std::move(table);
  } else {
    throw ParseError("unknown model kind '" + kind + "'", kind_at);
  }
  r.expect_end();
  return out;
}

void save_model(const CnnModel& model, const std::filesystem::path& path, bool with_optimizer_state) {
  write_file_bytes(path, encode_model(model, with_optimizer_state));
}

void save_model(const FrequencyTable& table, const std::filesystem::path& path) {
  write_file_bytes(path, encode_model(table));
}

LoadedModel load_model(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_model(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.detail(), e.offset());
  }
}

}  // namespace wopl
