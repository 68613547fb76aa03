#include "woplearn/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "woplearn/metrics.hpp"

namespace wopl {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974ULL;     // "init"
constexpr std::uint64_t kDropoutStream = 0x64726f70ULL;  // "drop"
constexpr std::size_t kPredictChunk = 256;

template <typename T>
bool all_finite(std::span<const T> v) {
  for (const T x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

const char* precision_name(Precision p) { return p == Precision::F64 ? "f64" : "f32"; }

Precision parse_precision(const std::string& name) {
  if (name == "f32") return Precision::F32;
  if (name == "f64") return Precision::F64;
  throw InvalidArgument("unknown precision '" + name + "' (expected f32 or f64)");
}

void CnnConfig::validate() const {
  auto fail = [](const std::string& what) { throw InvalidArgument("cnn config: " + what); };
  if (window_w < 1 || window_h < 1) fail("window dimensions must be >= 1");
  if (window_w % 2 == 0 || window_h % 2 == 0) fail("window dimensions must be odd");
  if (blocks.empty()) fail("at least one convolution block is required");
  for (const auto& b : blocks) {
    if (b.num_masks < 1) fail("number of masks must be >= 1");
    if (b.mask_size < 1 || b.mask_size % 2 == 0) fail("mask size must be odd and >= 1, got " + std::to_string(b.mask_size));
  }
  if (fc_hidden < 1) fail("fc_hidden must be >= 1");
  if (num_classes != 2) fail("only two classes are supported");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout rate must lie in [0, 1)");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning rate must be positive");
  if (batch_size < 1) fail("batch size must be >= 1");
  if (epochs < 1) fail("epochs must be >= 1");
  const auto [w, h] = final_spatial();
  if (w < 1 || h < 1) {
    std::ostringstream os;
    os << "window " << window_w << "x" << window_h << " pools down to " << w << "x" << h << " after "
       << blocks.size() << " blocks";
    fail(os.str());
  }
}

std::pair<int, int> CnnConfig::final_spatial() const {
  int w = window_w, h = window_h;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    w /= 2;
    h /= 2;
  }
  return {w, h};
}

int CnnConfig::flat_features() const {
  const auto [w, h] = final_spatial();
  return w * h * blocks.back().num_masks;
}

std::vector<ConvBlockSpec> parse_blocks(const std::string& text) {
  std::vector<ConvBlockSpec> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto x = item.find('x');
    if (x == std::string::npos) throw InvalidArgument("block '" + item + "' is not MASKSxSIZE");
    try {
      std::size_t used_a = 0, used_b = 0;
      const std::string a = item.substr(0, x), b = item.substr(x + 1);
      ConvBlockSpec spec{std::stoi(a, &used_a), std::stoi(b, &used_b)};
      if (used_a != a.size() || used_b != b.size()) throw std::invalid_argument(item);
      out.push_back(spec);
    } catch (const std::logic_error&) {
      throw InvalidArgument("block '" + item + "' is not MASKSxSIZE");
    }
  }
  if (out.empty()) throw InvalidArgument("no convolution blocks given");
  return out;
}

std::string format_blocks(std::span<const ConvBlockSpec> blocks) {
  std::string s;
  for (std::size_t i = 0; i < blocks.size(); ++i)
    s += (i ? "," : "") + std::to_string(blocks[i].num_masks) + "x" + std::to_string(blocks[i].mask_size);
  return s;
}

template <typename T>
AdamState<T> AdamState<T>::zeros_like(std::span<const Parameter<T>> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.value.size(), T(0));
    s.v.emplace_back(p.value.size(), T(0));
  }
  return s;
}

template <typename T>
void adam_step(std::span<Parameter<T>> params, std::span<const std::vector<T>> grads, AdamState<T>& state,
               double learning_rate, int epoch) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw ShapeError("adam: parameter, gradient and state counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].value.size() || state.m[i].size() != grads[i].size() ||
        state.v[i].size() != grads[i].size())
      throw ShapeError("adam: size mismatch for " + params[i].name);
    if (!all_finite<T>(grads[i]))
      throw DivergenceError("non-finite gradient in " + params[i].name, epoch,
                            static_cast<std::int64_t>(state.step + 1));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(AdamHyper::beta1), b2 = static_cast<T>(AdamHyper::beta2);
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(AdamHyper::beta1, t)));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(AdamHyper::beta2, t)));
  const T lr = static_cast<T>(learning_rate), eps = static_cast<T>(AdamHyper::epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* theta = params[i].value.data.data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    const T* g = grads[i].data();
    const std::size_t n = grads[i].size();
    for (std::size_t k = 0; k < n; ++k) {
      m[k] = b1 * m[k] + (T(1) - b1) * g[k];
      v[k] = b2 * v[k] + (T(1) - b2) * g[k] * g[k];
      const T m_hat = m[k] * c1;
      const T v_hat = v[k] * c2;
      theta[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
    if (!all_finite<T>(params[i].value.data))
      throw DivergenceError("non-finite parameter in " + params[i].name + " after update", epoch,
                            static_cast<std::int64_t>(state.step));
  }
}

template <typename T>
Network<T>::Network(const CnnConfig& config) : config_(config) {
  config_.validate();
  int channels = 1;
  for (std::size_t i = 0; i < config_.blocks.size(); ++i) {
    const auto& b = config_.blocks[i];
    params_.push_back({"conv" + std::to_string(i + 1) + ".weight",
                       Tensor<T>({b.num_masks, channels, b.mask_size, b.mask_size})});
    params_.push_back({"conv" + std::to_string(i + 1) + ".bias", Tensor<T>({b.num_masks})});
    channels = b.num_masks;
  }
  const int flat = config_.flat_features();
  params_.push_back({"fc1.weight", Tensor<T>({config_.fc_hidden, flat})});
  params_.push_back({"fc1.bias", Tensor<T>({config_.fc_hidden})});
  params_.push_back({"fc2.weight", Tensor<T>({config_.num_classes, config_.fc_hidden})});
  params_.push_back({"fc2.bias", Tensor<T>({config_.num_classes})});
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
void Network<T>::initialize(std::uint64_t seed) {
  Rng rng(derive_seed(seed, kInitStream));
  for (auto& p : params_) {
    if (p.value.rank() == 1) {
      std::fill(p.value.data.begin(), p.value.data.end(), T(0));
      continue;
    }
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < p.value.rank(); ++d) fan_in *= static_cast<std::size_t>(p.value.shape[d]);
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& w : p.value.data) w = static_cast<T>(sd * rng.normal());
  }
}

template <typename T>
const Tensor<T>& Network<T>::forward(const Tensor<T>& input, Workspace& ws, bool training, Rng* rng) const {
  if (input.rank() != 4 || input.shape[1] != 1 || input.shape[2] != config_.window_h ||
      input.shape[3] != config_.window_w)
    throw ShapeError("network input " + shape_string(input.shape) + " does not match (B,1," +
                     std::to_string(config_.window_h) + "," + std::to_string(config_.window_w) + ")");
  if (training && config_.dropout_rate > 0.0 && rng == nullptr)
    throw InvalidArgument("training-mode forward with dropout needs a random generator");
  const int B = input.shape[0];
  ws.ready = false;
  ws.blocks.resize(config_.blocks.size());
  const Tensor<T>* x = &input;
  Tensor<T> pooled;
  for (std::size_t i = 0; i < config_.blocks.size(); ++i) {
    auto& c = ws.blocks[i];
    c.input = *x;
    c.pre = conv2d_forward(c.input, param(2 * i), std::span<const T>(param(2 * i + 1).data), &c.col);
    auto pool = maxpool2x2_forward(relu_forward(c.pre));
    c.argmax = std::move(pool.argmax);
    c.pooled_shape = pool.out.shape;
    pooled = std::move(pool.out);
    x = &pooled;
  }
  const std::size_t nb = config_.blocks.size();
  ws.flat = Tensor<T>({B, config_.flat_features()}, std::move(pooled.data));
  ws.fc1_pre = fc_forward(ws.flat, param(2 * nb), std::span<const T>(param(2 * nb + 1).data));
  Rng unused(0);
  auto drop = dropout_forward(relu_forward(ws.fc1_pre), config_.dropout_rate, training, rng ? *rng : unused);
  ws.dropped = std::move(drop.out);
  ws.mask = std::move(drop.mask);
  ws.logits = fc_forward(ws.dropped, param(2 * nb + 2), std::span<const T>(param(2 * nb + 3).data));
  ws.probs = softmax(ws.logits);
  ws.ready = true;
  return ws.probs;
}

template <typename T>
double Network<T>::loss(const Workspace& ws, std::span<const std::uint8_t> labels) const {
  if (!ws.ready) throw StateError("loss requested before a forward pass");
  return cross_entropy(ws.probs, labels);
}

template <typename T>
void Network<T>::backward(Workspace& ws, std::span<const std::uint8_t> labels,
                          std::vector<std::vector<T>>& grads) const {
  if (!ws.ready) throw StateError("backward called before forward");
  grads.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) grads[i].assign(params_[i].value.size(), T(0));
  const std::size_t nb = config_.blocks.size();

  Tensor<T> dlogits = softmax_cross_entropy_grad(ws.probs, labels);
  Tensor<T> dhidden;
  fc_backward(ws.dropped, param(2 * nb + 2), dlogits, std::span<T>(grads[2 * nb + 2]),
              std::span<T>(grads[2 * nb + 3]), &dhidden);
  dhidden = relu_backward(ws.fc1_pre, dropout_backward(std::span<const T>(ws.mask), dhidden));
  Tensor<T> dflat;
  fc_backward(ws.flat, param(2 * nb), dhidden, std::span<T>(grads[2 * nb]), std::span<T>(grads[2 * nb + 1]), &dflat);

  Tensor<T> dpooled(ws.blocks.back().pooled_shape, std::move(dflat.data));
  for (std::size_t i = nb; i-- > 0;) {
    auto& c = ws.blocks[i];
    const Tensor<T> dpre = relu_backward(c.pre, maxpool2x2_backward(c.pre.shape, c.argmax, dpooled));
    Tensor<T> dx;
    conv2d_backward(c.input, param(2 * i), dpre, std::span<T>(grads[2 * i]), std::span<T>(grads[2 * i + 1]),
                    i > 0 ? &dx : nullptr, &c.col);
    dpooled = std::move(dx);
  }
}

template class Network<float>;
template class Network<double>;
template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(std::span<Parameter<float>>, std::span<const std::vector<float>>, AdamState<float>&,
                               double, int);
template void adam_step<double>(std::span<Parameter<double>>, std::span<const std::vector<double>>,
                                AdamState<double>&, double, int);

namespace {

template <typename T>
CnnModel::State<T> make_state(const CnnConfig& config) {
  CnnModel::State<T> s{Network<T>(config), {}};
  s.net.initialize(config.seed);
  s.adam = AdamState<T>::zeros_like(s.net.parameters());
  return s;
}

template <typename T>
void fill_input(const PatchDataset& ds, std::span<const std::size_t> idx, Tensor<T>& input) {
  const std::size_t area = ds.window().size();
  for (std::size_t i = 0; i < idx.size(); ++i)
    ds.expand<T>(idx[i], std::span<T>(input.data).subspan(i * area, area));
}

}  // namespace

CnnModel::CnnModel(const CnnConfig& config)
    : config_(config),
      state_(config.precision == Precision::F64 ? Variant(make_state<double>(config))
                                                : Variant(make_state<float>(config))) {}

Window CnnModel::window() const { return make_rect_window(config_.window_w, config_.window_h); }

std::uint64_t CnnModel::adam_steps() const {
  return std::visit([](const auto& s) { return s.adam.step; }, state_);
}

void CnnModel::predict(std::span<const std::uint8_t> patches, std::span<std::uint8_t> out) const {
  const std::size_t area = static_cast<std::size_t>(config_.window_w) * config_.window_h;
  if (patches.size() != out.size() * area)
    throw InvalidArgument("patch buffer of " + std::to_string(patches.size()) + " values is not " +
                          std::to_string(out.size()) + " patches of " + std::to_string(area));
  std::visit(
      [&](const auto& s) {
        using T = typename std::decay_t<decltype(s.adam.m)>::value_type::value_type;
        typename Network<T>::Workspace ws;
        for (std::size_t start = 0; start < out.size(); start += kPredictChunk) {
          const std::size_t n = std::min(kPredictChunk, out.size() - start);
          Tensor<T> input({static_cast<int>(n), 1, config_.window_h, config_.window_w});
          for (std::size_t k = 0; k < n * area; ++k) input.data[k] = static_cast<T>(patches[start * area + k]);
          const auto& probs = s.net.forward(input, ws, false, nullptr);
          for (std::size_t i = 0; i < n; ++i) out[start + i] = probs.data[2 * i + 1] > probs.data[2 * i] ? 1 : 0;
        }
      },
      state_);
}

namespace {

// Calls fn(i, p_remove, p_keep) for every sample of ds in order.
template <typename Fn>
void for_each_probability(const CnnModel& model, const PatchDataset& ds, Fn&& fn) {
  if (!(ds.window() == model.window())) throw InvalidArgument("dataset window does not match the model window");
  const CnnConfig& cfg = model.config();
  std::visit(
      [&](const auto& s) {
        using T = typename std::decay_t<decltype(s.adam.m)>::value_type::value_type;
        typename Network<T>::Workspace ws;
        std::vector<std::size_t> idx;
        for (std::size_t start = 0; start < ds.size(); start += kPredictChunk) {
          const std::size_t n = std::min(kPredictChunk, ds.size() - start);
          idx.resize(n);
          for (std::size_t i = 0; i < n; ++i) idx[i] = start + i;
          Tensor<T> input({static_cast<int>(n), 1, cfg.window_h, cfg.window_w});
          fill_input(ds, idx, input);
          const auto& probs = s.net.forward(input, ws, false, nullptr);
          for (std::size_t i = 0; i < n; ++i) fn(start + i, probs.data[2 * i], probs.data[2 * i + 1]);
        }
      },
      model.state());
}

}  // namespace

std::vector<double> CnnModel::keep_probability(const PatchDataset& ds) const {
  std::vector<double> out(ds.size());
  for_each_probability(*this, ds, [&](std::size_t i, auto, auto keep) { out[i] = static_cast<double>(keep); });
  return out;
}

std::vector<std::uint8_t> CnnModel::predict(const PatchDataset& ds) const {
  std::vector<std::uint8_t> out(ds.size());
  for_each_probability(*this, ds, [&](std::size_t i, auto remove, auto keep) { out[i] = keep > remove ? 1 : 0; });
  return out;
}

std::vector<std::uint8_t> predict(const CnnModel& model, const PatchDataset& ds) { return model.predict(ds); }

std::vector<EpochRecord> train(CnnModel& model, const PatchDataset& train_ds, const PatchDataset* val_ds,
                               const CheckpointSink& sink) {
  const CnnConfig& cfg = model.config();
  cfg.validate();
  const Window window = model.window();
  if (!(train_ds.window() == window)) throw InvalidArgument("training set window does not match the model window");
  if (val_ds && !(val_ds->window() == window))
    throw InvalidArgument("validation set window does not match the model window");
  if (train_ds.empty()) throw DataError("training set is empty");

  std::vector<EpochRecord> records;
  std::visit(
      [&](auto& s) {
        using T = typename std::decay_t<decltype(s.adam.m)>::value_type::value_type;
        typename Network<T>::Workspace ws;
        std::vector<std::vector<T>> grads;
        std::vector<std::uint8_t> labels;
        for (int epoch = model.epochs_completed() + 1; epoch <= cfg.epochs; ++epoch) {
          Rng dropout_rng(derive_seed(cfg.seed ^ kDropoutStream, static_cast<std::uint64_t>(epoch)));
          const auto schedule =
              shuffle_batches(train_ds, static_cast<std::size_t>(cfg.batch_size), cfg.seed, static_cast<std::uint64_t>(epoch));
          double loss_sum = 0;
          std::size_t correct = 0;
          for (const auto batch : schedule) {
            const int B = static_cast<int>(batch.size());
            Tensor<T> input({B, 1, cfg.window_h, cfg.window_w});
            fill_input(train_ds, batch, input);
            labels.resize(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = train_ds.label(batch[i]);
            const auto& probs = s.net.forward(input, ws, true, &dropout_rng);
            const double loss = s.net.loss(ws, labels);
            if (!std::isfinite(loss))
              throw DivergenceError("non-finite training loss", epoch, static_cast<std::int64_t>(s.adam.step + 1));
            loss_sum += loss * B;
            for (int i = 0; i < B; ++i) correct += (probs.data[2 * i + 1] > probs.data[2 * i] ? 1 : 0) == labels[i];
            s.net.backward(ws, labels, grads);
            adam_step<T>(s.net.parameters(), grads, s.adam, cfg.learning_rate, epoch);
          }
          model.set_epochs_completed(epoch);
          EpochRecord rec;
          rec.epoch = epoch;
          rec.train_loss = loss_sum / static_cast<double>(train_ds.size());
          rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_ds.size());
          rec.val_mae = std::numeric_limits<double>::quiet_NaN();
          if (val_ds && !val_ds->empty()) rec.val_mae = mae_labels(model.predict(*val_ds), val_ds->labels());
          records.push_back(rec);
          if (sink) sink(model, rec);
        }
      },
      model.state());
  return records;
}

std::size_t CnnClassifier::input_size() const {
  return static_cast<std::size_t>(model_->config().window_w) * model_->config().window_h;
}

}  // namespace wopl
