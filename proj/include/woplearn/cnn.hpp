#pragma once

// Convolutional patch classifier: [conv -> ReLU -> 2x2 max-pool] x blocks,
// then FC -> ReLU -> dropout -> FC -> softmax over {remove, keep}.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "woplearn/dataset.hpp"
#include "woplearn/layers.hpp"
#include "woplearn/woperator.hpp"

namespace wopl {

enum class Precision : std::uint8_t { F32 = 0, F64 = 1 };

const char* precision_name(Precision p);
Precision parse_precision(const std::string& name);

struct ConvBlockSpec {
  int num_masks = 32;
  int mask_size = 5;
  friend bool operator==(const ConvBlockSpec&, const ConvBlockSpec&) = default;
};

struct CnnConfig {
  int window_w = 9;
  int window_h = 9;
  std::vector<ConvBlockSpec> blocks{{32, 5}, {32, 5}};
  int fc_hidden = 512;
  int num_classes = 2;
  double dropout_rate = 0.0;
  double learning_rate = 1e-4;
  int batch_size = 50;
  int epochs = 50;
  std::uint64_t seed = 0;
  Precision precision = Precision::F32;

  // Throws InvalidArgument on any out-of-range field or a window too small
  // for the pooling chain.
  void validate() const;
  // Spatial size after every block: floor(floor(w/2)/2)... per block.
  std::pair<int, int> final_spatial() const;
  int flat_features() const;

  friend bool operator==(const CnnConfig&, const CnnConfig&) = default;
};

// "32x5,32x5" <-> blocks
std::vector<ConvBlockSpec> parse_blocks(const std::string& text);
std::string format_blocks(std::span<const ConvBlockSpec> blocks);

struct AdamHyper {
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double epsilon = 1e-8;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::uint64_t step = 0;

  // Zero moments shaped like params.
  static AdamState zeros_like(std::span<const Parameter<T>> params);
};


// One Adam update with bias-corrected moments. Throws DivergenceError when a
// gradient or an updated parameter is not finite; epoch is only used in the
// error report.
template <typename T>
void adam_step(std::span<Parameter<T>> params, std::span<const std::vector<T>> grads, AdamState<T>& state,
               double learning_rate, int epoch = 0);

template <typename T>
class Network {
 public:
  struct BlockCache {
    Tensor<T> input;
    Tensor<T> pre;
    std::vector<T> col;
    std::vector<std::size_t> argmax;
    std::vector<int> pooled_shape;
  };
  // Per-call activations. One workspace per thread.
  struct Workspace {
    std::vector<BlockCache> blocks;
    Tensor<T> flat;
    Tensor<T> fc1_pre;
    Tensor<T> dropped;
    std::vector<T> mask;
    Tensor<T> logits;
    Tensor<T> probs;
    bool ready = false;
  };

  explicit Network(const CnnConfig& config);

  const CnnConfig& config() const noexcept { return config_; }
  std::vector<Parameter<T>>& parameters() noexcept { return params_; }
  const std::vector<Parameter<T>>& parameters() const noexcept { return params_; }
  std::size_t parameter_count() const;

  // Scaled normal weights (std = sqrt(2 / fan_in)) and zero biases.
  void initialize(std::uint64_t seed);

  // input: (B, 1, window_h, window_w). Returns class probabilities (B, 2).
  const Tensor<T>& forward(const Tensor<T>& input, Workspace& ws, bool training, Rng* rng) const;
  double loss(const Workspace& ws, std::span<const std::uint8_t> labels) const;
  // Overwrites grads (shaped like the parameters) with dL/dtheta of the
  // mean cross-entropy of the last forward call.
  void backward(Workspace& ws, std::span<const std::uint8_t> labels, std::vector<std::vector<T>>& grads) const;

 private:
  const Tensor<T>& param(std::size_t i) const { return params_[i].value; }

  CnnConfig config_;
  std::vector<Parameter<T>> params_;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;      // mean mini-batch loss over the epoch
  double train_accuracy = 0;  // on the mini-batches as trained (dropout active)
  double val_mae = 0;         // NaN when no validation set was given
};

class CnnModel {
 public:
  template <typename T>
  struct State {
    Network<T> net;
    AdamState<T> adam;
  };
  using Variant = std::variant<State<float>, State<double>>;

  // Validates the config and initializes weights from config.seed.
  explicit CnnModel(const CnnConfig& config);

  const CnnConfig& config() const noexcept { return config_; }
  Window window() const;
  int epochs_completed() const noexcept { return epochs_completed_; }
  void set_epochs_completed(int e) { epochs_completed_ = e; }
  std::uint64_t adam_steps() const;

  Variant& state() noexcept { return state_; }
  const Variant& state() const noexcept { return state_; }

  // patches: count x window-area bytes of {0,1}; out: count labels.
  // Class 1 ("keep") only when its probability is strictly larger.
  void predict(std::span<const std::uint8_t> patches, std::span<std::uint8_t> out) const;
  std::vector<std::uint8_t> predict(const PatchDataset& ds) const;
  // Probability of class 1 for every sample.
  std::vector<double> keep_probability(const PatchDataset& ds) const;

 private:
  CnnConfig config_;
  Variant state_;
  int epochs_completed_ = 0;
};

using CheckpointSink = std::function<void(const CnnModel&, const EpochRecord&)>;

// Runs epochs epochs_completed()+1 .. config.epochs: shuffled mini-batches,
// forward/backward/Adam per batch, then validation MAE and the sink.
std::vector<EpochRecord> train(CnnModel& model, const PatchDataset& train_ds, const PatchDataset* val_ds,
                               const CheckpointSink& sink = {});

std::vector<std::uint8_t> predict(const CnnModel& model, const PatchDataset& ds);

class CnnClassifier final : public PatchClassifier {
 public:
  explicit CnnClassifier(std::shared_ptr<const CnnModel> model) : model_(std::move(model)) {}

  std::size_t input_size() const override;
  bool trained() const override { return model_->epochs_completed() > 0; }
  void predict(std::span<const std::uint8_t> patches, std::span<std::uint8_t> out) const override {
    model_->predict(patches, out);
  }

 private:
  std::shared_ptr<const CnnModel> model_;
};

}  // namespace wopl
