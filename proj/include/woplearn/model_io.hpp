#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "woplearn/baseline.hpp"
#include "woplearn/cnn.hpp"
#include "woplearn/woperator.hpp"

namespace wopl {

enum class ModelKind { Cnn, Table };

// Either kind of model read back from a container.
struct LoadedModel {
  ModelKind kind = ModelKind::Cnn;
  std::shared_ptr<const CnnModel> cnn;
  std::shared_ptr<const FrequencyTable> table;

  Window window() const;
  LocalFunction local_function() const;
};

// Byte layout in docs/formats.md. Optimizer moments are only written when
// requested; they are needed to continue training, not to predict.
std::vector<unsigned char> encode_model(const CnnModel& model, bool with_optimizer_state = false);
std::vector<unsigned char> encode_model(const FrequencyTable& table);
LoadedModel decode_model(std::span<const unsigned char> bytes);

void save_model(const CnnModel& model, const std::filesystem::path& path, bool with_optimizer_state = false);
void save_model(const FrequencyTable& table, const std::filesystem::path& path);
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace wopl
