#pragma once

// Model selection: grid search over learning rate and dropout (and optionally
// the first block's mask size) per window size, with per-epoch checkpoints,
// validation-MAE selection and range narrowing between windows.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "woplearn/cnn.hpp"
#include "woplearn/corpus.hpp"

namespace wopl {

struct GridSpec {
  std::vector<int> window_sizes{9, 11, 13, 15, 17, 19};
  std::vector<double> learning_rates{10, 1, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  std::vector<double> dropout_rates{0.0, 0.25, 0.5};
  std::vector<int> mask_sizes{5};
  int epochs = 50;
  std::size_t train_subsample = 0;  // 0 = every training patch
  std::size_t val_subsample = 0;    // 0 = every validation patch
  std::uint64_t subsample_seed = 0;
  double rel_tol = 0.01;   // stop growing windows below this relative MAE gain
  int narrowing_steps = 1;  // grid neighbours kept around the previous best
  CnnConfig base;           // blocks, fc_hidden, batch_size, seed, precision

  void validate() const;
};

struct CellKey {
  int window = 0;
  double learning_rate = 0;
  double dropout = 0;
  int mask = 0;
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct CellEpoch {
  int epoch = 0;
  double val_mae = 0;  // +inf for diverged cells
  double train_loss = 0;
  std::string checkpoint;  // relative to the output directory; empty if not written
};

struct CellResult {
  CellKey key;
  std::uint64_t seed = 0;
  bool diverged = false;
  std::vector<CellEpoch> epochs;
};

struct Choice {
  CellKey key;
  int epoch = 0;
  double val_mae = 0;
  std::string checkpoint;
};

struct SelectionReport {
  std::vector<CellResult> cells;  // in training order
  std::optional<int> stopped_after_window;

  const CellResult* find(const CellKey& key) const;
};

// Overall argmin of validation MAE. Ties: smaller window, earlier epoch,
// smaller learning rate, smaller dropout, smaller mask. Throws SelectionError
// when no finite record exists.
Choice select_best(const SelectionReport& report);
std::optional<Choice> best_for_window(const SelectionReport& report, int window);

// Grid values within `steps` positions of best (grid order as given).
std::vector<double> narrow_grid(std::span<const double> grid, double best, int steps);

// CNN config of one grid cell.
CnnConfig cell_config(const GridSpec& spec, const CellKey& key);

struct WindowData {
  PatchDataset train;
  PatchDataset validation;
};
// Foreground-only patches of the train/validation images, subsampled per spec.
WindowData build_window_data(const GridSpec& spec, const Corpus& corpus, int window);

// Trains one cell; the default runner trains a CnnModel and writes checkpoints.
using CellRunner = std::function<CellResult(const CellKey&, const CnnConfig&)>;

struct GridRunOptions {
  std::filesystem::path out_dir;  // report.jsonl + checkpoints/; empty keeps everything in memory
  bool resume = true;             // reuse complete cells found in out_dir/report.jsonl
  CellRunner runner;              // replaces CNN training when set (tests)
  std::function<void(const std::string&)> log;
};

SelectionReport run_grid(const GridSpec& spec, const Corpus& corpus, const GridRunOptions& options = {});

// One JSON object per (cell, epoch).
void write_report(const SelectionReport& report, const std::filesystem::path& path);
SelectionReport read_report(const std::filesystem::path& path);

// Retrains the chosen cell on every training patch for choice.epoch epochs.
CnnModel retrain_final(const GridSpec& spec, const Choice& choice, const Corpus& corpus,
                       std::vector<EpochRecord>* records = nullptr);

}  // namespace wopl
