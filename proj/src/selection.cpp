#include "woplearn/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <tuple>

#include <json.hpp>

#include "woplearn/errors.hpp"
#include "woplearn/model_io.hpp"

namespace wopl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Ordering used for ties: window, epoch, lr, dropout, mask.
auto tie_key(const Choice& c) {
  return std::make_tuple(c.val_mae, c.key.window, c.epoch, c.key.learning_rate, c.key.dropout, c.key.mask);
}

std::optional<Choice> best_of(const SelectionReport& report, const std::optional<int>& window) {
  std::optional<Choice> best;
  for (const auto& cell : report.cells) {
    if (window && cell.key.window != *window) continue;
    for (const auto& e : cell.epochs) {
      if (!std::isfinite(e.val_mae)) continue;
      Choice c{cell.key, e.epoch, e.val_mae, e.checkpoint};
      if (!best || tie_key(c) < tie_key(*best)) best = c;
    }
  }
  return best;
}

std::string checkpoint_name(const CellKey& key, int epoch) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "checkpoints/w%02d_lr%g_d%g_m%d_e%03d.wopm", key.window, key.learning_rate,
                key.dropout, key.mask, epoch);
  return buf;
}

PatchDataset split_patches(const Corpus& corpus, Split split, int window, std::size_t n, std::uint64_t seed,
                           std::uint64_t stream) {
  const auto pairs = corpus.subset(split);
  if (pairs.empty()) throw DataError(std::string("no ") + split_name(split) + " images available");
  PatchDataset all = extract_dataset(pairs, make_rect_window(window, window), Sampling::ForegroundOnly);
  if (all.empty()) throw DataError(std::string("the ") + split_name(split) + " images have no foreground pixels");
  if (n == 0) return all;
  if (n > all.size())
    throw DataError("requested " + std::to_string(n) + " " + split_name(split) + " patches but only " +
                    std::to_string(all.size()) + " are available");
  return subsample(all, n, derive_seed(seed, stream));
}

void log_line(const GridRunOptions& options, const std::string& line) {
  if (options.log) options.log(line);
}

}  // namespace

void GridSpec::validate() const {
  auto fail = [](const std::string& what) { throw InvalidArgument("grid spec: " + what); };
  if (window_sizes.empty() || learning_rates.empty() || dropout_rates.empty() || mask_sizes.empty())
    fail("window, learning-rate, dropout and mask lists must be non-empty");
  for (std::size_t i = 0; i < window_sizes.size(); ++i) {
    if (window_sizes[i] < 1 || window_sizes[i] % 2 == 0) fail("window sizes must be odd and positive");
    if (i > 0 && window_sizes[i] <= window_sizes[i - 1]) fail("window sizes must be strictly increasing");
  }
  for (double lr : learning_rates)
    if (!(lr > 0.0) || !std::isfinite(lr)) fail("learning rates must be positive");
  for (double d : dropout_rates)
    if (!(d >= 0.0 && d < 1.0)) fail("dropout rates must lie in [0, 1)");
  for (int m : mask_sizes)
    if (m < 1 || m % 2 == 0) fail("mask sizes must be odd and positive");
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(rel_tol >= 0.0)) fail("rel_tol must be >= 0");
  if (narrowing_steps < 0) fail("narrowing steps must be >= 0");
}

const CellResult* SelectionReport::find(const CellKey& key) const {
  for (const auto& c : cells)
    if (c.key == key) return &c;
  return nullptr;
}

Choice select_best(const SelectionReport& report) {
  auto best = best_of(report, std::nullopt);
  if (!best) throw SelectionError("no grid cell has a finite validation MAE");
  return *best;
}

std::optional<Choice> best_for_window(const SelectionReport& report, int window) { return best_of(report, window); }

std::vector<double> narrow_grid(std::span<const double> grid, double best, int steps) {
  const auto it = std::find(grid.begin(), grid.end(), best);
  if (it == grid.end()) throw InvalidArgument("best value " + std::to_string(best) + " is not on the grid");
  const auto pos = static_cast<std::ptrdiff_t>(it - grid.begin());
  const auto lo = std::max<std::ptrdiff_t>(0, pos - steps);
  const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(grid.size()) - 1, pos + steps);
  return {grid.begin() + lo, grid.begin() + hi + 1};
}

CnnConfig cell_config(const GridSpec& spec, const CellKey& key) {
  CnnConfig cfg = spec.base;
  cfg.window_w = cfg.window_h = key.window;
  cfg.learning_rate = key.learning_rate;
  cfg.dropout_rate = key.dropout;
  cfg.blocks.at(0).mask_size = key.mask;
  cfg.epochs = spec.epochs;
  return cfg;
}

WindowData build_window_data(const GridSpec& spec, const Corpus& corpus, int window) {
  return {split_patches(corpus, Split::Train, window, spec.train_subsample, spec.subsample_seed, 1),
          split_patches(corpus, Split::Validation, window, spec.val_subsample, spec.subsample_seed, 2)};
}

SelectionReport run_grid(const GridSpec& spec, const Corpus& corpus, const GridRunOptions& options) {
  spec.validate();
  if (!options.runner) corpus.split.validate(true);

  std::vector<CellResult> recorded;
  const auto report_path = options.out_dir.empty() ? std::filesystem::path{} : options.out_dir / "report.jsonl";
  if (options.resume && !report_path.empty() && std::filesystem::exists(report_path)) {
    for (auto& cell : read_report(report_path).cells)
      if (static_cast<int>(cell.epochs.size()) == spec.epochs) recorded.push_back(std::move(cell));
  }

  SelectionReport report;
  std::optional<Choice> previous;
  for (std::size_t wi = 0; wi < spec.window_sizes.size(); ++wi) {
    const int window = spec.window_sizes[wi];
    std::vector<double> lrs = spec.learning_rates;
    std::vector<double> drops = spec.dropout_rates;
    if (previous) {
      lrs = narrow_grid(spec.learning_rates, previous->key.learning_rate, spec.narrowing_steps);
      drops = narrow_grid(spec.dropout_rates, previous->key.dropout, spec.narrowing_steps);
    }

    std::optional<WindowData> data;
    for (const double lr : lrs) {
      for (const double dropout : drops) {
        for (const int mask : spec.mask_sizes) {
          const CellKey key{window, lr, dropout, mask};
          const auto done = std::find_if(recorded.begin(), recorded.end(), [&](const CellResult& c) { return c.key == key; });
          if (done != recorded.end()) {
            report.cells.push_back(*done);
            continue;
          }
          const CnnConfig cfg = cell_config(spec, key);
          char line[160];
          std::snprintf(line, sizeof line, "cell window=%d lr=%g dropout=%g mask=%d", window, lr, dropout, mask);
          log_line(options, line);

          CellResult result;
          if (options.runner) {
            result = options.runner(key, cfg);
          } else {
            if (!data) data = build_window_data(spec, corpus, window);
            CnnModel model(cfg);
            result.key = key;
            result.seed = cfg.seed;
            try {
              train(model, data->train, &data->validation, [&](const CnnModel& m, const EpochRecord& rec) {
                CellEpoch e{rec.epoch, rec.val_mae, rec.train_loss, {}};
                if (!options.out_dir.empty()) {
                  e.checkpoint = checkpoint_name(key, rec.epoch);
                  save_model(m, options.out_dir / e.checkpoint);
                }
                result.epochs.push_back(e);
              });
            } catch (const DivergenceError& err) {
              log_line(options, std::string("  diverged: ") + err.what());
              result.diverged = true;
            }
          }
          if (result.diverged) {
            result.epochs.clear();
            for (int e = 1; e <= spec.epochs; ++e) result.epochs.push_back({e, kInf, kInf, {}});
          }
          if (static_cast<int>(result.epochs.size()) != spec.epochs)
            throw StateError("cell produced " + std::to_string(result.epochs.size()) + " epoch records, expected " +
                             std::to_string(spec.epochs));
          report.cells.push_back(std::move(result));
          if (!report_path.empty()) write_report(report, report_path);
        }
      }
    }

    const auto best = best_for_window(report, window);
    if (best) {
      char line[160];
      std::snprintf(line, sizeof line, "window %d best: lr=%g dropout=%g mask=%d epoch=%d mae=%.6f", window,
                    best->key.learning_rate, best->key.dropout, best->key.mask, best->epoch, best->val_mae);
      log_line(options, line);
    }
    if (previous) {
      const double gain = best && previous->val_mae > 0.0 ? (previous->val_mae - best->val_mae) / previous->val_mae : 0.0;
      if (!best || gain < spec.rel_tol) {
        report.stopped_after_window = window;
        break;
      }
    }
    if (best) previous = best;
  }
  if (!report_path.empty()) write_report(report, report_path);
  return report;
}

void write_report(const SelectionReport& report, const std::filesystem::path& path) {
  std::string text;
  for (const auto& cell : report.cells) {
    for (const auto& e : cell.epochs) {
      nlohmann::ordered_json j;
      j["window"] = cell.key.window;
      j["lr"] = cell.key.learning_rate;
      j["dropout"] = cell.key.dropout;
      j["mask"] = cell.key.mask;
      j["epoch"] = e.epoch;
      j["val_mae"] = std::isfinite(e.val_mae) ? nlohmann::ordered_json(e.val_mae) : nlohmann::ordered_json(nullptr);
      j["train_loss"] = std::isfinite(e.train_loss) ? nlohmann::ordered_json(e.train_loss) : nlohmann::ordered_json(nullptr);
      j["diverged"] = cell.diverged;
      j["seed"] = cell.seed;
      j["checkpoint"] = e.checkpoint;
      text += j.dump() + "\n";
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("error writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

SelectionReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open report " + path.string());
  SelectionReport report;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const CellKey key{j.at("window").get<int>(), j.at("lr").get<double>(), j.at("dropout").get<double>(),
                        j.at("mask").get<int>()};
      CellEpoch e;
      e.epoch = j.at("epoch").get<int>();
      e.val_mae = j.at("val_mae").is_null() ? kInf : j.at("val_mae").get<double>();
      e.train_loss = j.at("train_loss").is_null() ? kInf : j.at("train_loss").get<double>();
      e.checkpoint = j.at("checkpoint").get<std::string>();
      if (report.cells.empty() || !(report.cells.back().key == key)) {
        CellResult cell;
        cell.key = key;
        cell.seed = j.at("seed").get<std::uint64_t>();
        cell.diverged = j.at("diverged").get<bool>();
        report.cells.push_back(std::move(cell));
      }
      report.cells.back().epochs.push_back(std::move(e));
    } catch (const nlohmann::json::exception& err) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + err.what());
    }
  }
  return report;
}

CnnModel retrain_final(const GridSpec& spec, const Choice& choice, const Corpus& corpus,
                       std::vector<EpochRecord>* records) {
  if (corpus.split.train_ids.empty()) throw DataError("no training images available for retraining");
  const PatchDataset train_ds = split_patches(corpus, Split::Train, choice.key.window, 0, 0, 0);
  std::optional<PatchDataset> val_ds;
  if (records && !corpus.split.validation_ids.empty())
    val_ds = split_patches(corpus, Split::Validation, choice.key.window, 0, 0, 0);
  CnnConfig cfg = cell_config(spec, choice.key);
  cfg.epochs = choice.epoch;
  CnnModel model(cfg);
  auto recs = train(model, train_ds, val_ds ? &*val_ds : nullptr);
  if (records) *records = std::move(recs);
  return model;
}

}  // namespace wopl
