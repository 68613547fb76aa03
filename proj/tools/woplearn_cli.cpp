// woplearn: generate corpora, extract patch datasets, train and select
// W-operators, apply them to images and evaluate the results.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "woplearn/baseline.hpp"
#include "woplearn/cnn.hpp"
#include "woplearn/corpus.hpp"
#include "woplearn/dataset.hpp"
#include "woplearn/errors.hpp"
#include "woplearn/metrics.hpp"
#include "woplearn/model_io.hpp"
#include "woplearn/pbm.hpp"
#include "woplearn/selection.hpp"
#include "woplearn/synthgen.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kDivergence = 4 };

int exit_code_for(wopl::ErrorKind kind) {
  switch (kind) {
    case wopl::ErrorKind::InvalidArgument: return kUsage;
    case wopl::ErrorKind::Divergence: return kDivergence;
    default: return kData;
  }
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Fixed implementation choices, recorded with every run.
json library_defaults() {
  return json{{"border_padding", "background 0"},
              {"patch_order", "row-major (dy, dx)"},
              {"init", "normal, std = sqrt(2 / fan_in), zero biases"},
              {"adam", {{"beta1", wopl::AdamHyper::beta1}, {"beta2", wopl::AdamHyper::beta2}, {"epsilon", wopl::AdamHyper::epsilon}}},
              {"pool_odd_dims", "floor"},
              {"argmax_tie", "class 0 (remove)"},
              {"table_tie", "label 1 (keep)"},
              {"rng", "mt19937_64 + splitmix64 seed derivation"}};
}

json options_snapshot(const CLI::App& app) {
  json j = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      if (opt->get_expected_max() > 1 || res.size() > 1) j[name] = res;
      else j[name] = res.empty() ? std::string{} : res.front();
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

struct Run {
  std::string command;
  std::vector<std::string> argv;
  int threads = 1;
  json config = json::object();
  json seeds = json::object();
  json inputs = json::array();
  json outputs = json::array();
  json extra = json::object();
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  std::string started = utc_now();

  void write(const fs::path& path) const {
    json j;
    j["tool"] = "woplearn";
    j["version"] = WOPL_VERSION;
    j["command"] = command;
    j["argv"] = argv;
    j["threads"] = threads;
    j["config"] = config;
    j["seeds"] = seeds;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["library_defaults"] = library_defaults();
    for (const auto& [k, v] : extra.items()) j[k] = v;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    j["timings"] = {{"started_utc", started}, {"wall_seconds", secs}};
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw wopl::IoError("cannot write manifest " + path.string());
    out << j.dump(2) << "\n";
  }
};

fs::path sidecar(const fs::path& file, const char* suffix) { return fs::path(file.string() + suffix); }

const std::map<std::string, wopl::ApplyMode> kModes{{"foreground_only", wopl::ApplyMode::ForegroundOnly},
                                                    {"all", wopl::ApplyMode::AllPixels}};
const std::map<std::string, wopl::Sampling> kSamplings{{"foreground_only", wopl::Sampling::ForegroundOnly},
                                                       {"all", wopl::Sampling::AllPixels}};

// CNN flags shared by train and select.
struct CnnFlags {
  std::string blocks = "32x5,32x5";
  int fc_hidden = 512;
  double dropout = 0.0;
  double lr = 1e-4;
  int batch = 50;
  int epochs = 50;
  std::uint64_t seed = 0;
  std::string precision = "f32";

  void add(CLI::App* app, bool with_rates) {
    app->add_option("--blocks", blocks, "Conv blocks as masks x size, comma separated")->capture_default_str();
    app->add_option("--fc-hidden", fc_hidden, "Hidden fully connected units")->capture_default_str();
    if (with_rates) {
      app->add_option("--dropout", dropout, "Dropout rate on the hidden layer")->capture_default_str();
      app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
      app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    }
    app->add_option("--batch-size", batch, "Mini-batch size")->capture_default_str();
    app->add_option("--seed", seed, "Initialization and shuffling seed")->capture_default_str();
    app->add_option("--precision", precision, "f32 or f64")
        ->check(CLI::IsMember({"f32", "f64"}))
        ->capture_default_str();
  }

  wopl::CnnConfig config(int window_w, int window_h) const {
    wopl::CnnConfig c;
    c.window_w = window_w;
    c.window_h = window_h;
    c.blocks = wopl::parse_blocks(blocks);
    c.fc_hidden = fc_hidden;
    c.dropout_rate = dropout;
    c.learning_rate = lr;
    c.batch_size = batch;
    c.epochs = epochs;
    c.seed = seed;
    c.precision = wopl::parse_precision(precision);
    return c;
  }
};

json config_json(const wopl::CnnConfig& c) {
  return json{{"window_w", c.window_w},      {"window_h", c.window_h},          {"blocks", wopl::format_blocks(c.blocks)},
              {"fc_hidden", c.fc_hidden},    {"dropout", c.dropout_rate},       {"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},  {"epochs", c.epochs},              {"seed", c.seed},
              {"precision", wopl::precision_name(c.precision)}};
}

// Corpus subset by split name; "all" keeps every pair.
std::vector<wopl::ImagePair> pick_pairs(const wopl::Corpus& corpus, const std::string& split) {
  if (split == "all") return corpus.pairs;
  return corpus.subset(wopl::parse_split(split));
}

std::vector<int> parse_window(const std::string& text) {
  int w = 0, h = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%dx%d%c", &w, &h, &tail) == 2) return {w, h};
  if (std::sscanf(text.c_str(), "%d%c", &w, &tail) == 1) return {w, w};
  throw wopl::InvalidArgument("window must be N or WxH, got '" + text + "'");
}

// ---- gen ----------------------------------------------------------------

struct GenArgs {
  wopl::SynthConfig cfg;
  std::pair<int, int> thickness{1, 3}, spacing{9, 13}, symbols{6, 12};
  int images = 10;
  std::uint64_t seed = 0;
  std::string out;
};

int run_gen(const GenArgs& a, Run& run, const fs::path& manifest) {
  wopl::SynthConfig cfg = a.cfg;
  cfg.line_thickness = {a.thickness.first, a.thickness.second};
  cfg.line_spacing = {a.spacing.first, a.spacing.second};
  cfg.symbols_per_staff = {a.symbols.first, a.symbols.second};
  cfg.validate();
  const wopl::Corpus corpus = wopl::generate_corpus(cfg, a.images, a.seed);
  wopl::save_corpus(corpus, a.out);
  std::uint64_t fg = 0, staff = 0;
  for (const auto& p : corpus.pairs) {
    fg += p.input.count_foreground();
    staff += p.input.count_foreground() - p.output.count_foreground();
  }
  std::printf("wrote %zu image pairs to %s (train %zu, validation %zu, test %zu)\n", corpus.pairs.size(),
              a.out.c_str(), corpus.split.train_ids.size(), corpus.split.validation_ids.size(),
              corpus.split.test_ids.size());
  std::printf("foreground pixels %llu, staff fraction %.4f\n", static_cast<unsigned long long>(fg),
              fg ? static_cast<double>(staff) / static_cast<double>(fg) : 0.0);
  run.seeds["corpus"] = a.seed;
  run.outputs.push_back((fs::path(a.out) / "corpus.tsv").string());
  run.write(manifest.empty() ? fs::path(a.out) / "manifest.json" : manifest);
  return kOk;
}

// ---- extract ------------------------------------------------------------

struct ExtractArgs {
  std::string corpus, split = "train", window = "9", out;
  wopl::Sampling sampling = wopl::Sampling::ForegroundOnly;
  std::size_t subsample = 0;
  std::uint64_t subsample_seed = 0;
};

int run_extract(const ExtractArgs& a, Run& run, const fs::path& manifest) {
  const wopl::Corpus corpus = wopl::load_corpus(a.corpus);
  const auto pairs = pick_pairs(corpus, a.split);
  if (pairs.empty()) throw wopl::DataError("split '" + a.split + "' has no images");
  const auto wh = parse_window(a.window);
  wopl::PatchDataset ds = wopl::extract_dataset(pairs, wopl::make_rect_window(wh[0], wh[1]), a.sampling);
  if (a.subsample > 0) {
    if (a.subsample > ds.size())
      throw wopl::DataError("asked for " + std::to_string(a.subsample) + " patches, only " +
                            std::to_string(ds.size()) + " available");
    ds = wopl::subsample(ds, a.subsample, a.subsample_seed);
  }
  wopl::save_dataset(ds, a.out);
  const auto& st = ds.stats();
  std::printf("%zu samples, %zu distinct patches, %zu conflicting\n", st.total, st.distinct, st.conflicting);
  run.seeds["subsample"] = a.subsample_seed;
  run.inputs.push_back(a.corpus);
  run.outputs.push_back(a.out);
  run.extra["stats"] = {{"total", st.total}, {"distinct", st.distinct}, {"conflicting", st.conflicting}};
  run.write(manifest.empty() ? sidecar(a.out, ".manifest.json") : manifest);
  return kOk;
}

// ---- train --------------------------------------------------------------

struct TrainArgs {
  std::string train, val, out, checkpoint_dir, log;
  bool table = false;
  bool optimizer_state = false;
  CnnFlags cnn;
};

int run_train(const TrainArgs& a, Run& run, const fs::path& manifest) {
  const wopl::PatchDataset train_ds = wopl::load_dataset(a.train);
  run.inputs.push_back(a.train);
  run.outputs.push_back(a.out);
  if (a.table) {
    const wopl::FrequencyTable table = wopl::fit_table(train_ds);
    wopl::save_model(table, a.out);
    std::printf("table: %zu patterns, default label %d, training error %.6f\n", table.entry_count(),
                table.default_label(), wopl::table_error(table, train_ds));
    if (!a.val.empty()) {
      const auto val_ds = wopl::load_dataset(a.val);
      std::printf("validation error %.6f\n", wopl::table_error(table, val_ds));
      run.inputs.push_back(a.val);
    }
    run.extra["model"] = "table";
    run.write(manifest.empty() ? sidecar(a.out, ".manifest.json") : manifest);
    return kOk;
  }

  std::optional<wopl::PatchDataset> val_ds;
  if (!a.val.empty()) {
    val_ds = wopl::load_dataset(a.val);
    run.inputs.push_back(a.val);
    if (!(val_ds->window() == train_ds.window()))
      throw wopl::DataError("training and validation datasets use different windows");
  }
  const auto& win = train_ds.window();
  if (!(win == wopl::make_rect_window(win.bbox_width(), win.bbox_height())))
    throw wopl::DataError("CNN training needs a centered rectangular window");
  const wopl::CnnConfig cfg = a.cnn.config(win.bbox_width(), win.bbox_height());
  wopl::CnnModel model(cfg);
  run.seeds["model"] = cfg.seed;
  run.extra["model"] = "cnn";
  run.extra["cnn"] = config_json(cfg);

  const fs::path log_path = a.log.empty() ? sidecar(a.out, ".epochs.csv") : fs::path(a.log);
  std::ofstream log(log_path);
  if (!log) throw wopl::IoError("cannot write " + log_path.string());
  log << "epoch,train_loss,train_accuracy,val_mae,checkpoint\n";
  run.outputs.push_back(log_path.string());

  wopl::train(model, train_ds, val_ds ? &*val_ds : nullptr, [&](const wopl::CnnModel& m, const wopl::EpochRecord& r) {
    std::string ckpt;
    if (!a.checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03d.wopm", r.epoch);
      ckpt = (fs::path(a.checkpoint_dir) / name).string();
      wopl::save_model(m, ckpt, a.optimizer_state);
    }
    char line[160];
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%s", r.epoch, r.train_loss, r.train_accuracy, r.val_mae,
                  ckpt.c_str());
    log << line << "\n" << std::flush;
    std::printf("epoch %3d  loss %.6f  train acc %.4f  val mae %.6f\n", r.epoch, r.train_loss, r.train_accuracy,
                r.val_mae);
    std::fflush(stdout);
  });
  wopl::save_model(model, a.out, a.optimizer_state);
  run.write(manifest.empty() ? sidecar(a.out, ".manifest.json") : manifest);
  return kOk;
}

// ---- select -------------------------------------------------------------

struct SelectArgs {
  std::string corpus, out;
  std::vector<int> windows{9, 11, 13, 15, 17, 19};
  std::vector<double> lrs{10, 1, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  std::vector<double> dropouts{0.0, 0.25, 0.5};
  std::vector<int> masks{5};
  int epochs = 50;
  std::size_t train_subsample = 0, val_subsample = 0;
  std::uint64_t subsample_seed = 0;
  double rel_tol = 0.01;
  int narrowing_steps = 1;
  bool no_resume = false, no_retrain = false;
  CnnFlags cnn;
};

json choice_json(const wopl::Choice& c) {
  return json{{"window", c.key.window},     {"lr", c.key.learning_rate}, {"dropout", c.key.dropout},
              {"mask", c.key.mask},         {"epoch", c.epoch},          {"val_mae", c.val_mae},
              {"checkpoint", c.checkpoint}};
}

int run_select(const SelectArgs& a, Run& run, const fs::path& manifest) {
  const wopl::Corpus corpus = wopl::load_corpus(a.corpus);
  wopl::GridSpec spec;
  spec.window_sizes = a.windows;
  spec.learning_rates = a.lrs;
  spec.dropout_rates = a.dropouts;
  spec.mask_sizes = a.masks;
  spec.epochs = a.epochs;
  spec.train_subsample = a.train_subsample;
  spec.val_subsample = a.val_subsample;
  spec.subsample_seed = a.subsample_seed;
  spec.rel_tol = a.rel_tol;
  spec.narrowing_steps = a.narrowing_steps;
  spec.base = a.cnn.config(a.windows.empty() ? 9 : a.windows.front(), a.windows.empty() ? 9 : a.windows.front());
  spec.validate();

  const fs::path out(a.out);
  wopl::GridRunOptions opts;
  opts.out_dir = out;
  opts.resume = !a.no_resume;
  opts.log = [](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
  };
  const wopl::SelectionReport report = wopl::run_grid(spec, corpus, opts);
  const wopl::Choice best = wopl::select_best(report);

  json summary;
  json per_window = json::array();
  for (int w : spec.window_sizes)
    if (auto b = wopl::best_for_window(report, w)) per_window.push_back(choice_json(*b));
  summary["per_window"] = per_window;
  summary["best"] = choice_json(best);
  if (report.stopped_after_window) summary["stopped_after_window"] = *report.stopped_after_window;
  std::printf("best: window %d lr %g dropout %g mask %d epoch %d val mae %.6f\n", best.key.window,
              best.key.learning_rate, best.key.dropout, best.key.mask, best.epoch, best.val_mae);

  run.inputs.push_back(a.corpus);
  run.outputs.push_back((out / "report.jsonl").string());
  run.outputs.push_back((out / "best.json").string());
  run.seeds["model"] = spec.base.seed;
  run.seeds["subsample"] = spec.subsample_seed;

  if (!a.no_retrain) {
    std::printf("retraining the selected cell on every training patch for %d epochs\n", best.epoch);
    std::fflush(stdout);
    const wopl::CnnModel final_model = wopl::retrain_final(spec, best, corpus);
    wopl::save_model(final_model, out / "final.wopm");
    summary["final_model"] = "final.wopm";
    run.outputs.push_back((out / "final.wopm").string());
  }
  {
    std::ofstream f(out / "best.json");
    if (!f) throw wopl::IoError("cannot write " + (out / "best.json").string());
    f << summary.dump(2) << "\n";
  }
  run.write(manifest.empty() ? out / "manifest.json" : manifest);
  return kOk;
}

// ---- apply --------------------------------------------------------------

struct ApplyArgs {
  std::string model, out, out_dir, corpus, split = "test";
  std::vector<std::string> inputs;
  wopl::ApplyMode mode = wopl::ApplyMode::ForegroundOnly;
};

int run_apply(const ApplyArgs& a, Run& run, const fs::path& manifest) {
  const wopl::LoadedModel model = wopl::load_model(a.model);
  const wopl::LocalFunction fn = model.local_function();
  run.inputs.push_back(a.model);

  // (source description, image, destination)
  std::vector<std::tuple<std::string, wopl::BinaryImage, fs::path>> jobs;
  if (!a.corpus.empty()) {
    if (a.out_dir.empty()) throw wopl::InvalidArgument("--corpus needs --out-dir");
    const wopl::Corpus corpus = wopl::load_corpus(a.corpus);
    for (const auto& p : pick_pairs(corpus, a.split))
      jobs.emplace_back(p.id, p.input, fs::path(a.out_dir) / (p.id + ".pbm"));
    run.inputs.push_back(a.corpus);
  }
  for (const auto& in : a.inputs) {
    fs::path dest;
    if (!a.out.empty()) {
      if (a.inputs.size() != 1 || !a.corpus.empty()) throw wopl::InvalidArgument("--out takes exactly one input image");
      dest = a.out;
    } else if (!a.out_dir.empty()) {
      dest = fs::path(a.out_dir) / fs::path(in).filename();
    } else {
      throw wopl::InvalidArgument("give --out or --out-dir");
    }
    jobs.emplace_back(in, wopl::read_image(in), dest);
    run.inputs.push_back(in);
  }
  if (jobs.empty()) throw wopl::InvalidArgument("no input images (use --input or --corpus)");

  for (const auto& [src, img, dest] : jobs) {
    const wopl::BinaryImage result = wopl::apply(fn, img, a.mode, run.threads);
    wopl::write_image(result, dest);
    run.outputs.push_back(dest.string());
    std::printf("%s -> %s (%llu of %llu foreground pixels kept)\n", src.c_str(), dest.string().c_str(),
                static_cast<unsigned long long>(result.count_foreground()),
                static_cast<unsigned long long>(img.count_foreground()));
  }
  fs::path mpath = manifest;
  if (mpath.empty()) mpath = a.out.empty() ? fs::path(a.out_dir) / "manifest.json" : sidecar(a.out, ".manifest.json");
  run.write(mpath);
  return kOk;
}

// ---- eval ---------------------------------------------------------------

struct EvalArgs {
  std::string corpus, split = "test", predicted_dir, input, predicted, expected, out;
};

int run_eval(const EvalArgs& a, Run& run, const fs::path& manifest) {
  std::vector<wopl::EvalRow> rows;
  if (!a.corpus.empty()) {
    if (a.predicted_dir.empty()) throw wopl::InvalidArgument("--corpus needs --predicted-dir");
    const wopl::Corpus corpus = wopl::load_corpus(a.corpus);
    for (const auto& p : pick_pairs(corpus, a.split)) {
      const fs::path pred_path = fs::path(a.predicted_dir) / (p.id + ".pbm");
      rows.push_back({p.id, wopl::staff_eval(p.input, wopl::read_image(pred_path), p.output)});
    }
    run.inputs.push_back(a.corpus);
    run.inputs.push_back(a.predicted_dir);
  } else {
    if (a.input.empty() || a.predicted.empty() || a.expected.empty())
      throw wopl::InvalidArgument("give --corpus/--predicted-dir or all of --input, --predicted, --expected");
    rows.push_back({fs::path(a.input).stem().string(),
                    wopl::staff_eval(wopl::read_image(a.input), wopl::read_image(a.predicted),
                                     wopl::read_image(a.expected))});
    run.inputs.push_back(a.input);
    run.inputs.push_back(a.predicted);
    run.inputs.push_back(a.expected);
  }
  if (rows.empty()) throw wopl::DataError("nothing to evaluate");

  std::ostringstream csv;
  wopl::write_eval_csv(csv, rows);
  {
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    std::ofstream f(a.out, std::ios::binary);
    if (!f) throw wopl::IoError("cannot write " + a.out);
    f << csv.str();
  }
  std::vector<wopl::EvalResult> results;
  for (const auto& r : rows) results.push_back(r.result);
  const wopl::EvalResult all = wopl::pool_results(results);
  std::printf("pixels %llu  accuracy %.4f%%  specificity %.4f%%  recall %.4f%%\n",
              static_cast<unsigned long long>(all.pixels), 100.0 * all.accuracy, 100.0 * all.specificity,
              100.0 * all.recall);
  run.outputs.push_back(a.out);
  run.write(manifest.empty() ? sidecar(a.out, ".manifest.json") : manifest);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn binary W-operators from image pairs and apply them", "woplearn"};
  app.set_version_flag("--version", std::string(WOPL_VERSION));
  app.set_config("--config", "", "TOML file with the same keys as the flags; flags win");
  app.require_subcommand(1);

  Run run;
  run.argv.assign(argv, argv + argc);
  run.threads = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  std::string manifest;
  app.add_option("--threads", run.threads, "Worker threads for apply; 1 gives the determinism contract")
      ->check(CLI::PositiveNumber);
  app.add_option("--manifest", manifest, "Where to write the run manifest (default: next to the outputs)");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic score corpus");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--images", gen.images, "Number of pages")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Corpus seed")->capture_default_str();
  gen_cmd->add_option("--width", gen.cfg.width)->capture_default_str();
  gen_cmd->add_option("--height", gen.cfg.height)->capture_default_str();
  gen_cmd->add_option("--staves", gen.cfg.staves)->capture_default_str();
  gen_cmd->add_option("--lines-per-staff", gen.cfg.lines_per_staff)->capture_default_str();
  gen_cmd->add_option("--line-thickness", gen.thickness, "min max")->capture_default_str();
  gen_cmd->add_option("--line-spacing", gen.spacing, "min max")->capture_default_str();
  gen_cmd->add_option("--symbols-per-staff", gen.symbols, "min max")->capture_default_str();
  gen_cmd->add_option("--pepper", gen.cfg.pepper, "Background noise probability")->capture_default_str();
  gen_cmd->add_option("--line-breaks", gen.cfg.line_breaks, "Staff gap probability per column")
      ->capture_default_str();

  ExtractArgs ex;
  auto* ex_cmd = app.add_subcommand("extract", "Extract a labeled patch dataset from a corpus");
  ex_cmd->add_option("--corpus", ex.corpus, "Corpus manifest (corpus.tsv)")->required();
  ex_cmd->add_option("--split", ex.split, "train, validation, test or all")->capture_default_str();
  ex_cmd->add_option("--window", ex.window, "N or WxH, odd")->capture_default_str();
  ex_cmd->add_option("--sampling", ex.sampling, "foreground_only or all")
      ->transform(CLI::CheckedTransformer(kSamplings, CLI::ignore_case))
      ->default_str("foreground_only");
  ex_cmd->add_option("--subsample", ex.subsample, "Keep this many random samples (0 = all)")->capture_default_str();
  ex_cmd->add_option("--subsample-seed", ex.subsample_seed)->capture_default_str();
  ex_cmd->add_option("--out", ex.out, "Dataset file (.wopd)")->required();

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "Train a CNN or lookup-table classifier");
  tr_cmd->add_option("--train", tr.train, "Training dataset")->required();
  tr_cmd->add_option("--val", tr.val, "Validation dataset");
  tr_cmd->add_option("--out", tr.out, "Model file (.wopm)")->required();
  tr_cmd->add_flag("--table", tr.table, "Fit the lookup-table baseline instead of a CNN");
  tr_cmd->add_option("--checkpoint-dir", tr.checkpoint_dir, "Write a model after every epoch");
  tr_cmd->add_option("--log", tr.log, "Epoch log CSV (default: <out>.epochs.csv)");
  tr_cmd->add_flag("--optimizer-state", tr.optimizer_state, "Store Adam moments in model files");
  tr.cnn.add(tr_cmd, true);

  SelectArgs se;
  auto* se_cmd = app.add_subcommand("select", "Grid search over windows, learning and dropout rates");
  se_cmd->add_option("--corpus", se.corpus, "Corpus manifest")->required();
  se_cmd->add_option("--out", se.out, "Output directory")->required();
  se_cmd->add_option("--windows", se.windows, "Odd window sizes, increasing")->delimiter(',')->capture_default_str();
  se_cmd->add_option("--lrs", se.lrs, "Learning-rate grid")->delimiter(',')->capture_default_str();
  se_cmd->add_option("--dropouts", se.dropouts, "Dropout grid")->delimiter(',')->capture_default_str();
  se_cmd->add_option("--mask-sizes", se.masks, "First-block mask sizes")->delimiter(',')->capture_default_str();
  se_cmd->add_option("--epochs", se.epochs)->capture_default_str();
  se_cmd->add_option("--train-subsample", se.train_subsample, "Training patches per window (0 = all)")
      ->capture_default_str();
  se_cmd->add_option("--val-subsample", se.val_subsample, "Validation patches per window (0 = all)")
      ->capture_default_str();
  se_cmd->add_option("--subsample-seed", se.subsample_seed)->capture_default_str();
  se_cmd->add_option("--rel-tol", se.rel_tol, "Stop growing the window below this relative gain")
      ->capture_default_str();
  se_cmd->add_option("--narrowing-steps", se.narrowing_steps)->capture_default_str();
  se_cmd->add_flag("--no-resume", se.no_resume, "Ignore an existing report");
  se_cmd->add_flag("--no-retrain", se.no_retrain, "Skip retraining the chosen cell on the full training set");
  se.cnn.add(se_cmd, false);

  ApplyArgs ap;
  auto* ap_cmd = app.add_subcommand("apply", "Apply a trained operator to images");
  ap_cmd->add_option("--model", ap.model, "Model file")->required();
  ap_cmd->add_option("--input", ap.inputs, "Input image(s)");
  ap_cmd->add_option("--corpus", ap.corpus, "Apply to a corpus split instead");
  ap_cmd->add_option("--split", ap.split, "Corpus split")->capture_default_str();
  ap_cmd->add_option("--out", ap.out, "Output image (single input)");
  ap_cmd->add_option("--out-dir", ap.out_dir, "Output directory");
  ap_cmd->add_option("--mode", ap.mode, "foreground_only or all")
      ->transform(CLI::CheckedTransformer(kModes, CLI::ignore_case))
      ->default_str("foreground_only");

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Staff-removal metrics as CSV");
  ev_cmd->add_option("--corpus", ev.corpus, "Corpus manifest (inputs and ground truth)");
  ev_cmd->add_option("--split", ev.split)->capture_default_str();
  ev_cmd->add_option("--predicted-dir", ev.predicted_dir, "Predicted images named <id>.pbm");
  ev_cmd->add_option("--input", ev.input);
  ev_cmd->add_option("--predicted", ev.predicted);
  ev_cmd->add_option("--expected", ev.expected);
  ev_cmd->add_option("--out", ev.out, "CSV file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error[usage]: " << e.what() << "\n";
    return kUsage;
  }

  try {
    const fs::path mpath(manifest);
    for (CLI::App* sub : app.get_subcommands()) {
      run.command = sub->get_name();
      run.config = options_snapshot(*sub);
    }
    if (*gen_cmd) return run_gen(gen, run, mpath);
    if (*ex_cmd) return run_extract(ex, run, mpath);
    if (*tr_cmd) return run_train(tr, run, mpath);
    if (*se_cmd) return run_select(se, run, mpath);
    if (*ap_cmd) return run_apply(ap, run, mpath);
    if (*ev_cmd) return run_eval(ev, run, mpath);
  } catch (const wopl::Error& e) {
    std::cerr << "error[" << wopl::error_kind_name(e.kind()) << "]: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error[io]: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}
