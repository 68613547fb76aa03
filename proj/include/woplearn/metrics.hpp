#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "woplearn/image.hpp"

namespace wopl {

enum class MaeDomain { ForegroundOfInput, AllPixels };

// Mean absolute pixel difference over the domain, pooled over all pairs.
// ForegroundOfInput needs one input image per pair.
double mae(std::span<const BinaryImage> predicted, std::span<const BinaryImage> expected, MaeDomain domain,
           std::span<const BinaryImage> inputs = {});

// Same quantity on per-sample labels.
double mae_labels(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> expected);

// Confusion counts over input-foreground pixels with the staff (removed,
// expected 0) pixel as the positive class:
//   TP predicted 0, expected 0     TN predicted 1, expected 1
//   FP predicted 0, expected 1     FN predicted 1, expected 0
struct EvalResult {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::uint64_t pixels = 0;
  double accuracy = 1.0;
  double specificity = 1.0;
  double recall = 1.0;
  double mae = 0.0;
  // Set when the matching denominator was zero (value reported as 1.0).
  bool degenerate_accuracy = false;
  bool degenerate_specificity = false;
  bool degenerate_recall = false;

  std::string flags() const;
};

EvalResult eval_from_counts(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn);
EvalResult staff_eval(const BinaryImage& input, const BinaryImage& predicted, const BinaryImage& expected);
// Pooled counts over several results.
EvalResult pool_results(std::span<const EvalResult> results);

struct EvalRow {
  std::string image_id;
  EvalResult result;
};

// Columns: image_id,pixels,TP,TN,FP,FN,accuracy,specificity,recall,mae,flags.
// Per-image rows, then "ALL" (pooled counts) and "MEAN" (per-image means).
void write_eval_csv(std::ostream& os, std::span<const EvalRow> rows);

}  // namespace wopl
