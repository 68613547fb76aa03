#include "woplearn/metrics.hpp"

#include <cstdio>
#include <string>

#include "woplearn/errors.hpp"

namespace wopl {

namespace {

void require_same_dims(const BinaryImage& a, const BinaryImage& b, std::size_t pair, const char* what) {
  if (a.width() != b.width() || a.height() != b.height())
    throw DataError(std::string(what) + " for pair " + std::to_string(pair) + ": " + std::to_string(a.width()) + "x" +
                    std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

double mae(std::span<const BinaryImage> predicted, std::span<const BinaryImage> expected, MaeDomain domain,
           std::span<const BinaryImage> inputs) {
  if (predicted.size() != expected.size())
    throw DataError("mae: " + std::to_string(predicted.size()) + " predicted vs " + std::to_string(expected.size()) +
                    " expected images");
  if (domain == MaeDomain::ForegroundOfInput && inputs.size() != predicted.size())
    throw InvalidArgument("mae over input foreground needs one input image per pair");
  std::uint64_t total = 0, wrong = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    require_same_dims(predicted[i], expected[i], i, "mae dimension mismatch");
    const auto p = predicted[i].pixels();
    const auto e = expected[i].pixels();
    if (domain == MaeDomain::AllPixels) {
      total += p.size();
      for (std::size_t k = 0; k < p.size(); ++k) wrong += p[k] != e[k];
    } else {
      require_same_dims(inputs[i], expected[i], i, "mae dimension mismatch");
      const auto in = inputs[i].pixels();
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (!in[k]) continue;
        ++total;
        wrong += p[k] != e[k];
      }
    }
  }
  if (total == 0) throw InvalidArgument("mae over an empty pixel domain");
  return static_cast<double>(wrong) / static_cast<double>(total);
}

double mae_labels(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> expected) {
  if (predicted.size() != expected.size())
    throw DataError("mae: " + std::to_string(predicted.size()) + " predictions for " +
                    std::to_string(expected.size()) + " labels");
  if (predicted.empty()) throw InvalidArgument("mae over an empty sample set");
  std::uint64_t wrong = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) wrong += (predicted[i] != 0) != (expected[i] != 0);
  return static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

std::string EvalResult::flags() const {
  std::string s;
  auto add = [&](const char* f) { s += (s.empty() ? "" : ";") + std::string(f); };
  if (degenerate_accuracy) add("no_pixels");
  if (degenerate_specificity) add("no_symbol_pixels");
  if (degenerate_recall) add("no_staff_pixels");
  return s;
}

EvalResult eval_from_counts(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn) {
  EvalResult r;
  r.tp = tp;
  r.tn = tn;
  r.fp = fp;
  r.fn = fn;
  r.pixels = tp + tn + fp + fn;
  auto ratio = [](std::uint64_t num, std::uint64_t den, bool& degenerate) {
    degenerate = den == 0;
    return degenerate ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  r.accuracy = ratio(tp + tn, r.pixels, r.degenerate_accuracy);
  r.specificity = ratio(tn, tn + fp, r.degenerate_specificity);
  r.recall = ratio(tp, tp + fn, r.degenerate_recall);
  r.mae = r.degenerate_accuracy ? 0.0 : static_cast<double>(fp + fn) / static_cast<double>(r.pixels);
  return r;
}

EvalResult staff_eval(const BinaryImage& input, const BinaryImage& predicted, const BinaryImage& expected) {
  require_same_dims(input, predicted, 0, "staff_eval dimension mismatch (input/predicted)");
  require_same_dims(input, expected, 0, "staff_eval dimension mismatch (input/expected)");
  const auto in = input.pixels();
  const auto p = predicted.pixels();
  const auto e = expected.pixels();
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < in.size(); ++k) {
    if (!in[k]) continue;
    if (e[k] == 0) {
      (p[k] == 0 ? tp : fn) += 1;
    } else {
      (p[k] == 0 ? fp : tn) += 1;
    }
  }
  return eval_from_counts(tp, tn, fp, fn);
}

EvalResult pool_results(std::span<const EvalResult> results) {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (const auto& r : results) {
    tp += r.tp;
    tn += r.tn;
    fp += r.fp;
    fn += r.fn;
  }
  return eval_from_counts(tp, tn, fp, fn);
}

void write_eval_csv(std::ostream& os, std::span<const EvalRow> rows) {
  os << "image_id,pixels,TP,TN,FP,FN,accuracy,specificity,recall,mae,flags\n";
  auto line = [&](const std::string& id, const EvalResult& r) {
    os << id << ',' << r.pixels << ',' << r.tp << ',' << r.tn << ',' << r.fp << ',' << r.fn << ',' << fmt(r.accuracy)
       << ',' << fmt(r.specificity) << ',' << fmt(r.recall) << ',' << fmt(r.mae) << ',' << r.flags() << '\n';
  };
  std::vector<EvalResult> all;
  double acc = 0, spec = 0, rec = 0, m = 0;
  for (const auto& row : rows) {
    line(row.image_id, row.result);
    all.push_back(row.result);
    acc += row.result.accuracy;
    spec += row.result.specificity;
    rec += row.result.recall;
    m += row.result.mae;
  }
  const EvalResult pooled = pool_results(all);
  line("ALL", pooled);
  const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
  os << "MEAN," << pooled.pixels << ",,,,," << fmt(acc / n) << ',' << fmt(spec / n) << ',' << fmt(rec / n) << ','
     << fmt(m / n) << ",per_image_mean\n";
}

}  // namespace wopl
