#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "woplearn/errors.hpp"
#include "woplearn/metrics.hpp"

using namespace wopl;

TEST_CASE("mae examples") {
  Rng rng(1);
  const auto a = testing::random_image(rng, 6, 2);
  const std::vector<BinaryImage> same{a};
  CHECK(mae(same, same, MaeDomain::AllPixels) == 0.0);

  const std::vector<BinaryImage> ones{BinaryImage(4, 3, std::vector<std::uint8_t>(12, 1))};
  const std::vector<BinaryImage> zeros{BinaryImage(4, 3)};
  CHECK(mae(ones, zeros, MaeDomain::AllPixels) == 1.0);

  auto b = a;
  for (int x : {0, 2, 5}) b.set(x, 1, b.at(x, 1) ^ 1);
  const std::vector<BinaryImage> pb{b};
  CHECK(mae(pb, same, MaeDomain::AllPixels) == doctest::Approx(0.25));

  // Foreground domain of an all-ones input is every pixel.
  const std::vector<BinaryImage> full{BinaryImage(6, 2, std::vector<std::uint8_t>(12, 1))};
  CHECK(mae(pb, same, MaeDomain::ForegroundOfInput, full) == doctest::Approx(0.25));
}

TEST_CASE("mae errors") {
  const std::vector<BinaryImage> p{BinaryImage(2, 2)}, q{BinaryImage(3, 2)};
  CHECK_THROWS_AS(mae(p, q, MaeDomain::AllPixels), DataError);
  const std::vector<BinaryImage> empty_in{BinaryImage(2, 2)};
  CHECK_THROWS_AS(mae(p, p, MaeDomain::ForegroundOfInput, empty_in), InvalidArgument);
  CHECK_THROWS_AS(mae(std::span<const BinaryImage>{}, std::span<const BinaryImage>{}, MaeDomain::AllPixels),
                  InvalidArgument);
}

TEST_CASE("staff_eval examples") {
  const BinaryImage input(4, 1, {1, 1, 1, 1});
  const BinaryImage expected(4, 1, {0, 0, 1, 1});

  const auto perfect = staff_eval(input, expected, expected);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.specificity == 1.0);
  CHECK(perfect.recall == 1.0);

  const auto keep_all = staff_eval(input, input, expected);
  CHECK(keep_all.recall == 0.0);
  CHECK(keep_all.specificity == 1.0);

  const auto r = staff_eval(input, BinaryImage(4, 1, {0, 1, 1, 0}), expected);
  CHECK(r.tp == 1);
  CHECK(r.fn == 1);
  CHECK(r.tn == 1);
  CHECK(r.fp == 1);
  CHECK(r.accuracy == 0.5);
  CHECK(r.recall == 0.5);
  CHECK(r.specificity == 0.5);
  CHECK(r.mae == 0.5);
}

TEST_CASE("background pixels are ignored and degenerate denominators are flagged") {
  const BinaryImage input(3, 1, {1, 0, 1});
  const BinaryImage expected(3, 1, {1, 0, 1});
  const auto r = staff_eval(input, BinaryImage(3, 1, {1, 1, 1}), expected);
  CHECK(r.pixels == 2);
  CHECK(r.recall == 1.0);
  CHECK(r.degenerate_recall);
  CHECK_FALSE(r.degenerate_specificity);
  CHECK(r.flags() == "no_staff_pixels");

  const auto none = staff_eval(BinaryImage(2, 2), BinaryImage(2, 2), BinaryImage(2, 2));
  CHECK(none.pixels == 0);
  CHECK(none.accuracy == 1.0);
  CHECK(none.degenerate_accuracy);

  CHECK_THROWS_AS(staff_eval(input, BinaryImage(2, 1), expected), DataError);
}

TEST_CASE("metric laws on random triples") {
  Rng rng(99);
  for (int t = 0; t < 200; ++t) {
    const int w = 1 + rng.below(20), h = 1 + rng.below(20);
    const auto input = testing::random_image(rng, w, h, 0.7);
    const auto expected = testing::random_image(rng, w, h).intersect(input);
    const auto predicted = testing::random_image(rng, w, h).intersect(input);
    const auto r = staff_eval(input, predicted, expected);
    CHECK(r.tp + r.tn + r.fp + r.fn == r.pixels);
    CHECK(r.pixels == input.count_foreground());
    if (r.pixels == 0) continue;
    const std::vector<BinaryImage> p{predicted}, e{expected}, in{input};
    CHECK(mae(p, e, MaeDomain::ForegroundOfInput, in) == doctest::Approx(1.0 - r.accuracy).epsilon(1e-12));
    const auto swapped = staff_eval(input, expected, predicted);
    CHECK(swapped.accuracy == r.accuracy);
    CHECK(swapped.fp == r.fn);
    CHECK(swapped.fn == r.fp);
  }
}

TEST_CASE("metrics are invariant to a joint translation") {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto input = testing::random_image(rng, 10, 10, 0.7);
    const auto expected = testing::random_image(rng, 10, 10).intersect(input);
    const auto predicted = testing::random_image(rng, 10, 10).intersect(input);
    const int tx = rng.below(6), ty = rng.below(6);
    auto shift = [&](const BinaryImage& img) {
      BinaryImage out(16, 16);
      for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) out.set(x + tx, y + ty, img.at(x, y));
      return out;
    };
    const auto a = staff_eval(input, predicted, expected);
    const auto b = staff_eval(shift(input), shift(predicted), shift(expected));
    CHECK(a.tp == b.tp);
    CHECK(a.tn == b.tn);
    CHECK(a.fp == b.fp);
    CHECK(a.fn == b.fn);
  }
}

TEST_CASE("csv layout") {
  const BinaryImage input(4, 1, {1, 1, 1, 1});
  const BinaryImage expected(4, 1, {0, 0, 1, 1});
  const std::vector<EvalRow> rows{{"a", staff_eval(input, expected, expected)},
                                  {"b", staff_eval(input, BinaryImage(4, 1, {0, 1, 1, 0}), expected)}};
  std::ostringstream os;
  write_eval_csv(os, rows);
  const std::string csv = os.str();
  CHECK(csv.rfind("image_id,pixels,TP,TN,FP,FN,accuracy,specificity,recall,mae,flags\n", 0) == 0);
  CHECK(csv.find("a,4,2,2,0,0,1.000000,1.000000,1.000000,0.000000,\n") != std::string::npos);
  CHECK(csv.find("b,4,1,1,1,1,0.500000,0.500000,0.500000,0.500000,\n") != std::string::npos);
  CHECK(csv.find("ALL,8,3,3,1,1,0.750000,0.750000,0.750000,0.250000,\n") != std::string::npos);
  CHECK(csv.find("MEAN,8,,,,,0.750000,0.750000,0.750000,0.250000,per_image_mean\n") != std::string::npos);
}
