#include <doctest.h>

#include "support.hpp"
#include "woplearn/errors.hpp"
#include "woplearn/woperator.hpp"

using namespace wopl;

namespace {

class Untrained final : public PatchClassifier {
 public:
  std::size_t input_size() const override { return 1; }
  bool trained() const override { return false; }
  void predict(std::span<const std::uint8_t>, std::span<std::uint8_t>) const override {}
};

BinaryImage all_ones(int w, int h) { return BinaryImage(w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 1)); }

}  // namespace

TEST_CASE("identity and constant operators") {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto img = testing::random_image(rng, 1 + rng.below(30), 1 + rng.below(30));
    CHECK(apply(identity_function(), img, ApplyMode::AllPixels) == img);
    CHECK(apply(identity_function(), img, ApplyMode::ForegroundOnly) == img);
    const auto zero = apply(constant_function(make_rect_window(3, 3), 0), img, ApplyMode::AllPixels);
    CHECK(zero.count_foreground() == 0);
    const auto one = apply(constant_function(make_rect_window(3, 3), 1), img, ApplyMode::AllPixels);
    CHECK(one.count_foreground() == static_cast<std::size_t>(img.width()) * img.height());
  }
}

TEST_CASE("3x3 erosion of a 5x5 block keeps the interior") {
  const auto out = apply(erosion_function(make_rect_window(3, 3)), all_ones(5, 5), ApplyMode::AllPixels);
  CHECK(out == testing::erode_square(all_ones(5, 5), 1));
  CHECK(out.count_foreground() == 9);
  CHECK(out.at(1, 1) == 1);
  CHECK(out.at(0, 2) == 0);
}

TEST_CASE("compose_apply") {
  const auto img = all_ones(7, 7);
  const LocalFunction e3 = erosion_function(make_rect_window(3, 3));
  const std::vector<LocalFunction> twice{e3, e3};
  const auto out = compose_apply(twice, img, ApplyMode::AllPixels);
  CHECK(out == testing::erode_square(img, 2));
  CHECK(out == apply(erosion_function(make_rect_window(5, 5)), img, ApplyMode::AllPixels));

  const std::vector<LocalFunction> ident{identity_function()};
  CHECK(compose_apply(ident, img) == img);
  const std::vector<LocalFunction> zero_first{constant_function(make_rect_window(1, 1), 0), identity_function()};
  CHECK(compose_apply(zero_first, img, ApplyMode::AllPixels).count_foreground() == 0);
  CHECK_THROWS_AS(compose_apply(std::span<const LocalFunction>{}, img), InvalidArgument);
}

TEST_CASE("untrained classifier and size mismatch") {
  const LocalFunction fn(Window({{0, 0}}), std::make_shared<Untrained>());
  CHECK_THROWS_AS(apply(fn, all_ones(3, 3)), StateError);
  CHECK_THROWS_AS(LocalFunction(make_rect_window(3, 3), std::make_shared<Untrained>()), InvalidArgument);
}

TEST_CASE("erosion matches brute force on random images") {
  Rng rng(9);
  for (int t = 0; t < 30; ++t) {
    const auto img = testing::random_image(rng, 1 + rng.below(20), 1 + rng.below(20), 0.8);
    CHECK(apply(erosion_function(make_rect_window(3, 3)), img, ApplyMode::AllPixels) == testing::erode_square(img, 1));
  }
}

TEST_CASE("foreground_only output is a subset of the input") {
  Rng rng(17);
  for (int t = 0; t < 100; ++t) {
    const auto img = testing::random_image(rng, 1 + rng.below(25), 1 + rng.below(25), rng.uniform());
    const auto fn = testing::random_psi(testing::random_window(rng, 3, 8), rng.next_u64());
    const auto out = apply(fn, img, ApplyMode::ForegroundOnly);
    CHECK(out.is_subset_of(img));
    // On foreground pixels both modes agree.
    CHECK(out == apply(fn, img, ApplyMode::AllPixels).intersect(img));
  }
}

TEST_CASE("output does not depend on the thread count") {
  Rng rng(23);
  const auto img = testing::random_image(rng, 200, 150, 0.4);
  const auto fn = testing::random_psi(make_rect_window(5, 5), 77);
  for (auto mode : {ApplyMode::AllPixels, ApplyMode::ForegroundOnly}) {
    const auto ref = apply(fn, img, mode, 1);
    for (int th : {2, 3, 8}) CHECK(apply(fn, img, mode, th) == ref);
  }
}

TEST_CASE("changing one pixel only affects p with q - p in W") {
  Rng rng(31);
  for (int t = 0; t < 50; ++t) {
    const auto img = testing::random_image(rng, 12, 12);
    const Window w = testing::random_window(rng, 3, 6);
    const auto fn = testing::random_psi(w, rng.next_u64());
    const int qx = static_cast<int>(rng.below(12)), qy = static_cast<int>(rng.below(12));
    BinaryImage flipped = img;
    flipped.set(qx, qy, img.at(qx, qy) ^ 1);
    const auto a = apply(fn, img, ApplyMode::AllPixels);
    const auto b = apply(fn, flipped, ApplyMode::AllPixels);
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x)
        if (a.at(x, y) != b.at(x, y)) CHECK(w.contains({qx - x, qy - y}));
  }
}
