#include <doctest.h>

#include "support.hpp"
#include "woplearn/binary_io.hpp"
#include "woplearn/errors.hpp"
#include "woplearn/pbm.hpp"
#include "woplearn/synthgen.hpp"

using namespace wopl;

TEST_CASE("staves without symbols or degradation are removed entirely") {
  SynthConfig cfg;
  cfg.symbols_per_staff = {0, 0};
  cfg.pepper = 0;
  cfg.line_breaks = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const auto s = generate(cfg);
    CHECK(s.input.count_foreground() > 0);
    CHECK(s.output.count_foreground() == 0);
    CHECK(s.staff_mask == s.input);
  }
}

TEST_CASE("no staves means nothing to remove") {
  SynthConfig cfg;
  cfg.staves = 0;
  const auto s = generate(cfg);
  CHECK(s.output == s.input);
  CHECK(s.staff_mask.count_foreground() == 0);
}

TEST_CASE("ground truth is anti-extensive and only staff is removed") {
  Rng rng(1);
  for (int t = 0; t < 40; ++t) {
    SynthConfig cfg;
    cfg.seed = rng.next_u64();
    cfg.staves = static_cast<int>(rng.range(0, 3));
    cfg.pepper = rng.uniform(0, 0.01);
    cfg.line_breaks = rng.uniform(0, 0.02);
    const auto s = generate(cfg);
    CHECK(s.output.is_subset_of(s.input));
    CHECK(s.input.subtract(s.output).is_subset_of(s.staff_mask));
    CHECK(s.staff_mask.is_subset_of(s.input));
  }
}

TEST_CASE("generation is deterministic") {
  SynthConfig cfg;
  cfg.seed = 99;
  const auto a = generate(cfg), b = generate(cfg);
  CHECK(a.input == b.input);
  CHECK(a.output == b.output);
  cfg.seed = 100;
  CHECK_FALSE(generate(cfg).input == a.input);
}

TEST_CASE("config validation") {
  SynthConfig cfg;
  cfg.pepper = 1.5;
  CHECK_THROWS_AS(generate(cfg), InvalidArgument);
  cfg = SynthConfig{};
  cfg.staves = 10;
  CHECK_THROWS_AS(generate(cfg), InvalidArgument);
  cfg = SynthConfig{};
  cfg.line_spacing = {3, 4};
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("corpus split rounding") {
  SynthConfig cfg;
  const auto c5 = generate_corpus(cfg, 5, 0);
  CHECK(c5.split.train_ids.size() == 3);
  CHECK(c5.split.validation_ids.size() == 1);
  CHECK(c5.split.test_ids.size() == 1);
  const auto c50 = generate_corpus(cfg, 50, 0);
  CHECK(c50.split.train_ids.size() == 30);
  CHECK(c50.split.validation_ids.size() == 10);
  CHECK(c50.split.test_ids.size() == 10);
  const auto c3 = generate_corpus(cfg, 3, 0);
  CHECK(c3.split.train_ids.size() == 2);
  CHECK(c3.split.validation_ids.size() == 1);
  CHECK(c3.split.test_ids.empty());
  CHECK(c5.pairs[0].id == "img_0000");
  CHECK_THROWS_AS(generate_corpus(cfg, 2, 0), InvalidArgument);
}

TEST_CASE("same seed gives a byte-identical corpus") {
  const auto d1 = testing::scratch_dir("synth1"), d2 = testing::scratch_dir("synth2");
  SynthConfig cfg;
  save_corpus(generate_corpus(cfg, 4, 7), d1);
  save_corpus(generate_corpus(cfg, 4, 7), d2);
  for (const auto& entry : std::filesystem::directory_iterator(d1))
    CHECK(read_file_bytes(entry.path()) == read_file_bytes(d2 / entry.path().filename()));
}

TEST_CASE("default corpus: staff fraction and class coverage") {
  // Seeded 100-page run; the mean sits near 0.77.
  const auto c = generate_corpus(SynthConfig{}, 100, 0);
  double sum = 0;
  for (const auto& p : c.pairs) {
    const auto fg = p.input.count_foreground();
    const auto kept = p.output.count_foreground();
    REQUIRE(fg > 0);
    CHECK(kept > 0);
    CHECK(kept < fg);
    sum += static_cast<double>(fg - kept) / static_cast<double>(fg);
  }
  const double mean = sum / 100.0;
  MESSAGE("mean staff fraction " << mean);
  CHECK(mean >= 0.2);
  CHECK(mean <= 0.8);
}
