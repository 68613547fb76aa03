#include <doctest.h>

#include <algorithm>
#include <set>

#include "support.hpp"
#include "woplearn/corpus.hpp"
#include "woplearn/dataset.hpp"
#include "woplearn/errors.hpp"
#include "woplearn/synthgen.hpp"

using namespace wopl;

namespace {

// Multiset of (patch, label) for order-free comparisons.
std::multiset<std::pair<std::vector<std::uint8_t>, int>> contents(const PatchDataset& ds) {
  std::multiset<std::pair<std::vector<std::uint8_t>, int>> m;
  for (std::size_t i = 0; i < ds.size(); ++i) m.insert({ds.patch(i), ds.label(i)});
  return m;
}

DatasetStats brute_stats(const PatchDataset& ds) {
  const auto counts = testing::hash_count(ds);
  DatasetStats s;
  s.total = ds.size();
  s.distinct = counts.size();
  for (const auto& [p, c] : counts) s.conflicting += (c.first > 0 && c.second > 0);
  return s;
}

}  // namespace

TEST_CASE("all-foreground 3x3 with identity output") {
  BinaryImage img(3, 3, std::vector<std::uint8_t>(9, 1));
  const std::vector<ImagePair> pairs{{"a", img, img}};
  const auto ds = extract_dataset(pairs, Window({{0, 0}}));
  REQUIRE(ds.size() == 9);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds.patch(i) == std::vector<std::uint8_t>{1});
    CHECK(ds.label(i) == 1);
  }
  CHECK(ds.stats().distinct == 1);
  CHECK(ds.stats().conflicting == 0);
}

TEST_CASE("forced conflict") {
  const std::vector<ImagePair> pairs{{"a", BinaryImage(2, 1, {1, 1}), BinaryImage(2, 1, {1, 0})}};
  const auto ds = extract_dataset(pairs, Window({{0, 0}}));
  REQUIRE(ds.size() == 2);
  CHECK(ds.label(0) == 1);
  CHECK(ds.label(1) == 0);
  CHECK(ds.stats() == DatasetStats{2, 1, 1});
}

TEST_CASE("extraction errors") {
  const std::vector<ImagePair> mismatch{{"m", BinaryImage(2, 2), BinaryImage(3, 2)}};
  CHECK_THROWS_AS(extract_dataset(mismatch, Window({{0, 0}})), DataError);
  const std::vector<ImagePair> not_anti{{"n", BinaryImage(2, 1, {1, 0}), BinaryImage(2, 1, {1, 1})}};
  CHECK_THROWS_AS(extract_dataset(not_anti, Window({{0, 0}}), Sampling::ForegroundOnly), DataError);
  try {
    extract_dataset(not_anti, Window({{0, 0}}), Sampling::ForegroundOnly);
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("(1,0)") != std::string::npos);
  }
  CHECK(extract_dataset(not_anti, Window({{0, 0}}), Sampling::AllPixels).size() == 2);
}

TEST_CASE("synthetic staff page: one sample per foreground pixel, with provenance") {
  SynthConfig cfg;
  cfg.width = cfg.height = 64;
  cfg.staves = 1;
  cfg.line_spacing = {7, 8};
  cfg.symbols_per_staff = {2, 4};
  cfg.seed = 4;
  const auto s = generate(cfg);
  const std::vector<ImagePair> pairs{{"p", s.input, s.output}};
  const Window w = make_rect_window(3, 3);
  const auto ds = extract_dataset(pairs, w);
  CHECK(ds.size() == s.input.count_foreground());
  REQUIRE(ds.has_provenance());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto pv = *ds.provenance(i);
    const Point p{static_cast<int>(pv.x), static_cast<int>(pv.y)};
    REQUIRE(ds.patch(i) == extract_patch(s.input, p, w));
    REQUIRE(ds.label(i) == s.output.at(p.x, p.y));
  }
  const auto all = extract_dataset(pairs, w, Sampling::AllPixels);
  CHECK(all.size() == 64u * 64u);
}

TEST_CASE("stats match a brute-force recount") {
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const Window w = testing::random_window(rng, 1, 3);
    const auto ds = testing::random_dataset(rng, w, 1 + rng.below(300), rng.uniform(0.1, 0.9));
    const auto s = ds.stats();
    CHECK(s == brute_stats(ds));
    CHECK(s.distinct <= s.total);
    CHECK(s.conflicting <= s.distinct);
  }
}

TEST_CASE("subsample") {
  Rng rng(8);
  const auto ds = testing::random_dataset(rng, make_rect_window(3, 3), 10000);
  CHECK(contents(subsample(ds, ds.size(), 1)) == contents(ds));
  CHECK(subsample(ds, 0, 1).empty());
  const auto a = subsample(ds, 500, 42);
  const auto b = subsample(ds, 500, 42);
  const auto c = subsample(ds, 500, 43);
  CHECK(a == b);
  CHECK(a.size() == 500);
  CHECK(contents(a) != contents(c));
  CHECK(a.stats() == brute_stats(a));
  CHECK_THROWS_AS(subsample(ds, ds.size() + 1, 0), InvalidArgument);
}

TEST_CASE("shuffle_batches sizes and determinism") {
  Rng rng(1);
  const auto d100 = testing::random_dataset(rng, Window({{0, 0}}), 100);
  const auto d101 = testing::random_dataset(rng, Window({{0, 0}}), 101);
  const auto s100 = shuffle_batches(d100, 50, 7, 0);
  CHECK(s100.batch_count() == 2);
  const auto s101 = shuffle_batches(d101, 50, 7, 0);
  REQUIRE(s101.batch_count() == 3);
  CHECK(s101.batch(0).size() == 50);
  CHECK(s101.batch(1).size() == 50);
  CHECK(s101.batch(2).size() == 1);

  const auto again = shuffle_batches(d101, 50, 7, 0);
  CHECK(std::equal(again.order().begin(), again.order().end(), s101.order().begin()));
  const auto next = shuffle_batches(d101, 50, 7, 1);
  CHECK_FALSE(std::equal(next.order().begin(), next.order().end(), s101.order().begin()));
  CHECK_THROWS_AS(shuffle_batches(d101, 0, 7, 0), InvalidArgument);
}

TEST_CASE("the union of an epoch's batches is the dataset") {
  Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 1 + rng.below(400);
    const std::size_t b = 1 + rng.below(60);
    const auto sched = BatchSchedule(n, b, rng.next_u64(), rng.below(50));
    std::vector<std::size_t> seen;
    std::size_t batches = 0;
    for (auto batch : sched) {
      ++batches;
      CHECK(batch.size() <= b);
      seen.insert(seen.end(), batch.begin(), batch.end());
    }
    CHECK(batches == (n + b - 1) / b);
    std::sort(seen.begin(), seen.end());
    std::vector<std::size_t> expect(n);
    for (std::size_t i = 0; i < n; ++i) expect[i] = i;
    CHECK(seen == expect);
  }
}

TEST_CASE("dataset container round trip") {
  Rng rng(6);
  const auto dir = testing::scratch_dir("dataset");
  for (int t = 0; t < 10; ++t) {
    const Window w = testing::random_window(rng, 5, 1 + rng.below(90));
    const auto ds = testing::random_dataset(rng, w, rng.below(200));
    CHECK(decode_dataset(encode_dataset(ds)) == ds);
  }
  SynthConfig cfg;
  cfg.width = 80;
  cfg.height = 64;
  cfg.staves = 1;
  cfg.line_spacing = {7, 9};
  const auto s = generate(cfg);
  const std::vector<ImagePair> pairs{{"p", s.input, s.output}};
  const auto ds = extract_dataset(pairs, make_rect_window(9, 9));
  save_dataset(ds, dir / "d.wopd");
  CHECK(load_dataset(dir / "d.wopd") == ds);
}

TEST_CASE("dataset container rejects damaged bytes") {
  Rng rng(6);
  const auto bytes = encode_dataset(testing::random_dataset(rng, make_rect_window(3, 3), 20));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_dataset(bad_magic), ParseError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_dataset(truncated), ParseError);
  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS_AS(decode_dataset(extra), ParseError);
}

TEST_CASE("corpus save and load") {
  const auto dir = testing::scratch_dir("corpus");
  SynthConfig cfg;
  cfg.width = 80;
  cfg.height = 64;
  cfg.staves = 1;
  cfg.line_spacing = {7, 9};
  const Corpus c = generate_corpus(cfg, 5, 3);
  CHECK(c.split.train_ids.size() == 3);
  CHECK(c.split.validation_ids.size() == 1);
  CHECK(c.split.test_ids.size() == 1);
  save_corpus(c, dir);
  const Corpus back = load_corpus(dir / "corpus.tsv");
  REQUIRE(back.pairs.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(back.pairs[i].id == c.pairs[i].id);
    CHECK(back.pairs[i].input == c.pairs[i].input);
    CHECK(back.pairs[i].output == c.pairs[i].output);
  }
  CHECK(back.split.test_ids == c.split.test_ids);

  SplitSpec overlap{{"a"}, {"a"}, {}};
  CHECK_THROWS_AS(overlap.validate(), DataError);
  SplitSpec no_val{{"a"}, {}, {"b"}};
  CHECK_NOTHROW(no_val.validate());
  CHECK_THROWS_AS(no_val.validate(true), DataError);
}
