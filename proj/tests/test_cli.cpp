#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "support.hpp"
#include "woplearn/baseline.hpp"
#include "woplearn/binary_io.hpp"
#include "woplearn/corpus.hpp"
#include "woplearn/model_io.hpp"
#include "woplearn/pbm.hpp"

namespace fs = std::filesystem;
using namespace wopl;

namespace {

struct Result {
  int code = -1;
  std::string err;
};

Result cli(const fs::path& dir, const std::string& args) {
  const auto err_path = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.string() + "' && '" WOPL_CLI_PATH "' " + args + " >/dev/null 2>'" +
                          err_path.string() + "'";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err_path);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Second line of the CSV section labelled ALL -> accuracy column.
double all_accuracy(const fs::path& csv) {
  std::istringstream in(slurp(csv));
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("ALL,", 0) != 0) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cols.push_back(c);
    return std::stod(cols.at(6));
  }
  return -1;
}

const std::string kSmall = "--images 5 --width 96 --height 96 --staves 2 --line-spacing 7 8";

}  // namespace

TEST_CASE("gen is reproducible") {
  const auto dir = testing::scratch_dir("cli_gen");
  REQUIRE(cli(dir, "--threads 1 gen --seed 7 --out a " + kSmall).code == 0);
  REQUIRE(cli(dir, "--threads 1 gen --seed 7 --out b " + kSmall).code == 0);
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    if (e.path().filename() == "manifest.json") continue;
    CHECK(read_file_bytes(e.path()) == read_file_bytes(dir / "b" / e.path().filename()));
  }
  const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(manifest["command"] == "gen");
  CHECK(manifest["seeds"]["corpus"] == 7);
  CHECK(manifest["config"]["images"] == "5");
  CHECK(manifest.contains("timings"));
}

TEST_CASE("apply with an identity table reproduces the input") {
  const auto dir = testing::scratch_dir("cli_identity");
  FrequencyTable t(Window({{0, 0}}));
  t.add_count(std::vector<std::uint64_t>{0}, {1, 0});
  t.add_count(std::vector<std::uint64_t>{1}, {0, 1});
  save_model(t, dir / "id.wopm");
  Rng rng(3);
  write_image(testing::random_image(rng, 37, 21), dir / "in.pbm");
  REQUIRE(cli(dir, "apply --model id.wopm --input in.pbm --out out.pbm --mode all").code == 0);
  CHECK(read_file_bytes(dir / "out.pbm") == read_file_bytes(dir / "in.pbm"));
  REQUIRE(cli(dir, "apply --model id.wopm --input in.pbm --out fg.pbm").code == 0);
  CHECK(read_file_bytes(dir / "fg.pbm") == read_file_bytes(dir / "in.pbm"));
  CHECK(fs::exists(dir / "out.pbm.manifest.json"));
}

TEST_CASE("table pipeline beats the majority baseline and is idempotent") {
  const auto dir = testing::scratch_dir("cli_pipeline");
  REQUIRE(cli(dir, "--threads 1 gen --images 10 --seed 1 --out corpus").code == 0);
  REQUIRE(cli(dir, "extract --corpus corpus/corpus.tsv --window 9 --out train.wopd").code == 0);
  REQUIRE(cli(dir, "train --table --train train.wopd --out table.wopm").code == 0);
  REQUIRE(cli(dir, "--threads 1 apply --model table.wopm --corpus corpus/corpus.tsv --out-dir pred").code == 0);
  REQUIRE(cli(dir, "eval --corpus corpus/corpus.tsv --predicted-dir pred --out eval.csv").code == 0);

  const Corpus corpus = load_corpus(dir / "corpus" / "corpus.tsv");
  std::uint64_t fg = 0, kept = 0;
  for (const auto& p : corpus.subset(Split::Test)) {
    fg += p.input.count_foreground();
    kept += p.output.count_foreground();
  }
  const double majority = static_cast<double>(std::max(kept, fg - kept)) / static_cast<double>(fg);
  const double acc = all_accuracy(dir / "eval.csv");
  MESSAGE("table accuracy " << acc << " majority " << majority);
  CHECK(acc >= majority);

  const auto model = read_file_bytes(dir / "table.wopm");
  const auto csv = read_file_bytes(dir / "eval.csv");
  REQUIRE(cli(dir, "train --table --train train.wopd --out table.wopm").code == 0);
  REQUIRE(cli(dir, "--threads 1 apply --model table.wopm --corpus corpus/corpus.tsv --out-dir pred").code == 0);
  REQUIRE(cli(dir, "eval --corpus corpus/corpus.tsv --predicted-dir pred --out eval.csv").code == 0);
  CHECK(read_file_bytes(dir / "table.wopm") == model);
  CHECK(read_file_bytes(dir / "eval.csv") == csv);
}

TEST_CASE("eval of expected against itself is perfect") {
  const auto dir = testing::scratch_dir("cli_eval");
  REQUIRE(cli(dir, "gen --out c " + kSmall).code == 0);
  REQUIRE(cli(dir, "eval --input c/img_0000_in.pbm --predicted c/img_0000_gt.pbm --expected c/img_0000_gt.pbm "
                   "--out e.csv")
              .code == 0);
  CHECK(all_accuracy(dir / "e.csv") == 1.0);
}

TEST_CASE("cnn training is idempotent and config files work") {
  const auto dir = testing::scratch_dir("cli_cnn");
  REQUIRE(cli(dir, "gen --out c " + kSmall).code == 0);
  REQUIRE(cli(dir, "extract --corpus c/corpus.tsv --window 5 --subsample 300 --out t.wopd").code == 0);
  {
    std::ofstream cfg(dir / "train.toml");
    cfg << "[train]\nblocks = \"4x3,4x3\"\nfc-hidden = 8\nepochs = 3\nlr = 0.01\n";
  }
  const std::string base = "--threads 1 --config train.toml train --train t.wopd --val t.wopd --batch-size 25 ";
  REQUIRE(cli(dir, base + "--out m1.wopm").code == 0);
  REQUIRE(cli(dir, base + "--out m2.wopm").code == 0);
  CHECK(read_file_bytes(dir / "m1.wopm") == read_file_bytes(dir / "m2.wopm"));
  const auto m = load_model(dir / "m1.wopm");
  REQUIRE(m.kind == ModelKind::Cnn);
  CHECK(m.cnn->config().fc_hidden == 8);
  CHECK(m.cnn->config().epochs == 3);
  CHECK(m.cnn->config().batch_size == 25);
  // Flags win over the file.
  REQUIRE(cli(dir, base + "--epochs 1 --out m3.wopm").code == 0);
  CHECK(load_model(dir / "m3.wopm").cnn->config().epochs == 1);
  CHECK(slurp(dir / "m1.wopm.epochs.csv").rfind("epoch,train_loss,train_accuracy,val_mae,checkpoint\n", 0) == 0);
}

TEST_CASE("exit codes") {
  const auto dir = testing::scratch_dir("cli_exit");
  CHECK(cli(dir, "").code == 2);
  CHECK(cli(dir, "gen --bogus").code == 2);
  CHECK(cli(dir, "extract --corpus x.tsv").code == 2);
  const auto bad_window = cli(dir, "gen --out c --images 2");
  CHECK(bad_window.code == 2);
  CHECK(bad_window.err.rfind("error[invalid-argument]:", 0) == 0);

  const auto missing = cli(dir, "extract --corpus missing.tsv --out d.wopd");
  CHECK(missing.code == 3);
  CHECK(missing.err.rfind("error[io]:", 0) == 0);

  REQUIRE(cli(dir, "gen --out c " + kSmall).code == 0);
  CHECK(cli(dir, "extract --corpus c/corpus.tsv --window 4 --out d.wopd").code == 2);
  write_image(BinaryImage(3, 3), dir / "small.pbm");
  CHECK(cli(dir, "eval --input c/img_0000_in.pbm --predicted small.pbm --expected c/img_0000_gt.pbm --out e.csv")
            .code == 3);
  {
    std::ofstream f(dir / "junk.pbm");
    f << "P7 1 1";
  }
  const auto parse = cli(dir, "eval --input junk.pbm --predicted junk.pbm --expected junk.pbm --out e.csv");
  CHECK(parse.code == 3);
  CHECK(parse.err.rfind("error[parse]:", 0) == 0);

  REQUIRE(cli(dir, "extract --corpus c/corpus.tsv --window 5 --subsample 200 --out d.wopd").code == 0);
  const auto div = cli(dir, "train --train d.wopd --blocks 4x3,4x3 --fc-hidden 8 --epochs 3 --lr 1e30 --out m.wopm");
  CHECK(div.code == 4);
  CHECK(div.err.rfind("error[divergence]:", 0) == 0);
}
