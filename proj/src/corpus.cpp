#include "woplearn/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "woplearn/errors.hpp"
#include "woplearn/pbm.hpp"

namespace wopl {

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "validation" || name == "val") return Split::Validation;
  if (name == "test") return Split::Test;
  throw InvalidArgument("unknown split '" + name + "' (expected train, validation or test)");
}

void SplitSpec::validate(bool require_selection) const {
  std::set<std::string> seen;
  for (const auto* list : {&train_ids, &validation_ids, &test_ids})
    for (const auto& id : *list)
      if (!seen.insert(id).second) throw DataError("image id '" + id + "' appears in more than one split");
  if (require_selection && (train_ids.empty() || validation_ids.empty()))
    throw DataError("model selection needs non-empty train and validation splits");
}

const std::vector<std::string>& SplitSpec::ids(Split s) const {
  switch (s) {
    case Split::Train: return train_ids;
    case Split::Validation: return validation_ids;
    case Split::Test: return test_ids;
  }
  return test_ids;
}

const ImagePair& Corpus::find(const std::string& id) const {
  const auto it = std::find_if(pairs.begin(), pairs.end(), [&](const ImagePair& p) { return p.id == id; });
  if (it == pairs.end()) throw DataError("image id '" + id + "' not in corpus");
  return *it;
}

std::vector<ImagePair> Corpus::subset(Split s) const {
  std::vector<ImagePair> out;
  for (const auto& id : split.ids(s)) out.push_back(find(id));
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir,
                 const std::filesystem::path& manifest_name) {
  corpus.split.validate();
  std::filesystem::create_directories(dir);
  std::ostringstream manifest;
  manifest << "id\tinput\toutput\tsplit\n";
  for (const Split s : {Split::Train, Split::Validation, Split::Test}) {
    for (const auto& id : corpus.split.ids(s)) {
      const auto& pair = corpus.find(id);
      const std::string in_name = id + "_in.pbm";
      const std::string out_name = id + "_gt.pbm";
      write_image(pair.input, dir / in_name);
      write_image(pair.output, dir / out_name);
      manifest << id << '\t' << in_name << '\t' << out_name << '\t' << split_name(s) << '\n';
    }
  }
  std::ofstream out(dir / manifest_name, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / manifest_name).string());
  out << manifest.str();
}

Corpus load_corpus(const std::filesystem::path& manifest) {
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw IoError("cannot open corpus manifest " + manifest.string());
  const auto base = manifest.parent_path();
  Corpus corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("id\t", 0) == 0) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, '\t');) cols.push_back(col);
    if (cols.size() != 4)
      throw DataError(manifest.string() + ":" + std::to_string(line_no) + ": expected 4 tab-separated columns");
    ImagePair pair{cols[0], read_image(base / cols[1]), read_image(base / cols[2])};
    if (pair.input.width() != pair.output.width() || pair.input.height() != pair.output.height())
      throw DataError(manifest.string() + ":" + std::to_string(line_no) + ": input and output sizes differ");
    switch (parse_split(cols[3])) {
      case Split::Train: corpus.split.train_ids.push_back(cols[0]); break;
      case Split::Validation: corpus.split.validation_ids.push_back(cols[0]); break;
      case Split::Test: corpus.split.test_ids.push_back(cols[0]); break;
    }
    corpus.pairs.push_back(std::move(pair));
  }
  corpus.split.validate();
  return corpus;
}

}  // namespace wopl
