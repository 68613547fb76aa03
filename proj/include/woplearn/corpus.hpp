#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "woplearn/dataset.hpp"

namespace wopl {

enum class Split { Train, Validation, Test };

const char* split_name(Split s);
Split parse_split(const std::string& name);

struct SplitSpec {
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
  std::vector<std::string> test_ids;

  // Pairwise disjoint; with require_selection also non-empty train and validation.
  void validate(bool require_selection = false) const;
  const std::vector<std::string>& ids(Split s) const;
};

// In-memory image store plus its split.
struct Corpus {
  std::vector<ImagePair> pairs;
  SplitSpec split;

  const ImagePair& find(const std::string& id) const;
  std::vector<ImagePair> subset(Split s) const;
};

// Tab-separated manifest with header "id\tinput\toutput\tsplit"; image paths
// are relative to the manifest's directory.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir,
                 const std::filesystem::path& manifest_name = "corpus.tsv");
Corpus load_corpus(const std::filesystem::path& manifest);

}  // namespace wopl
