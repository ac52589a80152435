#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lrmt/augment.hpp"
#include "lrmt/corpus.hpp"

namespace lrmt {

/// Synthetic translation world used by the tests and the bundled configs.
///
/// English sentences follow `NP verb NP [prep NP] [adverb]` with
/// `NP = det [adj] noun`. Each Indic language has a one-to-one word lexicon
/// and its own constituent order, so translation is word substitution plus
/// a deterministic reordering. Bengali-script forms are used for as/mni and
/// Latin forms for kha/lus; languages sharing a script share part of their
/// lexicon.
struct ToyWorld {
  enum Category { det, adj, noun, verb, prep, adv };

  std::map<Category, std::vector<std::string>> english;
  // lang -> English word -> word form
  std::map<Lang, std::map<std::string, std::string>> lexicon;

  std::size_t num_words() const;
};

ToyWorld make_toy_world(std::uint64_t seed);

/// One random English sentence.
std::string toy_english_sentence(const ToyWorld& world, std::uint64_t seed, std::uint64_t index);
/// Rule-based translation of a toy English sentence.
std::string toy_translate(const ToyWorld& world, Lang lang, const std::string& english);

/// en -> lang pairs; index streams are disjoint per split.
ParallelCorpus toy_corpus(const ToyWorld& world, Lang lang, Split split, std::size_t n, std::uint64_t seed);
/// en -> lang lexicon as a dictionary.
BilingualDictionary toy_dictionary(const ToyWorld& world, Lang lang);

struct ToyDatasetOptions {
  std::size_t train_pairs = 500;
  std::size_t dev_pairs = 50;
  std::size_t test_pairs = 50;
  std::uint64_t seed = 20240917;
};

/// File name of one side of a corpus: `<split>.en-<xx>.<lang>`.
std::string toy_file_name(Split split, Lang indic, Lang side);

/// Writes every split for all four languages, `dict.en-<xx>.txt` and
/// `grouping.txt` under `dir`.
void write_toy_dataset(const std::filesystem::path& dir, const ToyDatasetOptions& options = {});

}  // namespace lrmt
