#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lrmt/corpus.hpp"

namespace lrmt {

/// Word-level bilingual lexicon in MUSE ground-truth format.
struct BilingualDictionary {
  Lang src_lang = Lang::en;
  Lang tgt_lang = Lang::en;
  std::map<std::string, std::vector<std::string>> entries;
  bool lowercase_keys = false;
  std::size_t dropped_multiword = 0;

  /// nullptr when the word has no entry.
  const std::vector<std::string>* lookup(std::string_view word) const;
  std::size_t size() const { return entries.size(); }
  /// Target-to-source view of the same lexicon.
  BilingualDictionary inverted() const;
};

struct DictionaryOptions {
  // Fold keys (and lookups) to lowercase; only honoured for Latin-script sources.
  bool lowercase_latin = false;
};

/// Lines are `src<ws>tgt`. Alternatives for one source word are kept in file
/// order; lines whose target has internal whitespace are dropped and
/// counted in `dropped_multiword`. Blank lines are ignored.
BilingualDictionary parse_dictionary(std::string_view text, Lang src_lang, Lang tgt_lang,
                                     DictionaryOptions options = {});
BilingualDictionary load_dictionary(const std::filesystem::path& path, Lang src_lang, Lang tgt_lang,
                                    DictionaryOptions options = {});

struct RasConfig {
  double p = 0.3;
  std::uint64_t seed = 0;
  // Also augment the reverse (xx->en) direction during pre-training.
  bool augment_reverse = false;

  void validate() const;
};

struct RasStats {
  std::size_t covered = 0;   // source words with a dictionary entry
  std::size_t replaced = 0;
};

/// Random aligned substitution on the source side. Each covered word is
/// replaced with probability p by a uniformly chosen alternative; the
/// decision for word w of pair i depends only on (seed, i, w).
SentencePair ras_substitute(const SentencePair& pair, const BilingualDictionary& dict,
                            const RasConfig& cfg, std::uint64_t pair_index, RasStats* stats = nullptr);

std::vector<SentencePair> ras_augment(const std::vector<SentencePair>& pairs, const BilingualDictionary& dict,
                                      const RasConfig& cfg, std::uint64_t first_index = 0,
                                      RasStats* stats = nullptr);

}  // namespace lrmt
