#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace lrmt {

enum class Lang { en, as, kha, lus, mni };

inline constexpr std::array<Lang, 5> kAllLangs = {Lang::en, Lang::as, Lang::kha, Lang::lus, Lang::mni};
// Column order of the report tables.
inline constexpr std::array<Lang, 4> kIndicLangs = {Lang::as, Lang::kha, Lang::lus, Lang::mni};

std::string_view lang_code(Lang lang);
/// Throws Error(UnknownLanguage) for anything outside the closed set.
Lang parse_lang(std::string_view code);

enum class Script { Bengali, Latin, Other };

std::string_view script_name(Script script);
/// Script of a language's written form: as, mni -> Bengali; en, kha, lus -> Latin.
Script script_of(Lang lang);

/// Majority vote over alphabetic code points: Bengali block (U+0980-U+09FF)
/// against Latin letters. Strict majority required, otherwise Other.
/// Throws Error(EmptyText) on empty input.
Script detect_script(std::string_view text);

struct SentencePair {
  Lang src_lang = Lang::en;
  Lang tgt_lang = Lang::en;
  std::string src_text;
  std::string tgt_text;

  SentencePair reversed() const { return {tgt_lang, src_lang, tgt_text, src_text}; }
  bool operator==(const SentencePair&) const = default;
};

/// Builds a pair, enforcing src != tgt, non-blank texts and no newlines.
SentencePair make_pair(Lang src, Lang tgt, std::string src_text, std::string tgt_text);

enum class Split { train, valid, test };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

struct ParallelCorpus {
  Lang src_lang = Lang::en;
  Lang tgt_lang = Lang::en;
  Split split = Split::train;
  std::vector<SentencePair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  /// The non-English side; for Indic-Indic corpora, the source language.
  Lang indic_lang() const { return src_lang == Lang::en ? tgt_lang : src_lang; }
  ParallelCorpus reversed() const;
};

/// Reads two line-parallel UTF-8 files. A single trailing newline at end of
/// file is not a sentence; a trailing '\r' on each line is dropped.
ParallelCorpus load_parallel_corpus(const std::filesystem::path& src_path,
                                    const std::filesystem::path& tgt_path, Lang src_lang,
                                    Lang tgt_lang, Split split);

/// Writes one sentence per line, each terminated by '\n'.
void save_parallel_corpus(const ParallelCorpus& corpus, const std::filesystem::path& src_path,
                          const std::filesystem::path& tgt_path);

/// Reads a UTF-8 text file as lines (same newline rules as the corpus loader).
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

struct LanguageGroup {
  std::string name;
  std::set<Lang> members;

  bool contains(Lang lang) const { return members.count(lang) != 0; }
};

/// Parses `group_name: lang1,lang2` lines ('#' starts a comment). Groups must
/// be disjoint and contain only Indic languages.
std::vector<LanguageGroup> parse_grouping(std::string_view text);
std::vector<LanguageGroup> load_grouping(const std::filesystem::path& path);
/// Bengali-script {as, mni} and Latin-script {kha, lus}.
std::vector<LanguageGroup> script_groups();
const LanguageGroup* group_of(const std::vector<LanguageGroup>& groups, Lang lang);

/// "<2xx>": the target-language tag token.
std::string lang_tag(Lang lang);
std::vector<std::string> all_lang_tags();

struct TaggedExample {
  std::vector<std::string> prefix;  // exactly one target-language tag
  SentencePair pair;
};

enum class RegimeKind { bilingual, multilingual, grouped };

struct MixtureRegime {
  RegimeKind kind = RegimeKind::bilingual;
  std::optional<LanguageGroup> group;  // required for grouped

  static MixtureRegime bilingual() { return {RegimeKind::bilingual, std::nullopt}; }
  static MixtureRegime multilingual() { return {RegimeKind::multilingual, std::nullopt}; }
  static MixtureRegime grouped(LanguageGroup g) { return {RegimeKind::grouped, std::move(g)}; }
};

/// Concatenates the corpora, prepends the target-language tag to every pair
/// and shuffles with `seed`. Sampling is proportional to corpus size.
std::vector<TaggedExample> build_mixture(const std::vector<ParallelCorpus>& corpora,
                                         const MixtureRegime& regime, std::uint64_t seed);

TaggedExample tag_pair(const SentencePair& pair);

}  // namespace lrmt
