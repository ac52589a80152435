#include "lrmt/corpus.hpp"

#include <fstream>
#include <sstream>

#include "lrmt/error.hpp"
#include "lrmt/rng.hpp"
#include "lrmt/utf8.hpp"

namespace lrmt {

std::string_view lang_code(Lang lang) {
  switch (lang) {
    case Lang::en: return "en";
    case Lang::as: return "as";
    case Lang::kha: return "kha";
    case Lang::lus: return "lus";
    case Lang::mni: return "mni";
  }
  return "?";
}

Lang parse_lang(std::string_view code) {
  for (Lang l : kAllLangs) {
    if (lang_code(l) == code) return l;
  }
  throw Error(ErrorCode::UnknownLanguage, "unknown language code '" + std::string(code) + "'");
}

std::string_view script_name(Script script) {
  switch (script) {
    case Script::Bengali: return "Bengali";
    case Script::Latin: return "Latin";
    case Script::Other: return "Other";
  }
  return "?";
}

Script script_of(Lang lang) {
  switch (lang) {
    case Lang::as:
    case Lang::mni:
      return Script::Bengali;
    case Lang::en:
    case Lang::kha:
    case Lang::lus:
      return Script::Latin;
  }
  return Script::Other;
}

namespace {

bool in_bengali_block(char32_t cp) { return cp >= 0x0980 && cp <= 0x09FF; }

// Basic Latin, Latin-1 Supplement, Latin Extended-A/B and Latin Extended
// Additional. Mizo and Khasi orthographies use letters such as ï and ṭ.
bool in_latin_blocks(char32_t cp) {
  return cp < 0x0250 || (cp >= 0x1E00 && cp <= 0x1EFF);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Script detect_script(std::string_view text) {
  if (text.empty()) throw Error(ErrorCode::EmptyText, "detect_script on empty text");
  std::size_t bengali = 0;
  std::size_t latin = 0;
  std::size_t alpha = 0;
  for (char32_t cp : utf8::decode(text)) {
    if (!utf8::is_alpha(cp)) continue;
    ++alpha;
    if (in_bengali_block(cp)) {
      ++bengali;
    } else if (in_latin_blocks(cp)) {
      ++latin;
    }
  }
  if (2 * bengali > alpha) return Script::Bengali;
  if (2 * latin > alpha) return Script::Latin;
  return Script::Other;
}

SentencePair make_pair(Lang src, Lang tgt, std::string src_text, std::string tgt_text) {
  if (src == tgt) {
    throw Error(ErrorCode::LanguageMismatch,
                "source and target language are both " + std::string(lang_code(src)));
  }
  for (const std::string* t : {&src_text, &tgt_text}) {
    if (t->find('\n') != std::string::npos) {
      throw Error(ErrorCode::EmptyLine, "sentence contains a newline");
    }
    if (utf8::trim(*t).empty()) throw Error(ErrorCode::EmptyLine, "blank sentence");
  }
  return {src, tgt, std::move(src_text), std::move(tgt_text)};
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "valid" || name == "dev") return Split::valid;
  if (name == "test") return Split::test;
  throw Error(ErrorCode::ConfigError, "unknown split '" + std::string(name) + "'");
}

ParallelCorpus ParallelCorpus::reversed() const {
  ParallelCorpus out{tgt_lang, src_lang, split, {}};
  out.pairs.reserve(pairs.size());
  for (const auto& p : pairs) out.pairs.push_back(p.reversed());
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < data.size()) {
    auto end = data.find('\n', start);
    if (end == std::string::npos) end = data.size();
    std::string line = data.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

ParallelCorpus load_parallel_corpus(const std::filesystem::path& src_path,
                                    const std::filesystem::path& tgt_path, Lang src_lang,
                                    Lang tgt_lang, Split split) {
  if (src_lang == tgt_lang) {
    throw Error(ErrorCode::LanguageMismatch, "corpus source and target language are identical");
  }
  for (const auto* p : {&src_path, &tgt_path}) {
    if (!std::filesystem::exists(*p)) throw Error(ErrorCode::IoError, "missing file " + p->string());
  }
  const auto src = read_lines(src_path);
  const auto tgt = read_lines(tgt_path);
  if (src.size() != tgt.size()) {
    throw Error(ErrorCode::LineCountMismatch, src_path.string() + " has " + std::to_string(src.size()) +
                                                  " lines, " + tgt_path.string() + " has " +
                                                  std::to_string(tgt.size()));
  }
  ParallelCorpus corpus{src_lang, tgt_lang, split, {}};
  corpus.pairs.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    const std::size_t lineno = i + 1;
    for (const auto& [text, path] : {std::pair{&src[i], &src_path}, std::pair{&tgt[i], &tgt_path}}) {
      if (!utf8::is_valid(*text)) {
        throw Error(ErrorCode::EncodingError,
                    path->string() + ":" + std::to_string(lineno) + ": invalid UTF-8");
      }
      if (utf8::trim(*text).empty()) {
        throw Error(ErrorCode::EmptyLine, path->string() + ":" + std::to_string(lineno) + ": blank line");
      }
    }
    corpus.pairs.push_back({src_lang, tgt_lang, src[i], tgt[i]});
  }
  return corpus;
}

void save_parallel_corpus(const ParallelCorpus& corpus, const std::filesystem::path& src_path,
                          const std::filesystem::path& tgt_path) {
  std::vector<std::string> src;
  std::vector<std::string> tgt;
  for (const auto& p : corpus.pairs) {
    src.push_back(p.src_text);
    tgt.push_back(p.tgt_text);
  }
  write_lines(src_path, src);
  write_lines(tgt_path, tgt);
}

std::vector<LanguageGroup> parse_grouping(std::string_view text) {
  std::vector<LanguageGroup> groups;
  std::set<Lang> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    const std::string line = utf8::trim(raw);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "grouping line " + std::to_string(lineno) + ": expected 'name: langs'");
    }
    LanguageGroup g;
    g.name = utf8::trim(line.substr(0, colon));
    if (g.name.empty()) throw Error(ErrorCode::ConfigError, "grouping line " + std::to_string(lineno) + ": empty name");
    std::istringstream langs(line.substr(colon + 1));
    std::string code;
    while (std::getline(langs, code, ',')) {
      code = utf8::trim(code);
      if (code.empty()) continue;
      const Lang l = parse_lang(code);
      if (l == Lang::en) {
        throw Error(ErrorCode::ConfigError, "grouping line " + std::to_string(lineno) + ": en is not an Indic language");
      }
      if (!seen.insert(l).second) {
        throw Error(ErrorCode::ConfigError, "language " + code + " appears in more than one group");
      }
      g.members.insert(l);
    }
    if (g.members.empty()) {
      throw Error(ErrorCode::ConfigError, "grouping line " + std::to_string(lineno) + ": group has no members");
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<LanguageGroup> load_grouping(const std::filesystem::path& path) {
  return parse_grouping(read_file(path));
}

std::vector<LanguageGroup> script_groups() {
  return {{"group1", {Lang::as, Lang::mni}}, {"group2", {Lang::kha, Lang::lus}}};
}

const LanguageGroup* group_of(const std::vector<LanguageGroup>& groups, Lang lang) {
  for (const auto& g : groups) {
    if (g.contains(lang)) return &g;
  }
  return nullptr;
}

std::string lang_tag(Lang lang) { return "<2" + std::string(lang_code(lang)) + ">"; }

std::vector<std::string> all_lang_tags() {
  std::vector<std::string> out;
  for (Lang l : kAllLangs) out.push_back(lang_tag(l));
  return out;
}

TaggedExample tag_pair(const SentencePair& pair) { return {{lang_tag(pair.tgt_lang)}, pair}; }

std::vector<TaggedExample> build_mixture(const std::vector<ParallelCorpus>& corpora,
                                         const MixtureRegime& regime, std::uint64_t seed) {
  switch (regime.kind) {
    case RegimeKind::bilingual:
      if (corpora.size() != 1) {
        throw Error(ErrorCode::InvalidConfig, "bilingual regime takes exactly one corpus, got " +
                                                  std::to_string(corpora.size()));
      }
      break;
    case RegimeKind::multilingual:
      break;
    case RegimeKind::grouped:
      if (!regime.group) throw Error(ErrorCode::InvalidConfig, "grouped regime without a group");
      for (const auto& c : corpora) {
        for (Lang l : {c.src_lang, c.tgt_lang}) {
          if (l != Lang::en && !regime.group->contains(l)) {
            throw Error(ErrorCode::GroupMembershipViolation,
                        std::string(lang_code(l)) + " is not in group " + regime.group->name);
          }
        }
      }
      break;
  }

  std::vector<TaggedExample> out;
  std::size_t total = 0;
  for (const auto& c : corpora) total += c.size();
  out.reserve(total);
  for (const auto& c : corpora) {
    for (const auto& p : c.pairs) out.push_back(tag_pair(p));
  }
  if (out.empty()) throw Error(ErrorCode::EmptyMixture, "mixture has no examples");
  Rng rng(seed);
  rng.shuffle(out);
  return out;
}

}  // namespace lrmt
