#include "lrmt/augment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "lrmt/error.hpp"
#include "lrmt/rng.hpp"
#include "lrmt/utf8.hpp"

namespace lrmt {

const std::vector<std::string>* BilingualDictionary::lookup(std::string_view word) const {
  auto it = lowercase_keys ? entries.find(utf8::lowercase(word)) : entries.find(std::string(word));
  return it == entries.end() ? nullptr : &it->second;
}

BilingualDictionary BilingualDictionary::inverted() const {
  BilingualDictionary inv;
  inv.src_lang = tgt_lang;
  inv.tgt_lang = src_lang;
  for (const auto& [src, alts] : entries) {
    for (const auto& t : alts) {
      auto& v = inv.entries[t];
      if (std::find(v.begin(), v.end(), src) == v.end()) v.push_back(src);
    }
  }
  return inv;
}

BilingualDictionary parse_dictionary(std::string_view text, Lang src_lang, Lang tgt_lang,
                                     DictionaryOptions options) {
  BilingualDictionary dict;
  dict.src_lang = src_lang;
  dict.tgt_lang = tgt_lang;
  dict.lowercase_keys = options.lowercase_latin && script_of(src_lang) == Script::Latin;

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!utf8::is_valid(line)) {
      throw Error(ErrorCode::EncodingError, "dictionary line " + std::to_string(lineno) + ": invalid UTF-8");
    }
    const auto fields = utf8::split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() == 1) {
      throw Error(ErrorCode::MalformedLine,
                  "dictionary line " + std::to_string(lineno) + ": expected 'src tgt', got '" + line + "'");
    }
    if (fields.size() > 2) {
      ++dict.dropped_multiword;
      continue;
    }
    std::string key = dict.lowercase_keys ? utf8::lowercase(fields[0]) : fields[0];
    auto& alts = dict.entries[key];
    if (std::find(alts.begin(), alts.end(), fields[1]) == alts.end()) alts.push_back(fields[1]);
  }
  if (dict.entries.empty()) throw Error(ErrorCode::EmptyDictionary, "dictionary has no usable entries");
  return dict;
}

BilingualDictionary load_dictionary(const std::filesystem::path& path, Lang src_lang, Lang tgt_lang,
                                    DictionaryOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dictionary(ss.str(), src_lang, tgt_lang, options);
}

void RasConfig::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "substitution probability must lie in [0, 1]");
  }
}

SentencePair ras_substitute(const SentencePair& pair, const BilingualDictionary& dict,
                            const RasConfig& cfg, std::uint64_t pair_index, RasStats* stats) {
  cfg.validate();
  if (dict.src_lang != pair.src_lang) {
    throw Error(ErrorCode::LanguageMismatch, "dictionary source " + std::string(lang_code(dict.src_lang)) +
                                                 " does not match pair source " +
                                                 std::string(lang_code(pair.src_lang)));
  }
  if (cfg.p == 0.0) {
    if (stats != nullptr) {
      for (const auto& w : utf8::split_whitespace(pair.src_text)) stats->covered += dict.lookup(w) ? 1 : 0;
    }
    return pair;
  }

  // Rewrite words in place so the original whitespace survives.
  const auto cps = utf8::decode(pair.src_text);
  std::string out;
  out.reserve(pair.src_text.size());
  std::uint64_t word_index = 0;
  std::size_t i = 0;
  while (i < cps.size()) {
    if (utf8::is_space(cps[i])) {
      out += utf8::encode(cps[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < cps.size() && !utf8::is_space(cps[j])) ++j;
    const std::string word = utf8::encode(std::u32string_view(cps).substr(i, j - i));
    const auto* alts = dict.lookup(word);
    if (alts != nullptr) {
      if (stats != nullptr) ++stats->covered;
      const double u = to_unit(counter_hash(cfg.seed, pair_index, word_index, 0));
      if (u < cfg.p) {
        const double v = to_unit(counter_hash(cfg.seed, pair_index, word_index, 1));
        const auto pick = std::min(alts->size() - 1, static_cast<std::size_t>(v * static_cast<double>(alts->size())));
        out += (*alts)[pick];
        if (stats != nullptr) ++stats->replaced;
      } else {
        out += word;
      }
    } else {
      out += word;
    }
    ++word_index;
    i = j;
  }
  SentencePair result = pair;
  result.src_text = std::move(out);
  return result;
}

std::vector<SentencePair> ras_augment(const std::vector<SentencePair>& pairs, const BilingualDictionary& dict,
                                      const RasConfig& cfg, std::uint64_t first_index, RasStats* stats) {
  std::vector<SentencePair> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out.push_back(ras_substitute(pairs[i], dict, cfg, first_index + i, stats));
  }
  return out;
}

}  // namespace lrmt
