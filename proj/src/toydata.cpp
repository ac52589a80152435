#include "lrmt/toydata.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>

#include "lrmt/error.hpp"
#include "lrmt/rng.hpp"

namespace lrmt {

namespace {

const std::map<ToyWorld::Category, std::vector<std::string>>& english_words() {
  static const std::map<ToyWorld::Category, std::vector<std::string>> words = {
      {ToyWorld::det, {"the", "a", "this", "that", "every", "my"}},
      {ToyWorld::adj,
       {"big", "small", "red", "old", "new", "green", "happy", "tall", "young", "dark", "bright", "cold", "warm",
        "quiet", "loud", "fast", "slow", "wise", "kind", "brave"}},
      {ToyWorld::noun,
       {"dog",    "cat",   "house", "tree",  "river",  "mountain", "bird",   "child", "teacher", "farmer",
        "market", "road",  "boat",  "field", "village", "book",    "letter", "horse", "fish",    "garden",
        "window", "door",  "song",  "friend", "mother", "father",  "sister", "king",  "stone",   "flower",
        "school", "forest", "cloud", "table", "bridge", "doctor",  "lamp",   "basket", "rice",   "goat"}},
      {ToyWorld::verb,
       {"sees", "likes", "finds", "helps", "carries", "watches", "follows", "calls", "paints", "builds", "cleans",
        "opens", "visits", "feeds", "reads", "sells", "buys", "draws", "hears", "knows", "meets", "greets",
        "loves", "holds"}},
      {ToyWorld::prep, {"near", "under", "behind", "with", "from", "beside"}},
      {ToyWorld::adv, {"today", "often", "slowly", "again", "quickly", "early", "later", "quietly"}},
  };
  return words;
}

// Vowel signs that are stable under NFC.
const std::vector<std::string> kBengaliConsonants = {"ক", "খ", "গ", "ঘ", "চ", "ছ", "জ", "ট", "ড", "ত",
                                                     "থ", "দ", "ধ", "ন", "প", "ফ", "ব", "ভ", "ম", "র",
                                                     "ল", "শ", "স", "হ"};
const std::vector<std::string> kBengaliVowelSigns = {"", "া", "ি", "ী", "ু", "ূ", "ে"};
const std::vector<std::string> kLatinOnsets = {"k", "b", "d", "j", "l", "m", "n", "p", "r", "s",
                                               "t", "w", "h", "ng", "sh", "th", "ch", "z"};
const std::vector<std::string> kLatinVowels = {"a", "e", "i", "o", "u", "aw", "ia"};

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[static_cast<std::size_t>(rng.below(v.size()))];
}

int syllables_for(ToyWorld::Category c, Rng& rng) {
  switch (c) {
    case ToyWorld::det:
    case ToyWorld::prep: return 1 + static_cast<int>(rng.below(2));
    default: return 2 + static_cast<int>(rng.below(2));
  }
}

std::string make_form(Script script, Lang lang, int syllables, Rng& rng) {
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    if (script == Script::Bengali) {
      w += pick(kBengaliConsonants, rng);
      w += pick(kBengaliVowelSigns, rng);
    } else {
      w += pick(kLatinOnsets, rng);
      // Khasi-flavoured diaeresis now and then.
      w += (lang == Lang::kha && rng.below(8) == 0) ? std::string("ï") : pick(kLatinVowels, rng);
    }
  }
  return w;
}

struct Np {
  std::string det, adj, noun;
};

struct Clause {
  Np subj;
  std::string verb;
  Np obj;
  bool has_pp = false;
  std::string prep;
  Np pp;
  std::string adv;
};

std::vector<std::string> words_of(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t j = s.find(' ', i);
    const std::size_t end = j == std::string::npos ? s.size() : j;
    if (end > i) out.push_back(s.substr(i, end - i));
    i = end + 1;
  }
  return out;
}

bool in_category(ToyWorld::Category c, const std::string& w) {
  const auto& v = english_words().at(c);
  return std::find(v.begin(), v.end(), w) != v.end();
}

Clause parse_clause(const std::string& english) {
  const auto w = words_of(english);
  std::size_t i = 0;
  auto fail = [&]() -> void { throw Error(ErrorCode::DataError, "not a toy sentence: '" + english + "'"); };
  auto np = [&]() {
    Np n;
    if (i >= w.size() || !in_category(ToyWorld::det, w[i])) fail();
    n.det = w[i++];
    if (i < w.size() && in_category(ToyWorld::adj, w[i])) n.adj = w[i++];
    if (i >= w.size() || !in_category(ToyWorld::noun, w[i])) fail();
    n.noun = w[i++];
    return n;
  };
  Clause c;
  c.subj = np();
  if (i >= w.size() || !in_category(ToyWorld::verb, w[i])) fail();
  c.verb = w[i++];
  c.obj = np();
  if (i < w.size() && in_category(ToyWorld::prep, w[i])) {
    c.has_pp = true;
    c.prep = w[i++];
    c.pp = np();
  }
  if (i < w.size() && in_category(ToyWorld::adv, w[i])) c.adv = w[i++];
  if (i != w.size()) fail();
  return c;
}

void append(std::vector<std::string>& out, const std::string& w) {
  if (!w.empty()) out.push_back(w);
}

std::string join(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) {
    if (!s.empty()) s += ' ';
    s += w;
  }
  return s;
}

}  // namespace

std::size_t ToyWorld::num_words() const {
  std::size_t n = 0;
  for (const auto& [c, v] : english) n += v.size();
  return n;
}

ToyWorld make_toy_world(std::uint64_t seed) {
  ToyWorld world;
  world.english = english_words();
  // as and kha are drawn first; mni and lus borrow a share of their forms.
  const std::array<std::pair<Lang, Lang>, 4> order = {
      {{Lang::as, Lang::as}, {Lang::kha, Lang::kha}, {Lang::mni, Lang::as}, {Lang::lus, Lang::kha}}};
  for (const auto& [lang, donor] : order) {
    Rng rng(counter_hash(seed, static_cast<std::uint64_t>(lang)));
    const Script script = script_of(lang);
    auto& lex = world.lexicon[lang];
    std::set<std::string> used;
    for (const auto& [cat, words] : world.english) {
      for (const auto& en : words) {
        std::string form;
        if (donor != lang && rng.below(10) < 4) {
          const std::string& borrowed = world.lexicon.at(donor).at(en);
          if (!used.count(borrowed)) form = borrowed;
        }
        while (form.empty() || used.count(form)) form = make_form(script, lang, syllables_for(cat, rng), rng);
        used.insert(form);
        lex[en] = form;
      }
    }
  }
  return world;
}

std::string toy_english_sentence(const ToyWorld& world, std::uint64_t seed, std::uint64_t index) {
  Rng rng(counter_hash(seed, index, 0x5e));
  const auto& e = world.english;
  auto np = [&]() {
    std::vector<std::string> out{pick(e.at(ToyWorld::det), rng)};
    if (rng.below(2) == 0) out.push_back(pick(e.at(ToyWorld::adj), rng));
    out.push_back(pick(e.at(ToyWorld::noun), rng));
    return out;
  };
  std::vector<std::string> words = np();
  words.push_back(pick(e.at(ToyWorld::verb), rng));
  for (auto& w : np()) words.push_back(std::move(w));
  if (rng.below(10) < 3) {
    words.push_back(pick(e.at(ToyWorld::prep), rng));
    for (auto& w : np()) words.push_back(std::move(w));
  }
  if (rng.below(10) < 3) words.push_back(pick(e.at(ToyWorld::adv), rng));
  return join(words);
}

std::string toy_translate(const ToyWorld& world, Lang lang, const std::string& english) {
  auto lex_it = world.lexicon.find(lang);
  if (lex_it == world.lexicon.end()) {
    throw Error(ErrorCode::LanguageMismatch, "no toy lexicon for " + std::string(lang_code(lang)));
  }
  const auto& lex = lex_it->second;
  auto tr = [&](const std::string& w) { return w.empty() ? w : lex.at(w); };
  const Clause c = parse_clause(english);

  auto np = [&](const Np& n) {
    std::vector<std::string> out;
    switch (lang) {
      case Lang::as:
        append(out, tr(n.det));
        append(out, tr(n.adj));
        append(out, tr(n.noun));
        break;
      case Lang::mni:
        append(out, tr(n.adj));
        append(out, tr(n.noun));
        append(out, tr(n.det));
        break;
      default:
        append(out, tr(n.det));
        append(out, tr(n.noun));
        append(out, tr(n.adj));
        break;
    }
    return out;
  };
  auto cat = [](std::vector<std::string>& out, const std::vector<std::string>& more) {
    out.insert(out.end(), more.begin(), more.end());
  };

  std::vector<std::string> out = np(c.subj);
  std::vector<std::string> pp;
  if (c.has_pp) {
    if (script_of(lang) == Script::Bengali) {
      pp = np(c.pp);
      pp.push_back(tr(c.prep));
    } else {
      pp.push_back(tr(c.prep));
      cat(pp, np(c.pp));
    }
  }
  switch (lang) {
    case Lang::as:
      cat(out, np(c.obj));
      cat(out, pp);
      append(out, tr(c.adv));
      out.push_back(tr(c.verb));
      break;
    case Lang::mni:
      cat(out, np(c.obj));
      cat(out, pp);
      out.push_back(tr(c.verb));
      append(out, tr(c.adv));
      break;
    case Lang::kha:
      out.push_back(tr(c.verb));
      cat(out, np(c.obj));
      cat(out, pp);
      append(out, tr(c.adv));
      break;
    default:
      cat(out, np(c.obj));
      out.push_back(tr(c.verb));
      cat(out, pp);
      append(out, tr(c.adv));
      break;
  }
  return join(out);
}

ParallelCorpus toy_corpus(const ToyWorld& world, Lang lang, Split split, std::size_t n, std::uint64_t seed) {
  ParallelCorpus corpus;
  corpus.src_lang = Lang::en;
  corpus.tgt_lang = lang;
  corpus.split = split;
  const std::uint64_t stream = counter_hash(seed, static_cast<std::uint64_t>(lang), static_cast<std::uint64_t>(split));
  for (std::size_t i = 0; i < n; ++i) {
    std::string en = toy_english_sentence(world, stream, i);
    std::string xx = toy_translate(world, lang, en);
    corpus.pairs.push_back(make_pair(Lang::en, lang, std::move(en), std::move(xx)));
  }
  return corpus;
}

BilingualDictionary toy_dictionary(const ToyWorld& world, Lang lang) {
  BilingualDictionary dict;
  dict.src_lang = Lang::en;
  dict.tgt_lang = lang;
  for (const auto& [en, form] : world.lexicon.at(lang)) dict.entries[en] = {form};
  return dict;
}

std::string toy_file_name(Split split, Lang indic, Lang side) {
  return std::string(split_name(split)) + ".en-" + std::string(lang_code(indic)) + "." +
         std::string(lang_code(side));
}

void write_toy_dataset(const std::filesystem::path& dir, const ToyDatasetOptions& options) {
  std::filesystem::create_directories(dir);
  const ToyWorld world = make_toy_world(options.seed);
  const std::array<std::pair<Split, std::size_t>, 3> splits = {
      {{Split::train, options.train_pairs}, {Split::valid, options.dev_pairs}, {Split::test, options.test_pairs}}};
  for (Lang lang : kIndicLangs) {
    for (const auto& [split, n] : splits) {
      const auto corpus = toy_corpus(world, lang, split, n, options.seed);
      save_parallel_corpus(corpus, dir / toy_file_name(split, lang, Lang::en), dir / toy_file_name(split, lang, lang));
    }
    std::vector<std::string> lines;
    for (const auto& [en, form] : world.lexicon.at(lang)) lines.push_back(en + " " + form);
    write_lines(dir / ("dict.en-" + std::string(lang_code(lang)) + ".txt"), lines);
  }
  write_lines(dir / "grouping.txt", {"# script-based language groups", "bengali: as,mni", "latin: kha,lus"});
}

}  // namespace lrmt
