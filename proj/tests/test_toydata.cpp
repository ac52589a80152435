#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "lrmt/corpus.hpp"
#include "lrmt/error.hpp"
#include "lrmt/toydata.hpp"
#include "oracles.hpp"

using namespace lrmt;
namespace fs = std::filesystem;

TEST(Toy, WorldIsDeterministicAndOneToOne) {
  const ToyWorld a = make_toy_world(3), b = make_toy_world(3);
  EXPECT_EQ(a.lexicon, b.lexicon);
  EXPECT_EQ(a.num_words(), 104u);
  for (Lang l : kIndicLangs) {
    std::set<std::string> forms;
    for (const auto& [en, form] : a.lexicon.at(l)) forms.insert(form);
    EXPECT_EQ(forms.size(), a.lexicon.at(l).size()) << lang_code(l);
  }
}

TEST(Toy, ScriptsMatchLanguages) {
  const ToyWorld w = make_toy_world(3);
  for (Lang l : kIndicLangs) {
    const auto c = toy_corpus(w, l, Split::train, 20, 9);
    for (const auto& p : c.pairs) {
      EXPECT_EQ(detect_script(p.tgt_text), script_of(l));
      EXPECT_EQ(detect_script(p.src_text), Script::Latin);
    }
  }
}

TEST(Toy, TranslationIsWordSubstitutionPlusReordering) {
  const ToyWorld w = make_toy_world(3);
  for (int i = 0; i < 50; ++i) {
    const std::string en = toy_english_sentence(w, 9, static_cast<std::uint64_t>(i));
    for (Lang l : kIndicLangs) {
      auto src = oracle::split_ws(en), tgt = oracle::split_ws(toy_translate(w, l, en));
      ASSERT_EQ(src.size(), tgt.size());
      std::vector<std::string> mapped;
      for (const auto& word : src) mapped.push_back(w.lexicon.at(l).at(word));
      std::sort(mapped.begin(), mapped.end());
      std::sort(tgt.begin(), tgt.end());
      EXPECT_EQ(mapped, tgt);
    }
  }
  EXPECT_THROW(toy_translate(w, Lang::kha, "not a toy sentence"), Error);
}

TEST(Toy, SplitsAreDisjointStreams) {
  const ToyWorld w = make_toy_world(3);
  const auto tr = toy_corpus(w, Lang::kha, Split::train, 5, 9);
  const auto dv = toy_corpus(w, Lang::kha, Split::valid, 5, 9);
  EXPECT_NE(tr.pairs[0].src_text + tr.pairs[1].src_text, dv.pairs[0].src_text + dv.pairs[1].src_text);
}

TEST(Toy, DictionaryCoversLexicon) {
  const ToyWorld w = make_toy_world(3);
  const auto d = toy_dictionary(w, Lang::mni);
  EXPECT_EQ(d.size(), 104u);
  EXPECT_EQ(d.tgt_lang, Lang::mni);
}

TEST(Toy, DatasetFiles) {
  const fs::path dir = fs::temp_directory_path() / "lrmt_toy_files";
  fs::remove_all(dir);
  write_toy_dataset(dir, {30, 5, 5, 4});
  EXPECT_EQ(toy_file_name(Split::valid, Lang::kha, Lang::en), "valid.en-kha.en");
  for (Lang l : kIndicLangs) {
    for (Split s : {Split::train, Split::valid, Split::test}) {
      EXPECT_TRUE(fs::exists(dir / toy_file_name(s, l, Lang::en)));
      EXPECT_TRUE(fs::exists(dir / toy_file_name(s, l, l)));
    }
    EXPECT_TRUE(fs::exists(dir / ("dict.en-" + std::string(lang_code(l)) + ".txt")));
  }
  const auto groups = load_grouping(dir / "grouping.txt");
  EXPECT_EQ(groups.size(), 2u);
  const auto c = load_parallel_corpus(dir / "train.en-as.en", dir / "train.en-as.as", Lang::en, Lang::as, Split::train);
  EXPECT_EQ(c.size(), 30u);
}
